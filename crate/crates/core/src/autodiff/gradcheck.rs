use super::tape::{OpKind, Tape, Var};
use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// Relative errors are measured as `|a - n| / max(|a|, |n|, REL_FLOOR)`.
///
/// Central differences of a true zero gradient return roundoff of order
/// `1e-16·|f|/ε`, about `1e-10` for the losses checked here; the floor keeps
/// that noise below a `1e-4` tolerance. Against `tol = 1e-4` it acts as an
/// absolute tolerance of `1e-9`.
pub const REL_FLOOR: f64 = 1e-5;

#[derive(Debug, Clone)]
pub struct GradCheckReport {
    pub max_rel_error: f64,
    /// (input index, flat element index) of the worst entry.
    pub worst: (usize, usize),
    pub analytic: f64,
    pub numeric: f64,
    pub checked: usize,
    pub passed: bool,
}

pub fn relative_error(a: f64, n: f64) -> f64 {
    (a - n).abs() / a.abs().max(n.abs()).max(REL_FLOOR)
}

/// Compare the tape gradient of scalar `f(x)` with central differences.
pub fn grad_check<F>(f: F, x: &Tensor, eps: f64, tol: f64) -> Result<GradCheckReport>
where
    F: Fn(&mut Tape, Var) -> Result<Var>,
{
    grad_check_many(|t, xs| f(t, xs[0]), std::slice::from_ref(x), eps, tol)
}

/// Multi-input variant: every input is a differentiable leaf.
pub fn grad_check_many<F>(f: F, inputs: &[Tensor], eps: f64, tol: f64) -> Result<GradCheckReport>
where
    F: Fn(&mut Tape, &[Var]) -> Result<Var>,
{
    grad_check_on(Tape::new, f, inputs, eps, tol)
}

/// As [`grad_check_many`], with a caller-supplied tape constructor. A tape
/// that records active dropout is rejected: the function must be
/// deterministic for differences to mean anything.
pub fn grad_check_on<M, F>(
    make_tape: M,
    f: F,
    inputs: &[Tensor],
    eps: f64,
    tol: f64,
) -> Result<GradCheckReport>
where
    M: Fn() -> Tape,
    F: Fn(&mut Tape, &[Var]) -> Result<Var>,
{
    let eval = |xs: &[Tensor]| -> Result<f64> {
        let mut tape = make_tape();
        let vars: Vec<Var> = xs.iter().map(|x| tape.param(x.clone())).collect();
        let out = f(&mut tape, &vars)?;
        tape.value(out).item()
    };

    let mut tape = make_tape();
    let vars: Vec<Var> = inputs.iter().map(|x| tape.param(x.clone())).collect();
    let out = f(&mut tape, &vars)?;
    if tape.op_kinds().any(|k| k == OpKind::Dropout) {
        return Err(Error::Usage(
            "gradient check requires a deterministic function; active dropout found".into(),
        ));
    }
    let grads = tape.backward(out)?;

    let mut report = GradCheckReport {
        max_rel_error: 0.0,
        worst: (0, 0),
        analytic: 0.0,
        numeric: 0.0,
        checked: 0,
        passed: true,
    };
    let mut probe: Vec<Tensor> = inputs.to_vec();
    for (i, v) in vars.iter().enumerate() {
        let zeros;
        let analytic = match grads.get(*v) {
            Some(g) => g,
            None => {
                zeros = Tensor::zeros(inputs[i].shape())?;
                &zeros
            }
        };
        for j in 0..inputs[i].numel() {
            let orig = inputs[i].data()[j];
            probe[i].data_mut()[j] = orig + eps;
            let fp = eval(&probe)?;
            probe[i].data_mut()[j] = orig - eps;
            let fm = eval(&probe)?;
            probe[i].data_mut()[j] = orig;
            let numeric = (fp - fm) / (2.0 * eps);
            let a = analytic.data()[j];
            let err = relative_error(a, numeric);
            report.checked += 1;
            if err > report.max_rel_error || !err.is_finite() {
                report.max_rel_error = err;
                report.worst = (i, j);
                report.analytic = a;
                report.numeric = numeric;
            }
        }
    }
    report.passed = report.max_rel_error < tol;
    Ok(report)
}

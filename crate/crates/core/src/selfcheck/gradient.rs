use crate::autodiff::{grad_check_many, Tape, Var};
use crate::calendar::{CalendarStamps, Component};
use crate::error::Result;
use crate::models::{make_model, ModelConfig, Variant};
use crate::nn::{
    positional_encoding, Activation, AttentionAxis, Bound, DateTimeEmbedding, DynamicCoder, LinearLayer, ParamStore,
    ResLBlock, SpatialAttention,
};
use crate::rng::Rng;
use crate::tensor::Tensor;

use super::Check;

pub const EPS: f64 = 1e-5;
pub const TOL: f64 = 1e-4;

fn rand(shape: &[usize], lo: f64, hi: f64, seed: u64) -> Tensor {
    Tensor::uniform(shape, lo, hi, &mut Rng::new(seed)).expect("small shape")
}

/// Contract `y` against fixed random weights so every output element gets a
/// distinct upstream gradient.
fn weighted(tape: &mut Tape, y: Var) -> Result<Var> {
    let w = rand(tape.shape(y), -1.0, 1.0, 0xC0FFEE);
    let w = tape.constant(w);
    let p = tape.mul(y, w)?;
    tape.sum(p, None)
}

fn run<F>(name: &str, inputs: &[Tensor], f: F) -> Check
where
    F: Fn(&mut Tape, &[Var]) -> Result<Var>,
{
    match grad_check_many(|t, v| f(t, v).and_then(|y| weighted(t, y)), inputs, EPS, TOL) {
        Ok(r) => Check {
            name: name.to_string(),
            max_error: r.max_rel_error,
            tolerance: TOL,
            passed: r.passed,
            detail: format!(
                "{} entries; worst input {} elem {}: analytic {:.6e} numeric {:.6e}",
                r.checked, r.worst.0, r.worst.1, r.analytic, r.numeric
            ),
        },
        Err(e) => Check::error(name, TOL, e),
    }
}

/// One check per differentiable primitive, named `op:<kind>`.
pub fn op_checks() -> Vec<Check> {
    let a = rand(&[3, 4], -1.5, 1.5, 1);
    let b = rand(&[3, 4], -1.5, 1.5, 2);
    let pos = rand(&[3, 4], 0.5, 2.0, 3);
    let m = rand(&[4, 2], -1.0, 1.0, 4);
    let a3 = rand(&[2, 3, 4], -1.0, 1.0, 5);
    let w3 = rand(&[3, 2, 4], -1.0, 1.0, 6);
    let b2 = rand(&[3, 2], -1.0, 1.0, 7);
    let col = rand(&[3, 1], -1.0, 1.0, 8);
    vec![
        run("op:add", &[a.clone(), b.clone()], |t, v| t.add(v[0], v[1])),
        run("op:sub", &[a.clone(), b.clone()], |t, v| t.sub(v[0], v[1])),
        run("op:mul", &[a.clone(), b.clone()], |t, v| t.mul(v[0], v[1])),
        run("op:div_or_zero", &[a.clone(), pos], |t, v| t.div_or_zero(v[0], v[1])),
        run("op:scale", std::slice::from_ref(&a), |t, v| Ok(t.scale(v[0], -1.7))),
        run("op:tanh", std::slice::from_ref(&a), |t, v| Ok(t.tanh(v[0]))),
        run("op:silu", std::slice::from_ref(&a), |t, v| Ok(t.silu(v[0]))),
        run("op:leaky_relu", std::slice::from_ref(&a), |t, v| Ok(t.leaky_relu(v[0], 0.01))),
        run("op:matmul", &[a.clone(), m], |t, v| t.matmul(v[0], v[1])),
        run("op:transpose", std::slice::from_ref(&a), |t, v| t.transpose(v[0])),
        run("op:reshape", std::slice::from_ref(&a), |t, v| t.reshape(v[0], &[2, 6])),
        run("op:sum", std::slice::from_ref(&a), |t, v| t.sum(v[0], Some(1))),
        run("op:mean", std::slice::from_ref(&a), |t, v| t.mean(v[0], Some(0))),
        run("op:min", std::slice::from_ref(&a), |t, v| t.min(v[0], Some(1))),
        run("op:max", std::slice::from_ref(&a), |t, v| t.max(v[0], Some(0))),
        run("op:softmax", std::slice::from_ref(&a), |t, v| t.softmax(v[0], 1)),
        run("op:gather", std::slice::from_ref(&a), |t, v| t.gather(v[0], &[2, 0, 2, 1])),
        run("op:concat", &[a.clone(), col.clone()], |t, v| t.concat(&[v[0], v[1]])),
        run("op:expand", &[col], |t, v| t.expand(v[0], 1, 5)),
        run("op:narrow", &[a], |t, v| t.narrow(v[0], 1, 1, 2)),
        run("op:channel_linear", &[a3, w3, b2], |t, v| t.channel_linear(v[0], v[1], v[2])),
    ]
}

fn store_inputs(store: &ParamStore, extra: &[Tensor]) -> Vec<Tensor> {
    store.iter().map(|p| p.value.clone()).chain(extra.iter().cloned()).collect()
}

fn split(vars: &[Var], n: usize) -> (Bound, &[Var]) {
    (Bound::from_vars(vars[..n].to_vec()), &vars[n..])
}

/// Hourly stamps for `b` sequences of `len` steps, sequence `i` starting
/// `7·i` hours after a fixed origin.
pub fn hourly_stamps(b: usize, len: usize, start: usize) -> CalendarStamps {
    let comps = vec![Component::Date, Component::Weekday, Component::Hour];
    let mut codes = Vec::with_capacity(b * len * 3);
    for i in 0..b {
        for s in 0..len {
            let h = start + 7 * i + s;
            codes.extend([((h / 24) % 31) as u16, ((h / 24) % 7) as u16, (h % 24) as u16]);
        }
    }
    CalendarStamps::new(comps, 4, b * len, codes).expect("consistent stamps")
}

pub fn layer_checks() -> Vec<Check> {
    let mut out = Vec::new();
    let x = rand(&[2, 3, 4], -1.5, 1.5, 11);

    let mut s = ParamStore::new();
    let lin = LinearLayer::new(&mut s, "l", 4, 3, None, &mut Rng::new(1)).expect("layer");
    let n = s.len();
    out.push(run("layer:linear", &store_inputs(&s, std::slice::from_ref(&x)), |t, v| {
        let (p, x) = split(v, n);
        lin.forward(t, &p, x[0])
    }));

    let mut s = ParamStore::new();
    let lin = LinearLayer::new(&mut s, "l", 4, 3, Some(3), &mut Rng::new(2)).expect("layer");
    let n = s.len();
    out.push(run("layer:linear_per_channel", &store_inputs(&s, std::slice::from_ref(&x)), |t, v| {
        let (p, x) = split(v, n);
        lin.forward(t, &p, x[0])
    }));

    for (act, name) in [(Activation::Silu, "layer:resl_silu"), (Activation::LeakyRelu, "layer:resl_leaky_relu")] {
        let mut s = ParamStore::new();
        let blk = ResLBlock::new(&mut s, "r", 4, 3, act, 0.0, None, &mut Rng::new(3)).expect("layer");
        let n = s.len();
        out.push(run(name, &store_inputs(&s, std::slice::from_ref(&x)), |t, v| {
            let (p, x) = split(v, n);
            blk.forward(t, &p, x[0])
        }));
    }

    // positional encoding added to a [B, C, T] input, then a linear map
    let mut s = ParamStore::new();
    let lin = LinearLayer::new(&mut s, "l", 4, 2, None, &mut Rng::new(4)).expect("layer");
    let n = s.len();
    let pe = positional_encoding(4, 3).transpose().expect("rank 2");
    out.push(run("layer:positional_input", &store_inputs(&s, std::slice::from_ref(&x)), |t, v| {
        let (p, x) = split(v, n);
        let pe = t.constant(pe.clone());
        let shifted = t.add(x[0], pe)?;
        lin.forward(t, &p, shifted)
    }));

    let comps = [Component::Date, Component::Weekday, Component::Hour];
    let stamps = hourly_stamps(2, 4, 5);
    let mut s = ParamStore::new();
    let emb = DateTimeEmbedding::new(&mut s, "dt", &comps, 4, &mut Rng::new(5)).expect("layer");
    let n = s.len();
    out.push(run("layer:datetime_embedding", &store_inputs(&s, &[]), |t, v| {
        let (p, _) = split(v, n);
        emb.forward(t, &p, &stamps, 2, 4)
    }));

    let mut s = ParamStore::new();
    let mut rng = Rng::new(6);
    let emb = DateTimeEmbedding::new(&mut s, "dt", &comps, 4, &mut rng).expect("layer");
    let inner = ResLBlock::new(&mut s, "enc", 4, 3, Activation::Silu, 0.0, None, &mut rng).expect("layer");
    let coder = DynamicCoder::new(&mut s, "enc", inner);
    let n = s.len();
    out.push(run("layer:dynamic_coder", &store_inputs(&s, std::slice::from_ref(&x)), |t, v| {
        let (p, x) = split(v, n);
        coder.forward(t, &p, x[0], &emb, &stamps)
    }));

    for (axis, name) in [(AttentionAxis::Rows, "layer:spatial_attention"), (AttentionAxis::Cols, "layer:spatial_attention_cols")] {
        let att = SpatialAttention::new(axis);
        out.push(run(name, std::slice::from_ref(&x), |t, v| att.forward(t, v[0])));
    }
    out
}

/// End-to-end checks through whole models.
pub fn model_checks() -> Vec<Check> {
    let (t, tau, c, h) = (4, 3, 2, 5);
    let x = rand(&[2, t, c], -1.0, 1.0, 21);
    let (obs, tgt) = (hourly_stamps(2, t, 0), hourly_stamps(2, tau, t));
    let mut out = Vec::new();
    for (variant, name) in [
        (Variant::Stl, "model:stl_tiny"),
        (Variant::Dlinear, "model:dlinear"),
        (Variant::Nlinear, "model:nlinear"),
    ] {
        let mut cfg = ModelConfig::stl(t, tau, c, h).with_variant(variant);
        cfg.ma_kernel = 3;
        let m = match make_model(&cfg, 3) {
            Ok(m) => m,
            Err(e) => {
                out.push(Check::error(name, TOL, e));
                continue;
            }
        };
        let n = m.params().len();
        out.push(run(name, &store_inputs(m.params(), std::slice::from_ref(&x)), |tp, v| {
            let (p, x) = split(v, n);
            m.forward(tp, &p, x[0], &obs, &tgt)
        }));
    }
    out
}

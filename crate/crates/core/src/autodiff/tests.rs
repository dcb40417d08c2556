use super::*;
use crate::error::Error;
use crate::rng::Rng;
use crate::tensor::Tensor;

fn t(shape: &[usize], data: &[f64]) -> Tensor {
    Tensor::new(shape, data.to_vec()).unwrap()
}

fn rand_t(shape: &[usize], rng: &mut Rng) -> Tensor {
    Tensor::uniform(shape, -2.0, 2.0, rng).unwrap()
}

fn eval1(f: impl FnOnce(&mut Tape, Var) -> Var, x: Tensor) -> Tensor {
    let mut tape = Tape::new();
    let v = tape.constant(x);
    let out = f(&mut tape, v);
    tape.value(out).clone()
}

#[test]
fn matmul_examples() {
    let mut tape = Tape::new();
    let a = tape.constant(t(&[2, 2], &[1., 2., 3., 4.]));
    let i = tape.constant(Tensor::identity(2).unwrap());
    let y = tape.matmul(a, i).unwrap();
    assert_eq!(tape.value(y).data(), &[1., 2., 3., 4.]);

    let p = tape.constant(t(&[2, 2], &[0., 1., 1., 0.]));
    let y = tape.matmul(i, p).unwrap();
    assert_eq!(tape.value(y).data(), &[0., 1., 1., 0.]);

    let r = tape.constant(t(&[1, 2], &[1., 2.]));
    let c = tape.constant(t(&[2, 1], &[3., 4.]));
    let y = tape.matmul(r, c).unwrap();
    assert_eq!(tape.value(y).data(), &[11.0]);
}

#[test]
fn matmul_shape_error_names_both_shapes() {
    let mut tape = Tape::new();
    let a = tape.constant(Tensor::zeros(&[2, 3]).unwrap());
    let b = tape.constant(Tensor::zeros(&[2, 3]).unwrap());
    match tape.matmul(a, b) {
        Err(Error::Dimension { lhs, rhs, .. }) => {
            assert_eq!(lhs, vec![2, 3]);
            assert_eq!(rhs, vec![2, 3]);
        }
        other => panic!("expected dimension error, got {other:?}"),
    }
    let msg = tape.matmul(a, b).unwrap_err().to_string();
    assert!(msg.contains("[2, 3]"), "{msg}");
}

#[test]
fn elementwise_examples() {
    let z = eval1(|tp, x| tp.tanh(x), t(&[1], &[0.0]));
    assert_eq!(z.data(), &[0.0]);
    let z = eval1(|tp, x| tp.silu(x), t(&[1], &[0.0]));
    assert_eq!(z.data(), &[0.0]);
    let z = eval1(|tp, x| tp.leaky_relu(x, 0.01), t(&[1], &[-1.0]));
    assert_eq!(z.data(), &[-0.01]);
    // tanh(1) to 30 digits: 0.761594155955764888119458282605
    let z = eval1(|tp, x| tp.tanh(x), t(&[1], &[1.0]));
    assert!((z.data()[0] - 0.761_594_155_955_764_9).abs() < 1e-15);
}

#[test]
fn broadcast_table() {
    let mut tape = Tape::new();
    let x = tape.constant(t(&[2, 3], &[1., 2., 3., 4., 5., 6.]));
    let s = tape.constant(Tensor::scalar(10.0));
    let row = tape.constant(t(&[3], &[1., 0., -1.]));
    let col = tape.constant(t(&[2], &[1., 1.]));
    let y = tape.add(x, s).unwrap();
    assert_eq!(tape.value(y).data(), &[11., 12., 13., 14., 15., 16.]);
    let y = tape.mul(x, row).unwrap();
    assert_eq!(tape.value(y).data(), &[1., 0., -3., 4., 0., -6.]);
    assert!(matches!(tape.add(x, col), Err(Error::Dimension { .. })));
    // left-scalar broadcasting is not part of the table
    assert!(tape.add(s, x).is_err());
}

#[test]
fn dropout_config_errors_and_eval_identity() {
    let mut tape = Tape::new();
    let x = tape.constant(t(&[3], &[1., 2., 3.]));
    assert!(matches!(tape.dropout(x, 1.0), Err(Error::Config(_))));
    assert!(matches!(tape.dropout(x, -0.1), Err(Error::Config(_))));
    let y = tape.dropout(x, 0.5).unwrap();
    assert_eq!(y, x, "eval-mode dropout must be the exact identity");
}

#[test]
fn dropout_preserves_expectation() {
    let n = 200_000;
    let p = 0.3;
    let mut tape = Tape::training(Rng::new(5));
    let x = tape.constant(Tensor::ones(&[n]).unwrap());
    let y = tape.dropout(x, p).unwrap();
    let mean = tape.value(y).data().iter().sum::<f64>() / n as f64;
    // Each output is 0 or 1/(1-p): variance p/(1-p).
    let sigma = (p / (1.0 - p) / n as f64).sqrt();
    assert!((mean - 1.0).abs() < 3.0 * sigma, "mean {mean} sigma {sigma}");
}

#[test]
fn reduce_examples() {
    let v = t(&[3], &[1., 2., 3.]);
    assert_eq!(eval1(|tp, x| tp.mean(x, None).unwrap(), v).data(), &[2.0]);
    let v = t(&[3], &[3., 1., 2.]);
    assert_eq!(eval1(|tp, x| tp.min(x, None).unwrap(), v.clone()).data(), &[1.0]);
    assert_eq!(eval1(|tp, x| tp.max(x, None).unwrap(), v).data(), &[3.0]);
    let m = t(&[2, 2], &[1., 2., 3., 4.]);
    let s = eval1(|tp, x| tp.sum(x, Some(0)).unwrap(), m.clone());
    assert_eq!(s.shape(), &[2]);
    assert_eq!(s.data(), &[4., 6.]);
    let mut tape = Tape::new();
    let x = tape.constant(m);
    assert!(matches!(tape.sum(x, Some(2)), Err(Error::Domain(_))));
}

#[test]
fn min_max_subgradient_goes_to_first_extremum() {
    let mut tape = Tape::new();
    let x = tape.param(t(&[4], &[2., 5., 5., 2.]));
    let mx = tape.max(x, None).unwrap();
    let g = tape.backward(mx).unwrap();
    assert_eq!(g.get(x).unwrap().data(), &[0., 1., 0., 0.]);
    let mut tape = Tape::new();
    let x = tape.param(t(&[4], &[2., 5., 5., 2.]));
    let mn = tape.min(x, None).unwrap();
    let g = tape.backward(mn).unwrap();
    assert_eq!(g.get(x).unwrap().data(), &[1., 0., 0., 0.]);
}

#[test]
fn softmax_examples() {
    let y = eval1(|tp, x| tp.softmax(x, 0).unwrap(), t(&[2], &[0., 0.]));
    assert_eq!(y.data(), &[0.5, 0.5]);
    for c in [-50.0, 0.0, 3.7, 700.0] {
        let y = eval1(|tp, x| tp.softmax(x, 0).unwrap(), t(&[3], &[c, c, c]));
        for v in y.data() {
            assert!((v - 1.0 / 3.0).abs() < 1e-15);
        }
    }
    let y = eval1(|tp, x| tp.softmax(x, 0).unwrap(), t(&[2], &[0., 3f64.ln()]));
    assert!((y.data()[0] - 0.25).abs() < 1e-15);
    assert!((y.data()[1] - 0.75).abs() < 1e-15);
}

#[test]
fn softmax_rows_sum_to_one_and_shift_invariant() {
    let mut rng = Rng::new(9);
    for _ in 0..50 {
        let x = rand_t(&[3, 5], &mut rng);
        let c = rng.uniform_range(-10.0, 10.0);
        let y = eval1(|tp, v| tp.softmax(v, 1).unwrap(), x.clone());
        let ys = eval1(|tp, v| tp.softmax(v, 1).unwrap(), x.map(|v| v + c));
        for r in 0..3 {
            let s: f64 = (0..5).map(|j| y.at(&[r, j])).sum();
            assert!((s - 1.0).abs() < 1e-12);
        }
        assert!(y.max_abs_diff(&ys).unwrap() < 1e-12);
    }
}

#[test]
fn matmul_identity_and_transpose_laws() {
    let mut rng = Rng::new(1);
    for _ in 0..20 {
        let a = rand_t(&[3, 4], &mut rng);
        let b = rand_t(&[4, 2], &mut rng);
        let mut tape = Tape::new();
        let (va, vb) = (tape.constant(a.clone()), tape.constant(b.clone()));
        let i4 = tape.constant(Tensor::identity(4).unwrap());
        let ai = tape.matmul(va, i4).unwrap();
        let ai_b = tape.matmul(ai, vb).unwrap();
        let ab = tape.matmul(va, vb).unwrap();
        assert!(tape.value(ai_b).max_abs_diff(tape.value(ab)).unwrap() < 1e-12);

        let abt = tape.transpose(ab).unwrap();
        let bt_at = tape.matmul_t(vb, va, true, true).unwrap();
        assert!(tape.value(abt).max_abs_diff(tape.value(bt_at)).unwrap() < 1e-12);
    }
}

#[test]
fn backward_examples() {
    let mut tape = Tape::new();
    let x = tape.param(Tensor::zeros(&[2, 3]).unwrap());
    let s = tape.sum(x, None).unwrap();
    let g = tape.backward(s).unwrap();
    assert_eq!(g.get(x).unwrap().data(), &[1.0; 6]);
    assert_eq!(g.get(s).unwrap().data(), &[1.0]);

    // L = (w·x − y)² with w=1, x=2, y=0 → dL/dw = 2(wx−y)x = 8
    let mut tape = Tape::new();
    let w = tape.param(Tensor::scalar(1.0));
    let x = tape.constant(Tensor::scalar(2.0));
    let y = tape.constant(Tensor::scalar(0.0));
    let wx = tape.mul(w, x).unwrap();
    let d = tape.sub(wx, y).unwrap();
    let sq = tape.mul(d, d).unwrap();
    let l = tape.mean(sq, None).unwrap();
    let g = tape.backward(l).unwrap();
    assert_eq!(g.get(w).unwrap().data(), &[8.0]);
    assert!(g.get(x).is_none());
}

#[test]
fn backward_rejects_non_scalar_root() {
    let mut tape = Tape::new();
    let x = tape.param(Tensor::zeros(&[2]).unwrap());
    assert!(matches!(tape.backward(x), Err(Error::Usage(_))));
}

#[test]
fn reachable_grads_have_value_shapes() {
    let mut rng = Rng::new(4);
    let mut tape = Tape::new();
    let a = tape.param(rand_t(&[2, 3, 4], &mut rng));
    let w = tape.param(rand_t(&[4, 5], &mut rng));
    let unused = tape.param(rand_t(&[7], &mut rng));
    let y = tape.matmul(a, w).unwrap();
    let y = tape.tanh(y);
    let l = tape.sum(y, None).unwrap();
    let g = tape.backward(l).unwrap();
    assert_eq!(g.get(a).unwrap().shape(), &[2, 3, 4]);
    assert_eq!(g.get(w).unwrap().shape(), &[4, 5]);
    assert_eq!(g.get(y).unwrap().shape(), &[2, 3, 5]);
    assert!(g.get(unused).is_none());
}

#[test]
fn grad_check_examples() {
    let x = t(&[2], &[1., 2.]);
    let sq = |tp: &mut Tape, v: Var| {
        let s = tp.mul(v, v)?;
        tp.sum(s, None)
    };
    let r = grad_check(sq, &x, 1e-5, 1e-8).unwrap();
    assert!(r.passed, "{r:?}");
    // analytic gradient is exactly [2, 4]
    let mut tape = Tape::new();
    let v = tape.param(x.clone());
    let l = sq(&mut tape, v).unwrap();
    assert_eq!(tape.backward(l).unwrap().get(v).unwrap().data(), &[2.0, 4.0]);

    let th = |tp: &mut Tape, v: Var| {
        let s = tp.tanh(v);
        tp.sum(s, None)
    };
    let r = grad_check(th, &t(&[3], &[-0.7, 0.1, 1.3]), 1e-5, 1e-6).unwrap();
    assert!(r.passed, "{r:?}");
}

#[test]
fn grad_check_rejects_dropout() {
    let f = |tp: &mut Tape, xs: &[Var]| {
        let d = tp.dropout(xs[0], 0.5)?;
        tp.sum(d, None)
    };
    let res = grad_check_on(
        || Tape::training(Rng::new(1)),
        f,
        &[Tensor::ones(&[4]).unwrap()],
        1e-5,
        1e-4,
    );
    assert!(matches!(res, Err(Error::Usage(_))));
}

/// Weighted sum with fixed random weights so every output element matters.
fn weighted_sum(tp: &mut Tape, y: Var, seed: u64) -> crate::error::Result<Var> {
    let shape = tp.shape(y).to_vec();
    let w = Tensor::uniform(&shape, -1.0, 1.0, &mut Rng::new(seed))?;
    let w = tp.constant(w);
    let p = tp.mul(y, w)?;
    tp.sum(p, None)
}

fn check_op(name: &str, shapes: &[&[usize]], f: impl Fn(&mut Tape, &[Var]) -> crate::error::Result<Var>) {
    let mut rng = Rng::new(name.len() as u64 * 31 + 7);
    for trial in 0..3 {
        let inputs: Vec<Tensor> = shapes.iter().map(|s| rand_t(s, &mut rng)).collect();
        let r = grad_check_many(
            |tp, xs| {
                let y = f(tp, xs)?;
                weighted_sum(tp, y, 99)
            },
            &inputs,
            1e-5,
            1e-4,
        )
        .unwrap();
        assert!(r.passed, "{name} trial {trial}: {r:?}");
    }
}

#[test]
fn every_differentiable_op_matches_central_differences() {
    check_op("add", &[&[2, 3], &[2, 3]], |tp, x| tp.add(x[0], x[1]));
    check_op("add_row", &[&[2, 3], &[3]], |tp, x| tp.add(x[0], x[1]));
    check_op("sub_scalar", &[&[2, 3], &[1]], |tp, x| tp.sub(x[0], x[1]));
    check_op("mul", &[&[2, 2, 3], &[2, 3]], |tp, x| tp.mul(x[0], x[1]));
    check_op("div_or_zero", &[&[2, 3], &[3]], |tp, x| {
        // keep the denominator away from zero
        let s = tp.constant(Tensor::scalar(3.0));
        let d = tp.add(x[1], s)?;
        tp.div_or_zero(x[0], d)
    });
    check_op("scale", &[&[4]], |tp, x| Ok(tp.scale(x[0], -1.7)));
    check_op("tanh", &[&[2, 3]], |tp, x| Ok(tp.tanh(x[0])));
    check_op("silu", &[&[2, 3]], |tp, x| Ok(tp.silu(x[0])));
    check_op("leaky_relu", &[&[2, 3]], |tp, x| Ok(tp.leaky_relu(x[0], 0.01)));
    check_op("matmul", &[&[3, 4], &[4, 2]], |tp, x| tp.matmul(x[0], x[1]));
    check_op("matmul_tt", &[&[4, 3], &[2, 4]], |tp, x| tp.matmul_t(x[0], x[1], true, true));
    check_op("bmm", &[&[2, 3, 4], &[2, 4, 5]], |tp, x| tp.matmul(x[0], x[1]));
    check_op("bmm_ta", &[&[2, 4, 3], &[2, 4, 5]], |tp, x| tp.matmul_t(x[0], x[1], true, false));
    check_op("bmm_tb", &[&[2, 3, 4], &[2, 5, 4]], |tp, x| tp.matmul_t(x[0], x[1], false, true));
    check_op("shared_rhs", &[&[2, 3, 4], &[5, 4]], |tp, x| tp.matmul_t(x[0], x[1], false, true));
    check_op("self_gram", &[&[2, 3, 4]], |tp, x| tp.matmul_t(x[0], x[0], false, true));
    check_op("transpose", &[&[2, 3, 4]], |tp, x| tp.transpose(x[0]));
    check_op("reshape", &[&[2, 6]], |tp, x| tp.reshape(x[0], &[3, 4]));
    check_op("sum_axis", &[&[2, 3, 4]], |tp, x| tp.sum(x[0], Some(1)));
    check_op("mean_axis", &[&[2, 3, 4]], |tp, x| tp.mean(x[0], Some(2)));
    check_op("min_axis", &[&[3, 5]], |tp, x| tp.min(x[0], Some(1)));
    check_op("max_axis", &[&[3, 5]], |tp, x| tp.max(x[0], Some(0)));
    check_op("softmax_last", &[&[2, 3, 4]], |tp, x| tp.softmax(x[0], 2));
    check_op("softmax_mid", &[&[2, 3, 4]], |tp, x| tp.softmax(x[0], 1));
    check_op("gather", &[&[5, 3]], |tp, x| tp.gather(x[0], &[4, 0, 4, 2]));
    check_op("concat", &[&[2, 3], &[2, 2]], |tp, x| tp.concat(&[x[0], x[1]]));
    check_op("expand", &[&[2, 1, 3]], |tp, x| tp.expand(x[0], 1, 4));
    check_op("narrow", &[&[2, 5, 3]], |tp, x| tp.narrow(x[0], 1, 1, 3));
    check_op("channel_linear", &[&[3, 2, 4], &[2, 5, 4], &[2, 5]], |tp, x| {
        tp.channel_linear(x[0], x[1], x[2])
    });
}

#[test]
fn injected_fault_is_caught_by_grad_check() {
    let f = |tp: &mut Tape, v: Var| {
        let y = tp.tanh(v);
        tp.sum(y, None)
    };
    let x = t(&[3], &[0.3, -0.2, 0.9]);
    let _guard = fault::inject(OpKind::Tanh, 1.01);
    let r = grad_check(f, &x, 1e-5, 1e-4).unwrap();
    assert!(!r.passed);
}

#[test]
fn channel_linear_matches_loop() {
    let mut rng = Rng::new(17);
    let (b, c, i, o) = (3, 2, 4, 5);
    let x = rand_t(&[b, c, i], &mut rng);
    let w = rand_t(&[c, o, i], &mut rng);
    let bias = rand_t(&[c, o], &mut rng);
    let mut tape = Tape::new();
    let (vx, vw, vb) = (tape.constant(x.clone()), tape.constant(w.clone()), tape.constant(bias.clone()));
    let y = tape.channel_linear(vx, vw, vb).unwrap();
    let y = tape.value(y);
    for bi in 0..b {
        for ch in 0..c {
            for oo in 0..o {
                let mut s = bias.at(&[ch, oo]);
                for ii in 0..i {
                    s += x.at(&[bi, ch, ii]) * w.at(&[ch, oo, ii]);
                }
                assert!((y.at(&[bi, ch, oo]) - s).abs() < 1e-12);
            }
        }
    }
}

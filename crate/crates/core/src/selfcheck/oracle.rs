//! Straight-line reference implementations compared against the layers.

#![allow(clippy::needless_range_loop)]

use crate::autodiff::Tape;
use crate::calendar::{CalendarStamps, Component};
use crate::error::Result;
use crate::models::{moving_average, moving_average_matrix, BaselineModel};
use crate::nn::{Activation, DateTimeEmbedding, ParamStore, ResLBlock, SpatialAttention, EMBED_DIM, LEAKY_SLOPE};
use crate::rng::Rng;
use crate::tensor::Tensor;

use super::Check;

pub const ORACLE_TOL: f64 = 1e-10;

/// `x + Wᵀx` with `W = softmax_rows(tanh(x)·tanh(x)ᵀ)`, for one `[C, L]` matrix.
pub fn attention_reference(x: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let c = x.len();
    let l = x[0].len();
    let s: Vec<Vec<f64>> = x.iter().map(|r| r.iter().map(|v| v.tanh()).collect()).collect();
    let mut w = vec![vec![0.0; c]; c];
    for i in 0..c {
        let mut row = vec![0.0; c];
        for (j, r) in row.iter_mut().enumerate() {
            for k in 0..l {
                *r += s[i][k] * s[j][k];
            }
        }
        let m = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let z: f64 = row.iter().map(|v| (v - m).exp()).sum();
        for j in 0..c {
            w[i][j] = (row[j] - m).exp() / z;
        }
    }
    let mut y = x.to_vec();
    for i in 0..c {
        for k in 0..l {
            for j in 0..c {
                y[i][k] += w[j][i] * x[j][k];
            }
        }
    }
    y
}

fn linear_reference(w: &Tensor, b: &Tensor, x: &[f64]) -> Vec<f64> {
    let (o, i) = (w.shape()[0], w.shape()[1]);
    (0..o)
        .map(|r| b.data()[r] + (0..i).map(|k| w.data()[r * i + k] * x[k]).sum::<f64>())
        .collect()
}

fn activate(a: Activation, v: f64) -> f64 {
    match a {
        Activation::Silu => v / (1.0 + (-v).exp()),
        Activation::LeakyRelu => {
            if v > 0.0 {
                v
            } else {
                LEAKY_SLOPE * v
            }
        }
    }
}

/// `l1(x) + l3(g(l2(x)))` for one vector, reading weights by name.
pub fn resl_reference(store: &ParamStore, name: &str, act: Activation, x: &[f64]) -> Vec<f64> {
    let get = |s: &str| store.by_name(&format!("{name}.{s}")).expect("parameter present");
    let skip = linear_reference(get("l1.weight"), get("l1.bias"), x);
    let h: Vec<f64> = linear_reference(get("l2.weight"), get("l2.bias"), x)
        .into_iter()
        .map(|v| activate(act, v))
        .collect();
    let p = linear_reference(get("l3.weight"), get("l3.bias"), &h);
    skip.iter().zip(p).map(|(a, b)| a + b).collect()
}

/// Per step: concatenate each component's table row in canonical order and
/// apply the reducer.
pub fn datetime_reference(store: &ParamStore, name: &str, stamps: &CalendarStamps) -> Vec<f64> {
    let mut comps = stamps.components().to_vec();
    comps.sort();
    let w = store.by_name(&format!("{name}.reducer.weight")).expect("reducer");
    let b = store.by_name(&format!("{name}.reducer.bias")).expect("reducer").data()[0];
    (0..stamps.len())
        .map(|r| {
            let mut acc = b;
            for (k, c) in comps.iter().enumerate() {
                let table = store.by_name(&format!("{name}.{}", c.name())).expect("table");
                let code = stamps.code(r, *c).expect("component present") as usize;
                for d in 0..EMBED_DIM {
                    acc += table.data()[code * EMBED_DIM + d] * w.data()[k * EMBED_DIM + d];
                }
            }
            acc
        })
        .collect()
}

/// Centered average with edge values repeated past both ends.
pub fn moving_average_reference(x: &[f64], kernel: usize) -> Vec<f64> {
    let half = (kernel / 2) as isize;
    let n = x.len() as isize;
    (0..n)
        .map(|t| {
            let s: f64 = (-half..=half).map(|k| x[(t + k).clamp(0, n - 1) as usize]).sum();
            s / kernel as f64
        })
        .collect()
}

fn max_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

fn check(name: &str, trials: usize, mut one: impl FnMut(&mut Rng) -> Result<f64>) -> Check {
    let mut rng = Rng::new(0x0AC1E);
    let mut worst: f64 = 0.0;
    for _ in 0..trials {
        match one(&mut rng) {
            Ok(d) => worst = worst.max(if d.is_nan() { f64::INFINITY } else { d }),
            Err(e) => return Check::error(name, ORACLE_TOL, e),
        }
    }
    Check {
        name: name.to_string(),
        max_error: worst,
        tolerance: ORACLE_TOL,
        passed: worst < ORACLE_TOL,
        detail: format!("{trials} random inputs, max abs difference"),
    }
}

fn random_stamps(rng: &mut Rng, comps: &[Component], len: usize) -> Result<CalendarStamps> {
    let mut codes = Vec::with_capacity(len * comps.len());
    for _ in 0..len {
        for c in comps {
            codes.push(rng.below(c.cardinality(4)) as u16);
        }
    }
    CalendarStamps::new(comps.to_vec(), 4, len, codes)
}

pub fn oracle_checks(trials: usize) -> Vec<Check> {
    vec![
        check("oracle:spatial_attention", trials, |rng| {
            let c = 1 + rng.below(5);
            let l = 1 + rng.below(6);
            let x = Tensor::uniform(&[c, l], -2.0, 2.0, rng)?;
            let mut tape = Tape::new();
            let v = tape.constant(x.clone());
            let y = SpatialAttention::default().forward(&mut tape, v)?;
            let rows: Vec<Vec<f64>> = (0..c).map(|i| x.data()[i * l..(i + 1) * l].to_vec()).collect();
            let want: Vec<f64> = attention_reference(&rows).concat();
            Ok(max_diff(tape.value(y).data(), &want))
        }),
        check("oracle:datetime_features", trials, |rng| {
            let mut comps = vec![Component::Month, Component::Date, Component::Weekday, Component::Hour, Component::Minute];
            rng.shuffle(&mut comps);
            comps.truncate(1 + rng.below(5));
            let len = 1 + rng.below(6);
            let stamps = random_stamps(rng, &comps, len)?;
            let mut store = ParamStore::new();
            let e = DateTimeEmbedding::new(&mut store, "dt", &comps, 4, rng)?;
            for p in store.iter_mut() {
                p.value = Tensor::uniform(p.value.shape(), -1.0, 1.0, rng)?;
            }
            let mut tape = Tape::new();
            let p = store.bind(&mut tape);
            let y = e.forward(&mut tape, &p, &stamps, 1, len)?;
            Ok(max_diff(tape.value(y).data(), &datetime_reference(&store, "dt", &stamps)))
        }),
        check("oracle:resl_forward", trials, |rng| {
            let (i, o) = (1 + rng.below(5), 1 + rng.below(5));
            let act = if rng.below(2) == 0 { Activation::Silu } else { Activation::LeakyRelu };
            let mut store = ParamStore::new();
            let blk = ResLBlock::new(&mut store, "r", i, o, act, 0.0, None, rng)?;
            let x = Tensor::uniform(&[i], -2.0, 2.0, rng)?;
            let mut tape = Tape::new();
            let p = store.bind(&mut tape);
            let v = tape.constant(x.clone());
            let y = blk.forward(&mut tape, &p, v)?;
            Ok(max_diff(tape.value(y).data(), &resl_reference(&store, "r", act, x.data())))
        }),
        check("oracle:moving_average_decomposition", trials, |rng| {
            let (c, len) = (1 + rng.below(3), 1 + rng.below(12));
            let kernel = 2 * rng.below(6) + 1;
            let x = Tensor::uniform(&[1, c, len], -3.0, 3.0, rng)?;
            let mut tape = Tape::new();
            let v = tape.constant(x.clone());
            let (trend, rem) = BaselineModel::decompose(&mut tape, &moving_average_matrix(len, kernel), v)?;
            let mut worst: f64 = 0.0;
            for ch in 0..c {
                let row = &x.data()[ch * len..(ch + 1) * len];
                let want = moving_average_reference(row, kernel);
                let got_t = &tape.value(trend).data()[ch * len..(ch + 1) * len];
                let got_r = &tape.value(rem).data()[ch * len..(ch + 1) * len];
                let want_r: Vec<f64> = row.iter().zip(&want).map(|(a, b)| a - b).collect();
                worst = worst
                    .max(max_diff(got_t, &want))
                    .max(max_diff(got_r, &want_r))
                    .max(max_diff(&moving_average(row, kernel), &want));
            }
            Ok(worst)
        }),
    ]
}

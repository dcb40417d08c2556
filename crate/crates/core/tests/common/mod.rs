//! Straight-line reference implementations written with plain loops over
//! nested `Vec`s. They read parameters by name and share no code with the
//! tape-based layers.

#![allow(dead_code, clippy::needless_range_loop)]

use stl_core::calendar::{CalendarStamps, Component};
use stl_core::nn::ParamStore;

pub type Mat = Vec<Vec<f64>>;

fn weight(store: &ParamStore, name: &str) -> Mat {
    let w = store.by_name(&format!("{name}.weight")).unwrap_or_else(|| panic!("no {name}.weight"));
    let (o, i) = (w.shape()[0], w.shape()[1]);
    (0..o).map(|r| w.data()[r * i..(r + 1) * i].to_vec()).collect()
}

fn bias(store: &ParamStore, name: &str) -> Vec<f64> {
    store.by_name(&format!("{name}.bias")).unwrap().data().to_vec()
}

/// `W·x + b` for one row `x`.
pub fn linear(store: &ParamStore, name: &str, x: &[f64]) -> Vec<f64> {
    let (w, b) = (weight(store, name), bias(store, name));
    w.iter()
        .zip(&b)
        .map(|(row, bi)| {
            let mut s = 0.0;
            for k in 0..x.len() {
                s += row[k] * x[k];
            }
            s + bi
        })
        .collect()
}

pub fn silu(v: f64) -> f64 {
    v / (1.0 + (-v).exp())
}

pub fn leaky(v: f64) -> f64 {
    if v > 0.0 {
        v
    } else {
        0.01 * v
    }
}

/// Residual block on one row: `skip(x) + proj(act(hidden(x)))`.
pub fn resl(store: &ParamStore, name: &str, act: fn(f64) -> f64, x: &[f64]) -> Vec<f64> {
    let skip = linear(store, &format!("{name}.l1"), x);
    let h: Vec<f64> = linear(store, &format!("{name}.l2"), x).into_iter().map(act).collect();
    let proj = linear(store, &format!("{name}.l3"), &h);
    skip.iter().zip(&proj).map(|(a, b)| a + b).collect()
}

/// `X + Wᵀ·X` with `W` the row softmax of `tanh(X)·tanh(X)ᵀ`.
pub fn attention(x: &Mat) -> Mat {
    let c = x.len();
    let l = x[0].len();
    let s: Mat = x.iter().map(|r| r.iter().map(|v| v.tanh()).collect()).collect();
    let mut w = vec![vec![0.0; c]; c];
    for i in 0..c {
        for j in 0..c {
            let mut dot = 0.0;
            for k in 0..l {
                dot += s[i][k] * s[j][k];
            }
            w[i][j] = dot;
        }
        let m = w[i].iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let z: f64 = w[i].iter().map(|v| (v - m).exp()).sum();
        for j in 0..c {
            w[i][j] = (w[i][j] - m).exp() / z;
        }
    }
    let mut out = x.clone();
    for i in 0..c {
        for k in 0..l {
            let mut acc = 0.0;
            for j in 0..c {
                acc += w[j][i] * x[j][k];
            }
            out[i][k] += acc;
        }
    }
    out
}

const CANONICAL: [Component; 5] = [
    Component::Month,
    Component::Date,
    Component::Weekday,
    Component::Hour,
    Component::Minute,
];

/// Per-step scalar calendar feature: concatenated table rows in canonical
/// component order, reduced by the `{name}.reducer` linear map.
pub fn datetime(store: &ParamStore, name: &str, stamps: &CalendarStamps) -> Vec<f64> {
    (0..stamps.len())
        .map(|step| {
            let mut row = Vec::new();
            for c in CANONICAL {
                if let Some(code) = stamps.code(step, c) {
                    let t = store.by_name(&format!("{name}.{}", c.name())).unwrap();
                    let width = t.shape()[1];
                    row.extend_from_slice(&t.data()[code as usize * width..(code as usize + 1) * width]);
                }
            }
            linear(store, &format!("{name}.reducer"), &row)[0]
        })
        .collect()
}

pub fn minmax(v: &[f64]) -> Vec<f64> {
    let lo = v.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = v.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    v.iter()
        .map(|x| if hi == lo { 0.0 } else { (x - lo) / (hi - lo) })
        .collect()
}

/// Centered moving average with edge replication.
pub fn moving_average(x: &[f64], kernel: usize) -> Vec<f64> {
    let n = x.len() as isize;
    let half = (kernel / 2) as isize;
    (0..n)
        .map(|i| {
            let mut s = 0.0;
            for k in -half..=half {
                s += x[(i + k).clamp(0, n - 1) as usize];
            }
            s / (2 * half + 1) as f64
        })
        .collect()
}

/// Sinusoidal encoding laid out channel-major: `pe[c][t]`.
pub fn positional(len: usize, channels: usize) -> Mat {
    (0..channels)
        .map(|c| {
            (0..len)
                .map(|t| {
                    let freq = 10000f64.powf(-((c / 2 * 2) as f64) / channels as f64);
                    let a = t as f64 * freq;
                    if c % 2 == 0 {
                        a.sin()
                    } else {
                        a.cos()
                    }
                })
                .collect()
        })
        .collect()
}

/// Gated coder on every channel row of `x` (`[C][L]`) for one sequence.
fn coder(store: &ParamStore, name: &str, x: &Mat, stamps: &CalendarStamps) -> Mat {
    let f = minmax(&datetime(store, "temporal.datetime", stamps));
    let m = store.by_name(&format!("{name}.gate")).unwrap().data()[0];
    x.iter()
        .map(|row| {
            let shifted: Vec<f64> = row.iter().zip(&f).map(|(a, b)| a + b * m).collect();
            resl(store, name, silu, &shifted)
        })
        .collect()
}

/// Full three-route forward for one window `x` (`[C][T]`) with SiLU blocks
/// and an active temporal route. Returns `[C][τ]`.
pub fn stl_forward(store: &ParamStore, x: &Mat, obs: &CalendarStamps, target: &CalendarStamps) -> Mat {
    let (c, t) = (x.len(), x[0].len());
    let pe = positional(t, c);
    let xpe: Mat = (0..c).map(|i| (0..t).map(|k| x[i][k] + pe[i][k]).collect()).collect();
    let core: Mat = x.iter().map(|r| resl(store, "core", silu, r)).collect();

    let h = coder(store, "temporal.encoder", &xpe, obs);
    let h: Mat = h.iter().map(|r| resl(store, "temporal.mid1", silu, r)).collect();
    let h: Mat = h.iter().map(|r| resl(store, "temporal.mid2", silu, r)).collect();
    let temporal = coder(store, "temporal.decoder", &h, target);

    let s: Mat = xpe.iter().map(|r| resl(store, "spatial.pre1", silu, r)).collect();
    let s: Mat = s.iter().map(|r| resl(store, "spatial.pre2", silu, r)).collect();
    let s = attention(&s);
    let spatial: Mat = s.iter().map(|r| resl(store, "spatial.post", silu, r)).collect();

    (0..c)
        .map(|i| {
            (0..core[i].len())
                .map(|k| core[i][k] + temporal[i][k] + spatial[i][k])
                .collect()
        })
        .collect()
}

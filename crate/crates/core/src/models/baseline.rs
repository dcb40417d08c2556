use crate::autodiff::{Tape, Var};
use crate::error::Result;
use crate::nn::{Bound, LinearLayer, ParamStore};
use crate::rng::Rng;
use crate::tensor::Tensor;

use super::config::{ModelConfig, Variant};

/// Centered moving average with the ends padded by repeating the first and
/// last values.
pub fn moving_average(series: &[f64], kernel: usize) -> Vec<f64> {
    let half = (kernel / 2) as isize;
    let last = series.len() as isize - 1;
    (0..series.len() as isize)
        .map(|t| {
            let s: f64 = (t - half..=t + half)
                .map(|j| series[j.clamp(0, last) as usize])
                .sum();
            s / kernel as f64
        })
        .collect()
}

/// `[len × len]` matrix `M` with `M·x == moving_average(x)`.
pub fn moving_average_matrix(len: usize, kernel: usize) -> Tensor {
    let half = (kernel / 2) as isize;
    let last = len as isize - 1;
    let mut m = vec![0.0; len * len];
    let w = 1.0 / kernel as f64;
    for t in 0..len as isize {
        for j in t - half..=t + half {
            m[t as usize * len + j.clamp(0, last) as usize] += w;
        }
    }
    Tensor::new(&[len, len], m).expect("square matrix")
}

#[derive(Clone, Debug)]
pub enum BaselineModel {
    Linear(LinearLayer),
    Dlinear {
        trend: LinearLayer,
        remainder: LinearLayer,
        ma: Tensor,
    },
    Nlinear(LinearLayer),
}

impl BaselineModel {
    pub fn new(cfg: &ModelConfig, store: &mut ParamStore, rng: &mut Rng) -> Result<Self> {
        let (t, tau) = (cfg.obs_len, cfg.pred_len);
        let pc = cfg.per_channel_weights.then_some(cfg.channels);
        Ok(match cfg.variant {
            Variant::Dlinear => BaselineModel::Dlinear {
                trend: LinearLayer::new(store, "trend", t, tau, pc, rng)?,
                remainder: LinearLayer::new(store, "remainder", t, tau, pc, rng)?,
                ma: moving_average_matrix(t, cfg.ma_kernel),
            },
            Variant::Nlinear => BaselineModel::Nlinear(LinearLayer::new(store, "linear", t, tau, pc, rng)?),
            Variant::Linear | Variant::Stl => {
                BaselineModel::Linear(LinearLayer::new(store, "linear", t, tau, pc, rng)?)
            }
        })
    }

    /// Trend and remainder of `x` (`[B, C, T]`) on the tape.
    pub fn decompose(tape: &mut Tape, ma: &Tensor, x: Var) -> Result<(Var, Var)> {
        let m = tape.constant(ma.clone());
        let trend = tape.matmul_t(x, m, false, true)?;
        let rem = tape.sub(x, trend)?;
        Ok((trend, rem))
    }

    /// `x` is `[B, C, T]`; returns `[B, C, τ]`.
    pub fn forward(&self, tape: &mut Tape, p: &Bound, x: Var) -> Result<Var> {
        match self {
            BaselineModel::Linear(l) => l.forward(tape, p, x),
            BaselineModel::Dlinear {
                trend,
                remainder,
                ma,
            } => {
                let (tr, rem) = Self::decompose(tape, ma, x)?;
                let a = trend.forward(tape, p, tr)?;
                let b = remainder.forward(tape, p, rem)?;
                tape.add(a, b)
            }
            BaselineModel::Nlinear(l) => {
                let shape = tape.shape(x).to_vec();
                let t = shape[shape.len() - 1];
                let last = tape.narrow(x, 2, t - 1, 1)?;
                let anchor_in = tape.expand(last, 2, t)?;
                let centered = tape.sub(x, anchor_in)?;
                let y = l.forward(tape, p, centered)?;
                let anchor_out = tape.expand(last, 2, l.out_dim())?;
                tape.add(y, anchor_out)
            }
        }
    }
}

use crate::autodiff::{Tape, Var};
use crate::error::{Error, Result};
use crate::rng::Rng;
use crate::tensor::Tensor;

use super::params::{Bound, ParamId, ParamStore};

/// Affine map over the last axis.
///
/// In the default shared mode one `[out × in]` weight serves every channel
/// row. In per-channel mode the weight is `[C × out × in]` and the input must
/// be `[B, C, in]`.
#[derive(Clone, Debug)]
pub struct LinearLayer {
    pub weight: ParamId,
    pub bias: ParamId,
    in_dim: usize,
    out_dim: usize,
    channels: Option<usize>,
}

impl LinearLayer {
    /// Uniform(−1/√in, 1/√in) initialization for weight and bias.
    pub fn new(
        store: &mut ParamStore,
        name: &str,
        in_dim: usize,
        out_dim: usize,
        per_channel: Option<usize>,
        rng: &mut Rng,
    ) -> Result<Self> {
        let bound = 1.0 / (in_dim as f64).sqrt();
        let (wshape, bshape) = match per_channel {
            None => (vec![out_dim, in_dim], vec![out_dim]),
            Some(c) => (vec![c, out_dim, in_dim], vec![c, out_dim]),
        };
        let w = Tensor::uniform(&wshape, -bound, bound, rng)?;
        let b = Tensor::uniform(&bshape, -bound, bound, rng)?;
        Ok(Self {
            weight: store.add(format!("{name}.weight"), w),
            bias: store.add(format!("{name}.bias"), b),
            in_dim,
            out_dim,
            channels: per_channel,
        })
    }

    pub fn in_dim(&self) -> usize {
        self.in_dim
    }

    pub fn out_dim(&self) -> usize {
        self.out_dim
    }

    pub fn forward(&self, tape: &mut Tape, p: &Bound, x: Var) -> Result<Var> {
        let shape = tape.shape(x).to_vec();
        if shape.last() != Some(&self.in_dim) {
            return Err(Error::dim("linear", &shape, &[self.out_dim, self.in_dim]));
        }
        let (w, b) = (p.var(self.weight), p.var(self.bias));
        if let Some(c) = self.channels {
            if shape.len() != 3 || shape[1] != c {
                return Err(Error::dim("linear", &shape, &[c, self.out_dim, self.in_dim]));
            }
            return tape.channel_linear(x, w, b);
        }
        match shape.len() {
            1 => {
                let row = tape.reshape(x, &[1, self.in_dim])?;
                let y = tape.matmul_t(row, w, false, true)?;
                let y = tape.reshape(y, &[self.out_dim])?;
                tape.add(y, b)
            }
            _ => {
                let y = tape.matmul_t(x, w, false, true)?;
                tape.add(y, b)
            }
        }
    }
}

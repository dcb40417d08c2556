use serde::{Deserialize, Serialize};

use crate::autodiff::{Tape, Var};
use crate::error::{Error, Result};

/// Axis of the interaction matrix that softmax normalizes.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AttentionAxis {
    /// Each row of the interaction matrix sums to one.
    #[default]
    Rows,
    Cols,
}

/// Parameter-free channel mixing.
///
/// With `S = tanh(X)`, `I = S·Sᵀ` and `W = softmax(I)`, the output is
/// `X + Wᵀ·X`. Input is `[C, τ]` or batched `[B, C, τ]`.
#[derive(Clone, Copy, Debug, Default)]
pub struct SpatialAttention {
    pub axis: AttentionAxis,
}

impl SpatialAttention {
    pub fn new(axis: AttentionAxis) -> Self {
        Self { axis }
    }

    pub fn weights(&self, tape: &mut Tape, x: Var) -> Result<Var> {
        let rank = tape.shape(x).len();
        if !(2..=3).contains(&rank) {
            return Err(Error::dim("spatial_attention", tape.shape(x), &[]));
        }
        let s = tape.tanh(x);
        let inter = tape.matmul_t(s, s, false, true)?;
        let axis = match self.axis {
            AttentionAxis::Rows => rank - 1,
            AttentionAxis::Cols => rank - 2,
        };
        tape.softmax(inter, axis)
    }

    pub fn forward(&self, tape: &mut Tape, x: Var) -> Result<Var> {
        let w = self.weights(tape, x)?;
        let mixed = tape.matmul_t(w, x, true, false)?;
        tape.add(x, mixed)
    }
}

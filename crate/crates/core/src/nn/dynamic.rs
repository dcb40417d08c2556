use crate::autodiff::{Tape, Var};
use crate::calendar::CalendarStamps;
use crate::error::{Error, Result};
use crate::tensor::Tensor;

use super::datetime::{minmax_normalize, DateTimeEmbedding};
use super::params::{Bound, ParamId, ParamStore};
use super::resl::ResLBlock;

/// Initial value of the learnable date-time gate.
pub const GATE_INIT: f64 = 1.0;

/// Res-L block whose input is shifted by `m · normalize(datetime features)`,
/// the same feature row added to every channel.
#[derive(Clone, Debug)]
pub struct DynamicCoder {
    pub gate: ParamId,
    pub inner: ResLBlock,
}

impl DynamicCoder {
    pub fn new(store: &mut ParamStore, name: &str, inner: ResLBlock) -> Self {
        let gate = store.add(format!("{name}.gate"), Tensor::scalar(GATE_INIT));
        Self { gate, inner }
    }

    /// `x` is `[B, C, L]`; `stamps` holds `B·L` rows.
    pub fn forward(
        &self,
        tape: &mut Tape,
        p: &Bound,
        x: Var,
        embed: &DateTimeEmbedding,
        stamps: &CalendarStamps,
    ) -> Result<Var> {
        let shape = tape.shape(x).to_vec();
        if shape.len() != 3 {
            return Err(Error::dim("dynamic_coder", &shape, &[]));
        }
        let (b, c, l) = (shape[0], shape[1], shape[2]);
        if stamps.len() != b * l {
            return Err(Error::Data(format!(
                "dynamic coder: {} stamp rows for {b} sequences of length {l}",
                stamps.len()
            )));
        }
        let f = embed.forward(tape, p, stamps, b, l)?;
        let f = minmax_normalize(tape, f)?;
        let f = tape.reshape(f, &[b, 1, l])?;
        let f = tape.expand(f, 1, c)?;
        let gated = tape.mul(f, p.var(self.gate))?;
        let shifted = tape.add(x, gated)?;
        self.inner.forward(tape, p, shifted)
    }
}

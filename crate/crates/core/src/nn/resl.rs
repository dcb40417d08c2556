use serde::{Deserialize, Serialize};

use crate::autodiff::{Tape, Var};
use crate::error::Result;
use crate::rng::Rng;

use super::linear::LinearLayer;
use super::params::{Bound, ParamStore};

/// Negative-branch slope of the leaky rectifier.
pub const LEAKY_SLOPE: f64 = 0.01;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    Silu,
    LeakyRelu,
}

impl Activation {
    pub fn apply(self, tape: &mut Tape, x: Var) -> Var {
        match self {
            Activation::Silu => tape.silu(x),
            Activation::LeakyRelu => tape.leaky_relu(x, LEAKY_SLOPE),
        }
    }
}

impl std::str::FromStr for Activation {
    type Err = crate::Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "silu" => Ok(Activation::Silu),
            "leaky_relu" | "leakyrelu" => Ok(Activation::LeakyRelu),
            other => Err(crate::Error::Config(format!("unknown activation {other:?}"))),
        }
    }
}

/// Residual linear block: `skip(x) + dropout(proj(g(hidden(x))))`.
///
/// `skip` and `hidden` map `in → out`; `proj` maps `out → out`.
#[derive(Clone, Debug)]
pub struct ResLBlock {
    pub skip: LinearLayer,
    pub hidden: LinearLayer,
    pub proj: LinearLayer,
    pub activation: Activation,
    pub dropout: f64,
}

impl ResLBlock {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        store: &mut ParamStore,
        name: &str,
        in_dim: usize,
        out_dim: usize,
        activation: Activation,
        dropout: f64,
        per_channel: Option<usize>,
        rng: &mut Rng,
    ) -> Result<Self> {
        Ok(Self {
            skip: LinearLayer::new(store, &format!("{name}.l1"), in_dim, out_dim, per_channel, rng)?,
            hidden: LinearLayer::new(store, &format!("{name}.l2"), in_dim, out_dim, per_channel, rng)?,
            proj: LinearLayer::new(store, &format!("{name}.l3"), out_dim, out_dim, per_channel, rng)?,
            activation,
            dropout,
        })
    }

    pub fn out_dim(&self) -> usize {
        self.skip.out_dim()
    }

    pub fn forward(&self, tape: &mut Tape, p: &Bound, x: Var) -> Result<Var> {
        let skip = self.skip.forward(tape, p, x)?;
        let h = self.hidden.forward(tape, p, x)?;
        let h = self.activation.apply(tape, h);
        let h = self.proj.forward(tape, p, h)?;
        let h = tape.dropout(h, self.dropout)?;
        tape.add(skip, h)
    }
}

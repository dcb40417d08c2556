//! The forecaster: three-route model, linear baselines and checkpoints.

mod baseline;
mod checkpoint;
mod config;
mod stl;

pub use baseline::{moving_average, moving_average_matrix, BaselineModel};
pub use checkpoint::{
    decode_checkpoint, encode_checkpoint, load_checkpoint, load_checkpoint_expecting,
    save_checkpoint, CHECKPOINT_MAGIC, CHECKPOINT_VERSION,
};
pub use config::{
    ablation_variants, ModelConfig, Route, Variant, DEFAULT_MA_KERNEL, DEFAULT_THETA_T,
};
pub use stl::{SpatialRoute, StlModel, TemporalRoute};

use crate::autodiff::{Tape, Var};
use crate::calendar::CalendarStamps;
use crate::error::{Error, Result};
use crate::nn::{Bound, ParamStore};
use crate::rng::Rng;
use crate::tensor::Tensor;

#[allow(clippy::large_enum_variant)]
#[derive(Clone, Debug)]
pub enum Net {
    Stl(StlModel),
    Baseline(BaselineModel),
}

/// A model with its parameters, configuration and initialization seed.
#[derive(Clone, Debug)]
pub struct Forecaster {
    config: ModelConfig,
    seed: u64,
    params: ParamStore,
    net: Net,
}

/// Build and initialize a forecaster. Initialization depends only on
/// `(config, seed)`.
pub fn make_model(config: &ModelConfig, seed: u64) -> Result<Forecaster> {
    Forecaster::new(config.clone(), seed)
}

impl Forecaster {
    pub fn new(config: ModelConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let mut params = ParamStore::new();
        let mut rng = Rng::new(seed);
        let net = match config.variant {
            Variant::Stl => Net::Stl(StlModel::new(&config, &mut params, &mut rng)?),
            _ => Net::Baseline(BaselineModel::new(&config, &mut params, &mut rng)?),
        };
        log::debug!(
            "built {} with {} parameters (seed {seed})",
            config.label(),
            params.scalar_count()
        );
        Ok(Self {
            config,
            seed,
            params,
            net,
        })
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn net(&self) -> &Net {
        &self.net
    }

    pub fn params(&self) -> &ParamStore {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut ParamStore {
        &mut self.params
    }

    pub fn param_count(&self) -> usize {
        self.params.scalar_count()
    }

    pub fn temporal_active(&self) -> bool {
        match &self.net {
            Net::Stl(m) => m.temporal_active(),
            Net::Baseline(_) => false,
        }
    }

    /// `x` is `[B, T, C]`, `obs` holds `B·T` stamp rows and `target` `B·τ`.
    /// Returns `[B, τ, C]`.
    pub fn forward(
        &self,
        tape: &mut Tape,
        p: &Bound,
        x: Var,
        obs: &CalendarStamps,
        target: &CalendarStamps,
    ) -> Result<Var> {
        let cfg = &self.config;
        let shape = tape.shape(x).to_vec();
        if shape.len() != 3 || shape[1] != cfg.obs_len || shape[2] != cfg.channels {
            return Err(Error::dim("forecaster", &shape, &[cfg.obs_len, cfg.channels]));
        }
        let b = shape[0];
        if obs.len() != b * cfg.obs_len || target.len() != b * cfg.pred_len {
            return Err(Error::Data(format!(
                "stamp rows ({}, {}) do not match batch {b} with T={} and tau={}",
                obs.len(),
                target.len(),
                cfg.obs_len,
                cfg.pred_len
            )));
        }
        let xt = tape.transpose(x)?;
        let y = match &self.net {
            Net::Stl(m) => m.forward(tape, p, xt, obs, target)?,
            Net::Baseline(m) => m.forward(tape, p, xt)?,
        };
        tape.transpose(y)
    }

    /// Eval-mode prediction for `[T, C]` or `[B, T, C]` input.
    pub fn predict(&self, x: &Tensor, obs: &CalendarStamps, target: &CalendarStamps) -> Result<Tensor> {
        let single = x.rank() == 2;
        let x3 = if single {
            x.reshape(&[1, x.shape()[0], x.shape()[1]])?
        } else {
            x.clone()
        };
        let mut tape = Tape::new();
        let p = self.params.bind(&mut tape);
        let xv = tape.constant(x3);
        let y = self.forward(&mut tape, &p, xv, obs, target)?;
        let y = tape.value(y).clone();
        if single {
            y.reshape(&[self.config.pred_len, self.config.channels])
        } else {
            Ok(y)
        }
    }

    /// Replace parameters with those of `other`, which must match by name and shape.
    pub fn load_params(&mut self, other: &ParamStore) -> Result<()> {
        self.params.load_from(other)
    }
}

//! Spatiotemporal linear forecasting.
//!
//! The crate is organized bottom-up:
//!
//! - [`autodiff`]: dense tensors with a define-by-run reverse-mode tape.
//! - [`nn`]: linear and residual-linear layers, positional encoding,
//!   calendar embeddings, gated dynamic coders and channel attention.
//! - [`models`]: the three-route forecaster, the Linear/DLinear/NLinear
//!   baselines, and checkpoints.
//! - [`data`]: CSV ingestion, calendar stamps, chronological splits,
//!   sliding windows and synthetic series.
//! - [`train`]: MSE objective, Adam, and the epoch loop.
//! - [`experiment`]: metric evaluation, grids, reports and curve export.
//! - [`runfile`]: the declarative run configuration and dataset presets.

pub mod autodiff;
pub mod calendar;
pub mod data;
pub mod error;
pub mod experiment;
pub mod models;
pub mod nn;
pub mod rng;
pub mod runfile;
pub mod selfcheck;
pub mod tensor;
pub mod train;

pub use error::{Error, Result};
pub use rng::Rng;
pub use tensor::Tensor;

/// Seed used by every preset, matching the published configuration.
pub const DEFAULT_SEED: u64 = 2021;

//! MSE objective, Adam and the epoch loop.

mod adam;
mod engine;
mod loss;

pub use adam::{AdamState, BETA1, BETA2, EPSILON};
pub use engine::{
    batch_gradients, evaluate, overfit_batch, train, EpochRecord, History, RunLog, TrainConfig,
};
pub use loss::{mae, mse, mse_loss};

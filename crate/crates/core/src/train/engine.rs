use std::fs::{File, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::autodiff::Tape;
use crate::data::{Batch, WindowedDataset};
use crate::error::{Error, Result};
use crate::models::Forecaster;
use crate::nn::ParamStore;
use crate::rng::Rng;
use crate::tensor::Tensor;

use super::adam::AdamState;
use super::loss::{mae, mse, mse_loss};

/// Stream of the seed reserved for dropout masks.
const DROPOUT_STREAM: u64 = 0xD50;
/// Stream of the seed reserved for epoch shuffles.
const SHUFFLE_STREAM: u64 = 0x5F1;

fn default_batch_size() -> usize {
    32
}
fn default_epochs() -> usize {
    20
}
fn default_patience() -> usize {
    5
}
fn default_seed() -> u64 {
    crate::DEFAULT_SEED
}
fn default_true() -> bool {
    true
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainConfig {
    pub lr: f64,
    /// Multiplier applied to the learning rate after every epoch.
    pub decay: f64,
    #[serde(default = "default_batch_size")]
    pub batch_size: usize,
    #[serde(default = "default_epochs")]
    pub epochs: usize,
    #[serde(default = "default_seed")]
    pub seed: u64,
    /// Stop after this many epochs without a better validation MSE; 0 disables.
    #[serde(default = "default_patience")]
    pub patience: usize,
    #[serde(default = "default_true")]
    pub eval_each_epoch: bool,
}

impl TrainConfig {
    pub fn new(lr: f64, decay: f64) -> Self {
        Self {
            lr,
            decay,
            batch_size: default_batch_size(),
            epochs: default_epochs(),
            seed: default_seed(),
            patience: default_patience(),
            eval_each_epoch: true,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return Err(Error::Config(format!("lr must be > 0, got {}", self.lr)));
        }
        if !(self.decay > 0.0 && self.decay <= 1.0) {
            return Err(Error::Config(format!("decay must lie in (0, 1], got {}", self.decay)));
        }
        if self.batch_size == 0 {
            return Err(Error::Config("batch_size must be >= 1".into()));
        }
        Ok(())
    }

    /// Learning rate used during epoch `epoch` (0-based).
    pub fn lr_at(&self, epoch: usize) -> f64 {
        self.lr * self.decay.powi(epoch as i32)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub lr: f64,
    pub train_mse: f64,
    pub val_mse: Option<f64>,
    pub val_mae: Option<f64>,
    pub seconds: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct History {
    pub epochs: Vec<EpochRecord>,
    /// Epoch whose parameters were kept, if any validation ran.
    pub best_epoch: Option<usize>,
    pub stopped_early: bool,
}

/// Append-only epoch log: `epoch,lr,train_mse,val_mse,val_mae,seconds`.
pub struct RunLog {
    path: PathBuf,
    file: File,
}

impl RunLog {
    pub const HEADER: &'static str = "epoch,lr,train_mse,val_mse,val_mae,seconds";

    pub fn open(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref().to_path_buf();
        let fresh = !path.exists();
        let mut file = OpenOptions::new()
            .create(true)
            .append(true)
            .open(&path)
            .map_err(|e| Error::io(&path, e))?;
        if fresh {
            writeln!(file, "{}", Self::HEADER).map_err(|e| Error::io(&path, e))?;
        }
        Ok(Self { path, file })
    }

    pub fn append(&mut self, r: &EpochRecord) -> Result<()> {
        let opt = |v: Option<f64>| v.map_or_else(|| "-".to_string(), |x| format!("{x:.10e}"));
        writeln!(
            self.file,
            "{},{:e},{:.10e},{},{},{:.3}",
            r.epoch,
            r.lr,
            r.train_mse,
            opt(r.val_mse),
            opt(r.val_mae),
            r.seconds
        )
        .map_err(|e| Error::io(&self.path, e))
    }
}

/// Loss and per-parameter gradients for one batch. A training tape (with
/// `dropout_rng`) applies dropout; without it the forward pass is in eval mode.
pub fn batch_gradients(
    model: &Forecaster,
    batch: &Batch,
    dropout_rng: Option<Rng>,
) -> Result<(f64, Vec<Option<Tensor>>)> {
    let mut tape = match dropout_rng {
        Some(r) => Tape::training(r),
        None => Tape::new(),
    };
    tape.set_finite_check(false);
    let p = model.params().bind(&mut tape);
    let x = tape.constant(batch.x.clone());
    let y = tape.constant(batch.y.clone());
    let pred = model.forward(&mut tape, &p, x, &batch.obs_stamps, &batch.target_stamps)?;
    let loss = mse_loss(&mut tape, pred, y)?;
    let value = tape.value(loss).item()?;
    if !value.is_finite() {
        return Ok((value, Vec::new()));
    }
    let mut g = tape.backward(loss)?;
    Ok((value, p.vars().iter().map(|&v| g.take(v)).collect()))
}

/// Test-set metrics on the standardized scale, averaged over every window,
/// horizon step and channel.
pub fn evaluate(model: &Forecaster, windows: &WindowedDataset, batch_size: usize) -> Result<(f64, f64)> {
    if windows.is_empty() {
        return Err(Error::Data("cannot evaluate on an empty window set".into()));
    }
    let (mut se, mut ae, mut n) = (0.0, 0.0, 0usize);
    for b in windows.batches(batch_size) {
        let pred = model.predict(&b.x, &b.obs_stamps, &b.target_stamps)?;
        let k = pred.numel();
        se += mse(&pred, &b.y)? * k as f64;
        ae += mae(&pred, &b.y)? * k as f64;
        n += k;
    }
    Ok((se / n as f64, ae / n as f64))
}

fn non_finite_grads(grads: &[Option<Tensor>]) -> bool {
    grads.iter().flatten().any(|g| !g.is_finite())
}

/// Mini-batch training with Adam and per-epoch learning-rate decay.
///
/// With a validation set the parameters of the best validation epoch are
/// restored at the end; `patience` consecutive epochs without improvement
/// stop the run early.
pub fn train(
    model: &mut Forecaster,
    train_set: &WindowedDataset,
    val_set: Option<&WindowedDataset>,
    cfg: &TrainConfig,
    mut log: Option<&mut RunLog>,
) -> Result<History> {
    cfg.validate()?;
    let mc = model.config();
    for set in std::iter::once(train_set).chain(val_set) {
        if set.obs_len() != mc.obs_len || set.pred_len() != mc.pred_len || set.channels() != mc.channels {
            return Err(Error::Data(format!(
                "windows (T={}, tau={}, C={}) do not match the model (T={}, tau={}, C={})",
                set.obs_len(),
                set.pred_len(),
                set.channels(),
                mc.obs_len,
                mc.pred_len,
                mc.channels
            )));
        }
    }
    if train_set.is_empty() {
        return Err(Error::Data("no training windows".into()));
    }

    let root = Rng::new(cfg.seed);
    let shuffle_root = root.derive(SHUFFLE_STREAM);
    let dropout_root = root.derive(DROPOUT_STREAM);
    let mut adam = AdamState::new(model.params());
    let mut history = History::default();
    let mut best: Option<(f64, ParamStore)> = None;
    let mut since_best = 0usize;

    for epoch in 0..cfg.epochs {
        let started = Instant::now();
        let lr = cfg.lr_at(epoch);
        let mut order: Vec<usize> = (0..train_set.len()).collect();
        shuffle_root.derive(epoch as u64).shuffle(&mut order);
        let (mut loss_sum, mut seen) = (0.0, 0usize);
        for (bi, idx) in order.chunks(cfg.batch_size).enumerate() {
            let batch = train_set.batch(idx);
            let stream = ((epoch as u64) << 32) | bi as u64;
            let (loss, grads) = batch_gradients(model, &batch, Some(dropout_root.derive(stream)))?;
            if !loss.is_finite() || non_finite_grads(&grads) {
                return Err(Error::Numeric {
                    epoch,
                    batch: bi,
                    lr,
                    msg: format!("non-finite loss or gradient (loss = {loss})"),
                });
            }
            adam.step(model.params_mut(), &grads, lr)?;
            loss_sum += loss * idx.len() as f64;
            seen += idx.len();
        }
        let train_mse = loss_sum / seen as f64;

        let (val_mse, val_mae) = match val_set {
            Some(v) if cfg.eval_each_epoch || epoch + 1 == cfg.epochs => {
                let (m, a) = evaluate(model, v, cfg.batch_size)?;
                (Some(m), Some(a))
            }
            _ => (None, None),
        };
        let record = EpochRecord {
            epoch,
            lr,
            train_mse,
            val_mse,
            val_mae,
            seconds: started.elapsed().as_secs_f64(),
        };
        log::info!(
            "epoch {epoch}: lr {lr:.3e} train {train_mse:.6} val {}",
            val_mse.map_or("-".into(), |v| format!("{v:.6}"))
        );
        if let Some(l) = log.as_deref_mut() {
            l.append(&record)?;
        }
        history.epochs.push(record);

        if let Some(vm) = val_mse {
            if !vm.is_finite() {
                return Err(Error::Numeric {
                    epoch,
                    batch: 0,
                    lr,
                    msg: format!("non-finite validation MSE {vm}"),
                });
            }
            if best.as_ref().map_or(true, |(b, _)| vm < *b) {
                best = Some((vm, model.params().clone()));
                history.best_epoch = Some(epoch);
                since_best = 0;
            } else {
                since_best += 1;
                if cfg.patience > 0 && since_best >= cfg.patience {
                    history.stopped_early = true;
                    break;
                }
            }
        }
    }
    if let Some((_, params)) = best {
        model.load_params(&params)?;
    }
    Ok(history)
}

/// Repeated Adam steps on one fixed batch in eval mode. Returns the loss
/// before every step.
pub fn overfit_batch(model: &mut Forecaster, batch: &Batch, steps: usize, lr: f64) -> Result<Vec<f64>> {
    let mut adam = AdamState::new(model.params());
    let mut losses = Vec::with_capacity(steps);
    for step in 0..steps {
        let (loss, grads) = batch_gradients(model, batch, None)?;
        if !loss.is_finite() || non_finite_grads(&grads) {
            return Err(Error::Numeric {
                epoch: 0,
                batch: step,
                lr,
                msg: "non-finite loss or gradient".into(),
            });
        }
        adam.step(model.params_mut(), &grads, lr)?;
        losses.push(loss);
    }
    Ok(losses)
}

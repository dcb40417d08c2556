use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::Prepared;
use crate::error::{Error, Result};
use crate::models::{make_model, Forecaster, ModelConfig};
use crate::train::{evaluate, train, History, RunLog, TrainConfig};

use super::evaluate_raw;
use super::report::{MetricsReport, Provenance, ReportRow};

/// One grid: every variant × T × τ × seed.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSpec {
    pub dataset: String,
    /// Model templates; T and τ are overwritten per cell.
    pub variants: Vec<ModelConfig>,
    pub obs_lens: Vec<usize>,
    pub pred_lens: Vec<usize>,
    pub seeds: Vec<u64>,
    /// Keep, per (variant, τ, seed), only the T with the lowest test MSE.
    pub best_t_mode: bool,
    /// Report metrics on the original scale instead of the standardized one.
    #[serde(default)]
    pub raw_metrics: bool,
}

impl ExperimentSpec {
    pub fn validate(&self) -> Result<()> {
        if self.variants.is_empty() || self.obs_lens.is_empty() || self.pred_lens.is_empty() || self.seeds.is_empty() {
            return Err(Error::Config("experiment grids must not be empty".into()));
        }
        Ok(())
    }

    /// Cells in report order: variant, then T, then τ, then seed.
    pub fn cells(&self) -> Vec<Cell> {
        let mut out = Vec::new();
        for v in &self.variants {
            for &t in &self.obs_lens {
                for &tau in &self.pred_lens {
                    for &seed in &self.seeds {
                        let mut model = v.clone();
                        model.obs_len = t;
                        model.pred_len = tau;
                        out.push(Cell {
                            model,
                            seed,
                            raw_metrics: self.raw_metrics,
                        });
                    }
                }
            }
        }
        out
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Cell {
    pub model: ModelConfig,
    pub seed: u64,
    pub raw_metrics: bool,
}

/// A trained cell and its test metrics.
#[derive(Clone, Debug)]
pub struct CellOutcome {
    pub model: Forecaster,
    pub history: History,
    pub mse: f64,
    pub mae: f64,
}

/// Train one cell on the prepared data and evaluate it on the test split.
///
/// The cell seed drives both initialization and training order.
pub fn fit_cell(
    prepared: &Prepared,
    cell: &Cell,
    train_cfg: &TrainConfig,
    log: Option<&mut RunLog>,
) -> Result<CellOutcome> {
    let mut model_cfg = cell.model.clone();
    model_cfg.channels = prepared.manifest.channels;
    let sets = prepared.windows(model_cfg.obs_len, model_cfg.pred_len)?;
    let mut model = make_model(&model_cfg, cell.seed)?;
    let cfg = TrainConfig {
        seed: cell.seed,
        ..train_cfg.clone()
    };
    let history = train(&mut model, &sets.train, Some(&sets.val), &cfg, log)?;
    let (mse, mae) = if cell.raw_metrics {
        evaluate_raw(&model, &sets.test, cfg.batch_size, &prepared.split.scaler)?
    } else {
        evaluate(&model, &sets.test, cfg.batch_size)?
    };
    Ok(CellOutcome { model, history, mse, mae })
}

/// Test (MSE, MAE) of one trained cell.
pub fn run_cell(prepared: &Prepared, cell: &Cell, train_cfg: &TrainConfig, log: Option<&mut RunLog>) -> Result<(f64, f64)> {
    fit_cell(prepared, cell, train_cfg, log).map(|o| (o.mse, o.mae))
}

impl ReportRow {
    /// The report row for `cell`; errors become a failed row.
    pub fn for_cell(dataset: &str, cell: &Cell, result: Result<(f64, f64)>) -> Self {
        let (mse, mae, status) = match result {
            Ok((m, a)) => (Some(m), Some(a), "ok".to_string()),
            Err(e) => {
                log::warn!(
                    "cell {} T={} tau={} seed={} failed: {e}",
                    cell.model.label(),
                    cell.model.obs_len,
                    cell.model.pred_len,
                    cell.seed
                );
                (None, None, format!("failed: {e}"))
            }
        };
        ReportRow {
            variant: cell.model.label(),
            dataset: dataset.to_string(),
            obs_len: cell.model.obs_len,
            pred_len: cell.model.pred_len,
            seed: Some(cell.seed),
            mse,
            mae,
            status,
        }
    }
}

/// Run every cell, `jobs` at a time. Failed cells are recorded, not fatal.
pub fn run_grid(
    spec: &ExperimentSpec,
    prepared: &Prepared,
    train_cfg: &TrainConfig,
    jobs: usize,
    provenance: Provenance,
) -> Result<MetricsReport> {
    spec.validate()?;
    train_cfg.validate()?;
    let cells = spec.cells();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| Error::Config(format!("cannot start {jobs} workers: {e}")))?;
    let rows: Vec<ReportRow> = pool.install(|| {
        cells
            .par_iter()
            .map(|c| ReportRow::for_cell(&spec.dataset, c, run_cell(prepared, c, train_cfg, None)))
            .collect()
    });
    let rows = if spec.best_t_mode { best_t(&rows) } else { rows };
    Ok(MetricsReport { rows, provenance })
}

/// Per (variant, dataset, τ, seed), the successful row with the lowest MSE
/// across T. Ties keep the smaller T. Groups with no success keep their
/// first failed row.
pub fn best_t(rows: &[ReportRow]) -> Vec<ReportRow> {
    let mut best: BTreeMap<(String, String, usize, Option<u64>), ReportRow> = BTreeMap::new();
    let mut order = Vec::new();
    for r in rows {
        let key = (r.variant.clone(), r.dataset.clone(), r.pred_len, r.seed);
        match best.get(&key) {
            None => {
                order.push(key.clone());
                best.insert(key, r.clone());
            }
            Some(cur) => {
                let better = match (r.mse, cur.mse) {
                    (Some(a), Some(b)) => a < b || (a == b && r.obs_len < cur.obs_len),
                    (Some(_), None) => true,
                    _ => false,
                };
                if better {
                    best.insert(key, r.clone());
                }
            }
        }
    }
    order.into_iter().map(|k| best.remove(&k).expect("key present")).collect()
}

/// Average successful rows over seeds per (variant, dataset, T, τ); the
/// result has `seed == None`.
pub fn mean_over_seeds(rows: &[ReportRow]) -> Vec<ReportRow> {
    // (variant, dataset, T, τ) → (Σ mse, Σ mae, successes)
    type Key = (String, String, usize, usize);
    let mut acc: BTreeMap<Key, (f64, f64, usize)> = BTreeMap::new();
    let mut order = Vec::new();
    for r in rows {
        let key = (r.variant.clone(), r.dataset.clone(), r.obs_len, r.pred_len);
        let e = acc.entry(key.clone()).or_insert_with(|| {
            order.push(key.clone());
            (0.0, 0.0, 0)
        });
        if let (Some(m), Some(a)) = (r.mse, r.mae) {
            e.0 += m;
            e.1 += a;
            e.2 += 1;
        }
    }
    order
        .into_iter()
        .map(|k| {
            let (m, a, n) = acc[&k];
            let ok = n > 0;
            ReportRow {
                variant: k.0,
                dataset: k.1,
                obs_len: k.2,
                pred_len: k.3,
                seed: None,
                mse: ok.then(|| m / n as f64),
                mae: ok.then(|| a / n as f64),
                status: if ok { "ok".into() } else { "failed: no successful seed".into() },
            }
        })
        .collect()
}

//! Evaluation grids, metric reports and curve export.

mod grid;
mod manifest;
mod plot;
mod report;

pub use grid::{best_t, fit_cell, mean_over_seeds, run_cell, run_grid, Cell, CellOutcome, ExperimentSpec};
pub use manifest::RunManifest;
pub use plot::{inverse_mse_curves, prediction_traces};
pub use report::{
    emit_report, parse_report_csv, sha256_hex, MetricsReport, Provenance, ReportFormat, ReportRow, CSV_HEADER,
};
pub use crate::train::evaluate;

use crate::data::{Scaler, WindowedDataset};
use crate::error::{Error, Result};
use crate::models::Forecaster;
use crate::train::{mae, mse};

/// Like [`evaluate`] but on the original scale: predictions and targets are
/// mapped back through `scaler` first.
pub fn evaluate_raw(
    model: &Forecaster,
    windows: &WindowedDataset,
    batch_size: usize,
    scaler: &Scaler,
) -> Result<(f64, f64)> {
    if windows.is_empty() {
        return Err(Error::Data("cannot evaluate on an empty window set".into()));
    }
    let (mut se, mut ae, mut n) = (0.0, 0.0, 0usize);
    for b in windows.batches(batch_size) {
        let pred = model.predict(&b.x, &b.obs_stamps, &b.target_stamps)?;
        let p = scaler.inverse(&pred);
        let y = scaler.inverse(&b.y);
        let k = p.numel();
        se += mse(&p, &y)? * k as f64;
        ae += mae(&p, &y)? * k as f64;
        n += k;
    }
    Ok((se / n as f64, ae / n as f64))
}

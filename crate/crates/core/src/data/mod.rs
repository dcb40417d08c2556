//! Series ingestion, chronological splits, windows and synthetic data.

mod csv;
mod manifest;
mod split;
mod synthetic;
mod windows;

pub use self::csv::{load_csv, parse_csv, write_csv, CsvSchema, RawSeries, TimestampKind};
pub use manifest::{DatasetManifest, SplitSizes};
pub use split::{split_and_scale, Scaler, Segment, SplitRatio, SplitSeries};
pub use synthetic::{gen_synthetic, synthetic_epoch, LagLink, SpikeRule, SyntheticSpec};
pub use windows::{make_windows, Batch, Window, WindowedDataset};

use crate::calendar::{extract_stamps, Component};
use crate::error::Result;

/// A standardized, split series plus its manifest.
#[derive(Clone, Debug)]
pub struct Prepared {
    pub split: SplitSeries,
    pub manifest: DatasetManifest,
}

/// Windowed train, validation and test sets.
#[derive(Clone, Debug)]
pub struct WindowSets {
    pub train: WindowedDataset,
    pub val: WindowedDataset,
    pub test: WindowedDataset,
}

/// Stamp, split and standardize `series`.
pub fn prepare(
    source: &str,
    series: &RawSeries,
    ratio: SplitRatio,
    components: &[Component],
    minute_bins: usize,
) -> Result<Prepared> {
    let stamps = extract_stamps(&series.timestamps, components, minute_bins)?;
    let split = split_and_scale(series, ratio, &stamps)?;
    let manifest = DatasetManifest::new(source, series, ratio, &split, stamps.components());
    Ok(Prepared { split, manifest })
}

impl Prepared {
    /// Stride-1 windows of every segment.
    pub fn windows(&self, obs_len: usize, pred_len: usize) -> Result<WindowSets> {
        Ok(WindowSets {
            train: make_windows(&self.split.train, obs_len, pred_len, 1)?,
            val: make_windows(&self.split.val, obs_len, pred_len, 1)?,
            test: make_windows(&self.split.test, obs_len, pred_len, 1)?,
        })
    }
}

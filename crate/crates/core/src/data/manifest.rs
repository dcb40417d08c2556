use serde::{Deserialize, Serialize};

use crate::calendar::Component;

use super::split::{Scaler, SplitRatio, SplitSeries};
use super::csv::RawSeries;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SplitSizes {
    pub train: usize,
    pub val: usize,
    pub test: usize,
}

/// Summary of a prepared dataset, written next to run outputs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub source: String,
    pub rows: usize,
    pub channels: usize,
    pub channel_names: Vec<String>,
    /// Seconds between rows for calendar data, steps for index data.
    pub interval: Option<i64>,
    pub first: Option<String>,
    pub last: Option<String>,
    pub ratio: String,
    pub split: SplitSizes,
    pub components: Vec<Component>,
    pub scaler: Scaler,
    pub degenerate_channels: Vec<usize>,
}

impl DatasetManifest {
    pub fn new(
        source: &str,
        series: &RawSeries,
        ratio: SplitRatio,
        split: &SplitSeries,
        components: &[Component],
    ) -> Self {
        Self {
            source: source.to_string(),
            rows: series.len(),
            channels: series.channels(),
            channel_names: series.channel_names.clone(),
            interval: series.interval(),
            first: series.timestamps.first().map(|t| t.to_string()),
            last: series.timestamps.last().map(|t| t.to_string()),
            ratio: ratio.to_string(),
            split: SplitSizes {
                train: split.train.len(),
                val: split.val.len(),
                test: split.test.len(),
            },
            components: components.to_vec(),
            scaler: split.scaler.clone(),
            degenerate_channels: split.scaler.degenerate(),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("manifest serializes")
    }
}

use serde::{Deserialize, Serialize};

use crate::data::DatasetManifest;
use crate::error::{Error, Result};

use super::report::Provenance;

/// Everything needed to rerun a command: the resolved run file, seeds and
/// build identity, plus what was produced.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub provenance: Provenance,
    pub seeds: Vec<u64>,
    /// Fully explicit TOML run file that reproduces this run.
    pub runfile: String,
    pub dataset: DatasetManifest,
    pub outputs: Vec<String>,
    pub seconds: f64,
}

impl RunManifest {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("manifest serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Parse {
            row: e.line(),
            msg: format!("run manifest: {e}"),
        })
    }
}

//! Line-oriented text checkpoints.
//!
//! ```text
//! STLCKPT 1
//! seed 2021
//! config {"variant":"stl",...}
//! params 18
//! p core.l1.weight 24,48 3fb99999999999a0 ...
//! ...
//! end
//! ```
//!
//! Each value is the IEEE-754 bit pattern of an `f64` in lowercase hex, so a
//! round trip is bit-exact. The parameter list must match, in order, the
//! names and shapes that `(config, seed)` builds.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::nn::ParamStore;
use crate::tensor::Tensor;

use super::{make_model, Forecaster, ModelConfig};

pub const CHECKPOINT_MAGIC: &str = "STLCKPT";
pub const CHECKPOINT_VERSION: u32 = 1;
/// Upper bound on `obs_len × channels` accepted from a file; the positional
/// table is allocated at that size before any parameter is checked.
const MAX_INPUT_CELLS: usize = 1 << 26;

pub fn encode_checkpoint(model: &Forecaster) -> String {
    let mut out = String::new();
    let config = serde_json::to_string(model.config()).expect("config serializes");
    let _ = writeln!(out, "{CHECKPOINT_MAGIC} {CHECKPOINT_VERSION}");
    let _ = writeln!(out, "seed {}", model.seed());
    let _ = writeln!(out, "config {config}");
    let _ = writeln!(out, "params {}", model.params().len());
    for p in model.params().iter() {
        let shape: Vec<String> = p.value.shape().iter().map(|d| d.to_string()).collect();
        let _ = write!(out, "p {} {}", p.name, shape.join(","));
        for v in p.value.data() {
            let _ = write!(out, " {:016x}", v.to_bits());
        }
        out.push('\n');
    }
    out.push_str("end\n");
    out
}

fn corrupt(line: usize, msg: impl std::fmt::Display) -> Error {
    Error::Checkpoint(format!("corrupt checkpoint at line {line}: {msg}"))
}

/// Parse checkpoint text and rebuild the model it describes.
pub fn decode_checkpoint(text: &str) -> Result<Forecaster> {
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l));
    let mut next = |what: &str| {
        lines
            .next()
            .ok_or_else(|| corrupt(0, format!("unexpected end of file, expected {what}")))
    };

    let (n, header) = next("header")?;
    let mut parts = header.split_whitespace();
    if parts.next() != Some(CHECKPOINT_MAGIC) {
        return Err(corrupt(n, "missing magic"));
    }
    let version: u32 = parts
        .next()
        .and_then(|v| v.parse().ok())
        .ok_or_else(|| corrupt(n, "missing version"))?;
    if version != CHECKPOINT_VERSION {
        return Err(Error::Checkpoint(format!(
            "unsupported checkpoint version {version} (expected {CHECKPOINT_VERSION})"
        )));
    }

    let (n, line) = next("seed")?;
    let seed: u64 = line
        .strip_prefix("seed ")
        .and_then(|s| s.trim().parse().ok())
        .ok_or_else(|| corrupt(n, "bad seed line"))?;

    let (n, line) = next("config")?;
    let json = line.strip_prefix("config ").ok_or_else(|| corrupt(n, "bad config line"))?;
    let config: ModelConfig = serde_json::from_str(json).map_err(|e| corrupt(n, e))?;
    config.validate()?;
    if config.obs_len.saturating_mul(config.channels) > MAX_INPUT_CELLS {
        return Err(corrupt(n, "observation window is implausibly large"));
    }

    let (n, line) = next("params")?;
    let count: usize = line
        .strip_prefix("params ")
        .and_then(|s| s.trim().parse().ok())
        .ok_or_else(|| corrupt(n, "bad params line"))?;

    let mut store = ParamStore::new();
    let mut scalars = 0usize;
    for _ in 0..count {
        let (n, line) = next("parameter")?;
        let mut f = line.split(' ');
        if f.next() != Some("p") {
            return Err(corrupt(n, "expected a parameter line"));
        }
        let name = f.next().filter(|s| !s.is_empty()).ok_or_else(|| corrupt(n, "missing name"))?;
        let shape: Vec<usize> = f
            .next()
            .ok_or_else(|| corrupt(n, "missing shape"))?
            .split(',')
            .map(|d| d.parse::<usize>().map_err(|e| corrupt(n, e)))
            .collect::<Result<_>>()?;
        let data: Vec<f64> = f
            .map(|h| {
                if h.len() != 16 {
                    return Err(corrupt(n, format!("bad value {h:?}")));
                }
                u64::from_str_radix(h, 16)
                    .map(f64::from_bits)
                    .map_err(|e| corrupt(n, e))
            })
            .collect::<Result<_>>()?;
        scalars += data.len();
        let value = Tensor::new(&shape, data).map_err(|e| corrupt(n, e))?;
        store.add(name, value);
    }
    let (n, line) = next("end")?;
    if line != "end" {
        return Err(corrupt(n, "missing end marker"));
    }

    if scalars != config.param_count() {
        return Err(Error::Checkpoint(format!(
            "checkpoint holds {scalars} values but its config needs {}",
            config.param_count()
        )));
    }
    let mut model = make_model(&config, seed)?;
    model.load_params(&store)?;
    Ok(model)
}

pub fn save_checkpoint(model: &Forecaster, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, encode_checkpoint(model)).map_err(|e| Error::io(path, e))
}

pub fn load_checkpoint(path: impl AsRef<Path>) -> Result<Forecaster> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    decode_checkpoint(&text)
}

/// Load a checkpoint and require its config to equal `expected`.
pub fn load_checkpoint_expecting(path: impl AsRef<Path>, expected: &ModelConfig) -> Result<Forecaster> {
    let model = load_checkpoint(path)?;
    if model.config() != expected {
        return Err(Error::Checkpoint(format!(
            "config mismatch: checkpoint has {}, run expects {}",
            serde_json::to_string(model.config()).unwrap_or_default(),
            serde_json::to_string(expected).unwrap_or_default()
        )));
    }
    Ok(model)
}

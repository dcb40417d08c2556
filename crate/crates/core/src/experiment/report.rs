use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

/// One grid cell's test metrics. `seed == None` marks a seed average.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub variant: String,
    pub dataset: String,
    pub obs_len: usize,
    pub pred_len: usize,
    pub seed: Option<u64>,
    pub mse: Option<f64>,
    pub mae: Option<f64>,
    pub status: String,
}

/// Where a report came from.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    /// SHA-256 of the canonical JSON of the resolved run configuration.
    pub config_hash: String,
    pub commit: String,
    pub version: String,
}

impl Provenance {
    /// Hash `config`; the commit comes from `STL_COMMIT` when set.
    pub fn for_config<T: Serialize>(config: &T) -> Result<Self> {
        let json = serde_json::to_string(config).map_err(|e| Error::Config(format!("cannot serialize config: {e}")))?;
        Ok(Self {
            config_hash: sha256_hex(json.as_bytes()),
            commit: std::env::var("STL_COMMIT").unwrap_or_else(|_| "unknown".into()),
            version: env!("CARGO_PKG_VERSION").to_string(),
        })
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub rows: Vec<ReportRow>,
    pub provenance: Provenance,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ReportFormat {
    Csv,
    Markdown,
}

pub const CSV_HEADER: &str = "variant,dataset,T,tau,seed,mse,mae,status";

fn metric(v: Option<f64>) -> String {
    // 17 significant digits round-trip every f64
    v.map_or_else(|| "nan".into(), |x| format!("{x:.16e}"))
}

fn seed_text(s: Option<u64>) -> String {
    s.map_or_else(|| "mean".into(), |s| s.to_string())
}

impl MetricsReport {
    pub fn to_csv(&self) -> String {
        let mut w = csv::WriterBuilder::new().from_writer(Vec::new());
        let header: Vec<&str> = CSV_HEADER.split(',').collect();
        w.write_record(&header).expect("in-memory write");
        for r in &self.rows {
            w.write_record([
                r.variant.clone(),
                r.dataset.clone(),
                r.obs_len.to_string(),
                r.pred_len.to_string(),
                seed_text(r.seed),
                metric(r.mse),
                metric(r.mae),
                r.status.clone(),
            ])
            .expect("in-memory write");
        }
        String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8 fields")
    }

    /// Markdown table; the lowest MSE among variants sharing
    /// (dataset, T, τ, seed) is bold.
    pub fn to_markdown(&self) -> String {
        let mut best: BTreeMap<(&str, usize, usize, Option<u64>), f64> = BTreeMap::new();
        for r in &self.rows {
            if let Some(m) = r.mse {
                let e = best.entry((&r.dataset, r.obs_len, r.pred_len, r.seed)).or_insert(m);
                if m < *e {
                    *e = m;
                }
            }
        }
        let mut out = String::new();
        let _ = writeln!(out, "<!-- config {} version {} commit {} -->", self.provenance.config_hash, self.provenance.version, self.provenance.commit);
        out.push_str("| variant | dataset | T | tau | seed | MSE | MAE | status |\n");
        out.push_str("|---|---|---:|---:|---:|---:|---:|---|\n");
        for r in &self.rows {
            let mse = match r.mse {
                Some(m) if best.get(&(r.dataset.as_str(), r.obs_len, r.pred_len, r.seed)) == Some(&m) => format!("**{m:.4}**"),
                Some(m) => format!("{m:.4}"),
                None => "-".into(),
            };
            let mae = r.mae.map_or("-".into(), |a| format!("{a:.4}"));
            let _ = writeln!(
                out,
                "| {} | {} | {} | {} | {} | {} | {} | {} |",
                r.variant,
                r.dataset,
                r.obs_len,
                r.pred_len,
                seed_text(r.seed),
                mse,
                mae,
                r.status.replace('|', "/")
            );
        }
        out
    }

    pub fn render(&self, format: ReportFormat) -> String {
        match format {
            ReportFormat::Csv => self.to_csv(),
            ReportFormat::Markdown => self.to_markdown(),
        }
    }
}

/// Write the report in `format` to `path`.
pub fn emit_report(report: &MetricsReport, format: ReportFormat, path: &Path) -> Result<()> {
    std::fs::write(path, report.render(format)).map_err(|e| Error::io(path, e))
}

fn parse_metric(s: &str, row: usize) -> Result<Option<f64>> {
    if s == "nan" {
        return Ok(None);
    }
    s.parse::<f64>()
        .map(Some)
        .map_err(|_| Error::Parse { row, msg: format!("bad metric {s:?}") })
}

/// Parse the CSV form back into rows. Provenance is not part of the CSV.
pub fn parse_report_csv(text: &str) -> Result<Vec<ReportRow>> {
    let mut rd = csv::ReaderBuilder::new().has_headers(true).from_reader(text.as_bytes());
    let header = rd.headers().map_err(|e| Error::Parse { row: 1, msg: e.to_string() })?.clone();
    if header.iter().collect::<Vec<_>>().join(",") != CSV_HEADER {
        return Err(Error::Parse { row: 1, msg: format!("expected header {CSV_HEADER}") });
    }
    let mut rows = Vec::new();
    for (i, rec) in rd.records().enumerate() {
        let row = i + 2;
        let rec = rec.map_err(|e| Error::Parse { row, msg: e.to_string() })?;
        if rec.len() != 8 {
            return Err(Error::Parse { row, msg: format!("expected 8 fields, got {}", rec.len()) });
        }
        let int = |s: &str| s.parse::<usize>().map_err(|_| Error::Parse { row, msg: format!("bad integer {s:?}") });
        let seed = match &rec[4] {
            "mean" => None,
            s => Some(s.parse::<u64>().map_err(|_| Error::Parse { row, msg: format!("bad seed {s:?}") })?),
        };
        rows.push(ReportRow {
            variant: rec[0].to_string(),
            dataset: rec[1].to_string(),
            obs_len: int(&rec[2])?,
            pred_len: int(&rec[3])?,
            seed,
            mse: parse_metric(&rec[5], row)?,
            mae: parse_metric(&rec[6], row)?,
            status: rec[7].to_string(),
        });
    }
    Ok(rows)
}

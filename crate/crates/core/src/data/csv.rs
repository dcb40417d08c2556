use std::io::{Read, Write};
use std::path::Path;

use chrono::{NaiveDate, NaiveDateTime};

use crate::calendar::Timestamp;
use crate::error::{Error, Result};
use crate::tensor::Tensor;

const DATETIME_FORMATS: [&str; 4] = [
    "%Y-%m-%d %H:%M:%S",
    "%Y-%m-%d %H:%M",
    "%Y-%m-%dT%H:%M:%S",
    "%Y-%m-%dT%H:%M",
];

/// A validated multivariate series.
#[derive(Clone, Debug, PartialEq)]
pub struct RawSeries {
    pub timestamps: Vec<Timestamp>,
    /// `[L, C]`, one row per timestamp.
    pub values: Tensor,
    pub channel_names: Vec<String>,
}

impl RawSeries {
    pub fn new(timestamps: Vec<Timestamp>, values: Tensor, channel_names: Vec<String>) -> Result<Self> {
        if values.rank() != 2 || values.shape()[0] != timestamps.len() {
            return Err(Error::Data(format!(
                "{} timestamps for values of shape {:?}",
                timestamps.len(),
                values.shape()
            )));
        }
        if channel_names.len() != values.shape()[1] {
            return Err(Error::Data(format!(
                "{} channel names for {} channels",
                channel_names.len(),
                values.shape()[1]
            )));
        }
        check_uniform(&timestamps, |i| i + 1)?;
        Ok(Self {
            timestamps,
            values,
            channel_names,
        })
    }

    pub fn len(&self) -> usize {
        self.timestamps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.timestamps.is_empty()
    }

    pub fn channels(&self) -> usize {
        self.values.shape()[1]
    }

    /// Spacing between rows in seconds (calendar) or steps (index).
    pub fn interval(&self) -> Option<i64> {
        match self.timestamps.as_slice() {
            [a, b, ..] => a.delta(b),
            _ => None,
        }
    }

    pub fn column(&self, c: usize) -> Vec<f64> {
        let cols = self.channels();
        self.values.data().iter().skip(c).step_by(cols).copied().collect()
    }
}

/// Reject duplicate, decreasing and irregular timestamps. `row_of` maps a
/// series index to the row number quoted in errors.
fn check_uniform(ts: &[Timestamp], row_of: impl Fn(usize) -> usize) -> Result<()> {
    let Some(step) = ts.get(1).and_then(|b| ts[0].delta(b)) else {
        if ts.len() > 1 {
            return Err(Error::Data("mixed calendar and index timestamps".into()));
        }
        return Ok(());
    };
    if step <= 0 {
        return Err(Error::Data(format!(
            "timestamps must strictly increase; row {} repeats or precedes row {}",
            row_of(1),
            row_of(0)
        )));
    }
    for i in 1..ts.len() {
        match ts[i - 1].delta(&ts[i]) {
            Some(d) if d == step => {}
            Some(d) if d <= 0 => {
                return Err(Error::Data(format!(
                    "timestamps must strictly increase; row {} is {} after row {}",
                    row_of(i),
                    ts[i],
                    ts[i - 1]
                )))
            }
            Some(d) => {
                return Err(Error::Data(format!(
                    "irregular interval at row {}: {d} instead of {step} after {}",
                    row_of(i),
                    ts[i - 1]
                )))
            }
            None => return Err(Error::Data(format!("mixed timestamp kinds at row {}", row_of(i)))),
        }
    }
    Ok(())
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TimestampKind {
    /// Decide from the first data row.
    #[default]
    Auto,
    Calendar,
    Index,
}

/// Layout of an input file: the first column holds timestamps, the rest
/// numeric channels.
#[derive(Clone, Debug)]
pub struct CsvSchema {
    pub delimiter: u8,
    pub timestamps: TimestampKind,
    /// Keep only these channels, in this order. `None` keeps all.
    pub channels: Option<Vec<String>>,
}

impl Default for CsvSchema {
    fn default() -> Self {
        Self {
            delimiter: b',',
            timestamps: TimestampKind::Auto,
            channels: None,
        }
    }
}

fn parse_datetime(s: &str) -> Option<NaiveDateTime> {
    DATETIME_FORMATS
        .iter()
        .find_map(|f| NaiveDateTime::parse_from_str(s, f).ok())
        .or_else(|| {
            NaiveDate::parse_from_str(s, "%Y-%m-%d")
                .ok()
                .and_then(|d| d.and_hms_opt(0, 0, 0))
        })
}

fn parse_timestamp(s: &str, kind: TimestampKind, row: usize) -> Result<Timestamp> {
    let s = s.trim();
    let as_index = || s.parse::<i64>().ok().map(Timestamp::Index);
    let as_cal = || parse_datetime(s).map(Timestamp::Calendar);
    let ts = match kind {
        TimestampKind::Auto => as_index().or_else(as_cal),
        TimestampKind::Calendar => as_cal(),
        TimestampKind::Index => as_index(),
    };
    ts.ok_or_else(|| Error::Parse {
        row,
        msg: format!("unparseable timestamp {s:?}"),
    })
}

/// Parse a headed CSV. Rows are numbered from 1 with the header as row 1.
pub fn parse_csv<R: Read>(reader: R, schema: &CsvSchema) -> Result<RawSeries> {
    let mut rdr = csv::ReaderBuilder::new()
        .delimiter(schema.delimiter)
        .has_headers(true)
        .flexible(true)
        .from_reader(reader);
    let header: Vec<String> = rdr
        .headers()
        .map_err(|e| Error::Parse { row: 1, msg: e.to_string() })?
        .iter()
        .map(|h| h.trim().to_string())
        .collect();
    if header.len() < 2 {
        return Err(Error::Parse {
            row: 1,
            msg: "need a timestamp column and at least one channel".into(),
        });
    }
    let all_names = &header[1..];
    let pick: Vec<usize> = match &schema.channels {
        None => (0..all_names.len()).collect(),
        Some(want) => want
            .iter()
            .map(|w| {
                all_names.iter().position(|n| n == w).ok_or_else(|| Error::Parse {
                    row: 1,
                    msg: format!("no column named {w:?}"),
                })
            })
            .collect::<Result<_>>()?,
    };
    if pick.is_empty() {
        return Err(Error::Parse { row: 1, msg: "no channels selected".into() });
    }

    let mut kind = schema.timestamps;
    let mut timestamps = Vec::new();
    let mut values = Vec::new();
    let mut cells = Vec::with_capacity(all_names.len());
    for (i, rec) in rdr.records().enumerate() {
        let row = i + 2;
        let rec = rec.map_err(|e| Error::Parse { row, msg: e.to_string() })?;
        if rec.len() != header.len() {
            return Err(Error::Parse {
                row,
                msg: format!("expected {} fields, found {}", header.len(), rec.len()),
            });
        }
        let ts = parse_timestamp(&rec[0], kind, row)?;
        if kind == TimestampKind::Auto {
            kind = match ts {
                Timestamp::Calendar(_) => TimestampKind::Calendar,
                Timestamp::Index(_) => TimestampKind::Index,
            };
        }
        timestamps.push(ts);
        cells.clear();
        for (j, field) in rec.iter().skip(1).enumerate() {
            let v: f64 = field.trim().parse().map_err(|_| Error::Parse {
                row,
                msg: format!("column {:?}: not a number: {field:?}", all_names[j]),
            })?;
            if !v.is_finite() {
                return Err(Error::Parse {
                    row,
                    msg: format!("column {:?}: non-finite value {field:?}", all_names[j]),
                });
            }
            cells.push(v);
        }
        values.extend(pick.iter().map(|&j| cells[j]));
    }
    if timestamps.is_empty() {
        return Err(Error::Data("file has no data rows".into()));
    }
    check_uniform(&timestamps, |i| i + 2)?;
    let channel_names = pick.iter().map(|&j| all_names[j].clone()).collect();
    let values = Tensor::new(&[timestamps.len(), pick.len()], values)?;
    Ok(RawSeries {
        timestamps,
        values,
        channel_names,
    })
}

pub fn load_csv(path: impl AsRef<Path>, schema: &CsvSchema) -> Result<RawSeries> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    parse_csv(std::io::BufReader::new(file), schema).map_err(|e| match e {
        Error::Parse { row, msg } => Error::Parse {
            row,
            msg: format!("{}: {msg}", path.display()),
        },
        Error::Data(msg) => Error::Data(format!("{}: {msg}", path.display())),
        other => other,
    })
}

/// Write `series` in the layout [`parse_csv`] reads, with a `date` header.
/// Values use the shortest representation that parses back exactly.
pub fn write_csv<W: Write>(series: &RawSeries, writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let io = |e: csv::Error| Error::Data(format!("csv write failed: {e}"));
    let mut header = vec!["date".to_string()];
    header.extend(series.channel_names.iter().cloned());
    w.write_record(&header).map_err(io)?;
    let c = series.channels();
    let mut row = Vec::with_capacity(c + 1);
    for (i, ts) in series.timestamps.iter().enumerate() {
        row.clear();
        row.push(ts.to_string());
        row.extend(series.values.data()[i * c..(i + 1) * c].iter().map(|v| v.to_string()));
        w.write_record(&row).map_err(io)?;
    }
    w.flush().map_err(|e| Error::Data(format!("csv write failed: {e}")))?;
    Ok(())
}

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::calendar::{CalendarStamps, Timestamp};
use crate::error::{Error, Result};
use crate::tensor::Tensor;

use super::csv::RawSeries;

/// Train:validation:test proportions, e.g. `6:2:2`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitRatio {
    pub train: u32,
    pub val: u32,
    pub test: u32,
}

impl SplitRatio {
    pub const fn new(train: u32, val: u32, test: u32) -> Self {
        Self { train, val, test }
    }

    /// Segment lengths for a series of `len` rows: train and validation are
    /// rounded down, the test segment takes the remainder.
    pub fn lengths(&self, len: usize) -> Result<(usize, usize, usize)> {
        let total = self.train as u64 + self.val as u64 + self.test as u64;
        if total == 0 || self.train == 0 {
            return Err(Error::Config(format!("invalid split ratio {self}")));
        }
        let part = |w: u32| ((len as u128 * w as u128) / total as u128) as usize;
        let (a, b) = (part(self.train), part(self.val));
        Ok((a, b, len - a - b))
    }
}

impl fmt::Display for SplitRatio {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}:{}", self.train, self.val, self.test)
    }
}

impl FromStr for SplitRatio {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s.split(':').collect();
        let bad = || Error::Config(format!("split ratio must look like 6:2:2, got {s:?}"));
        if parts.len() != 3 {
            return Err(bad());
        }
        let n: Vec<u32> = parts
            .iter()
            .map(|p| p.trim().parse().map_err(|_| bad()))
            .collect::<Result<_>>()?;
        let r = SplitRatio::new(n[0], n[1], n[2]);
        r.lengths(0)?;
        Ok(r)
    }
}

/// Per-channel z-score parameters.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Scaler {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl Scaler {
    /// Population mean and standard deviation of each column of `[L, C]`.
    pub fn fit(values: &Tensor) -> Self {
        let (l, c) = (values.shape()[0], values.shape()[1]);
        let d = values.data();
        let mut mean = vec![0.0; c];
        for row in d.chunks(c) {
            for (m, v) in mean.iter_mut().zip(row) {
                *m += v;
            }
        }
        mean.iter_mut().for_each(|m| *m /= l as f64);
        let mut var = vec![0.0; c];
        for row in d.chunks(c) {
            for j in 0..c {
                let e = row[j] - mean[j];
                var[j] += e * e;
            }
        }
        let std = var.iter().map(|v| (v / l as f64).sqrt()).collect();
        Self { mean, std }
    }

    /// Channels whose training values are constant.
    pub fn degenerate(&self) -> Vec<usize> {
        (0..self.std.len()).filter(|&j| self.std[j] == 0.0).collect()
    }

    /// `(x − mean) / std`; a zero-std channel maps to zeros.
    pub fn transform(&self, values: &Tensor) -> Tensor {
        let c = self.mean.len();
        let mut out = values.clone();
        for (i, v) in out.data_mut().iter_mut().enumerate() {
            let j = i % c;
            *v = if self.std[j] == 0.0 {
                0.0
            } else {
                (*v - self.mean[j]) / self.std[j]
            };
        }
        out
    }

    /// Map standardized values back; zero-std channels return their mean.
    pub fn inverse(&self, values: &Tensor) -> Tensor {
        let c = self.mean.len();
        let mut out = values.clone();
        for (i, v) in out.data_mut().iter_mut().enumerate() {
            let j = i % c;
            *v = *v * self.std[j] + self.mean[j];
        }
        out
    }
}

/// A contiguous piece of a series with its calendar stamps.
#[derive(Clone, Debug)]
pub struct Segment {
    /// `[len, C]`.
    pub values: Tensor,
    pub timestamps: Vec<Timestamp>,
    pub stamps: CalendarStamps,
    /// Row offset of the first step in the source series.
    pub start: usize,
}

impl Segment {
    pub fn len(&self) -> usize {
        self.timestamps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.timestamps.is_empty()
    }

    pub fn channels(&self) -> usize {
        self.values.shape()[1]
    }
}

/// Chronological train/validation/test segments, standardized with
/// statistics from the training segment.
#[derive(Clone, Debug)]
pub struct SplitSeries {
    pub train: Segment,
    pub val: Segment,
    pub test: Segment,
    pub scaler: Scaler,
}

fn rows(values: &Tensor, start: usize, len: usize) -> Result<Tensor> {
    let c = values.shape()[1];
    Tensor::new(&[len, c], values.data()[start * c..(start + len) * c].to_vec())
}

pub fn split_and_scale(series: &RawSeries, ratio: SplitRatio, stamps: &CalendarStamps) -> Result<SplitSeries> {
    if stamps.len() != series.len() {
        return Err(Error::Data(format!(
            "{} stamp rows for a series of {} rows",
            stamps.len(),
            series.len()
        )));
    }
    let (a, b, c) = ratio.lengths(series.len())?;
    if a == 0 || b == 0 || c == 0 {
        return Err(Error::Data(format!(
            "a series of {} rows split {ratio} leaves an empty segment ({a}/{b}/{c})",
            series.len()
        )));
    }
    let scaler = Scaler::fit(&rows(&series.values, 0, a)?);
    for j in scaler.degenerate() {
        log::warn!(
            "channel {} ({}) is constant on the training segment; scaled to zeros",
            j,
            series.channel_names[j]
        );
    }
    let seg = |start: usize, len: usize| -> Result<Segment> {
        Ok(Segment {
            values: scaler.transform(&rows(&series.values, start, len)?),
            timestamps: series.timestamps[start..start + len].to_vec(),
            stamps: stamps.slice(start, len),
            start,
        })
    };
    Ok(SplitSeries {
        train: seg(0, a)?,
        val: seg(a, b)?,
        test: seg(a + b, c)?,
        scaler: scaler.clone(),
    })
}

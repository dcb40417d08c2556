//! Calendar components and per-step integer stamps.

use std::fmt;
use std::str::FromStr;

use chrono::{Datelike, NaiveDateTime, Timelike};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default number of minute bins (15-minute resolution).
pub const DEFAULT_MINUTE_BINS: usize = 4;

/// A date-time component. The declaration order here is the canonical
/// concatenation order used by the embedding layer.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Component {
    Month,
    Date,
    Weekday,
    Hour,
    Minute,
}

impl Component {
    pub const ALL: [Component; 5] = [
        Component::Month,
        Component::Date,
        Component::Weekday,
        Component::Hour,
        Component::Minute,
    ];

    pub fn cardinality(self, minute_bins: usize) -> usize {
        match self {
            Component::Month => 12,
            Component::Date => 31,
            Component::Weekday => 7,
            Component::Hour => 24,
            Component::Minute => minute_bins,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Component::Month => "month",
            Component::Date => "date",
            Component::Weekday => "weekday",
            Component::Hour => "hour",
            Component::Minute => "minute",
        }
    }

    /// Coarsest sampling interval (seconds, exclusive) at which the
    /// component still varies within a series.
    fn max_interval_secs(self) -> i64 {
        match self {
            Component::Month => 365 * 86_400,
            Component::Date => 28 * 86_400,
            Component::Weekday => 7 * 86_400,
            Component::Hour => 86_400,
            Component::Minute => 3_600,
        }
    }
}

impl fmt::Display for Component {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Component {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Component::ALL
            .into_iter()
            .find(|c| c.name() == s.trim())
            .ok_or_else(|| Error::Config(format!("unknown date-time component {s:?}")))
    }
}

/// A point on the time axis of a series.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum Timestamp {
    Calendar(NaiveDateTime),
    /// Frame or step index for data without wall-clock time.
    Index(i64),
}

impl Timestamp {
    /// Distance to `later` in seconds (calendar) or steps (index).
    pub fn delta(&self, later: &Timestamp) -> Option<i64> {
        match (self, later) {
            (Timestamp::Calendar(a), Timestamp::Calendar(b)) => Some((*b - *a).num_seconds()),
            (Timestamp::Index(a), Timestamp::Index(b)) => b.checked_sub(*a),
            _ => None,
        }
    }
}

impl fmt::Display for Timestamp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Timestamp::Calendar(t) => write!(f, "{}", t.format("%Y-%m-%d %H:%M:%S")),
            Timestamp::Index(i) => write!(f, "{i}"),
        }
    }
}

/// Integer calendar codes for a run of steps.
///
/// Codes: month 0–11, date 0–30, weekday 0–6 (Monday = 0), hour 0–23,
/// minute bin `0..minute_bins`. Stored row-major, one row per step with one
/// column per entry of `components`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CalendarStamps {
    components: Vec<Component>,
    minute_bins: usize,
    len: usize,
    codes: Vec<u16>,
}

impl CalendarStamps {
    pub fn new(
        components: Vec<Component>,
        minute_bins: usize,
        len: usize,
        codes: Vec<u16>,
    ) -> Result<Self> {
        if codes.len() != len * components.len() {
            return Err(Error::Data(format!(
                "{} stamp codes for {len} steps × {} components",
                codes.len(),
                components.len()
            )));
        }
        let k = components.len();
        for (j, c) in components.iter().enumerate() {
            let card = c.cardinality(minute_bins);
            if let Some(step) = (0..len).find(|s| codes[s * k + j] as usize >= card) {
                return Err(Error::Data(format!(
                    "{c} code {} at step {step} outside 0..{card}",
                    codes[step * k + j]
                )));
            }
        }
        Ok(Self {
            components,
            minute_bins,
            len,
            codes,
        })
    }

    /// Stamps that carry no components (e.g. frame-indexed trajectories).
    pub fn empty(len: usize) -> Self {
        Self {
            components: Vec::new(),
            minute_bins: DEFAULT_MINUTE_BINS,
            len,
            codes: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn components(&self) -> &[Component] {
        &self.components
    }

    pub fn minute_bins(&self) -> usize {
        self.minute_bins
    }

    pub fn code(&self, step: usize, component: Component) -> Option<u16> {
        let j = self.components.iter().position(|&c| c == component)?;
        self.codes.get(step * self.components.len() + j).copied()
    }

    /// All codes of one component, in step order.
    pub fn column(&self, component: Component) -> Option<Vec<usize>> {
        let k = self.components.len();
        let j = self.components.iter().position(|&c| c == component)?;
        Some((0..self.len).map(|s| self.codes[s * k + j] as usize).collect())
    }

    pub fn slice(&self, start: usize, len: usize) -> Self {
        let k = self.components.len();
        Self {
            components: self.components.clone(),
            minute_bins: self.minute_bins,
            len,
            codes: self.codes[start * k..(start + len) * k].to_vec(),
        }
    }

    /// Append `other`'s steps; components must match.
    pub fn extend(&mut self, other: &CalendarStamps) -> Result<()> {
        if self.components != other.components || self.minute_bins != other.minute_bins {
            return Err(Error::Data("cannot join stamps with different components".into()));
        }
        self.codes.extend_from_slice(&other.codes);
        self.len += other.len;
        Ok(())
    }
}

/// Derive calendar codes from timestamps.
///
/// Requesting a component that cannot vary at the series' sampling interval
/// (e.g. minutes on an hourly series), or any component on index
/// timestamps, is a configuration error.
pub fn extract_stamps(
    timestamps: &[Timestamp],
    components: &[Component],
    minute_bins: usize,
) -> Result<CalendarStamps> {
    let mut comps: Vec<Component> = components.to_vec();
    comps.sort();
    comps.dedup();
    if comps.is_empty() {
        return Ok(CalendarStamps::empty(timestamps.len()));
    }
    if comps.contains(&Component::Minute) && (minute_bins == 0 || 60 % minute_bins != 0) {
        return Err(Error::Config(format!(
            "minute_bins must divide 60, got {minute_bins}"
        )));
    }
    if let (Some(a), Some(b)) = (timestamps.first(), timestamps.get(1)) {
        if let Some(step) = a.delta(b) {
            if matches!(a, Timestamp::Calendar(_)) {
                if let Some(c) = comps.iter().find(|c| step >= c.max_interval_secs()) {
                    return Err(Error::Config(format!(
                        "component {c} requested but the series interval is {step} s"
                    )));
                }
            }
        }
    }
    let bin_width = if minute_bins == 0 { 60 } else { 60 / minute_bins.max(1) } as u32;
    let mut codes = Vec::with_capacity(timestamps.len() * comps.len());
    for ts in timestamps {
        let Timestamp::Calendar(t) = ts else {
            return Err(Error::Config(
                "date-time components requested for index timestamps".into(),
            ));
        };
        for c in &comps {
            let code = match c {
                Component::Month => t.month0(),
                Component::Date => t.day0(),
                Component::Weekday => t.weekday().num_days_from_monday(),
                Component::Hour => t.hour(),
                Component::Minute => t.minute() / bin_width,
            };
            codes.push(code as u16);
        }
    }
    CalendarStamps::new(comps, minute_bins, timestamps.len(), codes)
}

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use chrono::{Datelike, Duration, NaiveDate, NaiveDateTime, Timelike};

use crate::calendar::Timestamp;
use crate::error::{Error, Result};
use crate::rng::Rng;
use crate::tensor::Tensor;

use super::csv::RawSeries;

const MAX_LEN: usize = 10_000_000;
const MAX_CHANNELS: usize = 4096;

/// `target(t) = gain · source(t − lag) + noise`, with `t − lag` clamped at 0.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LagLink {
    pub source: usize,
    pub target: usize,
    pub lag: usize,
    pub gain: f64,
}

/// Additive bump at `hour` on the listed weekdays (Monday = 0).
#[derive(Clone, Debug, PartialEq)]
pub struct SpikeRule {
    pub weekdays: Vec<u32>,
    pub hour: u32,
    pub amplitude: f64,
}

impl SpikeRule {
    fn at(&self, t: &NaiveDateTime) -> f64 {
        if t.hour() == self.hour && self.weekdays.contains(&t.weekday().num_days_from_monday()) {
            self.amplitude
        } else {
            0.0
        }
    }
}

/// Hourly series generator.
///
/// Channels that are not the target of a lag link are phase-shifted copies
/// of a sinusoid with period `period`, plus the spike and Gaussian noise;
/// channel `k` is shifted by `k·period/C` steps, so channel 0 is unshifted.
/// Lag targets are built from their source after it is complete.
#[derive(Clone, Debug, PartialEq)]
pub struct SyntheticSpec {
    pub len: usize,
    pub channels: usize,
    pub period: usize,
    pub lags: Vec<LagLink>,
    pub spike: Option<SpikeRule>,
    pub noise: f64,
    pub seed: u64,
}

/// First timestamp of every synthetic series.
pub fn synthetic_epoch() -> NaiveDateTime {
    NaiveDate::from_ymd_opt(2016, 7, 1)
        .and_then(|d| d.and_hms_opt(0, 0, 0))
        .expect("valid epoch")
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        Self {
            len: 1000,
            channels: 3,
            period: 24,
            lags: vec![LagLink {
                source: 0,
                target: 1,
                lag: 3,
                gain: 2.0,
            }],
            spike: None,
            noise: 0.1,
            seed: crate::DEFAULT_SEED,
        }
    }
}

impl SyntheticSpec {
    /// Four hourly channels with a daily period, two lag-coupled channels
    /// and a Wednesday-noon spike.
    pub fn ablation(seed: u64) -> Self {
        Self {
            len: 4000,
            channels: 4,
            period: 24,
            lags: vec![
                LagLink {
                    source: 0,
                    target: 1,
                    lag: 3,
                    gain: 0.8,
                },
                LagLink {
                    source: 2,
                    target: 3,
                    lag: 5,
                    gain: 1.2,
                },
            ],
            spike: Some(SpikeRule {
                weekdays: vec![2],
                hour: 12,
                amplitude: 2.0,
            }),
            noise: 0.1,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.len == 0 || self.channels == 0 || self.period == 0 {
            return bad("synthetic len, channels and period must be >= 1".into());
        }
        if !(self.noise >= 0.0 && self.noise.is_finite()) {
            return bad(format!("noise must be finite and >= 0, got {}", self.noise));
        }
        let mut targets = Vec::new();
        for l in &self.lags {
            if l.target >= self.channels || l.source >= l.target {
                return bad(format!(
                    "lag link {}<-{} needs source < target < channels ({})",
                    l.target, l.source, self.channels
                ));
            }
            if l.lag >= self.period {
                return bad(format!("lag {} must be below the period {}", l.lag, self.period));
            }
            if !l.gain.is_finite() {
                return bad("lag gain must be finite".into());
            }
            if targets.contains(&l.target) {
                return bad(format!("channel {} has two lag sources", l.target));
            }
            targets.push(l.target);
        }
        if let Some(s) = &self.spike {
            if s.hour > 23 || s.weekdays.iter().any(|&w| w > 6) || !s.amplitude.is_finite() {
                return bad("spike needs hour 0..=23, weekdays 0..=6 and a finite amplitude".into());
            }
        }
        if self.len > MAX_LEN || self.period > MAX_LEN || self.channels > MAX_CHANNELS {
            return bad(format!(
                "synthetic len and period must be <= {MAX_LEN} and channels <= {MAX_CHANNELS}"
            ));
        }
        Ok(())
    }
}

pub fn gen_synthetic(spec: &SyntheticSpec) -> Result<RawSeries> {
    spec.validate()?;
    let (l, c) = (spec.len, spec.channels);
    let epoch = synthetic_epoch();
    let times: Vec<NaiveDateTime> = (0..l).map(|t| epoch + Duration::hours(t as i64)).collect();
    let rng = Rng::new(spec.seed);
    let mut cols: Vec<Vec<f64>> = vec![Vec::new(); c];
    let link_of = |k: usize| spec.lags.iter().find(|lk| lk.target == k);
    for k in 0..c {
        let mut noise = rng.derive(k as u64);
        let mut sample = |v: f64| {
            if spec.noise > 0.0 {
                v + spec.noise * noise.normal()
            } else {
                v
            }
        };
        cols[k] = match link_of(k) {
            Some(lk) => {
                let src = &cols[lk.source];
                (0..l).map(|t| sample(lk.gain * src[t.saturating_sub(lk.lag)])).collect()
            }
            None => {
                let shift = k * spec.period / c;
                (0..l)
                    .map(|t| {
                        let phase = 2.0 * PI * ((t + shift) % spec.period) as f64 / spec.period as f64;
                        let spike = spec.spike.as_ref().map_or(0.0, |s| s.at(&times[t]));
                        sample(phase.sin() + spike)
                    })
                    .collect()
            }
        };
    }
    let mut data = Vec::with_capacity(l * c);
    for t in 0..l {
        data.extend(cols.iter().map(|col| col[t]));
    }
    RawSeries::new(
        times.into_iter().map(Timestamp::Calendar).collect(),
        Tensor::new(&[l, c], data)?,
        (0..c).map(|k| format!("ch{k}")).collect(),
    )
}

/// Compact text form: comma-separated `key=value` pairs.
///
/// ```text
/// len=4000,channels=4,period=24,lag=1<0:3:0.8,lag=3<2:5:1.2,spike=2@12:2,noise=0.1,seed=2021
/// ```
///
/// `lag=T<S:L:G` links target `T` to source `S` with lag `L` and gain `G`;
/// `spike=W|W@H:A` adds `A` at hour `H` on weekdays `W`. Keys not given
/// keep their defaults, except that any `lag` replaces the default links.
impl FromStr for SyntheticSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let mut spec = SyntheticSpec::default();
        let mut lags = Vec::new();
        let mut saw_lag = false;
        let bad = |what: &str, v: &str| Error::Config(format!("synthetic spec: bad {what} {v:?}"));
        for item in s.split(',').map(str::trim).filter(|i| !i.is_empty()) {
            let (key, val) = item.split_once('=').ok_or_else(|| bad("item", item))?;
            let num = |v: &str| v.trim().parse::<usize>().map_err(|_| bad(key, v));
            let float = |v: &str| v.trim().parse::<f64>().map_err(|_| bad(key, v));
            match key.trim() {
                "len" => spec.len = num(val)?,
                "channels" => spec.channels = num(val)?,
                "period" => spec.period = num(val)?,
                "noise" => spec.noise = float(val)?,
                "seed" => spec.seed = val.trim().parse().map_err(|_| bad(key, val))?,
                "lag" => {
                    saw_lag = true;
                    if val.trim() == "none" {
                        continue;
                    }
                    let (t, rest) = val.split_once('<').ok_or_else(|| bad(key, val))?;
                    let parts: Vec<&str> = rest.split(':').collect();
                    if parts.len() != 3 {
                        return Err(bad(key, val));
                    }
                    lags.push(LagLink {
                        target: num(t)?,
                        source: num(parts[0])?,
                        lag: num(parts[1])?,
                        gain: float(parts[2])?,
                    });
                }
                "spike" => {
                    if val.trim() == "none" {
                        spec.spike = None;
                        continue;
                    }
                    let (days, rest) = val.split_once('@').ok_or_else(|| bad(key, val))?;
                    let (hour, amp) = rest.split_once(':').ok_or_else(|| bad(key, val))?;
                    let weekdays = days
                        .split('|')
                        .map(|d| d.trim().parse::<u32>().map_err(|_| bad(key, val)))
                        .collect::<Result<_>>()?;
                    spec.spike = Some(SpikeRule {
                        weekdays,
                        hour: hour.trim().parse().map_err(|_| bad(key, val))?,
                        amplitude: float(amp)?,
                    });
                }
                other => return Err(Error::Config(format!("synthetic spec: unknown key {other:?}"))),
            }
        }
        if saw_lag {
            spec.lags = lags;
        }
        spec.validate()?;
        Ok(spec)
    }
}

impl fmt::Display for SyntheticSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "len={},channels={},period={}", self.len, self.channels, self.period)?;
        if self.lags.is_empty() {
            write!(f, ",lag=none")?;
        }
        for l in &self.lags {
            write!(f, ",lag={}<{}:{}:{}", l.target, l.source, l.lag, l.gain)?;
        }
        match &self.spike {
            Some(s) => {
                let days: Vec<String> = s.weekdays.iter().map(|d| d.to_string()).collect();
                write!(f, ",spike={}@{}:{}", days.join("|"), s.hour, s.amplitude)?;
            }
            None => write!(f, ",spike=none")?,
        }
        write!(f, ",noise={},seed={}", self.noise, self.seed)
    }
}

impl serde::Serialize for SyntheticSpec {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> serde::Deserialize<'de> for SyntheticSpec {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let text = String::deserialize(d)?;
        text.parse().map_err(serde::de::Error::custom)
    }
}

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::calendar::Component;
use crate::data::{SplitRatio, TimestampKind};
use crate::error::{Error, Result};
use crate::models::Route;
use crate::nn::Activation;

/// Known datasets with tuned defaults.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Preset {
    Electricity,
    Etth1,
    Ettm1,
    Weather,
    Jaad,
}

/// Defaults a preset supplies. Explicit run-file keys win.
#[derive(Clone, Debug, PartialEq)]
pub struct PresetValues {
    pub hidden_size: usize,
    pub dropout: f64,
    pub lr: f64,
    pub decay: f64,
    pub activation: Activation,
    pub ratio: SplitRatio,
    pub components: Vec<Component>,
    pub minute_bins: usize,
    pub routes: Vec<Route>,
    pub timestamps: TimestampKind,
    /// Report metrics on the original scale.
    pub raw_metrics: bool,
}

impl Preset {
    pub const ALL: [Preset; 5] = [Preset::Electricity, Preset::Etth1, Preset::Ettm1, Preset::Weather, Preset::Jaad];

    pub fn name(self) -> &'static str {
        match self {
            Preset::Electricity => "electricity",
            Preset::Etth1 => "etth1",
            Preset::Ettm1 => "ettm1",
            Preset::Weather => "weather",
            Preset::Jaad => "jaad",
        }
    }

    /// The preset whose name equals `id`, ignoring case.
    pub fn detect(id: &str) -> Option<Preset> {
        id.parse().ok()
    }

    pub fn values(self) -> PresetValues {
        use Component::*;
        let hourly = vec![Date, Weekday, Hour];
        let base = PresetValues {
            hidden_size: 512,
            dropout: 0.0,
            lr: 2e-4,
            decay: 0.75,
            activation: Activation::Silu,
            ratio: SplitRatio::new(6, 2, 2),
            components: hourly,
            minute_bins: 4,
            routes: Route::ALL.to_vec(),
            timestamps: TimestampKind::Auto,
            raw_metrics: false,
        };
        match self {
            Preset::Electricity => PresetValues {
                lr: 6e-4,
                decay: 0.8,
                ..base
            },
            Preset::Etth1 => PresetValues {
                hidden_size: 256,
                dropout: 0.1,
                activation: Activation::LeakyRelu,
                ..base
            },
            Preset::Ettm1 => PresetValues {
                hidden_size: 256,
                dropout: 0.25,
                decay: 0.8,
                ratio: SplitRatio::new(7, 1, 2),
                components: vec![Date, Weekday, Hour, Minute],
                ..base
            },
            Preset::Weather => PresetValues {
                dropout: 0.25,
                ratio: SplitRatio::new(5, 1, 4),
                ..base
            },
            Preset::Jaad => PresetValues {
                lr: 1e-3,
                decay: 0.9,
                ratio: SplitRatio::new(7, 1, 2),
                components: Vec::new(),
                routes: vec![Route::Core, Route::Spatial],
                timestamps: TimestampKind::Index,
                raw_metrics: true,
                ..base
            },
        }
    }
}

impl FromStr for Preset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let l = s.trim().to_ascii_lowercase();
        Preset::ALL
            .into_iter()
            .find(|p| p.name() == l)
            .ok_or_else(|| Error::Config(format!("unknown preset {s:?} (expected electricity, etth1, ettm1, weather or jaad)")))
    }
}

impl fmt::Display for Preset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Defaults for datasets without a preset.
pub fn generic_values() -> PresetValues {
    PresetValues {
        hidden_size: 128,
        dropout: 0.0,
        lr: 1e-3,
        decay: 0.9,
        activation: Activation::Silu,
        ratio: SplitRatio::new(7, 1, 2),
        components: vec![Component::Date, Component::Weekday, Component::Hour],
        minute_bins: 4,
        routes: Route::ALL.to_vec(),
        timestamps: TimestampKind::Auto,
        raw_metrics: false,
    }
}

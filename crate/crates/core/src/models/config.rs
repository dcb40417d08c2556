use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::calendar::{Component, DEFAULT_MINUTE_BINS};
use crate::error::{Error, Result};
use crate::nn::{Activation, AttentionAxis, EMBED_DIM};

/// Default temporal-route threshold in time steps.
pub const DEFAULT_THETA_T: usize = 96;
/// Default moving-average window of the decomposition baseline.
pub const DEFAULT_MA_KERNEL: usize = 25;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Variant {
    Stl,
    Linear,
    Dlinear,
    Nlinear,
}

impl Variant {
    pub fn name(self) -> &'static str {
        match self {
            Variant::Stl => "stl",
            Variant::Linear => "linear",
            Variant::Dlinear => "dlinear",
            Variant::Nlinear => "nlinear",
        }
    }
}

impl FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "stl" => Ok(Variant::Stl),
            "linear" => Ok(Variant::Linear),
            "dlinear" => Ok(Variant::Dlinear),
            "nlinear" => Ok(Variant::Nlinear),
            other => Err(Error::Config(format!("unknown model variant {other:?}"))),
        }
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Route {
    Core,
    Temporal,
    Spatial,
}

impl Route {
    pub const ALL: [Route; 3] = [Route::Core, Route::Temporal, Route::Spatial];

    pub fn name(self) -> &'static str {
        match self {
            Route::Core => "core",
            Route::Temporal => "temporal",
            Route::Spatial => "spatial",
        }
    }
}

impl FromStr for Route {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "core" => Ok(Route::Core),
            "temporal" => Ok(Route::Temporal),
            "spatial" => Ok(Route::Spatial),
            other => Err(Error::Config(format!("unknown route {other:?}"))),
        }
    }
}

impl fmt::Display for Route {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

fn default_theta_t() -> usize {
    DEFAULT_THETA_T
}

fn default_ma_kernel() -> usize {
    DEFAULT_MA_KERNEL
}

fn default_minute_bins() -> usize {
    DEFAULT_MINUTE_BINS
}

fn default_routes() -> Vec<Route> {
    Route::ALL.to_vec()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    pub variant: Variant,
    /// Observation length T.
    pub obs_len: usize,
    /// Prediction length τ.
    pub pred_len: usize,
    pub channels: usize,
    pub hidden_size: usize,
    pub dropout: f64,
    pub activation: Activation,
    /// The temporal route runs only when `obs_len <= theta_t`.
    #[serde(default = "default_theta_t")]
    pub theta_t: usize,
    #[serde(default = "default_routes")]
    pub routes: Vec<Route>,
    #[serde(default)]
    pub datetime_components: Vec<Component>,
    #[serde(default = "default_minute_bins")]
    pub minute_bins: usize,
    #[serde(default)]
    pub per_channel_weights: bool,
    #[serde(default = "default_ma_kernel")]
    pub ma_kernel: usize,
    #[serde(default)]
    pub attention_axis: AttentionAxis,
}

impl ModelConfig {
    /// Full three-route model with the given dimensions and shared weights.
    pub fn stl(obs_len: usize, pred_len: usize, channels: usize, hidden_size: usize) -> Self {
        Self {
            variant: Variant::Stl,
            obs_len,
            pred_len,
            channels,
            hidden_size,
            dropout: 0.0,
            activation: Activation::Silu,
            theta_t: DEFAULT_THETA_T,
            routes: default_routes(),
            datetime_components: vec![Component::Date, Component::Weekday, Component::Hour],
            minute_bins: DEFAULT_MINUTE_BINS,
            per_channel_weights: false,
            ma_kernel: DEFAULT_MA_KERNEL,
            attention_axis: AttentionAxis::Rows,
        }
    }

    pub fn with_variant(mut self, variant: Variant) -> Self {
        self.variant = variant;
        self
    }

    pub fn with_routes(mut self, routes: &[Route]) -> Self {
        self.routes = routes.to_vec();
        self
    }

    pub fn has_route(&self, r: Route) -> bool {
        self.variant == Variant::Stl && self.routes.contains(&r)
    }

    /// Whether the temporal route contributes for this observation length.
    pub fn temporal_active(&self) -> bool {
        self.has_route(Route::Temporal) && self.obs_len <= self.theta_t
    }

    /// Short name used in reports: the baseline kind, `stl` for all three
    /// routes, or the routes joined with `+`.
    pub fn label(&self) -> String {
        if self.variant != Variant::Stl {
            return self.variant.name().to_string();
        }
        let mut routes = self.routes.clone();
        routes.sort();
        routes.dedup();
        if routes == Route::ALL {
            "stl".into()
        } else {
            routes.iter().map(|r| r.name()).collect::<Vec<_>>().join("+")
        }
    }

    /// Number of scalar parameters [`make_model`](super::make_model) will
    /// allocate, computed from layer shapes without building anything.
    pub fn param_count(&self) -> usize {
        let k = if self.per_channel_weights { self.channels } else { 1 };
        let lin = |i: usize, o: usize| o.saturating_mul(i).saturating_add(o).saturating_mul(k);
        let resl = |i: usize, o: usize| {
            lin(i, o).saturating_mul(2).saturating_add(lin(o, o))
        };
        let (t, tau, h) = (self.obs_len, self.pred_len, self.hidden_size);
        match self.variant {
            Variant::Linear | Variant::Nlinear => lin(t, tau),
            Variant::Dlinear => lin(t, tau).saturating_mul(2),
            Variant::Stl => {
                let mut n = 0usize;
                if self.has_route(Route::Core) {
                    n = n.saturating_add(resl(t, tau));
                }
                if self.has_route(Route::Temporal) && !self.datetime_components.is_empty() {
                    let mut comps = self.datetime_components.clone();
                    comps.sort();
                    comps.dedup();
                    let tables = comps.iter().fold(0usize, |acc, c| {
                        acc.saturating_add(c.cardinality(self.minute_bins).saturating_mul(EMBED_DIM))
                    });
                    let reducer = EMBED_DIM * comps.len() + 1;
                    n = n
                        .saturating_add(tables.saturating_add(reducer))
                        .saturating_add(resl(t, h).saturating_add(1))
                        .saturating_add(resl(h, h))
                        .saturating_add(resl(h, tau))
                        .saturating_add(resl(tau, tau).saturating_add(1));
                }
                if self.has_route(Route::Spatial) {
                    n = n
                        .saturating_add(resl(t, h))
                        .saturating_add(resl(h, tau))
                        .saturating_add(resl(tau, tau));
                }
                n
            }
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.obs_len == 0 || self.pred_len == 0 || self.channels == 0 {
            return bad(format!(
                "obs_len, pred_len and channels must be >= 1 (got {}, {}, {})",
                self.obs_len, self.pred_len, self.channels
            ));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return bad(format!("dropout must lie in [0, 1), got {}", self.dropout));
        }
        match self.variant {
            Variant::Stl => {
                if self.routes.is_empty() {
                    return bad("routes must not be empty".into());
                }
                if self.hidden_size == 0 {
                    return bad("hidden_size must be >= 1".into());
                }
                if self.routes.iter().all(|&r| r == Route::Temporal) && !self.temporal_active() {
                    return bad(format!(
                        "only the temporal route is selected but obs_len {} exceeds theta_t {}",
                        self.obs_len, self.theta_t
                    ));
                }
                if self.temporal_active() && self.datetime_components.is_empty() {
                    return bad("the temporal route needs at least one datetime component".into());
                }
                if self.datetime_components.contains(&Component::Minute)
                    && (self.minute_bins == 0 || 60 % self.minute_bins != 0)
                {
                    return bad(format!("minute_bins must divide 60, got {}", self.minute_bins));
                }
            }
            Variant::Dlinear => {
                if self.ma_kernel == 0 || self.ma_kernel % 2 == 0 {
                    return bad(format!("ma_kernel must be odd, got {}", self.ma_kernel));
                }
            }
            Variant::Linear | Variant::Nlinear => {}
        }
        Ok(())
    }
}

/// The four ablation configurations, in order: all routes, core plus
/// spatial, core only, and the plain linear baseline.
pub fn ablation_variants(config: &ModelConfig) -> Vec<ModelConfig> {
    let stl = config.clone().with_variant(Variant::Stl);
    vec![
        stl.clone().with_routes(&Route::ALL),
        stl.clone().with_routes(&[Route::Core, Route::Spatial]),
        stl.with_routes(&[Route::Core]),
        config.clone().with_variant(Variant::Linear).with_routes(&[Route::Core]),
    ]
}

//! Declarative run configuration (TOML) and dataset presets.
//!
//! ```toml
//! preset = "etth1"            # optional; also inferred from dataset.id
//!
//! [dataset]
//! id = "etth1"
//! path = "data/ETTh1.csv"     # or: synthetic = "len=4000,channels=4,..."
//! ratio = "6:2:2"
//! components = ["date", "weekday", "hour"]
//!
//! [model]
//! variant = "stl"
//! T = 96
//! tau = 24
//! hidden_size = 256
//!
//! [train]
//! lr = 2e-4
//! epochs = 20
//!
//! [experiment]
//! protocol = "scarce"         # or "best_t"
//! ablation = true
//! seeds = [2021]
//! ```
//!
//! Every key is optional. Unset keys take the preset value, then the generic
//! default. Unknown keys are rejected.

mod preset;

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::calendar::Component;
use crate::data::{gen_synthetic, load_csv, prepare, CsvSchema, Prepared, RawSeries, SplitRatio, SyntheticSpec, TimestampKind};
use crate::error::{Error, Result};
use crate::experiment::ExperimentSpec;
use crate::models::{ablation_variants, ModelConfig, Route, Variant, DEFAULT_MA_KERNEL, DEFAULT_THETA_T};
use crate::nn::{Activation, AttentionAxis};
use crate::train::TrainConfig;

pub use preset::{generic_values, Preset, PresetValues};

pub const DEFAULT_OBS_LEN: usize = 96;
pub const DEFAULT_PRED_LEN: usize = 24;

/// Observation lengths searched by the best-T protocol.
pub const BEST_T_GRID: [usize; 6] = [24, 48, 96, 192, 336, 504];
/// Prediction lengths of the fixed-observation and ablation protocols.
pub const SCARCE_TAU_GRID: [usize; 10] = [24, 36, 48, 72, 96, 120, 144, 168, 192, 336];
pub const SCARCE_OBS_LEN: usize = 48;
/// Prediction lengths evaluated under the best-T protocol.
pub const BEST_T_TAU_GRID: [usize; 4] = [96, 192, 336, 720];

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Protocol {
    /// T fixed at 48 over the long τ grid.
    Scarce,
    /// Best observation length per τ.
    BestT,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetSection {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub id: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub path: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub synthetic: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ratio: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub components: Option<Vec<Component>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub minute_bins: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub timestamps: Option<TimestampKind>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub delimiter: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub channels: Option<Vec<String>>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSection {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub variant: Option<Variant>,
    #[serde(rename = "T", skip_serializing_if = "Option::is_none")]
    pub obs_len: Option<usize>,
    #[serde(rename = "tau", skip_serializing_if = "Option::is_none")]
    pub pred_len: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub hidden_size: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dropout: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub activation: Option<Activation>,
    #[serde(rename = "theta_T", skip_serializing_if = "Option::is_none")]
    pub theta_t: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub routes: Option<Vec<Route>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub per_channel_weights: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ma_kernel: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub attention_axis: Option<AttentionAxis>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainSection {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lr: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub decay: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub batch_size: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub epochs: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub patience: Option<usize>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSection {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub protocol: Option<Protocol>,
    #[serde(rename = "T", skip_serializing_if = "Option::is_none")]
    pub obs_lens: Option<Vec<usize>>,
    #[serde(rename = "tau", skip_serializing_if = "Option::is_none")]
    pub pred_lens: Option<Vec<usize>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seeds: Option<Vec<u64>>,
    #[serde(rename = "best_T_mode", skip_serializing_if = "Option::is_none")]
    pub best_t_mode: Option<bool>,
    /// Report labels: `stl`, route sets such as `core+spatial`, or a baseline.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub variants: Option<Vec<String>>,
    /// Shorthand for the four ablation variants.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ablation: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub raw_metrics: Option<bool>,
}

/// The document as written.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunFile {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub preset: Option<Preset>,
    #[serde(default)]
    pub dataset: DatasetSection,
    #[serde(default)]
    pub model: ModelSection,
    #[serde(default)]
    pub train: TrainSection,
    #[serde(default)]
    pub experiment: ExperimentSection,
}

impl RunFile {
    pub fn parse(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(format!("run file: {e}")))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Self::parse(&text).map_err(|e| match e {
            Error::Config(m) => Error::Config(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("run files always serialize")
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DataSource {
    Path(PathBuf),
    Synthetic(SyntheticSpec),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DatasetConfig {
    pub id: String,
    pub source: DataSource,
    pub ratio: SplitRatio,
    pub components: Vec<Component>,
    pub minute_bins: usize,
    pub timestamps: TimestampKind,
    pub delimiter: char,
    pub channels: Option<Vec<String>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentGrid {
    pub obs_lens: Vec<usize>,
    pub pred_lens: Vec<usize>,
    pub seeds: Vec<u64>,
    pub best_t_mode: bool,
    pub variants: Vec<String>,
    pub raw_metrics: bool,
}

/// A fully resolved run: presets applied, every value explicit.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub preset: Option<Preset>,
    pub dataset: DatasetConfig,
    /// `channels` is 0 until the data is loaded.
    pub model: ModelConfig,
    pub train: TrainConfig,
    pub experiment: ExperimentGrid,
}

impl RunConfig {
    /// Apply presets and defaults. `preset` (from the command line) wins over
    /// the file's `preset` key, which wins over a matching `dataset.id`.
    pub fn resolve(file: &RunFile, preset: Option<Preset>) -> Result<Self> {
        let d = &file.dataset;
        let preset = preset
            .or(file.preset)
            .or_else(|| d.id.as_deref().and_then(Preset::detect));
        let pv = preset.map_or_else(generic_values, Preset::values);

        let source = match (&d.path, &d.synthetic) {
            (Some(p), None) => DataSource::Path(p.clone()),
            (None, Some(s)) => DataSource::Synthetic(s.parse()?),
            (None, None) => return Err(Error::Config("dataset needs either `path` or `synthetic`".into())),
            (Some(_), Some(_)) => return Err(Error::Config("dataset `path` and `synthetic` are exclusive".into())),
        };
        let id = d.id.clone().unwrap_or_else(|| match (&source, preset) {
            (_, Some(p)) => p.name().to_string(),
            (DataSource::Path(p), None) => p.file_stem().map_or("data".into(), |s| s.to_string_lossy().into_owned()),
            (DataSource::Synthetic(_), None) => "synthetic".into(),
        });
        let delimiter = match d.delimiter.as_deref() {
            None => ',',
            Some(s) => {
                let mut it = s.chars();
                match (it.next(), it.next()) {
                    (Some(c), None) if c.is_ascii() => c,
                    _ => return Err(Error::Config(format!("delimiter must be one ASCII character, got {s:?}"))),
                }
            }
        };
        let dataset = DatasetConfig {
            id,
            source,
            ratio: match &d.ratio {
                Some(r) => r.parse()?,
                None => pv.ratio,
            },
            components: d.components.clone().unwrap_or(pv.components.clone()),
            minute_bins: d.minute_bins.unwrap_or(pv.minute_bins),
            timestamps: d.timestamps.unwrap_or(pv.timestamps),
            delimiter,
            channels: d.channels.clone(),
        };

        let m = &file.model;
        let model = ModelConfig {
            variant: m.variant.unwrap_or(Variant::Stl),
            obs_len: m.obs_len.unwrap_or(DEFAULT_OBS_LEN),
            pred_len: m.pred_len.unwrap_or(DEFAULT_PRED_LEN),
            channels: 0,
            hidden_size: m.hidden_size.unwrap_or(pv.hidden_size),
            dropout: m.dropout.unwrap_or(pv.dropout),
            activation: m.activation.unwrap_or(pv.activation),
            theta_t: m.theta_t.unwrap_or(DEFAULT_THETA_T),
            routes: m.routes.clone().unwrap_or(pv.routes.clone()),
            datetime_components: dataset.components.clone(),
            minute_bins: dataset.minute_bins,
            per_channel_weights: m.per_channel_weights.unwrap_or(false),
            ma_kernel: m.ma_kernel.unwrap_or(DEFAULT_MA_KERNEL),
            attention_axis: m.attention_axis.unwrap_or_default(),
        };

        let t = &file.train;
        let mut train = TrainConfig::new(t.lr.unwrap_or(pv.lr), t.decay.unwrap_or(pv.decay));
        train.batch_size = t.batch_size.unwrap_or(train.batch_size);
        train.epochs = t.epochs.unwrap_or(train.epochs);
        train.seed = t.seed.unwrap_or(train.seed);
        train.patience = t.patience.unwrap_or(train.patience);

        let e = &file.experiment;
        let (def_obs, def_pred, def_best) = match e.protocol {
            Some(Protocol::Scarce) => (vec![SCARCE_OBS_LEN], SCARCE_TAU_GRID.to_vec(), false),
            Some(Protocol::BestT) => (BEST_T_GRID.to_vec(), BEST_T_TAU_GRID.to_vec(), true),
            None => (vec![model.obs_len], vec![model.pred_len], false),
        };
        let variants = match (&e.variants, e.ablation.unwrap_or(false)) {
            (Some(_), true) => return Err(Error::Config("experiment `variants` and `ablation` are exclusive".into())),
            (Some(v), false) => v.clone(),
            (None, true) => ablation_variants(&model).iter().map(ModelConfig::label).collect(),
            (None, false) => vec![model.label()],
        };
        let experiment = ExperimentGrid {
            obs_lens: e.obs_lens.clone().unwrap_or(def_obs),
            pred_lens: e.pred_lens.clone().unwrap_or(def_pred),
            seeds: e.seeds.clone().unwrap_or_else(|| vec![train.seed]),
            best_t_mode: e.best_t_mode.unwrap_or(def_best),
            variants,
            raw_metrics: e.raw_metrics.unwrap_or(pv.raw_metrics),
        };

        let cfg = RunConfig {
            preset,
            dataset,
            model,
            train,
            experiment,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_toml(text: &str, preset: Option<Preset>) -> Result<Self> {
        Self::resolve(&RunFile::parse(text)?, preset)
    }

    /// Config-level checks that do not need the data.
    pub fn validate(&self) -> Result<()> {
        self.train.validate()?;
        ModelConfig { channels: 1, ..self.model.clone() }.validate()?;
        let g = &self.experiment;
        if g.obs_lens.is_empty() || g.pred_lens.is_empty() || g.seeds.is_empty() || g.variants.is_empty() {
            return Err(Error::Config("experiment grids must not be empty".into()));
        }
        if g.obs_lens.contains(&0) || g.pred_lens.contains(&0) {
            return Err(Error::Config("experiment T and tau values must be >= 1".into()));
        }
        for v in &g.variants {
            variant_config(&self.model, v)?;
        }
        if let DataSource::Synthetic(s) = &self.dataset.source {
            s.validate()?;
        }
        Ok(())
    }

    /// Use `seed` for training and as the only experiment seed.
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.train.seed = seed;
        self.experiment.seeds = vec![seed];
        self
    }

    pub fn load_series(&self) -> Result<RawSeries> {
        match &self.dataset.source {
            DataSource::Synthetic(spec) => gen_synthetic(spec),
            DataSource::Path(p) => {
                let schema = CsvSchema {
                    delimiter: self.dataset.delimiter as u8,
                    timestamps: self.dataset.timestamps,
                    channels: self.dataset.channels.clone(),
                };
                load_csv(p, &schema)
            }
        }
    }

    /// Load, stamp, split and standardize the dataset.
    pub fn prepare(&self) -> Result<Prepared> {
        let series = self.load_series()?;
        let source = match &self.dataset.source {
            DataSource::Path(p) => p.display().to_string(),
            DataSource::Synthetic(s) => format!("synthetic:{s}"),
        };
        prepare(&source, &series, self.dataset.ratio, &self.dataset.components, self.dataset.minute_bins)
    }

    /// The model config with `channels` taken from the loaded data.
    pub fn model_for(&self, prepared: &Prepared) -> ModelConfig {
        ModelConfig {
            channels: prepared.manifest.channels,
            ..self.model.clone()
        }
    }

    pub fn experiment_spec(&self, prepared: &Prepared) -> Result<ExperimentSpec> {
        let base = self.model_for(prepared);
        let variants = self
            .experiment
            .variants
            .iter()
            .map(|v| variant_config(&base, v))
            .collect::<Result<Vec<_>>>()?;
        Ok(ExperimentSpec {
            dataset: self.dataset.id.clone(),
            variants,
            obs_lens: self.experiment.obs_lens.clone(),
            pred_lens: self.experiment.pred_lens.clone(),
            seeds: self.experiment.seeds.clone(),
            best_t_mode: self.experiment.best_t_mode,
            raw_metrics: self.experiment.raw_metrics,
        })
    }

    /// A run file with every value spelled out, which resolves back to this
    /// config.
    pub fn to_runfile(&self) -> RunFile {
        let d = &self.dataset;
        let m = &self.model;
        let t = &self.train;
        let e = &self.experiment;
        let (path, synthetic) = match &d.source {
            DataSource::Path(p) => (Some(p.clone()), None),
            DataSource::Synthetic(s) => (None, Some(s.to_string())),
        };
        RunFile {
            preset: self.preset,
            dataset: DatasetSection {
                id: Some(d.id.clone()),
                path,
                synthetic,
                ratio: Some(d.ratio.to_string()),
                components: Some(d.components.clone()),
                minute_bins: Some(d.minute_bins),
                timestamps: Some(d.timestamps),
                delimiter: Some(d.delimiter.to_string()),
                channels: d.channels.clone(),
            },
            model: ModelSection {
                variant: Some(m.variant),
                obs_len: Some(m.obs_len),
                pred_len: Some(m.pred_len),
                hidden_size: Some(m.hidden_size),
                dropout: Some(m.dropout),
                activation: Some(m.activation),
                theta_t: Some(m.theta_t),
                routes: Some(m.routes.clone()),
                per_channel_weights: Some(m.per_channel_weights),
                ma_kernel: Some(m.ma_kernel),
                attention_axis: Some(m.attention_axis),
            },
            train: TrainSection {
                lr: Some(t.lr),
                decay: Some(t.decay),
                batch_size: Some(t.batch_size),
                epochs: Some(t.epochs),
                seed: Some(t.seed),
                patience: Some(t.patience),
            },
            experiment: ExperimentSection {
                protocol: None,
                obs_lens: Some(e.obs_lens.clone()),
                pred_lens: Some(e.pred_lens.clone()),
                seeds: Some(e.seeds.clone()),
                best_t_mode: Some(e.best_t_mode),
                variants: Some(e.variants.clone()),
                ablation: None,
                raw_metrics: Some(e.raw_metrics),
            },
        }
    }
}

/// Model config for a report label: a baseline name, `stl`, or a `+`-joined
/// route set.
pub fn variant_config(base: &ModelConfig, label: &str) -> Result<ModelConfig> {
    let label = label.trim().to_ascii_lowercase();
    match label.as_str() {
        "linear" | "dlinear" | "nlinear" => Ok(base.clone().with_variant(label.parse()?).with_routes(&[Route::Core])),
        "stl" => Ok(base.clone().with_variant(Variant::Stl).with_routes(&Route::ALL)),
        _ => {
            let routes = label.split('+').map(str::parse).collect::<Result<Vec<Route>>>()?;
            let cfg = base.clone().with_variant(Variant::Stl).with_routes(&routes);
            if cfg.label() != label {
                return Err(Error::Config(format!("variant label {label:?} is not canonical; use {:?}", cfg.label())));
            }
            Ok(cfg)
        }
    }
}

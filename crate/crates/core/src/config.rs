//! The single JSON configuration document with sections
//! `{data, model, spectral, train, verify}` plus the spectral-density demo
//! parameters. Every field has a default, so partial configs work.

use serde::{Deserialize, Serialize};

use crate::data::CaseSpec;
use crate::error::{Error, Result};
use crate::kernel::Ctar2Params;
use crate::models::{ComposeMode, TimeFeatures};
use crate::train::TrainConfig;

#[derive(Debug, Clone, Serialize, Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub data: DataConfig,
    pub model: ModelConfig,
    pub spectral: SpectralConfig,
    pub train: TrainSection,
    pub verify: VerifyConfig,
    pub demo: SdfDemoConfig,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DataConfig {
    /// `ctar2` (synthetic) or `csv`.
    pub source: String,
    /// CSV source path; required when `source = "csv"`.
    pub csv_path: Option<String>,
    pub missing_as_zero: bool,
    /// Second-order system coefficients for the synthetic source.
    pub ctar2: Ctar2Params,
    /// Integration step of the fine simulation grid, process time units.
    pub fine_dt: f64,
    /// Total simulated horizon in process time units.
    pub sim_time: f64,
    /// Keep every k-th fine-grid point as the working series.
    pub subsample_every: usize,
    /// Multiplies timestamps to express time in task units.
    pub time_scale: f64,
    /// Observe the process derivative as a second feature column.
    pub observe_velocity: bool,
    pub case: CaseSpec,
    /// Denser sampling stride for validation/test example generation;
    /// defaults to the training stride.
    pub eval_stride: Option<usize>,
    pub split: SplitConfig,
}

impl Default for DataConfig {
    fn default() -> Self {
        DataConfig {
            source: "ctar2".into(),
            csv_path: None,
            missing_as_zero: false,
            // underdamped system: oscillatory covariance with period ~2pi
            ctar2: Ctar2Params {
                a0: 0.3,
                a1: 1.0,
                b0: 1.0,
                p0: 1.0,
            },
            fine_dt: 0.01,
            sim_time: 3000.0,
            subsample_every: 25,
            time_scale: 1.0,
            observe_velocity: false,
            case: CaseSpec::IrregularFixed {
                window: 96,
                q: 16,
                horizon: 8,
                stride: 2,
            },
            eval_stride: None,
            split: SplitConfig::default(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SplitConfig {
    /// `side-by-side` or `walk-forward`.
    pub scheme: String,
    pub train_frac: f64,
    pub val_frac: f64,
    /// Walk-forward geometry (series index steps).
    pub window: usize,
    pub val_horizon: usize,
    pub test_horizon: usize,
    pub stride: usize,
    /// Which walk-forward triple the run uses.
    pub index: usize,
}

impl Default for SplitConfig {
    fn default() -> Self {
        SplitConfig {
            scheme: "side-by-side".into(),
            train_frac: 0.6,
            val_frac: 0.2,
            window: 0,
            val_horizon: 0,
            test_horizon: 0,
            stride: 0,
            index: 0,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelConfig {
    /// One of `t-rnn`, `t-ffn`, `rnn-time`, `rnn-trigo`, `ffn-time`,
    /// `ffn-trigo`.
    pub kind: String,
    /// GRU hidden width.
    pub hidden: usize,
    /// Hidden widths of the readout head (output layer appended).
    pub head_hidden: Vec<usize>,
    pub compose_mode: ComposeMode,
    /// Composition layer index for the feedforward variants.
    pub compose_layer: usize,
    /// Hidden widths of the feedforward base network.
    pub ffn_widths: Vec<usize>,
    /// Number of learnable frequency pairs in the trigonometric baselines.
    pub trigo_k: usize,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            kind: "t-rnn".into(),
            hidden: 32,
            head_hidden: vec![],
            compose_mode: ComposeMode::Multiply,
            compose_layer: 1,
            ffn_widths: vec![64, 32],
            trigo_k: 16,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SpectralConfig {
    /// `flow` or `gaussian`.
    pub family: String,
    /// Use the feature-independent temporal kernel: the feature map sees
    /// the timespan alone (the d = 0 specialization) instead of `[x, t]`.
    pub time_only: bool,
    /// Monte Carlo draw count; the feature dimension is `2m`.
    pub m: usize,
    /// Number of affine coupling layers in the flow.
    pub coupling_layers: usize,
    /// Hidden width of the coupling conditioner networks.
    pub hidden: usize,
}

impl Default for SpectralConfig {
    fn default() -> Self {
        SpectralConfig {
            family: "flow".into(),
            time_only: false,
            m: 16,
            coupling_layers: 4,
            hidden: 32,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainSection {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps_adam: f64,
    pub batch_size: usize,
    pub max_epochs: usize,
    pub patience: usize,
}

impl Default for TrainSection {
    fn default() -> Self {
        let t = TrainConfig::default();
        TrainSection {
            lr: t.lr,
            beta1: t.beta1,
            beta2: t.beta2,
            eps_adam: t.eps_adam,
            batch_size: t.batch_size,
            max_epochs: t.max_epochs,
            patience: t.patience,
        }
    }
}

impl TrainSection {
    pub fn to_train_config(&self, seed: u64) -> TrainConfig {
        TrainConfig {
            lr: self.lr,
            beta1: self.beta1,
            beta2: self.beta2,
            eps_adam: self.eps_adam,
            batch_size: self.batch_size,
            max_epochs: self.max_epochs,
            patience: self.patience,
            seed,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VerifyConfig {
    /// `gp`, `ntk`, `rff`, `flow`, `misspec` or `all`.
    pub which: String,
    pub jobs: usize,
}

impl Default for VerifyConfig {
    fn default() -> Self {
        VerifyConfig {
            which: "all".into(),
            jobs: 1,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SdfDemoConfig {
    /// Regular sampling interval of the discretization.
    pub interval: f64,
    /// Number of discretized samples feeding the periodogram.
    pub samples: usize,
    /// Welch segment length (power of two).
    pub segment: usize,
    /// Truncation of the folded spectral sum.
    pub k_max: i64,
    pub fine_dt: f64,
    /// System coefficients for the demo (defaults to the critically damped
    /// unit system).
    pub ctar2: Ctar2Params,
}

impl Default for SdfDemoConfig {
    fn default() -> Self {
        SdfDemoConfig {
            interval: 1.0,
            samples: 1_000_000,
            segment: 512,
            k_max: 128,
            fine_dt: 0.01,
            ctar2: Ctar2Params {
                a0: 2.0,
                a1: 1.0,
                b0: 1.0,
                p0: 1.0,
            },
        }
    }
}

impl Config {
    pub fn from_path(path: &std::path::Path) -> Result<Config> {
        let raw = std::fs::read_to_string(path)?;
        let cfg: Config = serde_json::from_str(&raw)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        match self.data.source.as_str() {
            "ctar2" => self.data.ctar2.validate()?,
            "csv" => {
                if self.data.csv_path.is_none() {
                    return Err(Error::Config("csv source requires data.csv_path".into()));
                }
            }
            other => {
                return Err(Error::Config(format!(
                    "unknown data source `{other}`; expected ctar2 or csv"
                )))
            }
        }
        self.data.case.validate()?;
        if !matches!(self.spectral.family.as_str(), "flow" | "gaussian") {
            return Err(Error::Config(format!(
                "unknown spectral family `{}`",
                self.spectral.family
            )));
        }
        if self.spectral.m == 0 {
            return Err(Error::Config("spectral.m must be positive".into()));
        }
        const KINDS: [&str; 6] = ["t-rnn", "t-ffn", "rnn-time", "rnn-trigo", "ffn-time", "ffn-trigo"];
        if !KINDS.contains(&self.model.kind.as_str()) {
            return Err(Error::Config(format!(
                "unknown model kind `{}`; expected one of {KINDS:?}",
                self.model.kind
            )));
        }
        if !matches!(self.data.split.scheme.as_str(), "side-by-side" | "walk-forward") {
            return Err(Error::Config(format!(
                "unknown split scheme `{}`",
                self.data.split.scheme
            )));
        }
        Ok(())
    }

    /// Serialize with stable field order for resolved-config provenance.
    pub fn to_json_pretty(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModelKind {
    TemporalRnn,
    TemporalFfn,
    RnnTime,
    RnnTrigo,
    FfnTime,
    FfnTrigo,
}

impl ModelKind {
    pub fn parse(kind: &str) -> Result<ModelKind> {
        Ok(match kind {
            "t-rnn" => ModelKind::TemporalRnn,
            "t-ffn" => ModelKind::TemporalFfn,
            "rnn-time" => ModelKind::RnnTime,
            "rnn-trigo" => ModelKind::RnnTrigo,
            "ffn-time" => ModelKind::FfnTime,
            "ffn-trigo" => ModelKind::FfnTrigo,
            other => {
                return Err(Error::Config(format!("unknown model kind `{other}`")));
            }
        })
    }

    pub fn time_features(&self, trigo_k: usize) -> Option<TimeFeatures> {
        match self {
            ModelKind::RnnTime | ModelKind::FfnTime => Some(TimeFeatures::Concat),
            ModelKind::RnnTrigo | ModelKind::FfnTrigo => Some(TimeFeatures::Trigo { k: trigo_k }),
            _ => None,
        }
    }
}

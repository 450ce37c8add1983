//! Experiment configuration: a sectioned TOML file with a `schema_version`.
//!
//! ```toml
//! schema_version = 1
//! name = "desk-lt10"
//! seeds = [0, 1, 2]
//! output_dir = "results"
//!
//! [dataset]
//! seed = 1
//! num_classes = 10
//! feature_dim = 16
//! n_max = 500
//! imbalance_factor = 100.0
//! radius = 2.0
//! noise_std = 1.0
//! test_per_class = 200
//!
//! [model]
//! hidden_dims = [32]
//! activation = "tanh"
//! init_seed = 7
//!
//! [optimizer]
//! name = "imbsam"
//! learning_rate = 0.01
//! weight_decay = 5e-4
//! momentum = 0.9
//! rho = 0.05
//! schedule = "constant"
//!
//! [split]
//! eta = 100
//!
//! [training]
//! epochs = 60
//! batch_size = 64
//! batch_seed = 3
//!
//! [evaluation]
//! many_above = 100
//! few_below = 20
//!
//! [diagnostics]
//! enabled = true
//! probe_seed = 11
//! n_probes = 64
//! max_iters = 100
//! tol = 1e-4
//! ```

use std::path::Path;

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::data::{ClassGeometry, LongTailedSpec, SplitThresholds};
use crate::diagnostics::{Restriction, SharpnessSettings};
use crate::error::{Error, Result};
use crate::model::{Activation, MlpSpec};
use crate::optim::{LrSchedule, OptimConfig, OptimizerKind, DEFAULT_RHO};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub schema_version: u32,
    #[serde(default = "default_name")]
    pub name: String,
    /// Repeat seeds; each one reseeds data, initialization, batching and probes.
    pub seeds: Vec<u64>,
    #[serde(default = "default_output_dir")]
    pub output_dir: String,
    pub dataset: DatasetConfig,
    pub model: ModelConfig,
    pub optimizer: OptimizerConfig,
    #[serde(default)]
    pub split: SplitConfig,
    pub training: TrainingConfig,
    #[serde(default)]
    pub evaluation: EvaluationConfig,
    #[serde(default)]
    pub diagnostics: DiagnosticsConfig,
}

fn default_name() -> String {
    "experiment".into()
}

fn default_output_dir() -> String {
    "results".into()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetConfig {
    pub seed: u64,
    pub num_classes: usize,
    pub feature_dim: usize,
    pub n_max: usize,
    pub imbalance_factor: f64,
    #[serde(default = "default_radius")]
    pub radius: f64,
    #[serde(default = "default_noise")]
    pub noise_std: f64,
    pub test_per_class: usize,
}

fn default_radius() -> f64 {
    ClassGeometry::default().radius
}

fn default_noise() -> f64 {
    ClassGeometry::default().noise_std
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    #[serde(default)]
    pub hidden_dims: Vec<usize>,
    #[serde(default)]
    pub activation: Activation,
    pub init_seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScheduleKind {
    #[default]
    Constant,
    Cosine,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OptimizerConfig {
    pub name: OptimizerKind,
    pub learning_rate: f64,
    #[serde(default)]
    pub weight_decay: f64,
    #[serde(default)]
    pub momentum: f64,
    #[serde(default = "default_rho")]
    pub rho: f64,
    #[serde(default)]
    pub schedule: ScheduleKind,
    /// Explicit per-class loss weights.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub class_weights: Option<Vec<f64>>,
    /// Loss weight for every tail class (head classes keep 1). Ignored when
    /// `class_weights` is given.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tail_weight: Option<f64>,
}

fn default_rho() -> f64 {
    DEFAULT_RHO
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SplitConfig {
    pub eta: usize,
}

impl Default for SplitConfig {
    fn default() -> Self {
        Self { eta: 100 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainingConfig {
    pub epochs: usize,
    pub batch_size: usize,
    #[serde(default)]
    pub batch_seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvaluationConfig {
    pub many_above: usize,
    pub few_below: usize,
}

impl Default for EvaluationConfig {
    fn default() -> Self {
        let t = SplitThresholds::default();
        Self {
            many_above: t.many_above,
            few_below: t.few_below,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DiagnosticsConfig {
    #[serde(default)]
    pub enabled: bool,
    #[serde(default)]
    pub probe_seed: u64,
    #[serde(default = "default_probes")]
    pub n_probes: usize,
    #[serde(default = "default_iters")]
    pub max_iters: usize,
    #[serde(default = "default_tol")]
    pub tol: f64,
    #[serde(default = "default_restrictions")]
    pub restrictions: Vec<Restriction>,
}

fn default_probes() -> usize {
    64
}

fn default_iters() -> usize {
    100
}

fn default_tol() -> f64 {
    1e-4
}

fn default_restrictions() -> Vec<Restriction> {
    Restriction::ALL.to_vec()
}

impl Default for DiagnosticsConfig {
    fn default() -> Self {
        Self {
            enabled: false,
            probe_seed: 0,
            n_probes: default_probes(),
            max_iters: default_iters(),
            tol: default_tol(),
            restrictions: default_restrictions(),
        }
    }
}

/// Mixes a named base seed with a repeat seed.
pub fn derive_seed(base: u64, repeat: u64) -> u64 {
    let mut rng = ChaCha8Rng::seed_from_u64(base);
    rng.set_stream(repeat);
    rng.next_u64()
}

/// The concrete seeds used by one repeat.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunSeeds {
    pub repeat: u64,
    pub data: u64,
    pub init: u64,
    pub batch: u64,
    pub probe: u64,
}

impl ExperimentConfig {
    pub fn from_toml_str(s: &str) -> Result<Self> {
        let cfg: ExperimentConfig = toml::from_str(s)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_toml_str(&std::fs::read_to_string(path)?)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        Ok(toml::to_string(self)?)
    }

    pub fn validate(&self) -> Result<()> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(Error::SchemaVersion(self.schema_version));
        }
        if self.seeds.is_empty() {
            return Err(Error::invalid("at least one repeat seed is required"));
        }
        if self.training.batch_size == 0 {
            return Err(Error::invalid("batch size must be at least 1"));
        }
        if self.dataset.test_per_class == 0 {
            return Err(Error::invalid("test_per_class must be positive"));
        }
        if let Some(w) = self.optimizer.tail_weight {
            if !(w >= 0.0) {
                return Err(Error::invalid("tail_weight must be non-negative"));
            }
        }
        self.mlp_spec(0).validate()?;
        self.optim_config(1).validate()
    }

    /// SHA-256 of the canonical JSON serialization.
    pub fn hash(&self) -> String {
        let canonical = serde_json::to_string(self).expect("config serializes");
        hex::encode(Sha256::digest(canonical.as_bytes()))
    }

    pub fn seeds_for(&self, repeat: u64) -> RunSeeds {
        RunSeeds {
            repeat,
            data: derive_seed(self.dataset.seed, repeat),
            init: derive_seed(self.model.init_seed, repeat),
            batch: derive_seed(self.training.batch_seed, repeat),
            probe: derive_seed(self.diagnostics.probe_seed, repeat),
        }
    }

    pub fn dataset_spec(&self, data_seed: u64) -> LongTailedSpec {
        LongTailedSpec {
            seed: data_seed,
            num_classes: self.dataset.num_classes,
            feature_dim: self.dataset.feature_dim,
            n_max: self.dataset.n_max,
            imbalance_factor: self.dataset.imbalance_factor,
            geometry: ClassGeometry {
                radius: self.dataset.radius,
                noise_std: self.dataset.noise_std,
            },
        }
    }

    pub fn mlp_spec(&self, init_seed: u64) -> MlpSpec {
        MlpSpec {
            input_dim: self.dataset.feature_dim,
            hidden_dims: self.model.hidden_dims.clone(),
            num_classes: self.dataset.num_classes,
            activation: self.model.activation,
            init_seed,
        }
    }

    /// Optimizer settings for a run of `total_steps` steps. Class weights from
    /// `tail_weight` are resolved later, once the split is known.
    pub fn optim_config(&self, total_steps: u64) -> OptimConfig {
        let o = &self.optimizer;
        OptimConfig {
            learning_rate: o.learning_rate,
            weight_decay: o.weight_decay,
            momentum: o.momentum,
            rho: o.rho,
            class_weights: o.class_weights.clone(),
            schedule: match o.schedule {
                ScheduleKind::Constant => LrSchedule::Constant,
                ScheduleKind::Cosine => LrSchedule::Cosine { total_steps },
            },
        }
    }

    pub fn thresholds(&self) -> SplitThresholds {
        SplitThresholds {
            many_above: self.evaluation.many_above,
            few_below: self.evaluation.few_below,
        }
    }

    pub fn sharpness_settings(&self, probe_seed: u64) -> SharpnessSettings {
        SharpnessSettings {
            seed: probe_seed,
            max_iters: self.diagnostics.max_iters,
            tol: self.diagnostics.tol,
            n_probes: self.diagnostics.n_probes,
        }
    }

    /// Copy with a different optimizer, keeping everything else.
    pub fn with_optimizer(&self, name: OptimizerKind) -> Self {
        let mut c = self.clone();
        c.optimizer.name = name;
        c
    }
}

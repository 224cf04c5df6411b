//! Experiment configuration as read from JSON.

use std::collections::BTreeSet;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::acquisition::Strategy;
use crate::error::{Error, Result};
use crate::nnkit::{InitScheme, LossKind, NetworkConfig, TrainSchedule};

use super::datasets::DatasetSpec;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    Accuracy,
    #[serde(rename = "G", alias = "g")]
    G,
    Alignment,
    Mmd,
    Bound,
    ApproxRatio,
}

/// Network shape; input and output sizes come from the dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkSpec {
    #[serde(default = "default_hidden")]
    pub hidden_dims: Vec<usize>,
    #[serde(default = "default_activation")]
    pub activation: crate::nnkit::Activation,
    #[serde(default = "default_init")]
    pub init_scheme: InitScheme,
    #[serde(default)]
    pub seed: u64,
}

fn default_hidden() -> Vec<usize> {
    vec![256]
}

fn default_activation() -> crate::nnkit::Activation {
    crate::nnkit::Activation::Relu
}

fn default_init() -> InitScheme {
    InitScheme::Standard
}

impl Default for NetworkSpec {
    fn default() -> Self {
        Self { hidden_dims: default_hidden(), activation: default_activation(), init_scheme: default_init(), seed: 0 }
    }
}

impl NetworkSpec {
    pub fn build(&self, input_dim: usize, num_classes: usize, seed: u64) -> NetworkConfig {
        NetworkConfig {
            input_dim,
            hidden_dims: self.hidden_dims.clone(),
            num_classes,
            activation: self.activation,
            init_scheme: self.init_scheme,
            seed,
        }
    }
}

fn default_seeds() -> Vec<u64> {
    vec![0, 1, 2, 3, 4]
}

fn default_test_fraction() -> f64 {
    0.2
}

fn default_metrics() -> BTreeSet<Metric> {
    BTreeSet::from([Metric::Accuracy])
}

fn default_ratio_batches() -> usize {
    10
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub dataset: DatasetSpec,
    #[serde(default)]
    pub network: NetworkSpec,
    pub strategy: Strategy,
    /// Initial labeled set size M.
    pub initial_size: usize,
    /// Query size b.
    pub query_size: usize,
    /// Query rounds R.
    pub rounds: usize,
    #[serde(default)]
    pub reinitialize: bool,
    #[serde(default)]
    pub schedule: TrainSchedule,
    #[serde(default = "default_seeds")]
    pub seeds: Vec<u64>,
    #[serde(default = "default_test_fraction")]
    pub test_fraction: f64,
    #[serde(default = "default_metrics")]
    pub metrics: BTreeSet<Metric>,
    /// Loss used for training and for the dynamics criteria.
    #[serde(default = "default_loss")]
    pub loss: LossKind,
    /// Random pseudo-labeled batches per round for the approximation ratio.
    #[serde(default = "default_ratio_batches")]
    pub ratio_batches: usize,
}

fn default_loss() -> LossKind {
    LossKind::CrossEntropy
}

impl ExperimentConfig {
    pub fn from_path(path: &Path) -> Result<Self> {
        let text =
            std::fs::read_to_string(path).map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }

    /// Checks everything that does not need the generated data.
    pub fn validate(&self) -> Result<()> {
        self.dataset.validate()?;
        self.strategy.validate()?;
        if self.initial_size == 0 {
            return Err(Error::Config("initial_size must be at least 1".into()));
        }
        if self.query_size == 0 && self.rounds > 0 {
            return Err(Error::Config("query_size must be at least 1".into()));
        }
        if !(self.test_fraction > 0.0 && self.test_fraction < 1.0) {
            return Err(Error::Config(format!("test_fraction must lie in (0, 1), got {}", self.test_fraction)));
        }
        if self.seeds.is_empty() {
            return Err(Error::Config("seeds must not be empty".into()));
        }
        let s = &self.schedule;
        if !(s.learning_rate > 0.0 && s.learning_rate.is_finite()) {
            return Err(Error::Config(format!("schedule.learning_rate must be positive, got {}", s.learning_rate)));
        }
        if self.network.hidden_dims.contains(&0) {
            return Err(Error::Config("hidden layer widths must be positive".into()));
        }
        Ok(())
    }

    /// Canonical JSON: keys sorted at every level.
    pub fn canonical_json(&self) -> Result<String> {
        let value = serde_json::to_value(self)?;
        Ok(serde_json::to_string(&value)?)
    }

    /// SHA-256 of the canonical JSON, hex encoded.
    pub fn fingerprint(&self) -> Result<String> {
        let digest = Sha256::digest(self.canonical_json()?.as_bytes());
        Ok(digest.iter().map(|b| format!("{b:02x}")).collect())
    }
}

/// A strategy × query-size grid over one base experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub base: ExperimentConfig,
    pub strategies: Vec<Strategy>,
    pub query_sizes: Vec<usize>,
}

impl SweepConfig {
    pub fn from_path(path: &Path) -> Result<Self> {
        let text =
            std::fs::read_to_string(path).map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }

    /// One experiment per grid cell, strategies outermost.
    pub fn expand(&self) -> Result<Vec<ExperimentConfig>> {
        if self.strategies.is_empty() || self.query_sizes.is_empty() {
            return Err(Error::Config("sweep needs at least one strategy and one query size".into()));
        }
        let mut out = Vec::new();
        for s in &self.strategies {
            for &b in &self.query_sizes {
                out.push(ExperimentConfig { strategy: *s, query_size: b, ..self.base.clone() });
            }
        }
        Ok(out)
    }
}

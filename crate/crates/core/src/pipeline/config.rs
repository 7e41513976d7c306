use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::dataset::SeedFormat;
use crate::gateway::GatewayConfig;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SeedConfig {
    /// Corpus directory holding the samples and tables files.
    pub path: PathBuf,
    pub format: SeedFormat,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BackendKind {
    #[default]
    Http,
    Simulated,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub seeds: Vec<SeedConfig>,
    pub out_dir: PathBuf,
    /// Accepted exploration rounds (K) before phase 2 starts.
    pub exploration_rounds: u32,
    /// Validated samples to produce in phase 2.
    pub target_samples: u32,
    /// Word limits offered to exploration prompts, cycled per round.
    pub domain_counts: Vec<u32>,
    pub crossover_multiplier: f64,
    /// Attempts per model call, including the first.
    pub retry_budget: u32,
    pub workers: usize,
    pub rng_seed: u64,
    /// Failed exploration rounds tolerated before the run stops; defaults to K + 10.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_failed_rounds: Option<u32>,
    /// Phase-2 samples tried before giving up on the target; defaults to 4 × target + 10.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_sample_attempts: Option<u32>,
    pub backend: BackendKind,
    pub gateway: GatewayConfig,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            seeds: Vec::new(),
            out_dir: PathBuf::from("out"),
            exploration_rounds: 1000,
            target_samples: 100,
            domain_counts: vec![1, 2, 3],
            crossover_multiplier: 1.5,
            retry_budget: 3,
            workers: 4,
            rng_seed: 0,
            max_failed_rounds: None,
            max_sample_attempts: None,
            backend: BackendKind::Http,
            gateway: GatewayConfig::default(),
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("config syntax: {0}")]
    Parse(String),
    #[error("invalid config: {0}")]
    Invalid(String),
}

impl PipelineConfig {
    pub fn from_toml_str(text: &str) -> Result<Self, ConfigError> {
        let cfg: Self = toml::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// Reads a config file; relative paths in it are taken from the file's
    /// directory.
    pub fn from_file(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|source| ConfigError::Io { path: path.display().to_string(), source })?;
        let mut cfg = Self::from_toml_str(&text)?;
        let base = path.parent().unwrap_or(Path::new("."));
        for s in &mut cfg.seeds {
            s.path = base.join(&s.path);
        }
        cfg.out_dir = base.join(&cfg.out_dir);
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let bad = |m: String| Err(ConfigError::Invalid(m));
        if self.workers == 0 {
            return bad("workers must be >= 1".into());
        }
        if self.retry_budget == 0 {
            return bad("retry_budget must be >= 1".into());
        }
        if self.domain_counts.is_empty() {
            return bad("domain_counts is empty".into());
        }
        if let Some(c) = self.domain_counts.iter().find(|c| !(1..=3).contains(*c)) {
            return bad(format!("domain count {c} outside 1..=3"));
        }
        if !(self.crossover_multiplier.is_finite() && self.crossover_multiplier >= 0.0) {
            return bad("crossover_multiplier must be a finite number >= 0".into());
        }
        self.gateway.validate().map_err(|e| ConfigError::Invalid(e.to_string()))
    }

    pub fn max_failed_rounds(&self) -> u32 {
        self.max_failed_rounds.unwrap_or(self.exploration_rounds.saturating_add(10))
    }

    pub fn max_sample_attempts(&self) -> u32 {
        self.max_sample_attempts.unwrap_or(self.target_samples.saturating_mul(4).saturating_add(10))
    }
}

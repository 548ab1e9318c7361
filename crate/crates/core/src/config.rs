//! Run configuration read from TOML. Unknown keys are rejected, and every
//! run writes back its fully resolved config.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::{SplitFractions, WindowConfig};
use crate::featureset::FeatureSelector;
use crate::ingest::{align, load_aligned_csv, parse_load_csv, parse_weather_csv, weather_to_cst, AlignedSeries};
use crate::models::{ModelKind, ModelSpec, SvrConfig, TrainingConfig};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("{path}: {message}")]
    Parse { path: String, message: String },
    #[error("invalid config: {0}")]
    Invalid(String),
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl ConfigError {
    pub fn code(&self) -> &'static str {
        match self {
            ConfigError::Parse { .. } => "E_CONFIG_PARSE",
            ConfigError::Invalid(_) => "E_INVALID_CONFIG",
            ConfigError::Io { .. } => "E_IO",
        }
    }
}

/// Input files: either an aligned table or a raw load / weather pair.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DataConfig {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub aligned: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub load: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub weather: Option<PathBuf>,
}

impl DataConfig {
    /// Reads the aligned table, or ingests and aligns the raw pair.
    pub fn load(&self) -> Result<AlignedSeries, crate::Error> {
        match (&self.aligned, &self.load, &self.weather) {
            (Some(path), None, None) => Ok(load_aligned_csv(path)?),
            (None, Some(load), Some(weather)) => {
                let load = parse_load_csv(load)?;
                let weather = weather_to_cst(&parse_weather_csv(weather)?);
                Ok(align(&load, &weather)?)
            }
            _ => Err(ConfigError::Invalid("[data] needs either `aligned` or both `load` and `weather`".into()).into()),
        }
    }
}

/// Model architecture; training settings live in their own section.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ModelConfig {
    pub kind: ModelKind,
    pub fcnn_hidden: Vec<usize>,
    pub lstm_hidden: Vec<usize>,
    pub dense_units: usize,
    pub dropout: f64,
    pub conv_filters: Vec<usize>,
    pub conv_kernel: usize,
    pub width_multiplier: usize,
    pub svr: SvrConfig,
}

impl Default for ModelConfig {
    fn default() -> Self {
        let s = ModelSpec::default();
        Self {
            kind: s.kind,
            fcnn_hidden: s.fcnn_hidden,
            lstm_hidden: s.lstm_hidden,
            dense_units: s.dense_units,
            dropout: s.dropout,
            conv_filters: s.conv_filters,
            conv_kernel: s.conv_kernel,
            width_multiplier: s.width_multiplier,
            svr: s.svr,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    /// Seed for all randomness in the run.
    pub seed: u64,
    /// Parallel grid jobs.
    pub workers: usize,
    /// Output directory.
    pub out: PathBuf,
    pub data: DataConfig,
    pub window: WindowConfig,
    pub features: FeatureSelector,
    pub model: ModelConfig,
    pub training: TrainingConfig,
    pub split: SplitFractions,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            workers: 1,
            out: PathBuf::from("out"),
            data: DataConfig::default(),
            window: WindowConfig::default(),
            features: FeatureSelector::all_features(),
            model: ModelConfig::default(),
            training: TrainingConfig::default(),
            split: SplitFractions::default(),
        }
    }
}

impl RunConfig {
    pub fn from_toml(text: &str, origin: &str) -> Result<Self, ConfigError> {
        let mut cfg: RunConfig = toml::from_str(text).map_err(|e| ConfigError::Parse {
            path: origin.into(),
            message: e.to_string(),
        })?;
        if cfg.training.seed != 0 && cfg.training.seed != cfg.seed {
            return Err(ConfigError::Invalid(format!(
                "training.seed = {} conflicts with seed = {}; set the top-level seed only",
                cfg.training.seed, cfg.seed
            )));
        }
        cfg.training.seed = cfg.seed;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, ConfigError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_toml(&text, &path.display().to_string())
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self.training.seed = seed;
        self
    }

    pub fn model_spec(&self) -> ModelSpec {
        let m = &self.model;
        ModelSpec {
            kind: m.kind,
            fcnn_hidden: m.fcnn_hidden.clone(),
            lstm_hidden: m.lstm_hidden.clone(),
            dense_units: m.dense_units,
            dropout: m.dropout,
            conv_filters: m.conv_filters.clone(),
            conv_kernel: m.conv_kernel,
            width_multiplier: m.width_multiplier,
            training: TrainingConfig {
                seed: self.seed,
                ..self.training
            },
            svr: m.svr,
        }
    }

    /// Checks everything that can be checked before touching data.
    pub fn validate(&self) -> Result<(), ConfigError> {
        let invalid = |e: String| ConfigError::Invalid(e);
        self.window.validate().map_err(|e| invalid(e.to_string()))?;
        self.split.validate().map_err(|e| invalid(e.to_string()))?;
        self.features.validate().map_err(|e| invalid(e.to_string()))?;
        if !self.features.include_load {
            return Err(invalid("features must include load, which is the forecast target".into()));
        }
        self.model_spec().validate().map_err(invalid)?;
        if self.workers == 0 {
            return Err(invalid("workers must be at least 1".into()));
        }
        Ok(())
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_and_overrides() {
        let cfg = RunConfig::from_toml("seed = 7\n[window]\nt1 = 12\n[model]\nkind = \"fcnn\"\n", "inline").unwrap();
        assert_eq!(cfg.window, WindowConfig { t1: 12, t2: 4 });
        let spec = cfg.model_spec();
        assert_eq!(spec.kind, ModelKind::Fcnn);
        assert_eq!(spec.training.seed, 7);
        assert_eq!(spec.fcnn_hidden, vec![128, 128, 64]);
        cfg.validate().unwrap();
    }

    #[test]
    fn unknown_keys_are_rejected() {
        for text in ["bogus = 1", "[window]\nt3 = 2", "[model]\nlayers = 3", "[features]\ncolour = 1"] {
            let err = RunConfig::from_toml(text, "inline").unwrap_err();
            assert_eq!(err.code(), "E_CONFIG_PARSE", "{text}");
        }
    }

    #[test]
    fn invalid_values_fail_validation() {
        let cfg = RunConfig::from_toml("[window]\nt1 = 0", "inline").unwrap();
        assert!(matches!(cfg.validate(), Err(ConfigError::Invalid(_))));
        let cfg = RunConfig::from_toml("[features]\ninclude_load = false", "inline").unwrap();
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn resolved_config_round_trips() {
        let cfg = RunConfig::default().with_seed(3);
        let back = RunConfig::from_toml(&cfg.to_toml(), "echo").unwrap();
        assert_eq!(back, cfg);
    }
}

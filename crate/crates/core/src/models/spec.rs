use std::fmt;
use std::str::FromStr;

use loadcast_nn::AdamConfig;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    Persistence,
    Svr,
    Fcnn,
    Lstm,
    Lrcn,
}

impl ModelKind {
    pub const ALL: [ModelKind; 5] = [
        ModelKind::Persistence,
        ModelKind::Svr,
        ModelKind::Fcnn,
        ModelKind::Lstm,
        ModelKind::Lrcn,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ModelKind::Persistence => "persistence",
            ModelKind::Svr => "svr",
            ModelKind::Fcnn => "fcnn",
            ModelKind::Lstm => "lstm",
            ModelKind::Lrcn => "lrcn",
        }
    }

    pub fn is_network(self) -> bool {
        matches!(self, ModelKind::Fcnn | ModelKind::Lstm | ModelKind::Lrcn)
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ModelKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        ModelKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| format!("unknown model kind {s:?}; expected persistence, svr, fcnn, lstm or lrcn"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SvrMode {
    /// Soft-margin ε-insensitive loss.
    Epsilon,
    /// Closed-form squared loss with an L2 penalty on the weights.
    Ridge,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SvrConfig {
    pub mode: SvrMode,
    /// Half-width of the insensitive tube, in normalized target units.
    pub epsilon: f64,
    /// Penalty on tube violations (epsilon mode).
    pub c: f64,
    /// Weight penalty (ridge mode).
    pub lambda: f64,
    /// Newton steps allowed before giving up (epsilon mode).
    pub max_iter: usize,
    /// Relative duality gap accepted as converged (epsilon mode).
    pub tol: f64,
}

impl Default for SvrConfig {
    fn default() -> Self {
        Self {
            mode: SvrMode::Epsilon,
            epsilon: 0.01,
            c: 1.0,
            lambda: 1e-3,
            max_iter: 2000,
            tol: 1e-3,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainingConfig {
    pub max_epochs: usize,
    pub batch_size: usize,
    /// Epochs without validation improvement tolerated before stopping.
    pub patience: usize,
    pub seed: u64,
    pub adam: AdamConfig,
}

impl Default for TrainingConfig {
    fn default() -> Self {
        Self {
            max_epochs: 200,
            batch_size: 256,
            patience: 10,
            seed: 0,
            adam: AdamConfig::default(),
        }
    }
}

/// Everything needed to build and train one model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ModelSpec {
    pub kind: ModelKind,
    pub fcnn_hidden: Vec<usize>,
    pub lstm_hidden: Vec<usize>,
    pub dense_units: usize,
    pub dropout: f64,
    pub conv_filters: Vec<usize>,
    pub conv_kernel: usize,
    /// Scales every hidden width; 2 gives the larger variant.
    pub width_multiplier: usize,
    pub training: TrainingConfig,
    pub svr: SvrConfig,
}

impl Default for ModelSpec {
    fn default() -> Self {
        Self {
            kind: ModelKind::Lstm,
            fcnn_hidden: vec![128, 128, 64],
            lstm_hidden: vec![64, 64],
            dense_units: 128,
            dropout: 0.2,
            conv_filters: vec![32],
            conv_kernel: 3,
            width_multiplier: 1,
            training: TrainingConfig::default(),
            svr: SvrConfig::default(),
        }
    }
}

impl ModelSpec {
    pub fn new(kind: ModelKind) -> Self {
        Self {
            kind,
            ..Self::default()
        }
    }

    pub fn larger(mut self) -> Self {
        self.width_multiplier = 2;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.training.seed = seed;
        self
    }

    pub(crate) fn widen(&self, width: usize) -> usize {
        width * self.width_multiplier
    }

    pub fn validate(&self) -> Result<(), String> {
        let t = &self.training;
        let s = &self.svr;
        let widths = self.fcnn_hidden.iter().chain(&self.lstm_hidden).chain(&self.conv_filters);
        if self.width_multiplier == 0 || self.dense_units == 0 || widths.clone().any(|&w| w == 0) {
            return Err("layer widths and width_multiplier must be positive".into());
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(format!("dropout must lie in [0, 1), got {}", self.dropout));
        }
        match self.kind {
            ModelKind::Lstm if self.lstm_hidden.is_empty() => return Err("lstm needs at least one recurrent layer".into()),
            ModelKind::Lrcn if self.lstm_hidden.is_empty() || self.conv_filters.is_empty() => {
                return Err("lrcn needs at least one conv and one recurrent layer".into())
            }
            ModelKind::Lrcn if self.conv_kernel == 0 => return Err("conv_kernel must be positive".into()),
            _ => {}
        }
        if self.kind.is_network() && (t.max_epochs == 0 || t.batch_size == 0) {
            return Err("max_epochs and batch_size must be positive".into());
        }
        let svr_ok = s.epsilon >= 0.0 && s.c > 0.0 && s.lambda >= 0.0 && s.tol > 0.0 && s.max_iter > 0;
        if self.kind == ModelKind::Svr && !svr_ok {
            return Err("svr needs epsilon >= 0, c > 0, lambda >= 0, tol > 0 and max_iter > 0".into());
        }
        Ok(())
    }
}

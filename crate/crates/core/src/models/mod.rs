//! Forecasting models behind one train / predict / save interface.

mod artifact;
mod spec;
pub mod svr;
mod train;

use loadcast_nn::{Activation, Conv1d, Dense, Dropout, Flatten, Layer, Lstm, Network, NnError, Tensor};
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::{DatasetError, Normalizer, Sample, Split, SplitFractions, WindowConfig, WindowLayout};
use crate::featureset::{assemble_rows, FeatureError, FeatureSelector};
use crate::ingest::{AlignedRow, HourStamp};

pub use artifact::FORMAT_VERSION;
pub use spec::{ModelKind, ModelSpec, SvrConfig, SvrMode, TrainingConfig};
pub use svr::LinearPredictor;
pub use train::{train, EpochRecord, History};

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("invalid model spec: {0}")]
    InvalidSpec(String),
    #[error("persistence needs at least one load value")]
    EmptyWindow,
    #[error("normal equations are singular")]
    SingularSystem,
    #[error("svr did not converge within {iterations} passes")]
    NonConvergence { iterations: usize },
    #[error("training loss became non-finite in epoch {epoch}")]
    NonFiniteLoss { epoch: usize },
    #[error("{0} split is empty")]
    EmptySplit(Split),
    #[error("input shape mismatch: expected {expected}, got {got}")]
    ShapeMismatch { expected: String, got: String },
    #[error("input rows are not contiguous after {after}")]
    NotContiguous { after: HourStamp },
    #[error("corrupt model artifact: {0}")]
    CorruptArtifact(String),
    #[error("artifact format version {found} is not supported (expected {supported})")]
    VersionMismatch { found: u32, supported: u32 },
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Dataset(#[from] DatasetError),
    #[error(transparent)]
    Feature(#[from] FeatureError),
    #[error(transparent)]
    Nn(#[from] NnError),
}

impl ModelError {
    pub fn code(&self) -> &'static str {
        match self {
            ModelError::InvalidSpec(_) => "E_INVALID_SPEC",
            ModelError::EmptyWindow => "E_EMPTY_WINDOW",
            ModelError::SingularSystem => "E_SINGULAR_SYSTEM",
            ModelError::NonConvergence { .. } => "E_NON_CONVERGENCE",
            ModelError::NonFiniteLoss { .. } => "E_NON_FINITE_LOSS",
            ModelError::EmptySplit(_) => "E_EMPTY_SPLIT",
            ModelError::ShapeMismatch { .. } => "E_SHAPE_MISMATCH",
            ModelError::NotContiguous { .. } => "E_NOT_CONTIGUOUS",
            ModelError::CorruptArtifact(_) => "E_CORRUPT_ARTIFACT",
            ModelError::VersionMismatch { .. } => "E_VERSION_MISMATCH",
            ModelError::Io { .. } => "E_IO",
            ModelError::Dataset(e) => e.code(),
            ModelError::Feature(e) => e.code(),
            ModelError::Nn(_) => "E_NN",
        }
    }
}

pub type Result<T> = std::result::Result<T, ModelError>;

/// The most recent load repeated `t2` times.
pub fn persistence_predict(loads: &[f64], t2: usize) -> Result<Vec<f64>> {
    let last = *loads.last().ok_or(ModelError::EmptyWindow)?;
    Ok(vec![last; t2])
}

/// Builds an untrained network taking `batch × t1 × channels` inputs and
/// producing `batch × t2` outputs.
pub fn build_model<R: Rng + ?Sized>(spec: &ModelSpec, window: WindowConfig, channels: usize, rng: &mut R) -> Result<Network> {
    spec.validate().map_err(ModelError::InvalidSpec)?;
    window.validate()?;
    let mut layers = Vec::new();
    match spec.kind {
        ModelKind::Fcnn => {
            layers.push(Layer::Flatten(Flatten::new()));
            let mut width = window.t1 * channels;
            for &h in &spec.fcnn_hidden {
                let h = spec.widen(h);
                layers.push(Layer::Dense(Dense::new(width, h, Activation::Relu, rng)));
                width = h;
            }
            layers.push(Layer::Dense(Dense::new(width, window.t2, Activation::Identity, rng)));
        }
        ModelKind::Lstm | ModelKind::Lrcn => {
            let (mut time, mut width) = (window.t1, channels);
            if spec.kind == ModelKind::Lrcn {
                for &f in &spec.conv_filters {
                    if spec.conv_kernel > time {
                        return Err(ModelError::InvalidSpec(format!(
                            "conv kernel {} exceeds the {time} remaining time steps",
                            spec.conv_kernel
                        )));
                    }
                    let f = spec.widen(f);
                    layers.push(Layer::Conv1d(Conv1d::new(width, f, spec.conv_kernel, rng)));
                    time = time - spec.conv_kernel + 1;
                    width = f;
                }
            }
            for &h in &spec.lstm_hidden {
                let h = spec.widen(h);
                layers.push(Layer::Lstm(Lstm::new(width, h, rng)));
                width = h;
            }
            layers.push(Layer::Flatten(Flatten::new()));
            let dense = spec.widen(spec.dense_units);
            layers.push(Layer::Dense(Dense::new(time * width, dense, Activation::Relu, rng)));
            layers.push(Layer::Dropout(Dropout::new(spec.dropout)?));
            layers.push(Layer::Dense(Dense::new(dense, window.t2, Activation::Identity, rng)));
        }
        ModelKind::Persistence | ModelKind::Svr => {
            return Err(ModelError::InvalidSpec(format!("{} is not a network", spec.kind)));
        }
    }
    Ok(Network::new(layers))
}

#[derive(Debug, Clone)]
pub enum ModelParams {
    Persistence,
    Svr(Vec<LinearPredictor>),
    Network(Network),
}

/// A fitted model with everything needed to turn raw rows into forecasts.
#[derive(Debug, Clone)]
pub struct TrainedModel {
    pub spec: ModelSpec,
    pub selector: FeatureSelector,
    pub window: WindowConfig,
    pub fractions: SplitFractions,
    pub channel_names: Vec<String>,
    pub load_index: usize,
    pub normalizer: Normalizer,
    pub history: History,
    pub params: ModelParams,
}

const PREDICT_CHUNK: usize = 1024;

impl TrainedModel {
    /// The parameter-free benchmark for a given layout.
    pub fn persistence(selector: FeatureSelector, layout: &WindowLayout, fractions: SplitFractions) -> Self {
        Self {
            spec: ModelSpec::new(ModelKind::Persistence),
            selector,
            window: layout.window,
            fractions,
            channel_names: layout.channel_names.clone(),
            load_index: layout.load_index,
            normalizer: Normalizer::default(),
            history: History::default(),
            params: ModelParams::Persistence,
        }
    }

    pub fn kind(&self) -> ModelKind {
        self.spec.kind
    }

    pub fn channels(&self) -> usize {
        self.channel_names.len()
    }

    pub fn input_width(&self) -> usize {
        self.window.t1 * self.channels()
    }

    pub fn layout(&self) -> WindowLayout {
        WindowLayout {
            window: self.window,
            channel_names: self.channel_names.clone(),
            load_index: self.load_index,
        }
    }

    /// Fails unless `layout` has the same window and channels this model was
    /// trained on.
    pub fn check_layout(&self, layout: &WindowLayout) -> Result<()> {
        if layout.window != self.window || layout.channel_names != self.channel_names {
            return Err(ModelError::ShapeMismatch {
                expected: format!("t1={} t2={} channels {:?}", self.window.t1, self.window.t2, self.channel_names),
                got: format!("t1={} t2={} channels {:?}", layout.window.t1, layout.window.t2, layout.channel_names),
            });
        }
        Ok(())
    }

    fn check_width(&self, got: usize) -> Result<()> {
        if got != self.input_width() {
            return Err(ModelError::ShapeMismatch {
                expected: format!("{} values ({} hours × {} channels)", self.input_width(), self.window.t1, self.channels()),
                got: format!("{got} values"),
            });
        }
        Ok(())
    }

    /// Forecast in megawatts from one raw `t1 × channels` input window.
    pub fn predict_window(&self, input: &[f64]) -> Result<Vec<f64>> {
        self.predict_inputs(&[input])
    }

    /// Forecasts for many samples, flattened `n × t2`.
    pub fn predict_samples(&self, samples: &[Sample]) -> Result<Vec<f64>> {
        let inputs: Vec<&[f64]> = samples.iter().map(|s| s.input.as_slice()).collect();
        self.predict_inputs(&inputs)
    }

    fn predict_inputs(&self, inputs: &[&[f64]]) -> Result<Vec<f64>> {
        for x in inputs {
            self.check_width(x.len())?;
        }
        let t2 = self.window.t2;
        let c = self.channels();
        let mut out = Vec::with_capacity(inputs.len() * t2);
        match &self.params {
            ModelParams::Persistence => {
                for x in inputs {
                    let loads: Vec<f64> = x.chunks_exact(c).map(|row| row[self.load_index]).collect();
                    out.extend(persistence_predict(&loads, t2)?);
                }
            }
            ModelParams::Svr(predictors) => {
                for x in inputs {
                    let z = self.normalizer.transform_input(x)?;
                    for p in predictors {
                        out.push(self.normalizer.inverse_transform_load(p.predict(&z))?);
                    }
                }
            }
            ModelParams::Network(net) => {
                for chunk in inputs.chunks(PREDICT_CHUNK) {
                    let mut z = Vec::with_capacity(chunk.len() * self.input_width());
                    for x in chunk {
                        z.extend(self.normalizer.transform_input(x)?);
                    }
                    let y = net.forward(&Tensor::from_vec(&[chunk.len(), self.window.t1, c], z)?)?;
                    for v in y.data() {
                        out.push(self.normalizer.inverse_transform_load(*v)?);
                    }
                }
            }
        }
        Ok(out)
    }

    /// Forecast from the last `t1` aligned rows, which must be consecutive
    /// hours.
    pub fn predict(&self, rows: &[AlignedRow]) -> Result<Vec<f64>> {
        if rows.len() != self.window.t1 {
            return Err(ModelError::ShapeMismatch {
                expected: format!("{} rows", self.window.t1),
                got: format!("{} rows", rows.len()),
            });
        }
        if let Some(pair) = rows.windows(2).find(|p| p[1].stamp != p[0].stamp.succ()) {
            return Err(ModelError::NotContiguous { after: pair[0].stamp });
        }
        let matrix = assemble_rows(rows, &self.selector)?;
        if matrix.names != self.channel_names {
            return Err(ModelError::ShapeMismatch {
                expected: format!("channels {:?}", self.channel_names),
                got: format!("channels {:?}", matrix.names),
            });
        }
        self.predict_window(&matrix.data)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub(crate) struct ArtifactHeader {
    pub spec: ModelSpec,
    pub selector: FeatureSelector,
    pub window: WindowConfig,
    pub fractions: SplitFractions,
    pub channel_names: Vec<String>,
    pub load_index: usize,
    pub normalizer: Normalizer,
    pub history: History,
}

//! Short-term electric load forecasting: ingestion, feature assembly,
//! windowing, models, evaluation and experiment grids.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod dataset;
pub mod eval;
pub mod experiments;
pub mod featureset;
pub mod ingest;
pub mod models;

use thiserror::Error;

/// Any error the toolkit can surface, each with a stable code.
#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Ingest(#[from] ingest::IngestError),
    #[error(transparent)]
    Feature(#[from] featureset::FeatureError),
    #[error(transparent)]
    Dataset(#[from] dataset::DatasetError),
    #[error(transparent)]
    Model(#[from] models::ModelError),
    #[error(transparent)]
    Eval(#[from] eval::EvalError),
    #[error(transparent)]
    Experiment(#[from] experiments::ExperimentError),
    #[error(transparent)]
    Config(#[from] config::ConfigError),
}

impl Error {
    pub fn code(&self) -> &'static str {
        match self {
            Error::Ingest(e) => e.code(),
            Error::Feature(e) => e.code(),
            Error::Dataset(e) => e.code(),
            Error::Model(e) => e.code(),
            Error::Eval(e) => e.code(),
            Error::Experiment(e) => e.code(),
            Error::Config(e) => e.code(),
        }
    }
}

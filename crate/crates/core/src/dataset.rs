//! Sliding-window supervised samples, chronological splits and min-max
//! normalization.
//!
//! A sample spans `t1 + t2` consecutive hours inside one segment: the first
//! `t1` rows of every channel are the input, the load of the last `t2` hours
//! is the target. Samples keep raw values; a [`Normalizer`] fitted on the
//! training split maps them into model space.

use std::fmt;
use std::ops::Range;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::featureset::FeatureMatrix;
use crate::ingest::{HourStamp, Segment};

#[derive(Debug, Error, PartialEq)]
pub enum DatasetError {
    #[error("invalid window: t1 = {t1}, t2 = {t2} (both must be >= 1)")]
    InvalidWindow { t1: usize, t2: usize },
    #[error("feature selection excludes load, so targets are undefined")]
    MissingLoadChannel,
    #[error("split fractions must be positive and sum to 1, got {0:?}")]
    InvalidFractions([f64; 3]),
    #[error("need at least 3 samples to split, got {0}")]
    TooFewSamples(usize),
    #[error("training split is empty")]
    EmptyTrainSplit,
    #[error("normalizer has not been fitted")]
    NotFitted,
    #[error("expected {expected} values, got {got}")]
    ChannelMismatch { expected: usize, got: usize },
}

impl DatasetError {
    pub fn code(&self) -> &'static str {
        match self {
            DatasetError::InvalidWindow { .. } => "E_INVALID_WINDOW",
            DatasetError::MissingLoadChannel => "E_MISSING_LOAD_CHANNEL",
            DatasetError::InvalidFractions(_) => "E_INVALID_FRACTIONS",
            DatasetError::TooFewSamples(_) => "E_TOO_FEW_SAMPLES",
            DatasetError::EmptyTrainSplit => "E_EMPTY_TRAIN_SPLIT",
            DatasetError::NotFitted => "E_NOT_FITTED",
            DatasetError::ChannelMismatch { .. } => "E_CHANNEL_MISMATCH",
        }
    }
}

pub type Result<T> = std::result::Result<T, DatasetError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct WindowConfig {
    /// Look-back hours fed to the model.
    pub t1: usize,
    /// Look-ahead hours predicted.
    pub t2: usize,
}

impl Default for WindowConfig {
    fn default() -> Self {
        Self { t1: 6, t2: 4 }
    }
}

impl WindowConfig {
    pub fn validate(&self) -> Result<()> {
        if self.t1 == 0 || self.t2 == 0 {
            return Err(DatasetError::InvalidWindow { t1: self.t1, t2: self.t2 });
        }
        Ok(())
    }

    pub fn span(&self) -> usize {
        self.t1 + self.t2
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    /// Stamp of the first input hour.
    pub origin: HourStamp,
    /// Raw `t1 × channels` input, row-major.
    pub input: Vec<f64>,
    /// Raw load, megawatts, for the `t2` hours after the input.
    pub target: Vec<f64>,
}

/// Enumerates every admissible window (stride 1) inside each segment.
pub fn build_windows(matrix: &FeatureMatrix, segments: &[Segment], cfg: WindowConfig) -> Result<Vec<Sample>> {
    cfg.validate()?;
    let load = matrix.load_index.ok_or(DatasetError::MissingLoadChannel)?;
    let cols = matrix.cols();
    let mut out = Vec::new();
    for seg in segments {
        if seg.len < cfg.span() {
            continue;
        }
        for start in seg.start..=seg.start + seg.len - cfg.span() {
            let input = matrix.data[start * cols..(start + cfg.t1) * cols].to_vec();
            let target = (start + cfg.t1..start + cfg.span()).map(|r| matrix.row(r)[load]).collect();
            out.push(Sample {
                origin: matrix.stamps[start],
                input,
                target,
            });
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SplitFractions {
    pub train: f64,
    pub val: f64,
    pub test: f64,
}

impl Default for SplitFractions {
    fn default() -> Self {
        Self {
            train: 0.45,
            val: 0.45,
            test: 0.10,
        }
    }
}

impl SplitFractions {
    pub fn validate(&self) -> Result<()> {
        let all = [self.train, self.val, self.test];
        if all.iter().any(|f| !(*f > 0.0)) || (all.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
            return Err(DatasetError::InvalidFractions(all));
        }
        Ok(())
    }

    /// `(⌊train·n⌋, ⌊val·n⌋, remainder)`.
    pub fn counts(&self, n: usize) -> (usize, usize, usize) {
        // the nudge keeps products like 0.45 * 100 from flooring to 44
        let floor = |f: f64| ((f * n as f64) + 1e-9).floor() as usize;
        let train = floor(self.train).min(n);
        let val = floor(self.val).min(n - train);
        (train, val, n - train - val)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Split {
    Train,
    Val,
    Test,
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Split::Train => "train",
            Split::Val => "val",
            Split::Test => "test",
        })
    }
}

impl FromStr for Split {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "train" => Ok(Split::Train),
            "val" | "validation" => Ok(Split::Val),
            "test" => Ok(Split::Test),
            other => Err(format!("unknown split {other:?}; expected train, val or test")),
        }
    }
}

/// Column metadata shared by every sample of a dataset.
#[derive(Debug, Clone, PartialEq)]
pub struct WindowLayout {
    pub window: WindowConfig,
    pub channel_names: Vec<String>,
    pub load_index: usize,
}

impl WindowLayout {
    pub fn from_matrix(matrix: &FeatureMatrix, window: WindowConfig) -> Result<Self> {
        Ok(Self {
            window,
            channel_names: matrix.names.clone(),
            load_index: matrix.load_index.ok_or(DatasetError::MissingLoadChannel)?,
        })
    }

    pub fn channels(&self) -> usize {
        self.channel_names.len()
    }
}

/// Samples ordered by origin with contiguous train / val / test ranges.
#[derive(Debug, Clone, PartialEq)]
pub struct WindowedDataset {
    pub layout: WindowLayout,
    pub fractions: SplitFractions,
    samples: Vec<Sample>,
    train: Range<usize>,
    val: Range<usize>,
    test: Range<usize>,
}

pub fn chronological_split(mut samples: Vec<Sample>, fractions: SplitFractions, layout: WindowLayout) -> Result<WindowedDataset> {
    fractions.validate()?;
    let n = samples.len();
    if n < 3 {
        return Err(DatasetError::TooFewSamples(n));
    }
    samples.sort_by_key(|s| s.origin);
    let (train, val, _) = fractions.counts(n);
    Ok(WindowedDataset {
        layout,
        fractions,
        samples,
        train: 0..train,
        val: train..train + val,
        test: train + val..n,
    })
}

/// Assemble windows from a feature matrix and split them.
pub fn build_dataset(
    matrix: &FeatureMatrix,
    segments: &[Segment],
    window: WindowConfig,
    fractions: SplitFractions,
) -> Result<WindowedDataset> {
    let layout = WindowLayout::from_matrix(matrix, window)?;
    let samples = build_windows(matrix, segments, window)?;
    chronological_split(samples, fractions, layout)
}

impl WindowedDataset {
    pub fn samples(&self) -> &[Sample] {
        &self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn range(&self, split: Split) -> Range<usize> {
        match split {
            Split::Train => self.train.clone(),
            Split::Val => self.val.clone(),
            Split::Test => self.test.clone(),
        }
    }

    pub fn split(&self, split: Split) -> &[Sample] {
        &self.samples[self.range(split)]
    }

    pub fn split_of(&self, index: usize) -> Split {
        if self.train.contains(&index) {
            Split::Train
        } else if self.val.contains(&index) {
            Split::Val
        } else {
            Split::Test
        }
    }

    pub fn origins(&self, split: Split) -> Vec<HourStamp> {
        self.split(split).iter().map(|s| s.origin).collect()
    }

    /// Normalized `(inputs, targets)` of a split as flat row-major buffers:
    /// `n × (t1·channels)` and `n × t2`.
    pub fn arrays(&self, split: Split, norm: &Normalizer) -> Result<(Vec<f64>, Vec<f64>)> {
        let samples = self.split(split);
        let mut x = Vec::with_capacity(samples.len() * samples.first().map_or(0, |s| s.input.len()));
        let mut y = Vec::with_capacity(samples.len() * self.layout.window.t2);
        for s in samples {
            x.extend(norm.transform_input(&s.input)?);
            y.extend(norm.transform_target(&s.target)?);
        }
        Ok((x, y))
    }
}

/// Observed range of one channel.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MinMax {
    pub min: f64,
    pub max: f64,
}

impl MinMax {
    fn over(values: impl Iterator<Item = f64>) -> Option<Self> {
        values.fold(None, |acc, v| match acc {
            None => Some(Self { min: v, max: v }),
            Some(m) => Some(Self {
                min: m.min.min(v),
                max: m.max.max(v),
            }),
        })
    }

    pub fn is_degenerate(&self) -> bool {
        self.max <= self.min
    }

    /// `(x - min) / (max - min)`, unclipped; degenerate ranges map to 0.5.
    pub fn transform(&self, x: f64) -> f64 {
        if self.is_degenerate() {
            0.5
        } else {
            (x - self.min) / (self.max - self.min)
        }
    }

    pub fn inverse(&self, y: f64) -> f64 {
        if self.is_degenerate() {
            self.min
        } else {
            y * (self.max - self.min) + self.min
        }
    }
}

/// Per-channel input ranges plus the target-load range, fitted on the
/// training split only.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Normalizer {
    pub channels: Vec<MinMax>,
    pub target: Option<MinMax>,
}

pub fn fit_normalizer(dataset: &WindowedDataset) -> Result<Normalizer> {
    let train = dataset.split(Split::Train);
    if train.is_empty() {
        return Err(DatasetError::EmptyTrainSplit);
    }
    let c = dataset.layout.channels();
    let channels = (0..c)
        .map(|j| {
            MinMax::over(train.iter().flat_map(|s| s.input.chunks_exact(c).map(move |row| row[j])))
                .expect("train split is non-empty")
        })
        .collect();
    let target = MinMax::over(train.iter().flat_map(|s| s.target.iter().copied()));
    Ok(Normalizer { channels, target })
}

impl Normalizer {
    pub fn is_fitted(&self) -> bool {
        !self.channels.is_empty() && self.target.is_some()
    }

    fn target_range(&self) -> Result<MinMax> {
        self.target.ok_or(DatasetError::NotFitted)
    }

    /// Normalizes a `rows × channels` input window.
    pub fn transform_input(&self, input: &[f64]) -> Result<Vec<f64>> {
        let c = self.channels.len();
        if c == 0 {
            return Err(DatasetError::NotFitted);
        }
        if !input.len().is_multiple_of(c) {
            return Err(DatasetError::ChannelMismatch {
                expected: c,
                got: input.len(),
            });
        }
        Ok(input
            .chunks_exact(c)
            .flat_map(|row| row.iter().zip(&self.channels).map(|(&x, m)| m.transform(x)))
            .collect())
    }

    pub fn transform_target(&self, target: &[f64]) -> Result<Vec<f64>> {
        let m = self.target_range()?;
        Ok(target.iter().map(|&v| m.transform(v)).collect())
    }

    /// Model-space load back to megawatts.
    pub fn inverse_transform_load(&self, y: f64) -> Result<f64> {
        Ok(self.target_range()?.inverse(y))
    }
}

//! Forecast accuracy metrics, evaluation reports and plot-ready CSVs.

use std::fmt::Write as _;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::{Split, WindowedDataset};
use crate::featureset::{FeatureMatrix, FeatureSelector};
use crate::ingest::HourStamp;
use crate::models::{ModelError, ModelKind, TrainedModel};

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("{pred} predictions for {actual} actual values")]
    LengthMismatch { pred: usize, actual: usize },
    #[error("actual value at index {index} is not positive")]
    ZeroActual { index: usize },
    #[error("actual values are constant (or fewer than two), so R² is undefined")]
    DegenerateActual,
    #[error("{0} split is empty")]
    EmptySplit(Split),
    #[error("unknown plot kind {0:?}; expected scatter_load_vs_weather, pred_vs_actual or error_histogram")]
    UnknownKind(String),
    #[error("plot kind {kind} needs {needs}")]
    WrongSource { kind: &'static str, needs: &'static str },
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl EvalError {
    pub fn code(&self) -> &'static str {
        match self {
            EvalError::LengthMismatch { .. } => "E_LENGTH_MISMATCH",
            EvalError::ZeroActual { .. } => "E_ZERO_ACTUAL",
            EvalError::DegenerateActual => "E_DEGENERATE_ACTUAL",
            EvalError::EmptySplit(_) => "E_EMPTY_SPLIT",
            EvalError::UnknownKind(_) => "E_UNKNOWN_KIND",
            EvalError::WrongSource { .. } => "E_WRONG_SOURCE",
            EvalError::Model(e) => e.code(),
            EvalError::Io { .. } => "E_IO",
        }
    }
}

pub type Result<T> = std::result::Result<T, EvalError>;

/// Error tolerances in percent.
pub const TOLERANCES: [f64; 5] = [1.0, 2.0, 3.0, 4.0, 5.0];

fn check(pred: &[f64], actual: &[f64]) -> Result<()> {
    if pred.len() != actual.len() {
        return Err(EvalError::LengthMismatch {
            pred: pred.len(),
            actual: actual.len(),
        });
    }
    match actual.iter().position(|&a| !(a > 0.0)) {
        Some(index) => Err(EvalError::ZeroActual { index }),
        None => Ok(()),
    }
}

/// Absolute percentage error of every point.
pub fn ape(pred: &[f64], actual: &[f64]) -> Result<Vec<f64>> {
    check(pred, actual)?;
    Ok(pred.iter().zip(actual).map(|(p, a)| 100.0 * (p - a).abs() / a).collect())
}

/// Mean absolute percentage error, in percent.
pub fn mape(pred: &[f64], actual: &[f64]) -> Result<f64> {
    let e = ape(pred, actual)?;
    if e.is_empty() {
        return Ok(0.0);
    }
    Ok(e.iter().sum::<f64>() / e.len() as f64)
}

/// Coefficient of determination against the mean of `actual`.
pub fn r_squared(pred: &[f64], actual: &[f64]) -> Result<f64> {
    if pred.len() != actual.len() {
        return Err(EvalError::LengthMismatch {
            pred: pred.len(),
            actual: actual.len(),
        });
    }
    if actual.len() < 2 {
        return Err(EvalError::DegenerateActual);
    }
    let mean = actual.iter().sum::<f64>() / actual.len() as f64;
    let ss_tot: f64 = actual.iter().map(|a| (a - mean) * (a - mean)).sum();
    if ss_tot == 0.0 {
        return Err(EvalError::DegenerateActual);
    }
    let ss_res: f64 = actual.iter().zip(pred).map(|(a, p)| (a - p) * (a - p)).sum();
    Ok(1.0 - ss_res / ss_tot)
}

/// Fraction of points whose absolute percentage error is at most each
/// threshold (percent).
pub fn tolerance_accuracy(pred: &[f64], actual: &[f64], thresholds: &[f64]) -> Result<Vec<f64>> {
    let e = ape(pred, actual)?;
    Ok(thresholds.iter().map(|&t| fraction(e.iter().map(|&v| v <= t))).collect())
}

/// Fraction of whole samples (consecutive runs of `horizon` points) whose
/// every point is within each threshold.
pub fn sample_tolerance_accuracy(pred: &[f64], actual: &[f64], horizon: usize, thresholds: &[f64]) -> Result<Vec<f64>> {
    let e = ape(pred, actual)?;
    Ok(thresholds
        .iter()
        .map(|&t| fraction(e.chunks(horizon.max(1)).map(|s| s.iter().all(|&v| v <= t))))
        .collect())
}

fn fraction(hits: impl Iterator<Item = bool>) -> f64 {
    let (mut yes, mut total) = (0usize, 0usize);
    for h in hits {
        yes += h as usize;
        total += 1;
    }
    if total == 0 {
        1.0
    } else {
        yes as f64 / total as f64
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ToleranceAccuracy {
    pub threshold_pct: f64,
    pub fraction: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HorizonMetrics {
    /// 1-based look-ahead hour.
    pub hour: usize,
    pub mape: f64,
    pub r2: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub model: ModelKind,
    pub selector: FeatureSelector,
    pub features: String,
    pub split: Split,
    pub samples: usize,
    pub horizon: usize,
    pub mape: f64,
    /// `None` when the actual values are constant.
    pub r2: Option<f64>,
    pub degenerate_actual: bool,
    /// Counted per predicted point.
    pub tolerance_accuracy: Vec<ToleranceAccuracy>,
    /// Counted per sample: every look-ahead hour must be within tolerance.
    pub sample_tolerance_accuracy: Vec<ToleranceAccuracy>,
    pub per_horizon: Vec<HorizonMetrics>,
    pub origins: Vec<HourStamp>,
    /// Row-major `samples × horizon`.
    pub predicted: Vec<f64>,
    pub actual: Vec<f64>,
    pub ape: Vec<f64>,
}

impl EvaluationReport {
    /// Pools metrics over already-computed forecasts.
    #[allow(clippy::too_many_arguments)]
    pub fn from_predictions(
        model: ModelKind,
        selector: &FeatureSelector,
        split: Split,
        horizon: usize,
        origins: Vec<HourStamp>,
        predicted: Vec<f64>,
        actual: Vec<f64>,
    ) -> Result<Self> {
        let errors = ape(&predicted, &actual)?;
        let r2 = optional_r2(&predicted, &actual)?;
        let tol = |v: Vec<f64>| {
            TOLERANCES
                .iter()
                .zip(v)
                .map(|(&threshold_pct, fraction)| ToleranceAccuracy {
                    threshold_pct,
                    fraction,
                })
                .collect()
        };
        let per_horizon = (0..horizon)
            .map(|h| {
                let p: Vec<f64> = predicted.iter().skip(h).step_by(horizon).copied().collect();
                let a: Vec<f64> = actual.iter().skip(h).step_by(horizon).copied().collect();
                Ok(HorizonMetrics {
                    hour: h + 1,
                    mape: mape(&p, &a)?,
                    r2: optional_r2(&p, &a)?,
                })
            })
            .collect::<Result<_>>()?;
        Ok(Self {
            model,
            selector: selector.clone(),
            features: selector.label(),
            split,
            samples: origins.len(),
            horizon,
            mape: mape(&predicted, &actual)?,
            r2,
            degenerate_actual: r2.is_none(),
            tolerance_accuracy: tol(tolerance_accuracy(&predicted, &actual, &TOLERANCES)?),
            sample_tolerance_accuracy: tol(sample_tolerance_accuracy(&predicted, &actual, horizon, &TOLERANCES)?),
            per_horizon,
            origins,
            predicted,
            actual,
            ape: errors,
        })
    }

    pub fn accuracy_at(&self, threshold_pct: f64) -> Option<f64> {
        self.tolerance_accuracy
            .iter()
            .find(|t| t.threshold_pct == threshold_pct)
            .map(|t| t.fraction)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

fn optional_r2(pred: &[f64], actual: &[f64]) -> Result<Option<f64>> {
    match r_squared(pred, actual) {
        Ok(v) => Ok(Some(v)),
        Err(EvalError::DegenerateActual) => Ok(None),
        Err(e) => Err(e),
    }
}

/// Forecasts every sample of `split` and pools the errors.
pub fn evaluate(model: &TrainedModel, dataset: &WindowedDataset, split: Split) -> Result<EvaluationReport> {
    model.check_layout(&dataset.layout)?;
    let samples = dataset.split(split);
    if samples.is_empty() {
        return Err(EvalError::EmptySplit(split));
    }
    let predicted = model.predict_samples(samples)?;
    let actual = samples.iter().flat_map(|s| s.target.iter().copied()).collect();
    EvaluationReport::from_predictions(
        model.kind(),
        &model.selector,
        split,
        dataset.layout.window.t2,
        samples.iter().map(|s| s.origin).collect(),
        predicted,
        actual,
    )
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PlotKind {
    ScatterLoadVsWeather,
    PredVsActual,
    ErrorHistogram,
}

impl PlotKind {
    pub const ALL: [PlotKind; 3] = [PlotKind::ScatterLoadVsWeather, PlotKind::PredVsActual, PlotKind::ErrorHistogram];

    pub fn name(self) -> &'static str {
        match self {
            PlotKind::ScatterLoadVsWeather => "scatter_load_vs_weather",
            PlotKind::PredVsActual => "pred_vs_actual",
            PlotKind::ErrorHistogram => "error_histogram",
        }
    }
}

impl FromStr for PlotKind {
    type Err = EvalError;

    fn from_str(s: &str) -> Result<Self> {
        PlotKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| EvalError::UnknownKind(s.to_string()))
    }
}

pub enum PlotSource<'a> {
    Report(&'a EvaluationReport),
    Features(&'a FeatureMatrix),
}

pub const HISTOGRAM_BINS: usize = 50;

/// `(lower edge, upper edge, count)` per bin over `[min, max]`; the last
/// bin includes its upper edge.
pub fn histogram(values: &[f64], bins: usize) -> Vec<(f64, f64, usize)> {
    if values.is_empty() || bins == 0 {
        return Vec::new();
    }
    let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
    let mut hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if hi <= lo {
        hi = lo + 1.0;
    }
    let width = (hi - lo) / bins as f64;
    let mut counts = vec![0usize; bins];
    for &v in values {
        let k = (((v - lo) / width) as usize).min(bins - 1);
        counts[k] += 1;
    }
    let edge = |k: usize| if k == bins { hi } else { lo + width * k as f64 };
    counts.into_iter().enumerate().map(|(k, c)| (edge(k), edge(k + 1), c)).collect()
}

/// Renders plot data as a headered CSV.
pub fn plot_csv(source: &PlotSource<'_>, kind: PlotKind) -> Result<String> {
    let mut out = String::new();
    match (kind, source) {
        (PlotKind::PredVsActual, PlotSource::Report(r)) => {
            out.push_str("origin,hour,actual_mw,predicted_mw\n");
            for (i, (p, a)) in r.predicted.iter().zip(&r.actual).enumerate() {
                let origin = r.origins[i / r.horizon];
                writeln!(out, "{origin},{},{a},{p}", i % r.horizon + 1).expect("write to string");
            }
        }
        (PlotKind::ErrorHistogram, PlotSource::Report(r)) => {
            out.push_str("bin_start_pct,bin_end_pct,count\n");
            for (lo, hi, c) in histogram(&r.ape, HISTOGRAM_BINS) {
                writeln!(out, "{lo},{hi},{c}").expect("write to string");
            }
        }
        (PlotKind::ScatterLoadVsWeather, PlotSource::Features(m)) => {
            out.push_str(&m.names.join(","));
            out.push('\n');
            for i in 0..m.rows() {
                let row: Vec<String> = m.row(i).iter().map(f64::to_string).collect();
                out.push_str(&row.join(","));
                out.push('\n');
            }
        }
        (PlotKind::ScatterLoadVsWeather, _) => {
            return Err(EvalError::WrongSource {
                kind: kind.name(),
                needs: "a feature matrix",
            })
        }
        (_, _) => {
            return Err(EvalError::WrongSource {
                kind: kind.name(),
                needs: "an evaluation report",
            })
        }
    }
    Ok(out)
}

pub fn emit_plot_data(source: &PlotSource<'_>, kind: &str, path: impl AsRef<Path>) -> Result<()> {
    let kind: PlotKind = kind.parse()?;
    let csv = plot_csv(source, kind)?;
    let path = path.as_ref();
    std::fs::write(path, csv).map_err(|source| EvalError::Io {
        path: path.display().to_string(),
        source,
    })
}

#[cfg(test)]
mod tests {
    use proptest::prelude::*;

    use super::*;
    use crate::dataset::{build_dataset, SplitFractions, WindowConfig};
    use crate::featureset::{assemble, WeatherFeature};
    use crate::ingest::{AlignedRow, AlignedSeries, ZoneWeather};

    #[test]
    fn mape_examples() {
        assert_eq!(mape(&[110.0], &[100.0]).unwrap(), 10.0);
        assert_eq!(mape(&[5.0, 7.0], &[5.0, 7.0]).unwrap(), 0.0);
        assert_eq!(mape(&[90.0, 110.0], &[100.0, 100.0]).unwrap(), 10.0);
        assert!(matches!(mape(&[1.0], &[1.0, 2.0]), Err(EvalError::LengthMismatch { .. })));
        assert!(matches!(mape(&[1.0, 1.0], &[1.0, 0.0]), Err(EvalError::ZeroActual { index: 1 })));
    }

    #[test]
    fn r_squared_examples() {
        let a = [3.0, 5.0, 10.0, 2.0];
        assert_eq!(r_squared(&a, &a).unwrap(), 1.0);
        assert_eq!(r_squared(&[5.0; 4], &a).unwrap(), 0.0);
        assert!(matches!(r_squared(&[1.0, 2.0], &[4.0, 4.0]), Err(EvalError::DegenerateActual)));
        assert!(matches!(r_squared(&[1.0], &[4.0]), Err(EvalError::DegenerateActual)));
    }

    #[test]
    fn tolerance_examples() {
        let actual = [100.0; 3];
        let pred = [100.5, 101.5, 102.5];
        assert_eq!(tolerance_accuracy(&pred, &actual, &[1.0, 2.0, 3.0]).unwrap(), vec![1.0 / 3.0, 2.0 / 3.0, 1.0]);
        assert_eq!(tolerance_accuracy(&actual, &actual, &TOLERANCES).unwrap(), vec![1.0; 5]);
        // one sample of three points only passes once every point does
        assert_eq!(sample_tolerance_accuracy(&pred, &actual, 3, &[2.0, 3.0]).unwrap(), vec![0.0, 1.0]);
    }

    #[test]
    fn histogram_counts_every_point() {
        let v: Vec<f64> = (0..1000).map(|i| (i as f64 * 0.7).sin().abs() * 3.0).collect();
        let h = histogram(&v, 50);
        assert_eq!(h.len(), 50);
        assert_eq!(h.iter().map(|b| b.2).sum::<usize>(), 1000);
        assert_eq!(histogram(&[2.0, 2.0], 5).iter().map(|b| b.2).sum::<usize>(), 2);
    }

    fn series(load: impl Fn(usize) -> f64) -> AlignedSeries {
        AlignedSeries::from_rows(
            (0..200)
                .map(|i| AlignedRow {
                    stamp: HourStamp::from_hours(i as i64),
                    load_mw: load(i),
                    zones: [ZoneWeather {
                        temp_k: 280.0 + i as f64 * 0.1,
                        ..ZoneWeather::default()
                    }; 8],
                })
                .collect(),
        )
        .unwrap()
    }

    fn persistence_report(s: &AlignedSeries) -> EvaluationReport {
        let sel = FeatureSelector::load_only();
        let m = assemble(s, &sel).unwrap();
        let ds = build_dataset(&m, s.segments(), WindowConfig::default(), SplitFractions::default()).unwrap();
        let model = TrainedModel::persistence(sel, &ds.layout, ds.fractions);
        evaluate(&model, &ds, Split::Test).unwrap()
    }

    #[test]
    fn constant_load_flags_degenerate_actual() {
        let r = persistence_report(&series(|_| 1000.0));
        assert_eq!(r.mape, 0.0);
        assert!(r.degenerate_actual);
        assert_eq!(r.r2, None);
    }

    #[test]
    fn report_is_internally_consistent() {
        let r = persistence_report(&series(|i| 1000.0 + 100.0 * (i as f64 * 0.3).sin()));
        assert_eq!(r.samples, 21);
        assert_eq!(r.predicted.len(), 84);
        assert_eq!(r.mape, mape(&r.predicted, &r.actual).unwrap());
        assert_eq!(r.r2, Some(r_squared(&r.predicted, &r.actual).unwrap()));
        let per_sample: f64 = r
            .predicted
            .chunks(4)
            .zip(r.actual.chunks(4))
            .map(|(p, a)| mape(p, a).unwrap())
            .sum::<f64>()
            / r.samples as f64;
        assert!((per_sample - r.mape).abs() < 1e-12);
        let json = r.to_json();
        let back: EvaluationReport = serde_json::from_str(&json).unwrap();
        assert_eq!(back, r);
    }

    #[test]
    fn plot_files() {
        let s = series(|i| 1000.0 + 100.0 * (i as f64 * 0.3).sin());
        let r = persistence_report(&s);
        let pva = plot_csv(&PlotSource::Report(&r), PlotKind::PredVsActual).unwrap();
        assert_eq!(pva.lines().count(), r.predicted.len() + 1);
        let hist = plot_csv(&PlotSource::Report(&r), PlotKind::ErrorHistogram).unwrap();
        let total: usize = hist.lines().skip(1).map(|l| l.rsplit(',').next().unwrap().parse::<usize>().unwrap()).sum();
        assert_eq!(total, r.ape.len());
        let sel = FeatureSelector::load_only().with_weather(&[WeatherFeature::Temp, WeatherFeature::Wind]);
        let m = assemble(&s, &sel).unwrap();
        let scatter = plot_csv(&PlotSource::Features(&m), PlotKind::ScatterLoadVsWeather).unwrap();
        assert_eq!(scatter.lines().next().unwrap().split(',').count(), 1 + 16);
        assert!(matches!("bogus".parse::<PlotKind>(), Err(EvalError::UnknownKind(_))));
        assert!(matches!(
            plot_csv(&PlotSource::Features(&m), PlotKind::PredVsActual),
            Err(EvalError::WrongSource { .. })
        ));
    }

    proptest! {
        #[test]
        fn mape_is_scale_invariant(
            pairs in prop::collection::vec((1.0f64..1e4, 1.0f64..1e4), 1..50),
            k in 1e-3f64..1e3,
        ) {
            let (p, a): (Vec<f64>, Vec<f64>) = pairs.into_iter().unzip();
            let ps: Vec<f64> = p.iter().map(|v| v * k).collect();
            let as_: Vec<f64> = a.iter().map(|v| v * k).collect();
            let (m1, m2) = (mape(&p, &a).unwrap(), mape(&ps, &as_).unwrap());
            prop_assert!((m1 - m2).abs() <= 1e-9 * m1.max(1.0));
        }
    }
}

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{ExperimentError, ExperimentGrid, GridRow, Result};
use crate::dataset::{build_dataset, Split, WindowedDataset};
use crate::eval::{evaluate, EvaluationReport};
use crate::featureset::{assemble, FeatureSelector};
use crate::ingest::{write_aligned_csv, AlignedSeries, HourStamp};
use crate::models::{train, ModelKind, TrainedModel};

/// Test-split metrics of one trained model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub mape: f64,
    pub r2: Option<f64>,
    /// Per-point accuracies at 1–5 %.
    pub tolerance_accuracy: Vec<f64>,
    pub test_samples: usize,
    pub epochs: usize,
}

impl RunSummary {
    fn new(report: &EvaluationReport, epochs: usize) -> Self {
        Self {
            mape: report.mape,
            r2: report.r2,
            tolerance_accuracy: report.tolerance_accuracy.iter().map(|t| t.fraction).collect(),
            test_samples: report.samples,
            epochs,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SeedOutcome {
    Ok(RunSummary),
    Failed { code: String, message: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub seeds_ok: usize,
    pub mean_mape: f64,
    pub best_mape: f64,
    pub mean_r2: Option<f64>,
    pub mean_tolerance_accuracy: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RowResult {
    pub name: String,
    pub features: String,
    pub model: ModelKind,
    pub channels: usize,
    pub seeds: BTreeMap<u64, SeedOutcome>,
    pub aggregate: Option<Aggregate>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    /// SHA-256 of the grid definition as JSON.
    pub config_hash: String,
    /// SHA-256 of the aligned series as CSV.
    pub data_hash: String,
    pub code_version: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridReport {
    pub grid: ExperimentGrid,
    pub provenance: Provenance,
    /// Persistence forecast on the shared test windows.
    pub benchmark: RunSummary,
    pub test_origins: usize,
    pub rows: Vec<RowResult>,
}

impl GridReport {
    pub fn row(&self, name: &str) -> Option<&RowResult> {
        self.rows.iter().find(|r| r.name == name)
    }
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> ExperimentError + '_ {
    move |source| ExperimentError::Io {
        path: path.display().to_string(),
        source,
    }
}

fn write_file(path: &Path, contents: &[u8]) -> Result<()> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir).map_err(io_err(dir))?;
    }
    std::fs::write(path, contents).map_err(io_err(path))
}

fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub(crate) fn data_hash(series: &AlignedSeries) -> String {
    let mut csv = Vec::new();
    write_aligned_csv(series, &mut csv).expect("writing to memory");
    sha256_hex(&csv)
}

fn aggregate(seeds: &BTreeMap<u64, SeedOutcome>) -> Option<Aggregate> {
    let ok: Vec<&RunSummary> = seeds
        .values()
        .filter_map(|o| match o {
            SeedOutcome::Ok(s) => Some(s),
            SeedOutcome::Failed { .. } => None,
        })
        .collect();
    if ok.is_empty() {
        return None;
    }
    let n = ok.len() as f64;
    let r2: Option<Vec<f64>> = ok.iter().map(|s| s.r2).collect();
    let k = ok[0].tolerance_accuracy.len();
    Some(Aggregate {
        seeds_ok: ok.len(),
        mean_mape: ok.iter().map(|s| s.mape).sum::<f64>() / n,
        best_mape: ok.iter().map(|s| s.mape).fold(f64::INFINITY, f64::min),
        mean_r2: r2.map(|v| v.iter().sum::<f64>() / n),
        mean_tolerance_accuracy: (0..k).map(|j| ok.iter().map(|s| s.tolerance_accuracy[j]).sum::<f64>() / n).collect(),
    })
}

struct Job<'a> {
    row: &'a GridRow,
    seed: u64,
    dataset: &'a WindowedDataset,
}

fn job_dir(out: &Path, row: &str, seed: u64) -> PathBuf {
    out.join("rows").join(row).join(format!("seed{seed}"))
}

/// Reuses a finished job when both files exist, parse, and were produced
/// by the same row definition.
fn resume(dir: &Path, job: &Job<'_>) -> Option<RunSummary> {
    let model = TrainedModel::load(dir.join("model.lcst")).ok()?;
    let report: EvaluationReport = serde_json::from_slice(&std::fs::read(dir.join("report.json")).ok()?).ok()?;
    let same = model.spec == job.row.spec.clone().with_seed(job.seed)
        && model.selector == job.row.selector
        && model.window == job.dataset.layout.window
        && model.fractions == job.dataset.fractions
        && report.origins == job.dataset.origins(Split::Test);
    same.then(|| RunSummary::new(&report, model.history.epochs.len()))
}

fn run_job(job: &Job<'_>, out: Option<&Path>) -> Result<RunSummary> {
    let dir = out.map(|o| job_dir(o, &job.row.name, job.seed));
    if let Some(summary) = dir.as_deref().and_then(|d| resume(d, job)) {
        log::info!("{} seed {}: reusing finished run", job.row.name, job.seed);
        return Ok(summary);
    }
    let spec = job.row.spec.clone().with_seed(job.seed);
    let model = train(&spec, &job.row.selector, job.dataset)?;
    let report = evaluate(&model, job.dataset, Split::Test)?;
    if let Some(dir) = dir {
        // report last, so a crash between the writes cannot leave a resumable pair
        write_file(&dir.join("model.lcst"), &model.to_bytes()?)?;
        write_file(&dir.join("report.json"), report.to_json().as_bytes())?;
    }
    log::info!(
        "{} seed {}: MAPE {:.3}% after {} epochs",
        job.row.name,
        job.seed,
        report.mape,
        model.history.epochs.len()
    );
    Ok(RunSummary::new(&report, model.history.epochs.len()))
}

/// Trains and evaluates every row × seed of `grid` on `series`.
///
/// With `out` set, each job writes `rows/<row>/seed<k>/{model.lcst,
/// report.json}` and finished jobs are skipped on rerun; `grid.json` and
/// `tables/<style>.{csv,txt}` are written at the end. Jobs run on a pool of
/// `workers` threads; results do not depend on the worker count.
pub fn run_grid(grid: &ExperimentGrid, series: &AlignedSeries, out: Option<&Path>, workers: usize) -> Result<GridReport> {
    grid.validate()?;
    let mut datasets: BTreeMap<String, WindowedDataset> = BTreeMap::new();
    let key = |s: &FeatureSelector| serde_json::to_string(s).expect("selector serializes");
    let benchmark_selector = FeatureSelector::load_only();
    for selector in grid.rows.iter().map(|r| &r.selector).chain([&benchmark_selector]) {
        if datasets.contains_key(&key(selector)) {
            continue;
        }
        let matrix = assemble(series, selector)?;
        let dataset = match build_dataset(&matrix, series.segments(), grid.window, grid.fractions) {
            Err(crate::dataset::DatasetError::TooFewSamples(samples)) => {
                return Err(ExperimentError::DatasetTooSmall { samples })
            }
            other => other?,
        };
        datasets.insert(key(selector), dataset);
    }
    let bench_data = &datasets[&key(&benchmark_selector)];
    let test_origins: Vec<HourStamp> = bench_data.origins(Split::Test);
    debug_assert!(datasets.values().all(|d| d.origins(Split::Test) == test_origins));
    let bench_model = TrainedModel::persistence(benchmark_selector.clone(), &bench_data.layout, grid.fractions);
    let benchmark = RunSummary::new(&evaluate(&bench_model, bench_data, Split::Test)?, 0);

    let jobs: Vec<Job<'_>> = grid
        .rows
        .iter()
        .flat_map(|row| {
            let dataset = &datasets[&key(&row.selector)];
            grid.seeds.iter().map(move |&seed| Job { row, seed, dataset })
        })
        .collect();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| ExperimentError::InvalidConfig(format!("worker pool: {e}")))?;
    let outcomes: Vec<SeedOutcome> = pool.install(|| {
        jobs.par_iter()
            .map(|job| match run_job(job, out) {
                Ok(s) => SeedOutcome::Ok(s),
                Err(e) => {
                    log::warn!("{} seed {} failed: {e}", job.row.name, job.seed);
                    SeedOutcome::Failed {
                        code: e.code().into(),
                        message: e.to_string(),
                    }
                }
            })
            .collect()
    });

    let mut outcomes = outcomes.into_iter();
    let rows = grid
        .rows
        .iter()
        .map(|row| {
            let seeds: BTreeMap<u64, SeedOutcome> = grid.seeds.iter().map(|&s| (s, outcomes.next().expect("one outcome per job"))).collect();
            RowResult {
                name: row.name.clone(),
                features: row.selector.label(),
                model: row.spec.kind,
                channels: row.selector.channel_count(),
                aggregate: aggregate(&seeds),
                seeds,
            }
        })
        .collect();

    let report = GridReport {
        grid: grid.clone(),
        provenance: Provenance {
            config_hash: sha256_hex(&serde_json::to_vec(grid).expect("grid serializes")),
            data_hash: data_hash(series),
            code_version: env!("CARGO_PKG_VERSION").into(),
        },
        benchmark,
        test_origins: test_origins.len(),
        rows,
    };

    if let Some(out) = out {
        write_file(&out.join("grid.json"), serde_json::to_string_pretty(&report).expect("report serializes").as_bytes())?;
        match super::render_table(&report, grid.style) {
            Ok(t) => {
                let tables = out.join("tables");
                write_file(&tables.join(format!("{}.csv", grid.style)), t.csv.as_bytes())?;
                write_file(&tables.join(format!("{}.txt", grid.style)), t.text.as_bytes())?;
            }
            Err(e) => log::warn!("tables not written: {e}"),
        }
    }
    Ok(report)
}

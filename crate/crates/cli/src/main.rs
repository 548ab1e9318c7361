use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use loadcast::config::RunConfig;
use loadcast::dataset::{build_dataset, Split, WindowLayout, WindowedDataset};
use loadcast::eval::{emit_plot_data, evaluate, PlotSource};
use loadcast::experiments::{builtin_grid, generate_synthetic, run_grid, ExperimentGrid, GridReport, SynthConfig};
use loadcast::featureset::{assemble, FeatureSelector};
use loadcast::ingest::{align, load_aligned_csv, parse_load_csv, parse_weather_csv, weather_to_cst, AlignedSeries, HourStamp};
use loadcast::models::{train, ModelKind, TrainedModel};
use loadcast::Error;

/// Short-term electric load forecasting.
#[derive(Parser)]
#[command(name = "loadcast", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Align a load CSV with a weather CSV and write aligned.csv.
    Ingest {
        /// Hourly load, `timestamp_cst,load_mw`.
        load: PathBuf,
        /// Hourly zone weather on the UTC clock.
        weather: PathBuf,
        /// Output directory.
        #[arg(long, default_value = ".")]
        out: PathBuf,
    },
    /// Generate synthetic load and weather (load.csv, weather.csv, aligned.csv).
    Synth {
        /// Whole years of hourly data.
        #[arg(long, default_value_t = 2)]
        years: usize,
        #[arg(long, default_value_t = 42)]
        seed: u64,
        /// Output directory.
        #[arg(long, default_value = ".")]
        out: PathBuf,
    },
    /// Train one model from a run config; writes model.lcst, history.csv and config.toml.
    Train {
        /// Run config (TOML).
        #[arg(long)]
        config: PathBuf,
        /// Overrides `seed` in the config.
        #[arg(long)]
        seed: Option<u64>,
        /// Overrides `out` in the config.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Evaluate a saved model, or `persistence`, on one split; writes report.json and plot CSVs.
    Evaluate {
        /// Path to model.lcst, or `persistence`.
        model: String,
        /// Aligned CSV.
        data: PathBuf,
        /// train, val or test.
        #[arg(long, default_value = "test")]
        split: Split,
        /// Run config supplying window, features and split for `persistence`.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Output directory.
        #[arg(long, default_value = ".")]
        out: PathBuf,
    },
    /// Forecast the hours after `--at` from the window ending at `--at`.
    Predict {
        /// Path to model.lcst, or `persistence`.
        model: String,
        /// Aligned CSV.
        data: PathBuf,
        /// Last input hour, YYYY-MM-DDTHH:00:00 (CST).
        #[arg(long)]
        at: HourStamp,
        /// Run config supplying window and features for `persistence`.
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Run a builtin grid (table1..table5) or a grid TOML file.
    Grid {
        /// Builtin grid name or path to a grid TOML.
        grid: String,
        /// Aligned CSV.
        data: PathBuf,
        #[command(flatten)]
        run: GridArgs,
    },
    /// Run the table5 ablation grid.
    Ablate {
        /// Aligned CSV.
        data: PathBuf,
        #[command(flatten)]
        run: GridArgs,
    },
}

#[derive(Args)]
struct GridArgs {
    /// Parallel jobs.
    #[arg(long, default_value_t = 1)]
    workers: usize,
    /// Comma-separated seeds replacing the grid's list.
    #[arg(long, value_delimiter = ',')]
    seeds: Option<Vec<u64>>,
    /// Overrides `training.max_epochs` in every row.
    #[arg(long)]
    max_epochs: Option<usize>,
    /// Output directory.
    #[arg(long, default_value = "grid-out")]
    out: PathBuf,
}

#[derive(Debug)]
enum CliError {
    Core(Error),
    StampNotFound(HourStamp),
    Io(String, std::io::Error),
}

impl<E: Into<Error>> From<E> for CliError {
    fn from(e: E) -> Self {
        CliError::Core(e.into())
    }
}

impl CliError {
    fn code(&self) -> &'static str {
        match self {
            CliError::Core(e) => e.code(),
            CliError::StampNotFound(_) => "E_STAMP_NOT_FOUND",
            CliError::Io(..) => "E_IO",
        }
    }

    fn message(&self) -> String {
        match self {
            CliError::Core(e) => e.to_string(),
            CliError::StampNotFound(s) => format!("{s} is not in the data"),
            CliError::Io(path, e) => format!("{path}: {e}"),
        }
    }
}

type Result<T> = std::result::Result<T, CliError>;

fn write(path: &Path, contents: impl AsRef<[u8]>) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| CliError::Io(dir.display().to_string(), e))?;
    }
    fs::write(path, contents).map_err(|e| CliError::Io(path.display().to_string(), e))
}

fn mkdir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| CliError::Io(dir.display().to_string(), e))
}

fn dataset_for(series: &AlignedSeries, selector: &FeatureSelector, cfg_window: loadcast::dataset::WindowConfig, fractions: loadcast::dataset::SplitFractions) -> Result<WindowedDataset> {
    let matrix = assemble(series, selector)?;
    Ok(build_dataset(&matrix, series.segments(), cfg_window, fractions)?)
}

fn cmd_ingest(load: &Path, weather: &Path, out: &Path) -> Result<()> {
    let load = parse_load_csv(load)?;
    let weather = weather_to_cst(&parse_weather_csv(weather)?);
    let series = align(&load, &weather)?;
    mkdir(out)?;
    let mut csv = Vec::new();
    loadcast::ingest::write_aligned_csv(&series, &mut csv).map_err(|e| CliError::Io("aligned.csv".into(), e))?;
    let path = out.join("aligned.csv");
    write(&path, csv)?;
    let rows = series.rows();
    println!("rows: {}", rows.len());
    println!("segments: {}", series.segments().len());
    println!("gaps: {}", series.gap_count());
    println!("first: {}", rows[0].stamp);
    println!("last: {}", rows[rows.len() - 1].stamp);
    println!("wrote {}", path.display());
    Ok(())
}

fn cmd_synth(years: usize, seed: u64, out: &Path) -> Result<()> {
    let data = generate_synthetic(&SynthConfig {
        years,
        seed,
        ..SynthConfig::default()
    })?;
    mkdir(out)?;
    let (load, weather) = data.write(out)?;
    let series = data.aligned()?;
    let mut csv = Vec::new();
    loadcast::ingest::write_aligned_csv(&series, &mut csv).map_err(|e| CliError::Io("aligned.csv".into(), e))?;
    let aligned = out.join("aligned.csv");
    write(&aligned, csv)?;
    println!("hours: {}", series.len());
    for p in [load, weather, aligned] {
        println!("wrote {}", p.display());
    }
    Ok(())
}

fn cmd_train(config: &Path, seed: Option<u64>, out: Option<PathBuf>) -> Result<()> {
    let mut cfg = RunConfig::load(config)?;
    if let Some(seed) = seed {
        cfg = cfg.with_seed(seed);
    }
    if let Some(out) = out {
        cfg.out = out;
    }
    cfg.validate()?;
    let series = cfg.data.load()?;
    let ds = dataset_for(&series, &cfg.features, cfg.window, cfg.split)?;
    let spec = cfg.model_spec();
    let model = train(&spec, &cfg.features, &ds)?;
    mkdir(&cfg.out)?;
    let model_path = cfg.out.join("model.lcst");
    model.save(&model_path)?;
    write(&cfg.out.join("history.csv"), model.history.to_csv())?;
    write(&cfg.out.join("config.toml"), cfg.to_toml())?;
    println!("model: {}", spec.kind.name());
    println!("features: {} ({} channels)", cfg.features.label(), model.channels());
    println!(
        "windows: train {} val {} test {}",
        ds.split(Split::Train).len(),
        ds.split(Split::Val).len(),
        ds.split(Split::Test).len()
    );
    if spec.kind.is_network() {
        println!("epochs: {}", model.history.epochs.len());
        if let (Some(best), Some(loss)) = (model.history.best_epoch, model.history.best_val_loss()) {
            println!("best epoch: {best} (val loss {loss:.6})");
        }
    }
    println!("wrote {}", model_path.display());
    Ok(())
}

fn load_model(spec: &str, config: Option<&Path>, series: &AlignedSeries) -> Result<TrainedModel> {
    if spec == ModelKind::Persistence.name() {
        let cfg = match config {
            Some(p) => RunConfig::load(p)?,
            None => RunConfig::default(),
        };
        cfg.validate()?;
        let matrix = assemble(series, &cfg.features)?;
        let layout = WindowLayout::from_matrix(&matrix, cfg.window)?;
        return Ok(TrainedModel::persistence(cfg.features, &layout, cfg.split));
    }
    Ok(TrainedModel::load(spec)?)
}

fn cmd_evaluate(model: &str, data: &Path, split: Split, config: Option<&Path>, out: &Path) -> Result<()> {
    let series = load_aligned_csv(data)?;
    let model = load_model(model, config, &series)?;
    let ds = dataset_for(&series, &model.selector, model.window, model.fractions)?;
    let report = evaluate(&model, &ds, split)?;
    mkdir(out)?;
    write(&out.join("report.json"), report.to_json())?;
    emit_plot_data(&PlotSource::Report(&report), "pred_vs_actual", out.join("pred_vs_actual.csv"))?;
    emit_plot_data(&PlotSource::Report(&report), "error_histogram", out.join("error_histogram.csv"))?;
    let weather = assemble(&series, &FeatureSelector::all_features())?;
    emit_plot_data(&PlotSource::Features(&weather), "scatter_load_vs_weather", out.join("scatter_load_vs_weather.csv"))?;
    println!("model: {}  features: {}  split: {}  samples: {}", report.model.name(), report.features, split, report.samples);
    println!("MAPE: {:.3}%", report.mape);
    match report.r2 {
        Some(r2) => println!("R2: {r2:.3}"),
        None => println!("R2: undefined (constant actuals)"),
    }
    println!("tolerance  point  sample");
    for (p, s) in report.tolerance_accuracy.iter().zip(&report.sample_tolerance_accuracy) {
        println!("{:>8}%  {:>5.1}%  {:>5.1}%", p.threshold_pct, 100.0 * p.fraction, 100.0 * s.fraction);
    }
    println!("wrote {}", out.join("report.json").display());
    Ok(())
}

fn cmd_predict(model: &str, data: &Path, at: HourStamp, config: Option<&Path>) -> Result<()> {
    let series = load_aligned_csv(data)?;
    let model = load_model(model, config, &series)?;
    let t1 = model.window.t1;
    let end = series.position(at).ok_or(CliError::StampNotFound(at))?;
    let start = (end + 1).saturating_sub(t1);
    let forecast = model.predict(&series.rows()[start..=end])?;
    println!("timestamp_cst,forecast_mw");
    for (h, v) in forecast.iter().enumerate() {
        println!("{},{v:.3}", at.plus_hours(h as i64 + 1));
    }
    Ok(())
}

fn cmd_grid(grid: ExperimentGrid, data: &Path, run: &GridArgs) -> Result<()> {
    let grid = match &run.seeds {
        Some(seeds) => grid.with_seeds(seeds.clone()),
        None => grid,
    };
    let grid = match run.max_epochs {
        Some(n) => grid.map_specs(|s| s.training.max_epochs = n),
        None => grid,
    };
    grid.validate()?;
    let series = load_aligned_csv(data)?;
    let report = run_grid(&grid, &series, Some(&run.out), run.workers)?;
    print_grid(&report, &run.out);
    Ok(())
}

fn print_grid(report: &GridReport, out: &Path) {
    let txt = out.join("tables").join(format!("{}.txt", report.grid.style));
    match fs::read_to_string(&txt) {
        Ok(table) => print!("{table}"),
        Err(_) => println!("no successful rows; see {}", out.join("grid.json").display()),
    }
    println!("persistence benchmark MAPE: {:.3}%", report.benchmark.mape);
    for row in &report.rows {
        for (seed, outcome) in &row.seeds {
            if let loadcast::experiments::SeedOutcome::Failed { code, message } = outcome {
                eprintln!("{code}: row {} seed {seed}: {message}", row.name);
            }
        }
    }
}

fn resolve_grid(name: &str) -> Result<ExperimentGrid> {
    if name.ends_with(".toml") || Path::new(name).is_file() {
        return Ok(ExperimentGrid::load(name)?);
    }
    Ok(builtin_grid(name)?)
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Ingest { load, weather, out } => cmd_ingest(&load, &weather, &out),
        Command::Synth { years, seed, out } => cmd_synth(years, seed, &out),
        Command::Train { config, seed, out } => cmd_train(&config, seed, out),
        Command::Evaluate {
            model,
            data,
            split,
            config,
            out,
        } => cmd_evaluate(&model, &data, split, config.as_deref(), &out),
        Command::Predict { model, data, at, config } => cmd_predict(&model, &data, at, config.as_deref()),
        Command::Grid { grid, data, run } => cmd_grid(resolve_grid(&grid)?, &data, &run),
        Command::Ablate { data, run } => cmd_grid(builtin_grid("table5")?, &data, &run),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}: {}", e.code(), e.message());
            ExitCode::FAILURE
        }
    }
}

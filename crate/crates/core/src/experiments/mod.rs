//! Experiment grids over feature selections and model kinds, a resumable
//! parallel runner, result tables and the synthetic data generator.

mod runner;
mod synth;
mod table;

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::{DatasetError, SplitFractions, WindowConfig};
use crate::eval::EvalError;
use crate::featureset::{FeatureError, FeatureSelector, TimeFeature, WeatherFeature};
use crate::ingest::IngestError;
use crate::models::{ModelError, ModelKind, ModelSpec};

pub use runner::{run_grid, Aggregate, GridReport, Provenance, RowResult, RunSummary, SeedOutcome};
pub use synth::{generate_synthetic, weighted_temperature, SynthConfig, SyntheticData, COMFORT_K, POPULATION_WEIGHTS};
pub use table::{format_mape, render_table, RenderedTable};

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error("invalid experiment config: {0}")]
    InvalidConfig(String),
    #[error("unknown grid {0:?}; builtin grids are table1, table2, table3, table4, table5")]
    UnknownGrid(String),
    #[error("series yields only {samples} windows; at least 3 are needed")]
    DatasetTooSmall { samples: usize },
    #[error("rows without any successful seed: {}", .0.join(", "))]
    MissingRows(Vec<String>),
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Ingest(#[from] IngestError),
    #[error(transparent)]
    Feature(#[from] FeatureError),
    #[error(transparent)]
    Dataset(#[from] DatasetError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Eval(#[from] EvalError),
}

impl ExperimentError {
    pub fn code(&self) -> &'static str {
        match self {
            ExperimentError::InvalidConfig(_) => "E_INVALID_CONFIG",
            ExperimentError::UnknownGrid(_) => "E_UNKNOWN_GRID",
            ExperimentError::DatasetTooSmall { .. } => "E_DATASET_TOO_SMALL",
            ExperimentError::MissingRows(_) => "E_MISSING_ROWS",
            ExperimentError::Io { .. } => "E_IO",
            ExperimentError::Ingest(e) => e.code(),
            ExperimentError::Feature(e) => e.code(),
            ExperimentError::Dataset(e) => e.code(),
            ExperimentError::Model(e) => e.code(),
            ExperimentError::Eval(e) => e.code(),
        }
    }
}

pub type Result<T> = std::result::Result<T, ExperimentError>;

/// Column layout of a rendered table.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TableStyle {
    /// MAPE and R² per row.
    Table1,
    /// MAPE and R² per row, with the feature list.
    Table2,
    /// Tolerance accuracies at 1–5 % and MAPE per row.
    Table5,
}

impl TableStyle {
    pub fn name(self) -> &'static str {
        match self {
            TableStyle::Table1 => "table1",
            TableStyle::Table2 => "table2",
            TableStyle::Table5 => "table5",
        }
    }
}

impl fmt::Display for TableStyle {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for TableStyle {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "table1" => Ok(TableStyle::Table1),
            "table2" => Ok(TableStyle::Table2),
            "table5" => Ok(TableStyle::Table5),
            other => Err(format!("unknown table style {other:?}; expected table1, table2 or table5")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridRow {
    pub name: String,
    pub selector: FeatureSelector,
    pub spec: ModelSpec,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentGrid {
    pub name: String,
    pub style: TableStyle,
    pub rows: Vec<GridRow>,
    #[serde(default)]
    pub window: WindowConfig,
    #[serde(default)]
    pub fractions: SplitFractions,
    #[serde(default = "default_seeds")]
    pub seeds: Vec<u64>,
}

pub fn default_seeds() -> Vec<u64> {
    vec![0, 1, 2]
}

impl ExperimentGrid {
    pub fn validate(&self) -> Result<()> {
        if self.rows.is_empty() {
            return Err(ExperimentError::InvalidConfig(format!("grid {} has no rows", self.name)));
        }
        if self.seeds.is_empty() {
            return Err(ExperimentError::InvalidConfig(format!("grid {} has no seeds", self.name)));
        }
        let mut names = BTreeSet::new();
        for row in &self.rows {
            if row.name.is_empty() || row.name.contains(['/', '\\']) || row.name.starts_with('.') {
                return Err(ExperimentError::InvalidConfig(format!("row name {:?} is not a plain file name", row.name)));
            }
            if !names.insert(row.name.as_str()) {
                return Err(ExperimentError::InvalidConfig(format!("duplicate row name {:?}", row.name)));
            }
            row.selector.validate()?;
            if !row.selector.include_load {
                return Err(ExperimentError::Dataset(DatasetError::MissingLoadChannel));
            }
            row.spec.validate().map_err(|e| ExperimentError::InvalidConfig(format!("row {}: {e}", row.name)))?;
        }
        self.window.validate()?;
        self.fractions.validate()?;
        Ok(())
    }

    /// Applies `f` to every row's model spec.
    pub fn map_specs(mut self, f: impl Fn(&mut ModelSpec)) -> Self {
        self.rows.iter_mut().for_each(|r| f(&mut r.spec));
        self
    }

    /// Reads a grid from TOML and validates it.
    pub fn load(path: impl AsRef<std::path::Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| ExperimentError::Io {
            path: path.display().to_string(),
            source,
        })?;
        let grid: ExperimentGrid =
            toml::from_str(&text).map_err(|e| ExperimentError::InvalidConfig(format!("{}: {e}", path.display())))?;
        grid.validate()?;
        Ok(grid)
    }

    pub fn with_seeds(mut self, seeds: Vec<u64>) -> Self {
        self.seeds = seeds;
        self
    }
}

use TimeFeature::{DayOfWeek, Hour, Month};
use WeatherFeature::{Lwrad, Swrad, Temp, Wind};

/// The eleven feature rows shared by tables 2–4.
pub fn feature_rows() -> Vec<(&'static str, FeatureSelector)> {
    let load = FeatureSelector::load_only;
    vec![
        ("load", load()),
        ("load-temp", load().with_weather(&[Temp])),
        ("load-swrad", load().with_weather(&[Swrad])),
        ("load-lwrad", load().with_weather(&[Lwrad])),
        ("load-wind", load().with_weather(&[Wind])),
        ("load-hour-temp", load().with_time(&[Hour]).with_weather(&[Temp])),
        ("load-hour-month-temp", load().with_time(&[Hour, Month]).with_weather(&[Temp])),
        ("load-hour-month-temp-swrad", load().with_time(&[Hour, Month]).with_weather(&[Temp, Swrad])),
        (
            "load-hour-month-temp-swrad-wind",
            load().with_time(&[Hour, Month]).with_weather(&[Temp, Swrad, Wind]),
        ),
        (
            "load-hour-month-temp-swrad-lwrad-wind",
            load().with_time(&[Hour, Month]).with_weather(&[Temp, Swrad, Lwrad, Wind]),
        ),
        ("all", FeatureSelector::all_features()),
    ]
}

fn feature_grid(name: &str, spec: ModelSpec) -> ExperimentGrid {
    ExperimentGrid {
        name: name.into(),
        style: TableStyle::Table2,
        rows: feature_rows()
            .into_iter()
            .map(|(n, selector)| GridRow {
                name: n.into(),
                selector,
                spec: spec.clone(),
            })
            .collect(),
        window: WindowConfig::default(),
        fractions: SplitFractions::default(),
        seeds: default_seeds(),
    }
}

pub const BUILTIN_GRIDS: [&str; 5] = ["table1", "table2", "table3", "table4", "table5"];

pub fn builtin_grid(name: &str) -> Result<ExperimentGrid> {
    let row = |name: &str, selector: FeatureSelector, kind: ModelKind| GridRow {
        name: name.into(),
        selector,
        spec: ModelSpec::new(kind),
    };
    let all = FeatureSelector::all_features;
    let grid = match name {
        "table1" => ExperimentGrid {
            name: name.into(),
            style: TableStyle::Table1,
            rows: [ModelKind::Svr, ModelKind::Fcnn, ModelKind::Lstm, ModelKind::Lrcn]
                .into_iter()
                .map(|k| row(k.name(), all(), k))
                .collect(),
            window: WindowConfig::default(),
            fractions: SplitFractions::default(),
            seeds: default_seeds(),
        },
        "table2" => feature_grid(name, ModelSpec::new(ModelKind::Lstm)),
        "table3" => feature_grid(name, ModelSpec::new(ModelKind::Lstm).larger()),
        "table4" => feature_grid(name, ModelSpec::new(ModelKind::Fcnn)),
        "table5" => ExperimentGrid {
            name: name.into(),
            style: TableStyle::Table5,
            rows: vec![
                row("all", all(), ModelKind::Lstm),
                row("minus-lwrad", all().without_weather(Lwrad), ModelKind::Lstm),
                row("minus-swrad", all().without_weather(Swrad), ModelKind::Lstm),
                row("minus-wind", all().without_weather(Wind), ModelKind::Lstm),
                row("minus-temp", all().without_weather(Temp), ModelKind::Lstm),
                row("time-only", FeatureSelector::load_only().with_time(&[Hour, DayOfWeek, Month]), ModelKind::Lstm),
                row("fcnn-all", all(), ModelKind::Fcnn),
            ],
            window: WindowConfig::default(),
            fractions: SplitFractions::default(),
            seeds: default_seeds(),
        },
        other => return Err(ExperimentError::UnknownGrid(other.into())),
    };
    Ok(grid)
}

pub fn builtin_grids() -> Vec<ExperimentGrid> {
    BUILTIN_GRIDS.iter().map(|n| builtin_grid(n).expect("builtin")).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn builtin_shapes() {
        let grids = builtin_grids();
        assert_eq!(grids.len(), 5);
        for g in &grids {
            g.validate().unwrap();
        }
        assert_eq!(grids[0].rows.len(), 4);
        assert_eq!(grids[1].rows.len(), 11);

        let row7 = &grids[1].rows[6].selector;
        assert_eq!(row7.time_features, [Hour, Month].into_iter().collect());
        assert_eq!(row7.weather_features, [Temp].into_iter().collect());
        assert_eq!(row7.zones.len(), 8);
        assert_eq!(row7.channel_count(), 1 + 2 + 8);

        assert!(grids[2].rows.iter().all(|r| r.spec.width_multiplier == 2 && r.spec.kind == ModelKind::Lstm));
        assert!(grids[3].rows.iter().all(|r| r.spec.kind == ModelKind::Fcnn));

        let t5 = &grids[4];
        let all = t5.rows[0].selector.channel_count();
        assert_eq!(all, 36);
        for r in &t5.rows[1..5] {
            assert_eq!(r.selector.channel_count(), all - 8, "{}", r.name);
        }
        let time_only = &t5.rows[5].selector;
        assert!(time_only.weather_features.is_empty());
        assert_eq!(time_only.time_features.len(), 3);
        assert_eq!(t5.rows[6].spec.kind, ModelKind::Fcnn);

        assert!(matches!(builtin_grid("table9"), Err(ExperimentError::UnknownGrid(_))));
    }

    #[test]
    fn validation() {
        let mut g = builtin_grid("table1").unwrap();
        g.rows[1].name = g.rows[0].name.clone();
        assert!(matches!(g.validate(), Err(ExperimentError::InvalidConfig(_))));
        let mut g = builtin_grid("table1").unwrap();
        g.rows[0].name = "../escape".into();
        assert!(g.validate().is_err());
        let g = builtin_grid("table1").unwrap().with_seeds(vec![]);
        assert!(g.validate().is_err());
    }

    #[test]
    fn grids_round_trip_through_toml() {
        for g in builtin_grids() {
            let text = toml::to_string(&g).unwrap();
            let back: ExperimentGrid = toml::from_str(&text).unwrap();
            assert_eq!(back, g);
        }
    }
}

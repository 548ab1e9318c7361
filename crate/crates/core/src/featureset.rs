//! Declarative feature selection and feature-matrix assembly.
//!
//! Column order is fixed: `load`, then time features (hour, day of week,
//! month), then weather features (temp, swrad, lwrad, wind), each across the
//! selected zones in ascending order.

use std::collections::BTreeSet;
use std::f64::consts::TAU;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ingest::{AlignedRow, AlignedSeries, HourStamp, ZoneWeather, ZONES};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum FeatureError {
    #[error("feature selector selects no channels")]
    EmptySelector,
    #[error("zone {0} out of range 0-7")]
    InvalidZone(u8),
}

impl FeatureError {
    pub fn code(&self) -> &'static str {
        match self {
            FeatureError::EmptySelector => "E_EMPTY_SELECTOR",
            FeatureError::InvalidZone(_) => "E_INVALID_ZONE",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TimeFeature {
    Hour,
    DayOfWeek,
    Month,
}

impl TimeFeature {
    pub const ALL: [TimeFeature; 3] = [TimeFeature::Hour, TimeFeature::DayOfWeek, TimeFeature::Month];

    pub fn name(self) -> &'static str {
        match self {
            TimeFeature::Hour => "hour",
            TimeFeature::DayOfWeek => "day_of_week",
            TimeFeature::Month => "month",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WeatherFeature {
    Temp,
    Swrad,
    Lwrad,
    Wind,
}

impl WeatherFeature {
    pub const ALL: [WeatherFeature; 4] = [
        WeatherFeature::Temp,
        WeatherFeature::Swrad,
        WeatherFeature::Lwrad,
        WeatherFeature::Wind,
    ];

    pub fn name(self) -> &'static str {
        match self {
            WeatherFeature::Temp => "temp",
            WeatherFeature::Swrad => "swrad",
            WeatherFeature::Lwrad => "lwrad",
            WeatherFeature::Wind => "wind",
        }
    }

    pub fn value(self, w: &ZoneWeather) -> f64 {
        match self {
            WeatherFeature::Temp => w.temp_k,
            WeatherFeature::Swrad => w.swrad_wm2,
            WeatherFeature::Lwrad => w.lwrad_wm2,
            WeatherFeature::Wind => w.wind_ms,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TimeEncoding {
    /// One value in [0, 1] per feature.
    #[default]
    Scalar,
    /// `(sin 2πx, cos 2πx)` per feature.
    Cyclical,
}

impl TimeEncoding {
    pub fn width(self) -> usize {
        match self {
            TimeEncoding::Scalar => 1,
            TimeEncoding::Cyclical => 2,
        }
    }
}

fn default_true() -> bool {
    true
}

fn all_zones() -> BTreeSet<u8> {
    (0..ZONES as u8).collect()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FeatureSelector {
    #[serde(default = "default_true")]
    pub include_load: bool,
    #[serde(default)]
    pub time_features: BTreeSet<TimeFeature>,
    #[serde(default)]
    pub weather_features: BTreeSet<WeatherFeature>,
    #[serde(default = "all_zones")]
    pub zones: BTreeSet<u8>,
    #[serde(default)]
    pub time_encoding: TimeEncoding,
}

impl Default for FeatureSelector {
    fn default() -> Self {
        Self::load_only()
    }
}

impl FeatureSelector {
    pub fn load_only() -> Self {
        Self {
            include_load: true,
            time_features: BTreeSet::new(),
            weather_features: BTreeSet::new(),
            zones: all_zones(),
            time_encoding: TimeEncoding::Scalar,
        }
    }

    /// Load, every time feature and every weather feature over all zones.
    pub fn all_features() -> Self {
        Self::load_only()
            .with_time(&TimeFeature::ALL)
            .with_weather(&WeatherFeature::ALL)
    }

    pub fn with_time(mut self, features: &[TimeFeature]) -> Self {
        self.time_features.extend(features.iter().copied());
        self
    }

    pub fn with_weather(mut self, features: &[WeatherFeature]) -> Self {
        self.weather_features.extend(features.iter().copied());
        self
    }

    pub fn without_weather(mut self, feature: WeatherFeature) -> Self {
        self.weather_features.remove(&feature);
        self
    }

    pub fn with_encoding(mut self, encoding: TimeEncoding) -> Self {
        self.time_encoding = encoding;
        self
    }

    pub fn validate(&self) -> Result<(), FeatureError> {
        if let Some(&z) = self.zones.iter().find(|&&z| z as usize >= ZONES) {
            return Err(FeatureError::InvalidZone(z));
        }
        if self.channel_count() == 0 {
            return Err(FeatureError::EmptySelector);
        }
        Ok(())
    }

    pub fn channel_count(&self) -> usize {
        usize::from(self.include_load)
            + self.time_features.len() * self.time_encoding.width()
            + self.weather_features.len() * self.zones.len()
    }

    pub fn channel_names(&self) -> Vec<String> {
        let mut names = Vec::with_capacity(self.channel_count());
        if self.include_load {
            names.push("load".to_string());
        }
        for f in &self.time_features {
            match self.time_encoding {
                TimeEncoding::Scalar => names.push(f.name().to_string()),
                TimeEncoding::Cyclical => {
                    names.push(format!("{}_sin", f.name()));
                    names.push(format!("{}_cos", f.name()));
                }
            }
        }
        for f in &self.weather_features {
            for z in &self.zones {
                names.push(format!("z{z}_{}", f.name()));
            }
        }
        names
    }

    /// Short human label such as `load+hour+month+temp`.
    pub fn label(&self) -> String {
        let mut parts: Vec<&str> = Vec::new();
        if self.include_load {
            parts.push("load");
        }
        parts.extend(self.time_features.iter().map(|f| f.name()));
        parts.extend(self.weather_features.iter().map(|f| f.name()));
        parts.join("+")
    }
}

/// Encodes one calendar feature of `stamp`.
///
/// Scalar: `h/23`, `d/6` (Monday = 0), `(m-1)/11`. Cyclical: `(sin 2πx, cos 2πx)`
/// with `x = h/24`, `d/7`, `(m-1)/12`.
pub fn encode_time(stamp: HourStamp, which: TimeFeature, encoding: TimeEncoding) -> Vec<f64> {
    let (value, scalar_div, period) = match which {
        TimeFeature::Hour => (stamp.hour() as f64, 23.0, 24.0),
        TimeFeature::DayOfWeek => (stamp.weekday() as f64, 6.0, 7.0),
        TimeFeature::Month => (stamp.month() as f64 - 1.0, 11.0, 12.0),
    };
    match encoding {
        TimeEncoding::Scalar => vec![value / scalar_div],
        TimeEncoding::Cyclical => {
            let angle = TAU * value / period;
            vec![angle.sin(), angle.cos()]
        }
    }
}

/// Row-major `hours × channels` matrix with channel names.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    pub stamps: Vec<HourStamp>,
    pub data: Vec<f64>,
    pub names: Vec<String>,
    pub load_index: Option<usize>,
}

impl FeatureMatrix {
    pub fn rows(&self) -> usize {
        self.stamps.len()
    }

    pub fn cols(&self) -> usize {
        self.names.len()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        let c = self.cols();
        &self.data[i * c..(i + 1) * c]
    }

    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let j = self.names.iter().position(|n| n == name)?;
        Some((0..self.rows()).map(|i| self.row(i)[j]).collect())
    }
}

pub fn assemble(series: &AlignedSeries, selector: &FeatureSelector) -> Result<FeatureMatrix, FeatureError> {
    assemble_rows(series.rows(), selector)
}

/// Builds the feature matrix for an arbitrary run of aligned rows.
pub fn assemble_rows(rows: &[AlignedRow], selector: &FeatureSelector) -> Result<FeatureMatrix, FeatureError> {
    selector.validate()?;
    let cols = selector.channel_count();
    let mut data = Vec::with_capacity(rows.len() * cols);
    for row in rows {
        if selector.include_load {
            data.push(row.load_mw);
        }
        for &f in &selector.time_features {
            data.extend(encode_time(row.stamp, f, selector.time_encoding));
        }
        for &f in &selector.weather_features {
            data.extend(selector.zones.iter().map(|&z| f.value(&row.zones[z as usize])));
        }
    }
    Ok(FeatureMatrix {
        stamps: rows.iter().map(|r| r.stamp).collect(),
        data,
        names: selector.channel_names(),
        load_index: selector.include_load.then_some(0),
    })
}

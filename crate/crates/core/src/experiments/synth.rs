//! Seeded synthetic load and weather series with a realistic shape: load
//! rises on both sides of a comfort temperature, follows a workday / weekend
//! rhythm and a daily cycle.
//!
//! Per zone `z` (offsets and weights are fixed tables below):
//!
//! * `temp = 291 + offset_z − 10·cos(2π(doy − 15)/365) − 5·cos(2π(h − 15)/24)
//!   + regional AR(1) + local AR(1)` kelvin
//! * `swrad = 900·max(0, sin(π(h − 6)/12))·(0.75 + 0.25·season)·(1 − 0.6·cloud)`
//! * `lwrad = 310 + 4.5·(temp − 291) + 40·cloud + N(0, 5)`, floored at 0
//! * wind speed is a positive AR(1) around 4 m/s with a wandering direction,
//!   written as zonal / meridional components
//!
//! Load in megawatts is
//! `40000 + week(d, h) + 5000·day(h) + heat·max(0, T − 291) + cold·max(0, 291 − T)
//! + AR(1) noise + N(0, 150)` where `T` is the population-weighted
//! temperature, `heat = 1100` and `cold = 700` MW/K.

use std::f64::consts::PI;
use std::io::Write;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::ExperimentError;
use crate::ingest::{
    align, cst_to_utc, weather_to_cst, AlignedSeries, HourStamp, LoadRecord, LoadSeries, UtcStamp, WeatherSample,
    LOAD_HEADER, WEATHER_HEADER, ZONES,
};

pub const COMFORT_K: f64 = 291.0;
const ZONE_OFFSET_K: [f64; ZONES] = [1.5, 0.5, -0.5, 2.5, -3.0, 3.5, -1.5, 0.0];
pub const POPULATION_WEIGHTS: [f64; ZONES] = [0.26, 0.22, 0.14, 0.10, 0.08, 0.08, 0.07, 0.05];
const HEAT_MW_PER_K: f64 = 1100.0;
const COLD_MW_PER_K: f64 = 700.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SynthConfig {
    pub years: usize,
    pub seed: u64,
    /// First generated hour (CST).
    pub start: HourStamp,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            years: 2,
            seed: 42,
            start: HourStamp::new(2018, 1, 1, 0).expect("valid date"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticData {
    pub load: Vec<LoadRecord>,
    pub weather: Vec<(UtcStamp, WeatherSample)>,
}

struct Ar1 {
    phi: f64,
    noise: Normal<f64>,
    state: f64,
}

impl Ar1 {
    fn new(phi: f64, sigma: f64) -> Self {
        Self {
            phi,
            noise: Normal::new(0.0, sigma).expect("positive sigma"),
            state: 0.0,
        }
    }

    fn step(&mut self, rng: &mut impl Rng) -> f64 {
        self.state = self.phi * self.state + self.noise.sample(rng);
        self.state
    }
}

/// Load shape over a day, roughly in [-1, 1]: trough before dawn, peak in
/// the late afternoon.
fn daily_shape(h: f64) -> f64 {
    -0.6 * (2.0 * PI * (h - 4.0) / 24.0).cos() - 0.4 * (4.0 * PI * (h - 7.0) / 24.0).cos()
}

fn weekly(weekday: u32, h: f64) -> f64 {
    let daytime = (PI * (h - 6.0) / 16.0).sin().max(0.0);
    match weekday {
        0..=4 => 3000.0 * daytime,
        5 => -1500.0 - 1000.0 * daytime,
        _ => -2500.0 - 1000.0 * daytime,
    }
}

/// Population-weighted mean of per-zone temperatures.
pub fn weighted_temperature(temps: &[f64; ZONES]) -> f64 {
    temps.iter().zip(POPULATION_WEIGHTS).map(|(t, w)| t * w).sum()
}

pub fn generate_synthetic(config: &SynthConfig) -> Result<SyntheticData, ExperimentError> {
    if config.years == 0 {
        return Err(ExperimentError::InvalidConfig("synthetic data needs at least one year".into()));
    }
    let hours = config.years * 8760;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut regional = Ar1::new(0.97, 0.6);
    let mut local: Vec<Ar1> = (0..ZONES).map(|_| Ar1::new(0.9, 0.4)).collect();
    let mut cloud = Ar1::new(0.95, 0.12);
    let mut wind_speed: Vec<Ar1> = (0..ZONES).map(|_| Ar1::new(0.9, 0.6)).collect();
    let mut wind_dir: Vec<f64> = (0..ZONES).map(|z| z as f64 * 0.7).collect();
    let turn = Normal::new(0.0, 0.15).expect("positive sigma");
    let lw_noise = Normal::new(0.0, 5.0).expect("positive sigma");
    let mut load_ar = Ar1::new(0.9, 300.0);
    let load_noise = Normal::new(0.0, 150.0).expect("positive sigma");

    let mut load = Vec::with_capacity(hours);
    let mut weather = Vec::with_capacity(hours * ZONES);
    for i in 0..hours {
        let at = config.start.plus_hours(i as i64);
        let h = at.hour() as f64;
        let doy = (i / 24) as f64 % 365.0;
        let season = -(2.0 * PI * (doy - 15.0) / 365.0).cos();
        let cloud_cover = (0.3 + cloud.step(&mut rng)).clamp(0.0, 1.0);
        let shared = regional.step(&mut rng);
        let sun = (PI * (h - 6.0) / 12.0).sin().max(0.0);
        let mut temps = [0.0; ZONES];
        for z in 0..ZONES {
            let temp = COMFORT_K + ZONE_OFFSET_K[z] + 10.0 * season - 5.0 * (2.0 * PI * (h - 15.0) / 24.0).cos()
                + shared
                + local[z].step(&mut rng);
            temps[z] = temp;
            let speed = (4.0 + wind_speed[z].step(&mut rng)).abs().max(0.1);
            wind_dir[z] += turn.sample(&mut rng);
            weather.push((
                cst_to_utc(at),
                WeatherSample {
                    zone: z as u8,
                    temp_k: temp,
                    wind_u_ms: speed * wind_dir[z].cos(),
                    wind_v_ms: speed * wind_dir[z].sin(),
                    lwrad_wm2: (310.0 + 4.5 * (temp - COMFORT_K) + 40.0 * cloud_cover + lw_noise.sample(&mut rng)).max(0.0),
                    swrad_wm2: 900.0 * sun * (0.75 + 0.25 * season) * (1.0 - 0.6 * cloud_cover),
                },
            ));
        }
        let t = weighted_temperature(&temps);
        let thermal = HEAT_MW_PER_K * (t - COMFORT_K).max(0.0) + COLD_MW_PER_K * (COMFORT_K - t).max(0.0);
        let mw = 40_000.0 + weekly(at.weekday(), h) + 5000.0 * daily_shape(h) + thermal
            + load_ar.step(&mut rng)
            + load_noise.sample(&mut rng);
        load.push(LoadRecord {
            stamp: at,
            load_mw: mw.max(1000.0),
        });
    }
    Ok(SyntheticData { load, weather })
}

impl SyntheticData {
    /// Joins the series exactly as files written by [`SyntheticData::write`]
    /// would be joined after ingest.
    pub fn aligned(&self) -> Result<AlignedSeries, ExperimentError> {
        let load = LoadSeries::new(self.load.clone())?;
        Ok(align(&load, &weather_to_cst(&self.weather))?)
    }

    pub fn write_load<W: Write>(&self, out: W) -> csv::Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(LOAD_HEADER)?;
        for r in &self.load {
            w.write_record([r.stamp.to_string(), r.load_mw.to_string()])?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn write_weather<W: Write>(&self, out: W) -> csv::Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(WEATHER_HEADER)?;
        for (at, s) in &self.weather {
            w.write_record([
                at.0.to_string(),
                s.zone.to_string(),
                s.temp_k.to_string(),
                s.wind_u_ms.to_string(),
                s.wind_v_ms.to_string(),
                s.lwrad_wm2.to_string(),
                s.swrad_wm2.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }

    /// Writes `load.csv` and `weather.csv` into `dir`.
    pub fn write(&self, dir: impl AsRef<Path>) -> Result<(PathBuf, PathBuf), ExperimentError> {
        let dir = dir.as_ref();
        let io = |path: &Path| {
            let p = path.display().to_string();
            move |e: csv::Error| ExperimentError::Io {
                path: p.clone(),
                source: std::io::Error::other(e),
            }
        };
        std::fs::create_dir_all(dir).map_err(|source| ExperimentError::Io {
            path: dir.display().to_string(),
            source,
        })?;
        let load_path = dir.join("load.csv");
        let weather_path = dir.join("weather.csv");
        let create = |p: &Path| {
            std::fs::File::create(p).map(std::io::BufWriter::new).map_err(|source| ExperimentError::Io {
                path: p.display().to_string(),
                source,
            })
        };
        self.write_load(create(&load_path)?).map_err(io(&load_path))?;
        self.write_weather(create(&weather_path)?).map_err(io(&weather_path))?;
        Ok((load_path, weather_path))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::{read_load_csv, read_weather_csv};

    fn one_year(seed: u64) -> SyntheticData {
        generate_synthetic(&SynthConfig {
            years: 1,
            seed,
            ..SynthConfig::default()
        })
        .unwrap()
    }

    fn pearson(a: &[f64], b: &[f64]) -> f64 {
        let n = a.len() as f64;
        let (ma, mb) = (a.iter().sum::<f64>() / n, b.iter().sum::<f64>() / n);
        let cov: f64 = a.iter().zip(b).map(|(x, y)| (x - ma) * (y - mb)).sum();
        let va: f64 = a.iter().map(|x| (x - ma) * (x - ma)).sum();
        let vb: f64 = b.iter().map(|y| (y - mb) * (y - mb)).sum();
        cov / (va * vb).sqrt()
    }

    #[test]
    fn counts_and_alignment() {
        let d = one_year(3);
        assert_eq!(d.load.len(), 8760);
        assert_eq!(d.weather.len(), 8 * 8760);
        assert_eq!(d.weather[0].0 .0, d.load[0].stamp.plus_hours(6));
        let s = d.aligned().unwrap();
        assert_eq!(s.len(), 8760);
        assert_eq!(s.segments().len(), 1);
        assert!(generate_synthetic(&SynthConfig { years: 0, ..SynthConfig::default() }).is_err());
    }

    #[test]
    fn load_tracks_distance_from_comfort() {
        let s = one_year(11).aligned().unwrap();
        let load: Vec<f64> = s.rows().iter().map(|r| r.load_mw).collect();
        let dist: Vec<f64> = s
            .rows()
            .iter()
            .map(|r| (weighted_temperature(&r.zones.map(|z| z.temp_k)) - COMFORT_K).abs())
            .collect();
        let r = pearson(&load, &dist);
        assert!(r > 0.5, "pearson {r}");
    }

    #[test]
    fn files_are_deterministic_and_parse_back() {
        let render = |d: &SyntheticData| {
            let (mut l, mut w) = (Vec::new(), Vec::new());
            d.write_load(&mut l).unwrap();
            d.write_weather(&mut w).unwrap();
            (l, w)
        };
        let a = render(&one_year(5));
        assert_eq!(a, render(&one_year(5)));
        assert_ne!(a, render(&one_year(6)));

        let d = one_year(5);
        let load = read_load_csv(&a.0[..]).unwrap();
        let weather = read_weather_csv(&a.1[..]).unwrap();
        assert_eq!(load.records(), &d.load[..]);
        assert_eq!(weather, d.weather);
    }

    #[test]
    fn physical_ranges() {
        let d = one_year(9);
        assert!(d.load.iter().all(|r| r.load_mw > 20_000.0 && r.load_mw < 80_000.0));
        assert!(d.weather.iter().all(|(_, w)| w.temp_k > 250.0 && w.temp_k < 330.0 && w.swrad_wm2 >= 0.0 && w.lwrad_wm2 >= 0.0));
        assert!(d.weather.iter().any(|(_, w)| w.swrad_wm2 > 300.0));
    }
}

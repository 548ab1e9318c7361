//! Load and weather file parsing, UTC→CST reconciliation and the hourly join.
//!
//! Input schemas:
//!
//! * load: `timestamp_cst,load_mw`
//! * weather: `timestamp_utc,zone_id,temp_k,wind_u_ms,wind_v_ms,lwrad_wm2,swrad_wm2`
//!
//! Timestamps are `YYYY-MM-DDTHH:00:00`. Missing hours are kept as gaps and
//! split the joined series into contiguous segments; nothing is interpolated.

mod aligned;
mod stamp;

use std::collections::{BTreeMap, HashSet};
use std::fs::File;
use std::io::Read;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use aligned::{aligned_header, load_aligned_csv, read_aligned_csv, write_aligned_csv, AlignedRow, AlignedSeries, Segment, ZoneWeather};
pub use stamp::{cst_to_utc, utc_to_cst, HourStamp, StampParseError, UtcStamp, CST_OFFSET_HOURS};

/// Number of weather zones every aligned hour must cover.
pub const ZONES: usize = 8;

pub const LOAD_HEADER: [&str; 2] = ["timestamp_cst", "load_mw"];
pub const WEATHER_HEADER: [&str; 7] = [
    "timestamp_utc",
    "zone_id",
    "temp_k",
    "wind_u_ms",
    "wind_v_ms",
    "lwrad_wm2",
    "swrad_wm2",
];

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("cannot open {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("bad header: expected `{expected}`, found `{found}`")]
    BadHeader { expected: String, found: String },
    #[error("malformed row at line {line}: {reason}")]
    MalformedRow { line: u64, reason: String },
    #[error("duplicate timestamp {0}")]
    DuplicateTimestamp(HourStamp),
    #[error("non-positive load at {0}")]
    NonPositiveLoad(HourStamp),
    #[error("duplicate weather record for zone {zone} at {stamp} UTC")]
    DuplicateZoneHour { stamp: HourStamp, zone: u8 },
    #[error("unknown zone id {zone} at line {line}; expected 0-7")]
    UnknownZone { line: u64, zone: i64 },
    #[error("non-physical weather value at line {line}: {reason}")]
    NonPhysical { line: u64, reason: String },
    #[error("load and weather have no complete hour in common")]
    EmptyIntersection,
}

impl IngestError {
    pub fn code(&self) -> &'static str {
        match self {
            IngestError::Io { .. } => "E_IO",
            IngestError::BadHeader { .. } => "E_BAD_HEADER",
            IngestError::MalformedRow { .. } => "E_MALFORMED_ROW",
            IngestError::DuplicateTimestamp(_) => "E_DUPLICATE_TIMESTAMP",
            IngestError::NonPositiveLoad(_) => "E_NON_POSITIVE_LOAD",
            IngestError::DuplicateZoneHour { .. } => "E_DUPLICATE_ZONE_HOUR",
            IngestError::UnknownZone { .. } => "E_UNKNOWN_ZONE",
            IngestError::NonPhysical { .. } => "E_NON_PHYSICAL",
            IngestError::EmptyIntersection => "E_EMPTY_INTERSECTION",
        }
    }
}

pub type Result<T> = std::result::Result<T, IngestError>;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LoadRecord {
    pub stamp: HourStamp,
    pub load_mw: f64,
}

/// A run of missing hours directly after `after`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Gap {
    pub after: HourStamp,
    pub missing_hours: i64,
}

/// Hourly system load, strictly increasing in time, with gaps recorded.
#[derive(Debug, Clone, PartialEq)]
pub struct LoadSeries {
    records: Vec<LoadRecord>,
    gaps: Vec<Gap>,
}

impl LoadSeries {
    /// Sorts, rejects duplicates and non-positive loads, and records gaps.
    pub fn new(mut records: Vec<LoadRecord>) -> Result<Self> {
        records.sort_by_key(|r| r.stamp);
        let mut gaps = Vec::new();
        for pair in records.windows(2) {
            let step = pair[1].stamp.hours_since(pair[0].stamp);
            if step == 0 {
                return Err(IngestError::DuplicateTimestamp(pair[0].stamp));
            }
            if step > 1 {
                gaps.push(Gap {
                    after: pair[0].stamp,
                    missing_hours: step - 1,
                });
            }
        }
        if let Some(r) = records.iter().find(|r| !(r.load_mw > 0.0)) {
            return Err(IngestError::NonPositiveLoad(r.stamp));
        }
        Ok(Self { records, gaps })
    }

    pub fn records(&self) -> &[LoadRecord] {
        &self.records
    }

    pub fn gaps(&self) -> &[Gap] {
        &self.gaps
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }
}

/// One zone's hourly weather, in the units of the source data.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WeatherSample {
    pub zone: u8,
    pub temp_k: f64,
    pub wind_u_ms: f64,
    pub wind_v_ms: f64,
    pub lwrad_wm2: f64,
    pub swrad_wm2: f64,
}

impl WeatherSample {
    pub fn wind_speed(&self) -> f64 {
        combine_wind(self.wind_u_ms, self.wind_v_ms)
    }
}

/// Root sum square of the zonal and meridional wind components.
pub fn combine_wind(u: f64, v: f64) -> f64 {
    u.hypot(v)
}

fn open(path: &Path) -> Result<File> {
    File::open(path).map_err(|source| IngestError::Io {
        path: path.to_path_buf(),
        source,
    })
}

pub(crate) fn check_header<R: Read>(reader: &mut csv::Reader<R>, expected: &[&str]) -> Result<()> {
    let found = reader.headers().map_err(|e| IngestError::MalformedRow {
        line: 1,
        reason: e.to_string(),
    })?;
    if found.iter().ne(expected.iter().copied()) {
        return Err(IngestError::BadHeader {
            expected: expected.join(","),
            found: found.iter().collect::<Vec<_>>().join(","),
        });
    }
    Ok(())
}

pub(crate) fn csv_reader<R: Read>(input: R) -> csv::Reader<R> {
    csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(input)
}

pub(crate) fn field(record: &csv::StringRecord, idx: usize, line: u64) -> Result<&str> {
    record.get(idx).ok_or_else(|| IngestError::MalformedRow {
        line,
        reason: format!("missing column {}", idx + 1),
    })
}

pub(crate) fn number(record: &csv::StringRecord, idx: usize, line: u64, name: &str) -> Result<f64> {
    let raw = field(record, idx, line)?;
    match raw.parse::<f64>() {
        Ok(v) if v.is_finite() => Ok(v),
        _ => Err(IngestError::MalformedRow {
            line,
            reason: format!("{name} is not a finite number: {raw:?}"),
        }),
    }
}

pub(crate) fn stamp(record: &csv::StringRecord, idx: usize, line: u64) -> Result<HourStamp> {
    field(record, idx, line)?
        .parse()
        .map_err(|e: StampParseError| IngestError::MalformedRow {
            line,
            reason: e.to_string(),
        })
}

pub(crate) fn records<R: Read>(
    reader: &mut csv::Reader<R>,
    columns: usize,
) -> impl Iterator<Item = Result<(u64, csv::StringRecord)>> + '_ {
    reader.records().map(move |r| {
        let record = r.map_err(|e| IngestError::MalformedRow {
            line: e.position().map_or(0, |p| p.line()),
            reason: e.to_string(),
        })?;
        let line = record.position().map_or(0, |p| p.line());
        if record.len() != columns {
            return Err(IngestError::MalformedRow {
                line,
                reason: format!("expected {columns} fields, found {}", record.len()),
            });
        }
        Ok((line, record))
    })
}

pub fn parse_load_csv(path: impl AsRef<Path>) -> Result<LoadSeries> {
    read_load_csv(open(path.as_ref())?)
}

pub fn read_load_csv<R: Read>(input: R) -> Result<LoadSeries> {
    let mut reader = csv_reader(input);
    check_header(&mut reader, &LOAD_HEADER)?;
    let mut out = Vec::new();
    for row in records(&mut reader, LOAD_HEADER.len()) {
        let (line, record) = row?;
        out.push(LoadRecord {
            stamp: stamp(&record, 0, line)?,
            load_mw: number(&record, 1, line, "load_mw")?,
        });
    }
    LoadSeries::new(out)
}

pub fn parse_weather_csv(path: impl AsRef<Path>) -> Result<Vec<(UtcStamp, WeatherSample)>> {
    read_weather_csv(open(path.as_ref())?)
}

pub fn read_weather_csv<R: Read>(input: R) -> Result<Vec<(UtcStamp, WeatherSample)>> {
    let mut reader = csv_reader(input);
    check_header(&mut reader, &WEATHER_HEADER)?;
    let mut seen = HashSet::new();
    let mut out = Vec::new();
    for row in records(&mut reader, WEATHER_HEADER.len()) {
        let (line, record) = row?;
        let at = stamp(&record, 0, line)?;
        let raw_zone = field(&record, 1, line)?;
        let zone: i64 = raw_zone.parse().map_err(|_| IngestError::MalformedRow {
            line,
            reason: format!("zone_id is not an integer: {raw_zone:?}"),
        })?;
        if !(0..ZONES as i64).contains(&zone) {
            return Err(IngestError::UnknownZone { line, zone });
        }
        let sample = WeatherSample {
            zone: zone as u8,
            temp_k: number(&record, 2, line, "temp_k")?,
            wind_u_ms: number(&record, 3, line, "wind_u_ms")?,
            wind_v_ms: number(&record, 4, line, "wind_v_ms")?,
            lwrad_wm2: number(&record, 5, line, "lwrad_wm2")?,
            swrad_wm2: number(&record, 6, line, "swrad_wm2")?,
        };
        if sample.temp_k <= 0.0 {
            return Err(IngestError::NonPhysical {
                line,
                reason: format!("temp_k = {}", sample.temp_k),
            });
        }
        if sample.lwrad_wm2 < 0.0 || sample.swrad_wm2 < 0.0 {
            return Err(IngestError::NonPhysical {
                line,
                reason: "negative radiation".into(),
            });
        }
        if !seen.insert((at, sample.zone)) {
            return Err(IngestError::DuplicateZoneHour {
                stamp: at,
                zone: sample.zone,
            });
        }
        out.push((UtcStamp(at), sample));
    }
    Ok(out)
}

/// Converts every weather timestamp from UTC to CST.
pub fn weather_to_cst(weather: &[(UtcStamp, WeatherSample)]) -> Vec<(HourStamp, WeatherSample)> {
    weather.iter().map(|&(s, w)| (utc_to_cst(s), w)).collect()
}

/// Joins load with CST weather, keeping only hours with a load value and
/// all eight zones present.
pub fn align(load: &LoadSeries, weather: &[(HourStamp, WeatherSample)]) -> Result<AlignedSeries> {
    let mut by_hour: BTreeMap<HourStamp, [Option<ZoneWeather>; ZONES]> = BTreeMap::new();
    for &(at, w) in weather {
        let slot = &mut by_hour.entry(at).or_insert([None; ZONES])[w.zone as usize];
        if slot.is_some() {
            return Err(IngestError::DuplicateZoneHour { stamp: at, zone: w.zone });
        }
        *slot = Some(ZoneWeather {
            temp_k: w.temp_k,
            wind_ms: w.wind_speed(),
            lwrad_wm2: w.lwrad_wm2,
            swrad_wm2: w.swrad_wm2,
        });
    }
    let rows: Vec<AlignedRow> = load
        .records()
        .iter()
        .filter_map(|r| {
            let zones = by_hour.get(&r.stamp)?;
            let mut full = [ZoneWeather::default(); ZONES];
            for (dst, src) in full.iter_mut().zip(zones) {
                *dst = (*src)?;
            }
            Some(AlignedRow {
                stamp: r.stamp,
                load_mw: r.load_mw,
                zones: full,
            })
        })
        .collect();
    if rows.is_empty() {
        return Err(IngestError::EmptyIntersection);
    }
    Ok(AlignedSeries::from_rows(rows).expect("load stamps are strictly increasing"))
}

#[cfg(test)]
mod tests {
    use proptest::prelude::*;

    use super::*;

    fn load_csv(body: &str) -> Result<LoadSeries> {
        read_load_csv(format!("timestamp_cst,load_mw\n{body}").as_bytes())
    }

    fn weather_csv(body: &str) -> Result<Vec<(UtcStamp, WeatherSample)>> {
        read_weather_csv(format!("{}\n{body}", WEATHER_HEADER.join(",")).as_bytes())
    }

    #[test]
    fn minimal_load_file() {
        let s = load_csv("2015-06-01T00:00:00,40000\n2015-06-01T01:00:00,41000\n").unwrap();
        assert_eq!(s.len(), 2);
        assert!(s.gaps().is_empty());
        assert_eq!(s.records()[1].load_mw, 41000.0);
    }

    #[test]
    fn load_gap_is_recorded() {
        let s = load_csv("2015-06-01T00:00:00,40000\n2015-06-01T02:00:00,41000\n").unwrap();
        assert_eq!(s.len(), 2);
        assert_eq!(s.gaps(), &[Gap { after: "2015-06-01T00:00:00".parse().unwrap(), missing_hours: 1 }]);
    }

    #[test]
    fn unsorted_load_rows_are_sorted() {
        let s = load_csv("2015-06-01T01:00:00,2\n2015-06-01T00:00:00,1\n").unwrap();
        assert_eq!(s.records()[0].load_mw, 1.0);
    }

    #[test]
    fn load_errors() {
        assert!(matches!(
            load_csv("2015-06-01T00:00:00,-5\n"),
            Err(IngestError::NonPositiveLoad(_))
        ));
        assert!(matches!(
            load_csv("2015-06-01T00:00:00,1\n2015-06-01T00:00:00,2\n"),
            Err(IngestError::DuplicateTimestamp(_))
        ));
        assert!(matches!(
            load_csv("2015-06-01T00:00:00,abc\n"),
            Err(IngestError::MalformedRow { line: 2, .. })
        ));
        assert!(matches!(
            load_csv("2015-06-01T00:00:00,1\n2015-06-01T00:30:00,1\n"),
            Err(IngestError::MalformedRow { line: 3, .. })
        ));
        assert!(matches!(
            read_load_csv("time,load\n".as_bytes()),
            Err(IngestError::BadHeader { .. })
        ));
    }

    fn zone_row(stamp: &str, zone: i64, temp: f64) -> String {
        format!("{stamp},{zone},{temp},3,4,300,0\n")
    }

    #[test]
    fn one_hour_of_all_zones() {
        let body: String = (0..8).map(|z| zone_row("2015-06-01T06:00:00", z, 290.0)).collect();
        let w = weather_csv(&body).unwrap();
        assert_eq!(w.len(), 8);
        assert_eq!(w[0].1.wind_speed(), 5.0);
    }

    #[test]
    fn weather_errors() {
        assert!(matches!(
            weather_csv(&zone_row("2015-06-01T06:00:00", 9, 290.0)),
            Err(IngestError::UnknownZone { zone: 9, .. })
        ));
        assert!(matches!(
            weather_csv(&zone_row("2015-06-01T06:00:00", 1, 0.0)),
            Err(IngestError::NonPhysical { .. })
        ));
        assert!(matches!(
            weather_csv("2015-06-01T06:00:00,1,290,3,4,300,-1\n"),
            Err(IngestError::NonPhysical { .. })
        ));
        let dup = zone_row("2015-06-01T06:00:00", 1, 290.0).repeat(2);
        assert!(matches!(weather_csv(&dup), Err(IngestError::DuplicateZoneHour { zone: 1, .. })));
    }

    #[test]
    fn combine_wind_examples() {
        assert_eq!(combine_wind(3.0, 4.0), 5.0);
        assert_eq!(combine_wind(0.0, 0.0), 0.0);
        assert!((combine_wind(-1.0, 1.0) - 2f64.sqrt()).abs() < 1e-15);
    }

    fn base() -> HourStamp {
        HourStamp::new(2015, 6, 1, 0).unwrap()
    }

    fn hourly_load(hours: std::ops::Range<i64>) -> LoadSeries {
        LoadSeries::new(
            hours
                .map(|h| LoadRecord {
                    stamp: base().plus_hours(h),
                    load_mw: 40_000.0 + h as f64,
                })
                .collect(),
        )
        .unwrap()
    }

    fn hourly_weather(hours: std::ops::Range<i64>, skip: Option<(i64, u8)>) -> Vec<(HourStamp, WeatherSample)> {
        let mut out = Vec::new();
        for h in hours {
            for zone in 0..ZONES as u8 {
                if skip == Some((h, zone)) {
                    continue;
                }
                out.push((
                    base().plus_hours(h),
                    WeatherSample {
                        zone,
                        temp_k: 290.0 + zone as f64,
                        wind_u_ms: 1.0,
                        wind_v_ms: -2.0,
                        lwrad_wm2: 300.0,
                        swrad_wm2: 10.0,
                    },
                ));
            }
        }
        out
    }

    #[test]
    fn align_takes_the_intersection() {
        let a = align(&hourly_load(0..10), &hourly_weather(5..15, None)).unwrap();
        assert_eq!(a.len(), 5);
        assert_eq!(a.rows()[0].stamp, base().plus_hours(5));
        assert_eq!(a.segments(), &[Segment { start: 0, len: 5 }]);
        assert!((a.rows()[0].zones[3].wind_ms - 5f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn incomplete_hour_splits_segments() {
        let a = align(&hourly_load(0..10), &hourly_weather(5..15, Some((7, 3)))).unwrap();
        assert_eq!(a.len(), 4);
        assert_eq!(a.segments(), &[Segment { start: 0, len: 2 }, Segment { start: 2, len: 2 }]);
        assert_eq!(a.rows()[2].stamp, base().plus_hours(8));
    }

    #[test]
    fn disjoint_ranges_fail() {
        assert!(matches!(
            align(&hourly_load(0..5), &hourly_weather(10..15, None)),
            Err(IngestError::EmptyIntersection)
        ));
    }

    proptest! {
        #[test]
        fn combine_wind_symmetries(u in -50.0f64..50.0, v in -50.0f64..50.0) {
            let w = combine_wind(u, v);
            prop_assert!(w >= 0.0);
            prop_assert_eq!(w, combine_wind(-u, -v));
            prop_assert_eq!(w, combine_wind(v, u));
        }

        #[test]
        fn segments_partition_rows(missing in proptest::collection::vec(0i64..60, 0..10)) {
            let weather = hourly_weather(0..60, None)
                .into_iter()
                .filter(|(s, _)| !missing.contains(&s.hours_since(base())))
                .collect::<Vec<_>>();
            if let Ok(a) = align(&hourly_load(0..60), &weather) {
                let mut rebuilt = Vec::new();
                for seg in a.segments() {
                    let rows = &a.rows()[seg.start..seg.start + seg.len];
                    for pair in rows.windows(2) {
                        prop_assert_eq!(pair[1].stamp.hours_since(pair[0].stamp), 1);
                    }
                    rebuilt.extend_from_slice(rows);
                }
                prop_assert_eq!(rebuilt, a.rows().to_vec());
            }
        }
    }
}

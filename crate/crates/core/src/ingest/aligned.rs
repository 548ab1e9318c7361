use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use super::{check_header, csv_reader, number, records, stamp, HourStamp, IngestError, Result, ZONES};

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct ZoneWeather {
    pub temp_k: f64,
    /// Combined wind speed, m/s.
    pub wind_ms: f64,
    pub lwrad_wm2: f64,
    pub swrad_wm2: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AlignedRow {
    pub stamp: HourStamp,
    pub load_mw: f64,
    pub zones: [ZoneWeather; ZONES],
}

/// Half-open run `start..start + len` of hour-consecutive rows.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Segment {
    pub start: usize,
    pub len: usize,
}

impl Segment {
    pub fn range(&self) -> std::ops::Range<usize> {
        self.start..self.start + self.len
    }
}

/// Joined hourly table of load and per-zone weather, split into
/// contiguous segments at every missing hour.
#[derive(Debug, Clone, PartialEq)]
pub struct AlignedSeries {
    rows: Vec<AlignedRow>,
    segments: Vec<Segment>,
}

impl AlignedSeries {
    /// Fails with `DuplicateTimestamp` if stamps are not strictly increasing.
    pub fn from_rows(rows: Vec<AlignedRow>) -> Result<Self> {
        let mut segments = Vec::new();
        let mut start = 0;
        for i in 1..=rows.len() {
            if i < rows.len() {
                let step = rows[i].stamp.hours_since(rows[i - 1].stamp);
                if step <= 0 {
                    return Err(IngestError::DuplicateTimestamp(rows[i].stamp));
                }
                if step == 1 {
                    continue;
                }
            }
            segments.push(Segment { start, len: i - start });
            start = i;
        }
        Ok(Self { rows, segments })
    }

    pub fn rows(&self) -> &[AlignedRow] {
        &self.rows
    }

    pub fn segments(&self) -> &[Segment] {
        &self.segments
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// Number of gaps between segments.
    pub fn gap_count(&self) -> usize {
        self.segments.len().saturating_sub(1)
    }

    pub fn position(&self, at: HourStamp) -> Option<usize> {
        self.rows.binary_search_by_key(&at, |r| r.stamp).ok()
    }

    /// The `len` hour-consecutive rows ending at `at` (inclusive), if present.
    pub fn window_ending(&self, at: HourStamp, len: usize) -> Option<&[AlignedRow]> {
        let end = self.position(at)?;
        let start = (end + 1).checked_sub(len)?;
        let rows = &self.rows[start..=end];
        (rows[rows.len() - 1].stamp.hours_since(rows[0].stamp) == len as i64 - 1).then_some(rows)
    }
}

pub fn aligned_header() -> Vec<String> {
    let mut h = vec!["timestamp_cst".to_string(), "load_mw".to_string()];
    for z in 0..ZONES {
        h.push(format!("z{z}_temp_k"));
        h.push(format!("z{z}_wind_ms"));
        h.push(format!("z{z}_lwrad_wm2"));
        h.push(format!("z{z}_swrad_wm2"));
    }
    h
}

/// Writes `aligned.csv`. Floats use the shortest round-tripping decimal form.
pub fn write_aligned_csv<W: Write>(series: &AlignedSeries, out: W) -> std::io::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(aligned_header())?;
    let mut fields = Vec::with_capacity(2 + 4 * ZONES);
    for row in series.rows() {
        fields.clear();
        fields.push(row.stamp.to_string());
        fields.push(row.load_mw.to_string());
        for z in &row.zones {
            fields.push(z.temp_k.to_string());
            fields.push(z.wind_ms.to_string());
            fields.push(z.lwrad_wm2.to_string());
            fields.push(z.swrad_wm2.to_string());
        }
        w.write_record(&fields)?;
    }
    w.flush()
}

pub fn read_aligned_csv<R: Read>(input: R) -> Result<AlignedSeries> {
    let header = aligned_header();
    let header: Vec<&str> = header.iter().map(String::as_str).collect();
    let mut reader = csv_reader(input);
    check_header(&mut reader, &header)?;
    let mut rows = Vec::new();
    for row in records(&mut reader, header.len()) {
        let (line, record) = row?;
        let mut zones = [ZoneWeather::default(); ZONES];
        for (z, zone) in zones.iter_mut().enumerate() {
            let col = 2 + 4 * z;
            *zone = ZoneWeather {
                temp_k: number(&record, col, line, header[col])?,
                wind_ms: number(&record, col + 1, line, header[col + 1])?,
                lwrad_wm2: number(&record, col + 2, line, header[col + 2])?,
                swrad_wm2: number(&record, col + 3, line, header[col + 3])?,
            };
        }
        let load_mw = number(&record, 1, line, "load_mw")?;
        let at = stamp(&record, 0, line)?;
        if !(load_mw > 0.0) {
            return Err(IngestError::NonPositiveLoad(at));
        }
        rows.push(AlignedRow {
            stamp: at,
            load_mw,
            zones,
        });
    }
    if rows.is_empty() {
        return Err(IngestError::EmptyIntersection);
    }
    AlignedSeries::from_rows(rows)
}

pub fn load_aligned_csv(path: impl AsRef<std::path::Path>) -> Result<AlignedSeries> {
    read_aligned_csv(super::open(path.as_ref())?)
}

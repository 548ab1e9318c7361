use std::fmt;
use std::str::FromStr;

use chrono::{Datelike, NaiveDate, NaiveDateTime, Timelike};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

const FORMAT: &str = "%Y-%m-%dT%H:%M:%S";

/// Fixed UTC offset of Central Standard Time, in hours. No daylight saving.
pub const CST_OFFSET_HOURS: i64 = -6;

fn epoch() -> NaiveDateTime {
    NaiveDate::from_ymd_opt(1970, 1, 1)
        .and_then(|d| d.and_hms_opt(0, 0, 0))
        .expect("valid epoch")
}

/// A whole hour on a fixed-offset clock, stored as hours since
/// 1970-01-01T00:00 on that clock.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct HourStamp(i64);

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("invalid hour stamp {0:?}: expected YYYY-MM-DDTHH:00:00")]
pub struct StampParseError(pub String);

impl HourStamp {
    pub fn new(year: i32, month: u32, day: u32, hour: u32) -> Option<Self> {
        let dt = NaiveDate::from_ymd_opt(year, month, day)?.and_hms_opt(hour, 0, 0)?;
        Some(Self::from_naive(dt))
    }

    pub const fn from_hours(hours_since_epoch: i64) -> Self {
        Self(hours_since_epoch)
    }

    pub const fn hours(self) -> i64 {
        self.0
    }

    fn from_naive(dt: NaiveDateTime) -> Self {
        Self((dt - epoch()).num_hours())
    }

    fn naive(self) -> NaiveDateTime {
        epoch() + chrono::Duration::hours(self.0)
    }

    pub fn year(self) -> i32 {
        self.naive().year()
    }

    pub fn month(self) -> u32 {
        self.naive().month()
    }

    pub fn day(self) -> u32 {
        self.naive().day()
    }

    pub fn hour(self) -> u32 {
        self.naive().hour()
    }

    /// Day of week with Monday = 0.
    pub fn weekday(self) -> u32 {
        self.naive().weekday().num_days_from_monday()
    }

    pub fn succ(self) -> Self {
        Self(self.0 + 1)
    }

    pub fn plus_hours(self, hours: i64) -> Self {
        Self(self.0 + hours)
    }

    /// Signed number of hours from `earlier` to `self`.
    pub fn hours_since(self, earlier: Self) -> i64 {
        self.0 - earlier.0
    }
}

impl fmt::Display for HourStamp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.naive().format(FORMAT))
    }
}

impl FromStr for HourStamp {
    type Err = StampParseError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let err = || StampParseError(s.to_string());
        if s.len() != 19 {
            return Err(err());
        }
        let dt = NaiveDateTime::parse_from_str(s, FORMAT).map_err(|_| err())?;
        if dt.minute() != 0 || dt.second() != 0 {
            return Err(err());
        }
        Ok(Self::from_naive(dt))
    }
}

impl Serialize for HourStamp {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for HourStamp {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// An hour stamp on the UTC clock, as found in weather files.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct UtcStamp(pub HourStamp);

impl fmt::Display for UtcStamp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.fmt(f)
    }
}

/// UTC → CST: subtract six hours.
pub fn utc_to_cst(stamp: UtcStamp) -> HourStamp {
    stamp.0.plus_hours(CST_OFFSET_HOURS)
}

pub fn cst_to_utc(stamp: HourStamp) -> UtcStamp {
    UtcStamp(stamp.plus_hours(-CST_OFFSET_HOURS))
}

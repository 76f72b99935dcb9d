//! Raw accelerometer and GPS streams to per-individual activity indicators,
//! residence cells and eligibility.

mod counts;
mod parse;
mod record;
mod residence;
mod session;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geocode::GeoPoint;

pub use counts::{activity_counts_per_minute, counter, ActivityCounter, DeadbandCounter, COUNTERS};
pub use parse::{parse_accel, parse_gps, Streams, ACCEL_HEADER, GPS_HEADER};
pub use record::{eligible, extract_all, extract_individual, indicator, IndividualRecord};
pub use residence::infer_residence;
pub use session::{segment_sessions, RecordingSession};

pub const MS_PER_MINUTE: i64 = 60_000;
pub const MS_PER_DAY: i64 = 86_400_000;
/// Samples above this magnitude on any axis are rejected at ingestion.
pub const MAX_ABS_G: f64 = 16.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SensorSample {
    pub t: i64,
    pub ax: f64,
    pub ay: f64,
    pub az: f64,
}

impl SensorSample {
    pub fn magnitude(&self) -> f64 {
        (self.ax * self.ax + self.ay * self.ay + self.az * self.az).sqrt()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GpsFix {
    pub t: i64,
    pub point: GeoPoint,
    pub accuracy_m: f64,
}

/// Local wall-clock time of day, minute resolution, serialized as `HH:MM`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub struct ClockTime(u32);

impl ClockTime {
    pub fn new(hour: u32, minute: u32) -> Result<Self> {
        if hour >= 24 || minute >= 60 {
            return Err(Error::InvalidInput(format!("bad clock time {hour}:{minute}")));
        }
        Ok(ClockTime(hour * 60 + minute))
    }

    pub fn minutes(self) -> u32 {
        self.0
    }
}

impl fmt::Display for ClockTime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:02}:{:02}", self.0 / 60, self.0 % 60)
    }
}

impl FromStr for ClockTime {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::InvalidInput(format!("clock time {s:?} is not HH:MM"));
        let (h, m) = s.split_once(':').ok_or_else(bad)?;
        ClockTime::new(h.parse().map_err(|_| bad())?, m.parse().map_err(|_| bad())?)
    }
}

impl Serialize for ClockTime {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for ClockTime {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ActivityConfig {
    pub epoch_s: u32,
    pub deadband_g: f64,
    /// Counts per g of deviation.
    pub scale: f64,
    pub gap_s: u32,
    pub min_samples_per_min: usize,
    pub night_start: ClockTime,
    pub night_end: ClockTime,
    pub min_hours: f64,
    pub min_days: u32,
    /// Local time = UTC + this many minutes.
    pub timezone_offset: i32,
    /// Registered [`ActivityCounter`] name.
    pub counter: String,
}

impl Default for ActivityConfig {
    fn default() -> Self {
        ActivityConfig {
            epoch_s: 60,
            deadband_g: 0.05,
            scale: 1000.0,
            gap_s: 60,
            min_samples_per_min: 30,
            night_start: ClockTime(23 * 60),
            night_end: ClockTime(7 * 60),
            min_hours: 20.0,
            min_days: 3,
            timezone_offset: 0,
            counter: DeadbandCounter::NAME.to_string(),
        }
    }
}

impl ActivityConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = self.epoch_s > 0
            && self.deadband_g > 0.0
            && self.scale > 0.0
            && self.gap_s > 0
            && self.min_samples_per_min > 0
            && self.min_hours > 0.0
            && self.min_days > 0;
        if !positive {
            return Err(Error::InvalidInput("activity config values must be positive".into()));
        }
        if self.night_start == self.night_end {
            return Err(Error::InvalidInput("night window is empty".into()));
        }
        counter(&self.counter)?;
        Ok(())
    }

    pub(crate) fn offset_ms(&self) -> i64 {
        i64::from(self.timezone_offset) * MS_PER_MINUTE
    }

    /// Local calendar day number of an epoch timestamp.
    pub fn local_day(&self, t: i64) -> i64 {
        (t + self.offset_ms()).div_euclid(MS_PER_DAY)
    }

    pub fn in_night_window(&self, t: i64) -> bool {
        let minute = ((t + self.offset_ms()).rem_euclid(MS_PER_DAY) / MS_PER_MINUTE) as u32;
        let (start, end) = (self.night_start.minutes(), self.night_end.minutes());
        if start > end {
            minute >= start || minute < end
        } else {
            minute >= start && minute < end
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn clock_time_round_trip() {
        let t: ClockTime = "23:00".parse().unwrap();
        assert_eq!(t.minutes(), 1380);
        assert_eq!(t.to_string(), "23:00");
        assert!("24:00".parse::<ClockTime>().is_err());
        assert!("noon".parse::<ClockTime>().is_err());
    }

    #[test]
    fn night_window_wraps_midnight() {
        let cfg = ActivityConfig::default();
        let at = |h: i64, m: i64| (h * 60 + m) * MS_PER_MINUTE;
        assert!(cfg.in_night_window(at(23, 0)));
        assert!(cfg.in_night_window(at(0, 30)));
        assert!(cfg.in_night_window(at(6, 59)));
        assert!(!cfg.in_night_window(at(7, 0)));
        assert!(!cfg.in_night_window(at(22, 59)));
    }

    #[test]
    fn timezone_offset_shifts_night() {
        let cfg = ActivityConfig { timezone_offset: 120, ..Default::default() };
        // 21:30 UTC is 23:30 local
        assert!(cfg.in_night_window((21 * 60 + 30) * MS_PER_MINUTE));
        assert_eq!(cfg.local_day(22 * 60 * MS_PER_MINUTE), 1);
    }

    #[test]
    fn config_deserializes_with_defaults() {
        let cfg: ActivityConfig = serde_json::from_str(r#"{"min_days": 2, "night_start": "22:30"}"#).unwrap();
        assert_eq!(cfg.min_days, 2);
        assert_eq!(cfg.night_start.to_string(), "22:30");
        assert_eq!(cfg.epoch_s, 60);
        cfg.validate().unwrap();
        let bad = ActivityConfig { counter: "nope".into(), ..Default::default() };
        assert!(bad.validate().is_err());
    }
}

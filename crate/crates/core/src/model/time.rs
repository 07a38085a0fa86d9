use std::fmt;
use std::str::FromStr;

use chrono::{DateTime, NaiveDateTime, SecondsFormat, TimeZone, Utc};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use super::ModelError;

pub const MICROS_PER_SECOND: i64 = 1_000_000;
pub const MICROS_PER_HOUR: i64 = 3_600 * MICROS_PER_SECOND;
pub const MICROS_PER_DAY: i64 = 24 * MICROS_PER_HOUR;

/// A UTC timestamp with microsecond resolution, stored as microseconds since the Unix epoch.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct TimeInstant(i64);

impl TimeInstant {
    pub const fn from_micros(micros: i64) -> Self {
        Self(micros)
    }

    pub const fn from_secs(secs: i64) -> Self {
        Self(secs * MICROS_PER_SECOND)
    }

    pub fn from_ymd_hms(y: i32, mo: u32, d: u32, h: u32, mi: u32, s: u32) -> Self {
        let dt = Utc
            .with_ymd_and_hms(y, mo, d, h, mi, s)
            .single()
            .expect("valid calendar timestamp");
        Self(dt.timestamp_micros())
    }

    pub const fn micros(self) -> i64 {
        self.0
    }

    pub fn secs_f64(self) -> f64 {
        self.0 as f64 / MICROS_PER_SECOND as f64
    }

    pub fn now() -> Self {
        Self(Utc::now().timestamp_micros())
    }

    pub const fn plus_micros(self, micros: i64) -> Self {
        Self(self.0 + micros)
    }

    /// Start of the UTC hour containing this instant.
    pub fn truncate_to_hour(self) -> Self {
        Self(self.0.div_euclid(MICROS_PER_HOUR) * MICROS_PER_HOUR)
    }

    /// Start of the UTC day containing this instant.
    pub fn truncate_to_day(self) -> Self {
        Self(self.0.div_euclid(MICROS_PER_DAY) * MICROS_PER_DAY)
    }

    /// UTC hour of day, 0..=23.
    pub fn hour_of_day(self) -> u8 {
        (self.0.div_euclid(MICROS_PER_HOUR).rem_euclid(24)) as u8
    }

    fn to_datetime(self) -> DateTime<Utc> {
        DateTime::from_timestamp_micros(self.0).expect("timestamp within chrono range")
    }

    /// Canonical text form, e.g. `2025-11-10T10:00:00.000000Z`.
    pub fn to_iso(self) -> String {
        self.to_datetime()
            .to_rfc3339_opts(SecondsFormat::Micros, true)
    }

    /// Parses RFC 3339 / ISO-8601 text. A missing offset is taken as UTC.
    pub fn parse_iso(text: &str) -> Result<Self, ModelError> {
        let text = text.trim();
        if let Ok(dt) = DateTime::parse_from_rfc3339(text) {
            return Ok(Self(dt.with_timezone(&Utc).timestamp_micros()));
        }
        for fmt in ["%Y-%m-%dT%H:%M:%S%.f", "%Y-%m-%d %H:%M:%S%.f", "%Y-%m-%dT%H:%M:%S"] {
            if let Ok(naive) = NaiveDateTime::parse_from_str(text, fmt) {
                return Ok(Self(naive.and_utc().timestamp_micros()));
            }
        }
        Err(ModelError::Timestamp(text.to_string()))
    }
}

impl fmt::Display for TimeInstant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_iso())
    }
}

impl FromStr for TimeInstant {
    type Err = ModelError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::parse_iso(s)
    }
}

impl Serialize for TimeInstant {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(&self.to_iso())
    }
}

impl<'de> Deserialize<'de> for TimeInstant {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let text = String::deserialize(deserializer)?;
        Self::parse_iso(&text).map_err(serde::de::Error::custom)
    }
}

/// A closed-open time interval `[start, end)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Period {
    pub start: TimeInstant,
    pub end: TimeInstant,
}

impl Period {
    pub fn new(start: TimeInstant, end: TimeInstant) -> Result<Self, ModelError> {
        if start > end {
            return Err(ModelError::Period { start, end });
        }
        Ok(Self { start, end })
    }

    pub fn contains(&self, t: TimeInstant) -> bool {
        self.start <= t && t < self.end
    }

    pub fn is_empty(&self) -> bool {
        self.start == self.end
    }

    pub fn duration_micros(&self) -> i64 {
        self.end.micros() - self.start.micros()
    }

    /// True when `other` lies entirely inside this period.
    pub fn covers(&self, other: &Period) -> bool {
        self.start <= other.start && other.end <= self.end
    }

    pub fn overlaps_range(&self, lo: TimeInstant, hi_inclusive: TimeInstant) -> bool {
        lo < self.end && self.start <= hi_inclusive
    }
}

impl fmt::Display for Period {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{}, {})", self.start, self.end)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn iso_format_has_microseconds_and_z() {
        let t = TimeInstant::from_ymd_hms(2025, 11, 10, 10, 0, 0);
        assert_eq!(t.to_iso(), "2025-11-10T10:00:00.000000Z");
        assert_eq!(TimeInstant::parse_iso("2025-11-10T10:00:00.000000Z").unwrap(), t);
        assert_eq!(TimeInstant::parse_iso("2025-11-10T11:00:00+01:00").unwrap(), t);
        assert_eq!(TimeInstant::parse_iso("2025-11-10 10:00:00").unwrap(), t);
        assert!(TimeInstant::parse_iso("yesterday").is_err());
    }

    #[test]
    fn period_is_closed_open() {
        let p = Period::new(TimeInstant::from_secs(1), TimeInstant::from_secs(3)).unwrap();
        assert!(!p.contains(TimeInstant::from_secs(0)));
        assert!(p.contains(TimeInstant::from_secs(1)));
        assert!(p.contains(TimeInstant::from_secs(2)));
        assert!(!p.contains(TimeInstant::from_secs(3)));
        let empty = Period::new(TimeInstant::from_secs(3), TimeInstant::from_secs(3)).unwrap();
        assert!(empty.is_empty());
        assert!(!empty.contains(TimeInstant::from_secs(3)));
        assert!(Period::new(TimeInstant::from_secs(4), TimeInstant::from_secs(3)).is_err());
    }

    #[test]
    fn hour_helpers_use_utc() {
        let t = TimeInstant::from_ymd_hms(2024, 3, 1, 9, 30, 15);
        assert_eq!(t.hour_of_day(), 9);
        assert_eq!(t.truncate_to_hour(), TimeInstant::from_ymd_hms(2024, 3, 1, 9, 0, 0));
        assert_eq!(t.truncate_to_day(), TimeInstant::from_ymd_hms(2024, 3, 1, 0, 0, 0));
        let before_epoch = TimeInstant::from_micros(-1);
        assert_eq!(before_epoch.hour_of_day(), 23);
    }
}

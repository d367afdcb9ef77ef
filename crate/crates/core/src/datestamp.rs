//! Seconds-precision UTC timestamps.

use std::fmt;

use chrono::{DateTime, NaiveDate, NaiveDateTime, Utc};

use crate::error::{Error, Result};

const ISO_FORMAT: &str = "%Y-%m-%dT%H:%M:%SZ";
const ARC_FORMAT: &str = "%Y%m%d%H%M%S";

/// A UTC instant truncated to whole seconds.
///
/// Renders as `YYYY-MM-DDThh:mm:ssZ`, the OAI-PMH seconds granularity form.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Datestamp(i64);

impl Datestamp {
    pub fn now() -> Datestamp {
        Datestamp::from_datetime(Utc::now())
    }

    /// Truncates sub-second precision.
    pub fn from_datetime(dt: DateTime<Utc>) -> Datestamp {
        Datestamp(dt.timestamp())
    }

    pub fn from_unix(secs: i64) -> Datestamp {
        Datestamp(secs)
    }

    pub fn unix(self) -> i64 {
        self.0
    }

    pub fn to_datetime(self) -> DateTime<Utc> {
        DateTime::from_timestamp(self.0, 0).expect("timestamp in chrono range")
    }

    /// Strict parse of `YYYY-MM-DDThh:mm:ssZ`.
    pub fn parse_iso(s: &str) -> Result<Datestamp> {
        if s.len() != 20 || !s.is_ascii() {
            return Err(Error::InvalidTimestamp(s.to_owned()));
        }
        let dt = NaiveDateTime::parse_from_str(s, ISO_FORMAT).map_err(|_| Error::InvalidTimestamp(s.to_owned()))?;
        Ok(Datestamp(dt.and_utc().timestamp()))
    }

    /// Strict parse of a `YYYY-MM-DD` day, returning its first second.
    pub fn parse_day(s: &str) -> Result<Datestamp> {
        if s.len() != 10 || !s.is_ascii() {
            return Err(Error::InvalidTimestamp(s.to_owned()));
        }
        let d = NaiveDate::parse_from_str(s, "%Y-%m-%d").map_err(|_| Error::InvalidTimestamp(s.to_owned()))?;
        Ok(Datestamp(d.and_hms_opt(0, 0, 0).unwrap().and_utc().timestamp()))
    }

    /// Strict parse of the 14-digit ARC form `YYYYMMDDHHMMSS`.
    pub fn parse_arc(s: &str) -> Result<Datestamp> {
        if s.len() != 14 || !s.bytes().all(|b| b.is_ascii_digit()) {
            return Err(Error::InvalidTimestamp(s.to_owned()));
        }
        let dt = NaiveDateTime::parse_from_str(s, ARC_FORMAT).map_err(|_| Error::InvalidTimestamp(s.to_owned()))?;
        Ok(Datestamp(dt.and_utc().timestamp()))
    }

    pub fn to_arc(self) -> String {
        self.to_datetime().format(ARC_FORMAT).to_string()
    }

    pub fn plus_seconds(self, secs: i64) -> Datestamp {
        Datestamp(self.0 + secs)
    }
}

impl fmt::Display for Datestamp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.to_datetime().format(ISO_FORMAT))
    }
}

//! Logical time helpers. Logical milliseconds are interpreted as milliseconds
//! since the Unix epoch, UTC, whenever calendar fields are needed.

use chrono::{DateTime, Datelike, Timelike, Utc};
use serde::{Deserialize, Serialize};

/// Logical milliseconds.
pub type LogicalTime = u64;

pub const MS_PER_MINUTE: u64 = 60_000;
pub const MS_PER_DAY: u64 = 86_400_000;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Weekday {
    Mon,
    Tue,
    Wed,
    Thu,
    Fri,
    Sat,
    Sun,
}

impl Weekday {
    pub const ALL: [Weekday; 7] = [
        Weekday::Mon,
        Weekday::Tue,
        Weekday::Wed,
        Weekday::Thu,
        Weekday::Fri,
        Weekday::Sat,
        Weekday::Sun,
    ];

    pub fn from_chrono(day: chrono::Weekday) -> Self {
        Self::ALL[day.num_days_from_monday() as usize]
    }
}

/// Budget period granularity.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Period {
    Day,
    Week,
    Month,
}

fn datetime(at: LogicalTime) -> DateTime<Utc> {
    DateTime::<Utc>::from_timestamp_millis(at as i64).expect("logical time within chrono range")
}

/// Minutes since midnight UTC.
pub fn minute_of_day(at: LogicalTime) -> u16 {
    let dt = datetime(at);
    (dt.hour() * 60 + dt.minute()) as u16
}

pub fn weekday(at: LogicalTime) -> Weekday {
    Weekday::from_chrono(datetime(at).weekday())
}

/// Calendar bucket containing `at`: `2024-02-13`, ISO week `2024-W07`, or
/// `2024-02`.
pub fn period_key(period: Period, at: LogicalTime) -> String {
    let dt = datetime(at);
    match period {
        Period::Day => format!("{:04}-{:02}-{:02}", dt.year(), dt.month(), dt.day()),
        Period::Week => {
            let week = dt.iso_week();
            format!("{:04}-W{:02}", week.year(), week.week())
        }
        Period::Month => format!("{:04}-{:02}", dt.year(), dt.month()),
    }
}

/// Parses either a bare integer (logical ms) or an RFC 3339 timestamp.
pub fn parse_time(text: &str) -> Option<LogicalTime> {
    if let Ok(ms) = text.parse::<u64>() {
        return Some(ms);
    }
    DateTime::parse_from_rfc3339(text)
        .ok()
        .and_then(|dt| u64::try_from(dt.timestamp_millis()).ok())
}

pub fn format_time(at: LogicalTime) -> String {
    datetime(at).to_rfc3339_opts(chrono::SecondsFormat::Millis, true)
}

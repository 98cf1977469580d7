//! UTC calendar helpers.

use std::fmt;

use chrono::{DateTime, Datelike, NaiveDate, TimeZone, Utc};
use serde::{Deserialize, Serialize};

use crate::model::SECONDS_PER_DAY;

/// A UTC calendar month.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct YearMonth {
    pub year: i32,
    pub month: u32,
}

impl YearMonth {
    pub fn new(year: i32, month: u32) -> Self {
        assert!((1..=12).contains(&month), "month out of range: {month}");
        YearMonth { year, month }
    }

    pub fn of(timestamp: i64) -> Self {
        let dt = datetime(timestamp);
        YearMonth { year: dt.year(), month: dt.month() }
    }

    pub fn next(self) -> Self {
        if self.month == 12 {
            YearMonth { year: self.year + 1, month: 1 }
        } else {
            YearMonth { year: self.year, month: self.month + 1 }
        }
    }

    /// Unix timestamp of the first second of the month.
    pub fn start(self) -> i64 {
        Utc.from_utc_datetime(
            &NaiveDate::from_ymd_opt(self.year, self.month, 1)
                .expect("valid month")
                .and_hms_opt(0, 0, 0)
                .expect("midnight"),
        )
        .timestamp()
    }

    /// Unix timestamp of the last second of the month.
    pub fn end(self) -> i64 {
        self.next().start() - 1
    }

    /// Every month from `self` to `last`, inclusive.
    pub fn through(self, last: YearMonth) -> Vec<YearMonth> {
        let mut out = Vec::new();
        let mut m = self;
        while m <= last {
            out.push(m);
            m = m.next();
        }
        out
    }
}

impl fmt::Display for YearMonth {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:04}-{:02}", self.year, self.month)
    }
}

fn datetime(timestamp: i64) -> DateTime<Utc> {
    DateTime::from_timestamp(timestamp, 0).expect("timestamp within chrono range")
}

/// Days since the Unix epoch (UTC), flooring negatives.
pub fn utc_day(timestamp: i64) -> i64 {
    timestamp.div_euclid(SECONDS_PER_DAY)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn month_boundaries() {
        let jun = YearMonth::new(2018, 6);
        assert_eq!(jun.start(), 1_527_811_200);
        assert_eq!(jun.end(), 1_530_403_199);
        assert_eq!(YearMonth::of(jun.end()), jun);
        assert_eq!(YearMonth::of(jun.end() + 1), YearMonth::new(2018, 7));
        assert_eq!(YearMonth::new(2018, 12).next(), YearMonth::new(2019, 1));
        assert_eq!(jun.through(YearMonth::new(2019, 1)).len(), 8);
        assert_eq!(jun.to_string(), "2018-06");
    }
}

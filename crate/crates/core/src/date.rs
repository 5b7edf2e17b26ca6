//! Day-grain calendar dates.
//!
//! The warehouse tags dimension rows and facts with plain calendar days, so a
//! compact proleptic-Gregorian date with exact day arithmetic is all that is
//! needed. Ordering is chronological; the display form is ISO `yyyy-mm-dd`.

use std::fmt;

use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum DateError {
    #[error("invalid calendar date {year:04}-{month:02}-{day:02}")]
    InvalidCalendarDate { year: i32, month: u32, day: u32 },
    #[error("malformed date text {0:?}")]
    Malformed(String),
}

/// A calendar date. Field order gives derived `Ord` chronological meaning.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Date {
    year: i16,
    month: u8,
    day: u8,
}

impl Date {
    pub fn new(year: i32, month: u32, day: u32) -> Result<Self, DateError> {
        let bad = DateError::InvalidCalendarDate { year, month, day };
        if !(1..=9999).contains(&year) || !(1..=12).contains(&month) {
            return Err(bad);
        }
        if day < 1 || day > days_in_month(year, month) {
            return Err(bad);
        }
        Ok(Date {
            year: year as i16,
            month: month as u8,
            day: day as u8,
        })
    }

    pub fn year(&self) -> i32 {
        self.year as i32
    }

    pub fn month(&self) -> u32 {
        self.month as u32
    }

    pub fn day(&self) -> u32 {
        self.day as u32
    }

    pub fn quarter(&self) -> u32 {
        (self.month() - 1) / 3 + 1
    }

    /// Day-grain integer key, `yyyymmdd`.
    pub fn yyyymmdd(&self) -> u32 {
        self.year() as u32 * 10_000 + self.month() * 100 + self.day()
    }

    pub fn from_yyyymmdd(n: u32) -> Result<Self, DateError> {
        Date::new((n / 10_000) as i32, n / 100 % 100, n % 100)
    }

    /// Parse ISO `yyyy-mm-dd`.
    pub fn parse_iso(text: &str) -> Result<Self, DateError> {
        let parts: Vec<&str> = text.split('-').collect();
        if parts.len() != 3 || parts[0].len() != 4 || parts[1].len() != 2 || parts[2].len() != 2 {
            return Err(DateError::Malformed(text.to_string()));
        }
        let num = |s: &str| {
            s.parse::<u32>()
                .map_err(|_| DateError::Malformed(text.to_string()))
        };
        Date::new(num(parts[0])? as i32, num(parts[1])?, num(parts[2])?)
    }

    /// Days since the civil epoch 1970-01-01 (negative before it).
    pub fn day_number(&self) -> i64 {
        days_from_civil(self.year() as i64, self.month(), self.day())
    }

    pub fn from_day_number(n: i64) -> Result<Self, DateError> {
        let (y, m, d) = civil_from_days(n);
        Date::new(y as i32, m, d)
    }

    /// The date `n` days later (or earlier for negative `n`).
    pub fn plus_days(&self, n: i64) -> Result<Self, DateError> {
        Date::from_day_number(self.day_number() + n)
    }
}

impl fmt::Display for Date {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:04}-{:02}-{:02}", self.year, self.month, self.day)
    }
}

impl fmt::Debug for Date {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self}")
    }
}

pub fn is_leap_year(year: i32) -> bool {
    year % 4 == 0 && (year % 100 != 0 || year % 400 == 0)
}

pub fn days_in_month(year: i32, month: u32) -> u32 {
    match month {
        1 | 3 | 5 | 7 | 8 | 10 | 12 => 31,
        4 | 6 | 9 | 11 => 30,
        2 if is_leap_year(year) => 29,
        2 => 28,
        _ => 0,
    }
}

// Howard Hinnant's civil-calendar algorithms.
fn days_from_civil(y: i64, m: u32, d: u32) -> i64 {
    let y = if m <= 2 { y - 1 } else { y };
    let era = if y >= 0 { y } else { y - 399 } / 400;
    let yoe = y - era * 400;
    let mp = (m as i64 + 9) % 12;
    let doy = (153 * mp + 2) / 5 + d as i64 - 1;
    let doe = yoe * 365 + yoe / 4 - yoe / 100 + doy;
    era * 146_097 + doe - 719_468
}

fn civil_from_days(z: i64) -> (i64, u32, u32) {
    let z = z + 719_468;
    let era = if z >= 0 { z } else { z - 146_096 } / 146_097;
    let doe = z - era * 146_097;
    let yoe = (doe - doe / 1460 + doe / 36_524 - doe / 146_096) / 365;
    let y = yoe + era * 400;
    let doy = doe - (365 * yoe + yoe / 4 - yoe / 100);
    let mp = (5 * doy + 2) / 153;
    let d = (doy - (153 * mp + 2) / 5 + 1) as u32;
    let m = if mp < 10 { mp + 3 } else { mp - 9 } as u32;
    (if m <= 2 { y + 1 } else { y }, m, d)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_impossible_dates() {
        assert!(Date::new(2011, 2, 31).is_err());
        assert!(Date::new(2011, 13, 1).is_err());
        assert!(Date::new(2011, 0, 1).is_err());
        assert!(Date::new(2100, 2, 29).is_err()); // not a leap year
        assert!(Date::new(2000, 2, 29).is_ok()); // leap century
    }

    #[test]
    fn iso_round_trip() {
        let d = Date::parse_iso("2011-06-01").unwrap();
        assert_eq!(d.to_string(), "2011-06-01");
        assert_eq!(d.yyyymmdd(), 20110601);
        assert_eq!(d.quarter(), 2);
        assert!(Date::parse_iso("2011-6-1").is_err());
        assert!(Date::parse_iso("junk").is_err());
    }

    #[test]
    fn day_number_round_trip_and_ordering() {
        let epoch = Date::new(1970, 1, 1).unwrap();
        assert_eq!(epoch.day_number(), 0);
        let a = Date::new(2010, 1, 1).unwrap();
        let b = Date::new(2011, 6, 1).unwrap();
        assert!(a < b);
        assert_eq!(b.plus_days(0).unwrap(), b);
        assert_eq!(a.plus_days(1).unwrap().to_string(), "2010-01-02");
        // walk a leap boundary
        let feb28 = Date::new(2012, 2, 28).unwrap();
        assert_eq!(feb28.plus_days(1).unwrap().to_string(), "2012-02-29");
        assert_eq!(feb28.plus_days(2).unwrap().to_string(), "2012-03-01");
        for n in [-200_000i64, -1, 0, 1, 365, 200_000] {
            let d = Date::from_day_number(n).unwrap();
            assert_eq!(d.day_number(), n);
        }
    }
}

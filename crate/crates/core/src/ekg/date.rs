use core::fmt;
use core::str::FromStr;

use crate::error::{domain, Error};
use crate::math;

/// Calendar date stored as days since 1970-01-01 (proleptic Gregorian).
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Date(i32);

/// Average month length used to turn day gaps into whole months.
pub const DAYS_PER_MONTH: f64 = 30.44;

impl Date {
    pub fn from_ymd(year: i32, month: u32, day: u32) -> Result<Self, Error> {
        if !(1..=12).contains(&month) || day == 0 || day > days_in_month(year, month) {
            return Err(domain(
                "date",
                alloc::format!("{year:04}-{month:02}-{day:02} is not a calendar date"),
            ));
        }
        Ok(Self(days_from_civil(year, month, day)))
    }

    pub fn from_days(days: i32) -> Self {
        Self(days)
    }

    pub fn days(self) -> i32 {
        self.0
    }

    pub fn ymd(self) -> (i32, u32, u32) {
        civil_from_days(self.0)
    }

    pub fn add_days(self, days: i32) -> Self {
        Self(self.0 + days)
    }

    /// Whole months from `self` until `later`: `floor(days / 30.44)`.
    /// `None` when `later` precedes `self`.
    pub fn months_until(self, later: Date) -> Option<u32> {
        let days = later.0 - self.0;
        if days < 0 {
            return None;
        }
        Some(math::floor(f64::from(days) / DAYS_PER_MONTH) as u32)
    }
}

impl fmt::Display for Date {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let (y, m, d) = self.ymd();
        write!(f, "{y:04}-{m:02}-{d:02}")
    }
}

impl FromStr for Date {
    type Err = Error;

    /// Parses `YYYY-MM-DD`.
    fn from_str(s: &str) -> Result<Self, Error> {
        let bad = || domain("date", alloc::format!("`{s}` is not YYYY-MM-DD"));
        let bytes = s.as_bytes();
        if bytes.len() != 10 || bytes[4] != b'-' || bytes[7] != b'-' {
            return Err(bad());
        }
        let digits = |range: core::ops::Range<usize>| -> Result<u32, Error> {
            let part = &s[range];
            if !part.bytes().all(|b| b.is_ascii_digit()) {
                return Err(bad());
            }
            part.parse().map_err(|_| bad())
        };
        let year = digits(0..4)? as i32;
        let month = digits(5..7)?;
        let day = digits(8..10)?;
        Self::from_ymd(year, month, day)
    }
}

fn is_leap(year: i32) -> bool {
    (year % 4 == 0 && year % 100 != 0) || year % 400 == 0
}

fn days_in_month(year: i32, month: u32) -> u32 {
    match month {
        1 | 3 | 5 | 7 | 8 | 10 | 12 => 31,
        4 | 6 | 9 | 11 => 30,
        2 if is_leap(year) => 29,
        2 => 28,
        _ => 0,
    }
}

fn days_from_civil(year: i32, month: u32, day: u32) -> i32 {
    let y = if month <= 2 { year - 1 } else { year };
    let era = if y >= 0 { y } else { y - 399 } / 400;
    let yoe = y - era * 400;
    let mp = (month as i32 + 9) % 12;
    let doy = (153 * mp + 2) / 5 + day as i32 - 1;
    let doe = yoe * 365 + yoe / 4 - yoe / 100 + doy;
    era * 146_097 + doe - 719_468
}

fn civil_from_days(days: i32) -> (i32, u32, u32) {
    let z = days + 719_468;
    let era = if z >= 0 { z } else { z - 146_096 } / 146_097;
    let doe = z - era * 146_097;
    let yoe = (doe - doe / 1460 + doe / 36_524 - doe / 146_096) / 365;
    let doy = doe - (365 * yoe + yoe / 4 - yoe / 100);
    let mp = (5 * doy + 2) / 153;
    let day = (doy - (153 * mp + 2) / 5 + 1) as u32;
    let month = if mp < 10 { mp + 3 } else { mp - 9 } as u32;
    let year = yoe + era * 400 + i32::from(month <= 2);
    (year, month, day)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn epoch_and_round_trip() {
        assert_eq!(Date::from_ymd(1970, 1, 1).unwrap().days(), 0);
        assert_eq!(Date::from_ymd(2000, 3, 1).unwrap().days(), 11_017);
        for days in (-800_000..800_000).step_by(997) {
            let d = Date::from_days(days);
            let (y, m, dd) = d.ymd();
            assert_eq!(Date::from_ymd(y, m, dd).unwrap(), d);
        }
    }

    #[test]
    fn parse_and_display() {
        let d: Date = "2021-02-28".parse().unwrap();
        assert_eq!(d.to_string(), "2021-02-28");
        assert!("2021-02-29".parse::<Date>().is_err());
        assert!("2020-02-29".parse::<Date>().is_ok());
        assert!("2021-2-28".parse::<Date>().is_err());
        assert!("2021/02/28".parse::<Date>().is_err());
        assert!("20x1-02-28".parse::<Date>().is_err());
    }

    #[test]
    fn month_gaps() {
        let obs = Date::from_ymd(2020, 1, 1).unwrap();
        assert_eq!(obs.add_days(-183).months_until(obs), Some(6));
        assert_eq!(obs.add_days(-730).months_until(obs), Some(23));
        assert_eq!(obs.add_days(-731).months_until(obs), Some(24));
        assert_eq!(obs.add_days(1).months_until(obs), None);
    }
}

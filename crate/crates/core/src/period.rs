//! Calendar period stamps for monthly and quarterly series.
//!
//! Monthly stamps serialize as `YYYY-MM`, quarterly as `YYYY-Qq`.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Frequency {
    #[serde(rename = "monthly")]
    Monthly,
    #[serde(rename = "quarterly")]
    Quarterly,
}

/// A month or a quarter. Periods of different frequency never compare equal;
/// ordering between frequencies is by variant first and is not meaningful.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Period {
    Month { year: i32, month: u32 },
    Quarter { year: i32, quarter: u32 },
}

impl Period {
    pub fn month(year: i32, month: u32) -> Self {
        assert!((1..=12).contains(&month), "month out of range: {month}");
        Period::Month { year, month }
    }

    pub fn quarter(year: i32, quarter: u32) -> Self {
        assert!((1..=4).contains(&quarter), "quarter out of range: {quarter}");
        Period::Quarter { year, quarter }
    }

    pub fn frequency(&self) -> Frequency {
        match self {
            Period::Month { .. } => Frequency::Monthly,
            Period::Quarter { .. } => Frequency::Quarterly,
        }
    }

    /// Linear index used for arithmetic on periods of the same frequency.
    pub fn ordinal(&self) -> i64 {
        match *self {
            Period::Month { year, month } => year as i64 * 12 + (month as i64 - 1),
            Period::Quarter { year, quarter } => year as i64 * 4 + (quarter as i64 - 1),
        }
    }

    fn from_ordinal(freq: Frequency, ord: i64) -> Self {
        match freq {
            Frequency::Monthly => Period::Month {
                year: ord.div_euclid(12) as i32,
                month: ord.rem_euclid(12) as u32 + 1,
            },
            Frequency::Quarterly => Period::Quarter {
                year: ord.div_euclid(4) as i32,
                quarter: ord.rem_euclid(4) as u32 + 1,
            },
        }
    }

    pub fn succ(&self) -> Self {
        self.offset(1)
    }

    pub fn offset(&self, steps: i64) -> Self {
        Self::from_ordinal(self.frequency(), self.ordinal() + steps)
    }

    /// Number of periods from `self` to `other` (same frequency).
    pub fn distance(&self, other: &Period) -> i64 {
        debug_assert_eq!(self.frequency(), other.frequency());
        other.ordinal() - self.ordinal()
    }
}

impl fmt::Display for Period {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Period::Month { year, month } => write!(f, "{year:04}-{month:02}"),
            Period::Quarter { year, quarter } => write!(f, "{year:04}-Q{quarter}"),
        }
    }
}

impl FromStr for Period {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || Error::Parse {
            input: s.to_string(),
            what: "period (YYYY-MM or YYYY-Qq)",
        };
        let s = s.trim();
        let (y, rest) = s.split_once('-').ok_or_else(bad)?;
        if y.len() != 4 {
            return Err(bad());
        }
        let year: i32 = y.parse().map_err(|_| bad())?;
        if let Some(q) = rest.strip_prefix('Q').or_else(|| rest.strip_prefix('q')) {
            let quarter: u32 = q.parse().map_err(|_| bad())?;
            if !(1..=4).contains(&quarter) || q.len() != 1 {
                return Err(bad());
            }
            return Ok(Period::Quarter { year, quarter });
        }
        if rest.len() != 2 {
            return Err(bad());
        }
        let month: u32 = rest.parse().map_err(|_| bad())?;
        if !(1..=12).contains(&month) {
            return Err(bad());
        }
        Ok(Period::Month { year, month })
    }
}

impl Serialize for Period {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Period {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Checks that stamps are strictly increasing and share one frequency.
pub fn check_strictly_increasing(dates: &[Period]) -> Result<(), Error> {
    for w in dates.windows(2) {
        if w[0].frequency() != w[1].frequency() {
            return Err(Error::Validation {
                period: w[1].to_string(),
                field: "date",
                reason: "mixed frequencies".into(),
            });
        }
        if w[1] <= w[0] {
            return Err(Error::Validation {
                period: w[1].to_string(),
                field: "date",
                reason: format!("not after preceding period {}", w[0]),
            });
        }
    }
    Ok(())
}

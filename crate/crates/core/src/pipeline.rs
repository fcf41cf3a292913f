//! Series specifications, stationarity transforms, daily-to-monthly
//! aggregation and alignment into an estimation panel.

use std::collections::BTreeMap;
use std::fmt;

use chrono::{Datelike, NaiveDate};
use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::period::{Frequency, Period};

/// Transformation code: 1 keeps levels, 5 takes `Δ ln`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "u8", into = "u8")]
pub enum Tcode {
    Levels,
    LogDiff,
}

impl TryFrom<u8> for Tcode {
    type Error = Error;

    fn try_from(code: u8) -> Result<Self> {
        match code {
            1 => Ok(Tcode::Levels),
            5 => Ok(Tcode::LogDiff),
            other => Err(Error::Config(format!(
                "unsupported tcode {other}; expected 1 or 5"
            ))),
        }
    }
}

impl From<Tcode> for u8 {
    fn from(t: Tcode) -> u8 {
        match t {
            Tcode::Levels => 1,
            Tcode::LogDiff => 5,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SourceFrequency {
    Monthly,
    Quarterly,
    /// Daily observations averaged to calendar months.
    Daily,
}

impl SourceFrequency {
    pub fn target(self) -> Frequency {
        match self {
            SourceFrequency::Monthly | SourceFrequency::Daily => Frequency::Monthly,
            SourceFrequency::Quarterly => Frequency::Quarterly,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    Uncertainty,
    Disagreement,
    Activity,
    Price,
    Financial,
    Policy,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SeriesSpec {
    pub mnemonic: String,
    pub tcode: Tcode,
    pub frequency: SourceFrequency,
    pub role: Role,
}

/// Observations on a monthly or quarterly grid, not necessarily contiguous.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeSeries {
    pub name: String,
    pub dates: Vec<Period>,
    pub values: Vec<f64>,
}

impl TimeSeries {
    pub fn new(name: impl Into<String>, dates: Vec<Period>, values: Vec<f64>) -> Result<Self> {
        let name = name.into();
        if dates.len() != values.len() {
            return Err(Error::Data(format!(
                "{name}: {} dates but {} values",
                dates.len(),
                values.len()
            )));
        }
        crate::period::check_strictly_increasing(&dates)?;
        Ok(TimeSeries { name, dates, values })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DailySeries {
    pub name: String,
    pub dates: Vec<NaiveDate>,
    pub values: Vec<f64>,
}

pub fn apply_tcode(series: &TimeSeries, tcode: Tcode) -> Result<TimeSeries> {
    match tcode {
        Tcode::Levels => Ok(series.clone()),
        Tcode::LogDiff => {
            if let Some(t) = series.values.iter().position(|v| !(*v > 0.0)) {
                return Err(Error::Transform {
                    period: series.dates[t].to_string(),
                    reason: format!(
                        "{}: log difference needs positive values, got {}",
                        series.name, series.values[t]
                    ),
                });
            }
            for w in series.dates.windows(2) {
                if w[0].succ() != w[1] {
                    return Err(Error::Gap(format!(
                        "{}: cannot difference across the gap {} -> {}",
                        series.name, w[0], w[1]
                    )));
                }
            }
            let values = series
                .values
                .windows(2)
                .map(|w| (w[1] / w[0]).ln())
                .collect();
            Ok(TimeSeries {
                name: series.name.clone(),
                dates: series.dates.iter().skip(1).copied().collect(),
                values,
            })
        }
    }
}

/// Calendar-month arithmetic means from the first to the last observed
/// month. Non-finite values count as missing.
pub fn monthly_from_daily(series: &DailySeries) -> Result<TimeSeries> {
    if series.dates.len() != series.values.len() {
        return Err(Error::Data(format!(
            "{}: {} dates but {} values",
            series.name,
            series.dates.len(),
            series.values.len()
        )));
    }
    let mut months: BTreeMap<Period, (f64, usize)> = BTreeMap::new();
    for (d, v) in series.dates.iter().zip(&series.values) {
        let p = Period::month(d.year(), d.month());
        let e = months.entry(p).or_insert((0.0, 0));
        if v.is_finite() {
            e.0 += v;
            e.1 += 1;
        }
    }
    let (Some(first), Some(last)) = (months.keys().next().copied(), months.keys().last().copied()) else {
        return Err(Error::Data(format!("{}: no daily observations", series.name)));
    };
    let mut dates = Vec::new();
    let mut values = Vec::new();
    let mut p = first;
    loop {
        match months.get(&p) {
            Some((sum, n)) if *n > 0 => {
                dates.push(p);
                values.push(sum / *n as f64);
            }
            _ => {
                return Err(Error::Gap(format!(
                    "{}: no valid daily observations in {p}",
                    series.name
                )))
            }
        }
        if p == last {
            break;
        }
        p = p.succ();
    }
    Ok(TimeSeries {
        name: series.name.clone(),
        dates,
        values,
    })
}

pub enum RawSeries {
    Periodic(TimeSeries),
    Daily(DailySeries),
}

/// Aligned estimation panel.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub dates: Vec<Period>,
    /// `T × n`, columns in the order of `specs`.
    pub data: DMatrix<f64>,
    pub specs: Vec<SeriesSpec>,
    pub warnings: Vec<String>,
}

impl Dataset {
    pub fn sample_start(&self) -> Period {
        self.dates[0]
    }

    pub fn sample_end(&self) -> Period {
        self.dates[self.dates.len() - 1]
    }

    pub fn names(&self) -> Vec<String> {
        self.specs.iter().map(|s| s.mnemonic.clone()).collect()
    }
}

impl fmt::Display for Dataset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} series, {} to {} ({} periods)",
            self.specs.len(),
            self.sample_start(),
            self.sample_end(),
            self.dates.len()
        )
    }
}

/// Transforms each raw series per its spec and aligns all of them on the
/// common sample inside `window`. Ends are trimmed to the latest start and
/// earliest finish with a warning; a missing or non-finite value inside
/// the common sample is an alignment error naming every offender.
pub fn assemble_dataset(
    specs: &[SeriesSpec],
    raw: Vec<RawSeries>,
    window: Option<(Period, Period)>,
) -> Result<Dataset> {
    if specs.is_empty() {
        return Err(Error::Config("no series specified".into()));
    }
    if specs.len() != raw.len() {
        return Err(Error::Config(format!(
            "{} specs but {} raw series",
            specs.len(),
            raw.len()
        )));
    }
    let freq = specs[0].frequency.target();
    let mut transformed = Vec::with_capacity(specs.len());
    for (spec, r) in specs.iter().zip(raw) {
        if spec.frequency.target() != freq {
            return Err(Error::Config(format!(
                "{} is {:?} but the panel is {freq:?}",
                spec.mnemonic, spec.frequency
            )));
        }
        let periodic = match (spec.frequency, r) {
            (SourceFrequency::Daily, RawSeries::Daily(d)) => monthly_from_daily(&d)?,
            (SourceFrequency::Daily, RawSeries::Periodic(_)) | (_, RawSeries::Daily(_)) => {
                return Err(Error::Config(format!(
                    "{}: source data does not match frequency {:?}",
                    spec.mnemonic, spec.frequency
                )))
            }
            (_, RawSeries::Periodic(s)) => s,
        };
        if periodic.is_empty() {
            return Err(Error::Data(format!("{}: no observations", spec.mnemonic)));
        }
        if periodic.dates.iter().any(|d| d.frequency() != freq) {
            return Err(Error::Data(format!(
                "{}: dates are not {freq:?}",
                spec.mnemonic
            )));
        }
        let mut t = apply_tcode(&periodic, spec.tcode)?;
        t.name = spec.mnemonic.clone();
        if t.is_empty() {
            return Err(Error::Data(format!(
                "{}: no observations left after transform",
                spec.mnemonic
            )));
        }
        transformed.push(t);
    }

    let mut start = transformed.iter().map(|s| s.dates[0]).max().expect("nonempty");
    let mut end = transformed
        .iter()
        .map(|s| s.dates[s.len() - 1])
        .min()
        .expect("nonempty");
    let mut warnings = Vec::new();
    if let Some((ws, we)) = window {
        if ws.frequency() != freq || we.frequency() != freq || ws > we {
            return Err(Error::Config(format!("invalid sample window {ws} to {we}")));
        }
        if start > ws {
            let late: Vec<&str> = transformed
                .iter()
                .filter(|s| s.dates[0] > ws)
                .map(|s| s.name.as_str())
                .collect();
            warnings.push(format!(
                "sample start moved from {ws} to {start}: {} begin late",
                late.join(", ")
            ));
        } else {
            start = ws;
        }
        if end < we {
            let early: Vec<&str> = transformed
                .iter()
                .filter(|s| s.dates[s.len() - 1] < we)
                .map(|s| s.name.as_str())
                .collect();
            warnings.push(format!(
                "sample end moved from {we} to {end}: {} end early",
                early.join(", ")
            ));
        } else {
            end = we;
        }
    } else {
        let earliest = transformed.iter().map(|s| s.dates[0]).min().expect("nonempty");
        if earliest < start {
            let trimmed: Vec<&str> = transformed
                .iter()
                .filter(|s| s.dates[0] < start)
                .map(|s| s.name.as_str())
                .collect();
            warnings.push(format!(
                "sample starts at {start}; dropped earlier observations of {}",
                trimmed.join(", ")
            ));
        }
        let latest = transformed
            .iter()
            .map(|s| s.dates[s.len() - 1])
            .max()
            .expect("nonempty");
        if latest > end {
            let trimmed: Vec<&str> = transformed
                .iter()
                .filter(|s| s.dates[s.len() - 1] > end)
                .map(|s| s.name.as_str())
                .collect();
            warnings.push(format!(
                "sample ends at {end}; dropped later observations of {}",
                trimmed.join(", ")
            ));
        }
    }
    if start > end {
        return Err(Error::Alignment(format!(
            "series do not overlap: latest start {start} is after earliest end {end}"
        )));
    }

    let t_len = (start.distance(&end) + 1) as usize;
    let dates: Vec<Period> = (0..t_len).map(|i| start.offset(i as i64)).collect();
    let mut data = DMatrix::zeros(t_len, specs.len());
    let mut offenders = Vec::new();
    for (j, s) in transformed.iter().enumerate() {
        let lookup: BTreeMap<Period, f64> = s.dates.iter().copied().zip(s.values.iter().copied()).collect();
        let mut missing = Vec::new();
        for (t, d) in dates.iter().enumerate() {
            match lookup.get(d) {
                Some(v) if v.is_finite() => data[(t, j)] = *v,
                _ => missing.push(d.to_string()),
            }
        }
        if !missing.is_empty() {
            let shown: Vec<&str> = missing.iter().take(5).map(String::as_str).collect();
            offenders.push(format!(
                "{} ({} missing: {}{})",
                s.name,
                missing.len(),
                shown.join(", "),
                if missing.len() > 5 { ", ..." } else { "" }
            ));
        }
    }
    if !offenders.is_empty() {
        return Err(Error::Alignment(format!(
            "gaps inside {start} to {end}: {}",
            offenders.join("; ")
        )));
    }
    for w in &warnings {
        log::warn!("{w}");
    }
    Ok(Dataset {
        dates,
        data,
        specs: specs.to_vec(),
        warnings,
    })
}

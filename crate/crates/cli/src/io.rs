use std::fs;
use std::io::Write;
use std::path::Path;

use chrono::NaiveDate;
use disag_core::pipeline::{DailySeries, TimeSeries};
use disag_core::survey_index::CategoricalSeries;
use disag_core::Period;
use nalgebra::DMatrix;
use serde::Serialize;

use crate::error::{CliError, CliResult};

/// Writes through a temporary file in the target directory, then renames.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> CliResult<()> {
    let dir = path.parent().filter(|d| !d.as_os_str().is_empty()).unwrap_or(Path::new("."));
    fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| CliError::io(dir, e))?;
    tmp.write_all(bytes).map_err(|e| CliError::io(path, e))?;
    tmp.persist(path).map_err(|e| CliError::io(path, e.error))?;
    Ok(())
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> CliResult<()> {
    let mut bytes = serde_json::to_vec_pretty(value)
        .map_err(|e| CliError::data(format!("{}: {e}", path.display())))?;
    bytes.push(b'\n');
    write_atomic(path, &bytes)
}

/// Buffers CSV rows and writes them atomically on [`CsvOut::finish`].
/// Floats use the shortest representation that parses back exactly.
pub struct CsvOut {
    writer: csv::Writer<Vec<u8>>,
}

impl CsvOut {
    pub fn new<S: AsRef<str>>(header: &[S]) -> CliResult<Self> {
        let mut writer = csv::Writer::from_writer(Vec::new());
        writer.write_record(header.iter().map(|h| h.as_ref()))?;
        Ok(CsvOut { writer })
    }

    pub fn row<I, S>(&mut self, fields: I) -> CliResult<()>
    where
        I: IntoIterator<Item = S>,
        S: AsRef<[u8]>,
    {
        self.writer.write_record(fields)?;
        Ok(())
    }

    pub fn finish(self, path: &Path) -> CliResult<()> {
        let bytes = self
            .writer
            .into_inner()
            .map_err(|e| CliError::data(format!("{}: {e}", path.display())))?;
        write_atomic(path, &bytes)
    }
}

pub fn num(x: f64) -> String {
    format!("{x}")
}

fn reader(path: &Path) -> CliResult<csv::Reader<fs::File>> {
    csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| CliError::data(format!("{}: {e}", path.display())))
}

fn expect_header(path: &Path, rdr: &mut csv::Reader<fs::File>, want: &[&str]) -> CliResult<()> {
    let got = rdr.headers()?.clone();
    if got.iter().collect::<Vec<_>>() != want {
        return Err(CliError::data(format!(
            "{}: expected header {}, found {}",
            path.display(),
            want.join(","),
            got.iter().collect::<Vec<_>>().join(",")
        )));
    }
    Ok(())
}

/// Empty cells and `NA` / `.` read as missing (NaN).
fn parse_value(path: &Path, line: u64, s: &str) -> CliResult<f64> {
    match s {
        "" | "NA" | "NaN" | "." => Ok(f64::NAN),
        _ => s.parse().map_err(|_| {
            CliError::data(format!("{}:{line}: cannot parse `{s}` as a number", path.display()))
        }),
    }
}

fn parse_period(path: &Path, line: u64, s: &str) -> CliResult<Period> {
    s.parse()
        .map_err(|e| CliError::data(format!("{}:{line}: {e}", path.display())))
}

fn line_of(rec: &csv::StringRecord) -> u64 {
    rec.position().map_or(0, |p| p.line())
}

/// `date,value` on a monthly or quarterly grid.
pub fn read_periodic(path: &Path, name: &str) -> CliResult<TimeSeries> {
    let mut rdr = reader(path)?;
    expect_header(path, &mut rdr, &["date", "value"])?;
    let (mut dates, mut values) = (Vec::new(), Vec::new());
    for rec in rdr.records() {
        let rec = rec?;
        let line = line_of(&rec);
        dates.push(parse_period(path, line, &rec[0])?);
        values.push(parse_value(path, line, &rec[1])?);
    }
    TimeSeries::new(name, dates, values).map_err(|e| CliError::from(e).context(path.display()))
}

/// `date,value` with `YYYY-MM-DD` stamps.
pub fn read_daily(path: &Path, name: &str) -> CliResult<DailySeries> {
    let mut rdr = reader(path)?;
    expect_header(path, &mut rdr, &["date", "value"])?;
    let (mut dates, mut values) = (Vec::new(), Vec::new());
    for rec in rdr.records() {
        let rec = rec?;
        let line = line_of(&rec);
        let d = NaiveDate::parse_from_str(&rec[0], "%Y-%m-%d").map_err(|e| {
            CliError::data(format!("{}:{line}: bad date `{}`: {e}", path.display(), &rec[0]))
        })?;
        dates.push(d);
        values.push(parse_value(path, line, &rec[1])?);
    }
    if dates.windows(2).any(|w| w[0] >= w[1]) {
        return Err(CliError::data(format!("{}: dates are not strictly increasing", path.display())));
    }
    Ok(DailySeries { name: name.to_string(), dates, values })
}

/// `date,positive,middle,negative`, question id taken from the file stem.
pub fn read_question(path: &Path) -> CliResult<CategoricalSeries> {
    let mut rdr = reader(path)?;
    expect_header(path, &mut rdr, &["date", "positive", "middle", "negative"])?;
    let mut cols: [Vec<f64>; 3] = Default::default();
    let mut dates = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        let line = line_of(&rec);
        dates.push(parse_period(path, line, &rec[0])?);
        for (c, col) in cols.iter_mut().enumerate() {
            col.push(parse_value(path, line, &rec[c + 1])?);
        }
    }
    let id = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    let [p, m, n] = cols;
    CategoricalSeries::new(id, dates, p, m, n).map_err(|e| CliError::from(e).context(path.display()))
}

/// `date,<var>,...` with no missing values.
pub fn read_matrix(path: &Path) -> CliResult<(Vec<Period>, Vec<String>, DMatrix<f64>)> {
    let mut rdr = reader(path)?;
    let headers = rdr.headers()?.clone();
    if headers.get(0) != Some("date") || headers.len() < 2 {
        return Err(CliError::data(format!("{}: expected header date,<var>,...", path.display())));
    }
    let names: Vec<String> = headers.iter().skip(1).map(str::to_string).collect();
    let mut dates = Vec::new();
    let mut flat = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        let line = line_of(&rec);
        dates.push(parse_period(path, line, &rec[0])?);
        for s in rec.iter().skip(1) {
            let v = parse_value(path, line, s)?;
            if !v.is_finite() {
                return Err(CliError::data(format!("{}:{line}: missing value", path.display())));
            }
            flat.push(v);
        }
    }
    disag_core::period::check_strictly_increasing(&dates)
        .map_err(|e| CliError::from(e).context(path.display()))?;
    let data = DMatrix::from_row_slice(dates.len(), names.len(), &flat);
    Ok((dates, names, data))
}

pub fn write_matrix(path: &Path, dates: &[Period], names: &[String], data: &DMatrix<f64>) -> CliResult<()> {
    let mut header = vec!["date".to_string()];
    header.extend(names.iter().cloned());
    let mut out = CsvOut::new(&header)?;
    for (t, d) in dates.iter().enumerate() {
        let mut row = vec![d.to_string()];
        row.extend(data.row(t).iter().map(|v| num(*v)));
        out.row(row)?;
    }
    out.finish(path)
}

/// Reads a headed numeric CSV whose header must equal `header`.
pub fn read_table(path: &Path, header: &[String]) -> CliResult<Vec<Vec<f64>>> {
    let mut rdr = reader(path)?;
    let want: Vec<&str> = header.iter().map(String::as_str).collect();
    expect_header(path, &mut rdr, &want)?;
    let mut rows = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        let line = line_of(&rec);
        rows.push(rec.iter().map(|s| parse_value(path, line, s)).collect::<CliResult<Vec<_>>>()?);
    }
    Ok(rows)
}

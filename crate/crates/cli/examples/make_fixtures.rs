//! Regenerates `crates/cli/fixtures`. Usage:
//! `cargo run -p disag-cli --example make_fixtures [-- <dir>]`

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use chrono::{Datelike, NaiveDate, Weekday};
use disag_core::sampling::std_normal;
use disag_core::synthetic::FactorVar;
use disag_core::Period;
use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const MONTHS: usize = 241;
const START: (i32, u32) = (2000, 1);

/// Column order of the simulated panel.
const NAMES: [&str; 8] = [
    "JLN12", "DISAG", "INDPRO", "DPCERA3M086SBEA", "PCEPI", "PAYEMS", "SP500", "FEDFUNDS",
];

fn pipeline_truth() -> FactorVar {
    let n = 8;
    let mut phi = DMatrix::zeros(n, 1 + 2 * n);
    for i in 0..n {
        phi[(i, 1 + i)] = 0.5;
        phi[(i, 1 + n + i)] = 0.1;
    }
    // uncertainty feeds activity with a lag
    phi[(2, 1)] = -0.2;
    phi[(3, 1)] = -0.1;
    phi[(5, 1)] = -0.15;
    #[rustfmt::skip]
    let lambda = DMatrix::from_row_slice(n, 2, &[
        0.8, 0.5,
        -0.6, 0.7,
        0.0, 0.0,
        0.0, 0.0,
        -0.2, 0.1,
        0.0, 0.0,
        -0.5, -0.3,
        -0.1, -0.2,
    ]);
    let sigma2 = DVector::from_vec(vec![0.3, 0.3, 0.6, 0.6, 0.6, 0.6, 0.5, 0.5]);
    FactorVar { phi, lambda, sigma2 }
}

fn month(t: usize) -> Period {
    Period::month(START.0, START.1).offset(t as i64)
}

fn write(path: &Path, text: &str) {
    fs::create_dir_all(path.parent().unwrap()).unwrap();
    fs::write(path, text).unwrap();
    println!("wrote {}", path.display());
}

fn series_csv(values: impl Iterator<Item = (Period, f64)>) -> String {
    let mut s = String::from("date,value\n");
    for (d, v) in values {
        writeln!(s, "{d},{v:.4}").unwrap();
    }
    s
}

fn pipeline(dir: &Path) {
    let (z, _) = pipeline_truth().simulate(MONTHS, 300, 20240601).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(77);

    write(
        &dir.join("JLN12.csv"),
        &series_csv((0..MONTHS).map(|t| (month(t), 0.8 + 0.05 * z[(t, 0)]))),
    );

    // (column, mean growth, growth sd) for the log-level series
    for (col, mu, sd) in [(2, 0.002, 0.006), (3, 0.002, 0.004), (4, 0.002, 0.002), (5, 0.001, 0.002), (6, 0.006, 0.04)] {
        let mut level = 100.0f64;
        let values: Vec<(Period, f64)> = (0..MONTHS)
            .map(|t| {
                if t > 0 {
                    level *= (mu + sd * z[(t, col)]).exp();
                }
                (month(t), level)
            })
            .collect();
        write(&dir.join(format!("{}.csv", NAMES[col])), &series_csv(values.into_iter()));
    }

    // policy rate observed on business days
    let mut daily = String::from("date,value\n");
    for t in 0..MONTHS {
        let p = month(t);
        let Period::Month { year, month: m } = p else { unreachable!() };
        let mut d = NaiveDate::from_ymd_opt(year, m, 1).unwrap();
        while d.month() == m {
            if !matches!(d.weekday(), Weekday::Sat | Weekday::Sun) {
                let v = 4.0 + 0.5 * z[(t, 7)] + 0.03 * std_normal(&mut rng);
                writeln!(daily, "{},{v:.2}", d.format("%Y-%m-%d")).unwrap();
            }
            d = d.succ_opt().unwrap();
        }
    }
    write(&dir.join("FEDFUNDS_daily.csv"), &daily);

    // survey questions whose tail disagreement moves with the DISAG column
    for (q, weight) in [1.0, 0.8, 1.2, 0.9].into_iter().enumerate() {
        let mut s = String::from("date,positive,middle,negative\n");
        for t in 0..MONTHS {
            let tail = (0.55 + 0.08 * weight * z[(t, 1)] + 0.02 * std_normal(&mut rng)).clamp(0.2, 0.95);
            let middle = ((15.0 + 3.0 * std_normal(&mut rng)).clamp(5.0, 20.0) * 100.0).round() / 100.0;
            let gap = 100.0 * (1.0 - tail);
            let mut big = (((100.0 - middle + gap) / 2.0) * 100.0).round() / 100.0;
            let mut small = ((100.0 - middle - big) * 100.0).round() / 100.0;
            if t % 3 == 0 {
                std::mem::swap(&mut big, &mut small);
            }
            writeln!(s, "{},{big:.2},{middle:.2},{small:.2}", month(t)).unwrap();
        }
        write(&dir.join(format!("question{}.csv", q + 1)), &s);
    }
}

fn toy(dir: &Path) {
    #[rustfmt::skip]
    let phi = DMatrix::from_row_slice(3, 4, &[
        0.1, 0.5, 0.1, 0.0,
        0.0, 0.0, 0.4, 0.1,
        -0.1, 0.1, 0.0, 0.3,
    ]);
    let lambda = DMatrix::from_column_slice(3, 1, &[1.0, -0.7, 0.0]);
    let truth = FactorVar { phi, lambda, sigma2: DVector::from_vec(vec![0.3, 0.3, 0.4]) };
    let (y, _) = truth.simulate(150, 200, 99).unwrap();
    let mut s = String::from("date,A,B,C\n");
    for t in 0..y.nrows() {
        let q = Period::quarter(1980, 1).offset(t as i64);
        writeln!(s, "{q},{:.6},{:.6},{:.6}", y[(t, 0)], y[(t, 1)], y[(t, 2)]).unwrap();
    }
    write(&dir.join("design.csv"), &s);
}

fn main() {
    let root: PathBuf = std::env::args()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(|| Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures"));
    pipeline(&root.join("pipeline"));
    toy(&root.join("toy"));
}

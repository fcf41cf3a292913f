//! Inputs shared by the criterion benches.

use disag_core::bvar::{build_design, DesignData, SignPattern};
use disag_core::survey_index::CategoricalSeries;
use disag_core::synthetic::FactorVar;
use disag_core::Period;
use nalgebra::{DMatrix, DVector};

/// Deterministic three-category shares over `t_len` months.
pub fn survey_series(t_len: usize) -> CategoricalSeries {
    let dates = (0..t_len).map(|t| Period::month(1960, 1).offset(t as i64)).collect();
    let pos: Vec<f64> = (0..t_len).map(|t| 30.0 + 10.0 * (t as f64 * 0.1).sin()).collect();
    let mid: Vec<f64> = (0..t_len).map(|t| 40.0 + 5.0 * (t as f64 * 0.07).cos()).collect();
    let neg: Vec<f64> = pos.iter().zip(&mid).map(|(p, m)| 100.0 - p - m).collect();
    CategoricalSeries::new("bench", dates, pos, mid, neg).expect("valid shares")
}

/// Four-variable, two-factor VAR(1) in the shape of the recovery checks.
pub fn factor_var() -> FactorVar {
    let phi = DMatrix::from_row_slice(
        4,
        5,
        &[
            0.2, 0.5, 0.1, 0.0, 0.0, //
            -0.1, 0.0, 0.4, 0.1, 0.0, //
            0.0, 0.0, 0.0, 0.6, 0.0, //
            0.1, 0.1, 0.0, 0.0, 0.3,
        ],
    );
    let lambda = DMatrix::from_row_slice(4, 2, &[1.0, 0.8, -0.9, 0.7, 0.0, 0.0, 0.8, 0.0]);
    FactorVar { phi, lambda, sigma2: DVector::from_vec(vec![0.3, 0.3, 0.5, 0.3]) }
}

pub fn factor_pattern() -> SignPattern {
    SignPattern::parse_rows(&["+ +", "- +", "0 0", "+ 0"]).expect("valid pattern")
}

pub fn factor_design(t_len: usize) -> DesignData {
    let (y, _) = factor_var().simulate(t_len, 200, 7).expect("simulation");
    build_design(&y, 1).expect("design")
}

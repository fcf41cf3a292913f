//! Disagreement indices built from categorical survey shares.
//!
//! Each survey question reports, per period, the percentage of respondents
//! answering positively, neutrally ("same", "no mention") and negatively.
//! The measures here turn those shares into a disagreement series, and
//! [`pca_first_component`] collapses several standardized series into one.

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::period::{check_strictly_increasing, Period};
use crate::stats;

/// Rounding tolerance for published shares that should add up to 100.
pub const SHARE_SUM_RANGE: (f64, f64) = (99.0, 101.0);

/// Response shares (percent) for one survey question.
#[derive(Debug, Clone, PartialEq)]
pub struct CategoricalSeries {
    question_id: String,
    dates: Vec<Period>,
    positive: Vec<f64>,
    middle: Vec<f64>,
    negative: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Category {
    Positive,
    Middle,
    Negative,
}

/// Ordinal ordering used by the Lacy measure, lowest category first.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CategoryOrder(pub [Category; 3]);

impl Default for CategoryOrder {
    fn default() -> Self {
        CategoryOrder([Category::Negative, Category::Middle, Category::Positive])
    }
}

impl CategoryOrder {
    pub fn new(order: [Category; 3]) -> Result<Self> {
        let mut seen = [false; 3];
        for c in order {
            let i = c as usize;
            if seen[i] {
                return Err(Error::Config(format!(
                    "category order {order:?} repeats {c:?}"
                )));
            }
            seen[i] = true;
        }
        Ok(CategoryOrder(order))
    }
}

impl CategoricalSeries {
    /// Builds a validated series. Shares must lie in [0, 100] and add up to
    /// within [`SHARE_SUM_RANGE`] in every period.
    pub fn new(
        question_id: impl Into<String>,
        dates: Vec<Period>,
        positive: Vec<f64>,
        middle: Vec<f64>,
        negative: Vec<f64>,
    ) -> Result<Self> {
        let s = Self::new_unnormalized(question_id, dates, positive, middle, negative)?;
        for t in 0..s.len() {
            let total = s.positive[t] + s.middle[t] + s.negative[t];
            if !(SHARE_SUM_RANGE.0..=SHARE_SUM_RANGE.1).contains(&total) {
                return Err(Error::Validation {
                    period: s.dates[t].to_string(),
                    field: "positive+middle+negative",
                    reason: format!(
                        "shares sum to {total}, outside [{}, {}]",
                        SHARE_SUM_RANGE.0, SHARE_SUM_RANGE.1
                    ),
                });
            }
        }
        Ok(s)
    }

    /// Like [`CategoricalSeries::new`] but without the share-sum check, for
    /// subsets of a question's categories or raw counts scaled to percent.
    pub fn new_unnormalized(
        question_id: impl Into<String>,
        dates: Vec<Period>,
        positive: Vec<f64>,
        middle: Vec<f64>,
        negative: Vec<f64>,
    ) -> Result<Self> {
        let n = dates.len();
        if positive.len() != n || middle.len() != n || negative.len() != n {
            return Err(Error::Data(format!(
                "column lengths differ: dates {n}, positive {}, middle {}, negative {}",
                positive.len(),
                middle.len(),
                negative.len()
            )));
        }
        check_strictly_increasing(&dates)?;
        for t in 0..n {
            for (field, v) in [
                ("positive", positive[t]),
                ("middle", middle[t]),
                ("negative", negative[t]),
            ] {
                if !(0.0..=100.0).contains(&v) {
                    return Err(Error::Validation {
                        period: dates[t].to_string(),
                        field,
                        reason: format!("share {v} outside [0, 100]"),
                    });
                }
            }
        }
        Ok(CategoricalSeries {
            question_id: question_id.into(),
            dates,
            positive,
            middle,
            negative,
        })
    }

    pub fn question_id(&self) -> &str {
        &self.question_id
    }

    pub fn dates(&self) -> &[Period] {
        &self.dates
    }

    pub fn len(&self) -> usize {
        self.dates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.dates.is_empty()
    }

    pub fn share(&self, category: Category, t: usize) -> f64 {
        match category {
            Category::Positive => self.positive[t],
            Category::Middle => self.middle[t],
            Category::Negative => self.negative[t],
        }
    }

    /// Shares renormalized to probabilities, in `[positive, middle, negative]` order.
    fn probabilities(&self, t: usize) -> Result<[f64; 3]> {
        let total = self.positive[t] + self.middle[t] + self.negative[t];
        if total <= 0.0 {
            return Err(Error::DegeneratePeriod {
                period: self.dates[t].to_string(),
                reason: "all category shares are zero".into(),
            });
        }
        Ok([
            self.positive[t] / total,
            self.middle[t] / total,
            self.negative[t] / total,
        ])
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Tail,
    Entropy,
    Lacy,
    Pca,
}

impl std::str::FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "tail" => Ok(Method::Tail),
            "entropy" => Ok(Method::Entropy),
            "lacy" => Ok(Method::Lacy),
            "pca" => Ok(Method::Pca),
            _ => Err(Error::Parse {
                input: s.into(),
                what: "index method (tail, entropy, lacy, pca)",
            }),
        }
    }
}

/// A disagreement time series with its provenance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DisagreementIndex {
    pub dates: Vec<Period>,
    pub values: Vec<f64>,
    pub method: Method,
    pub standardized: bool,
    pub loadings: Option<Vec<f64>>,
    pub source_questions: Vec<String>,
}

impl DisagreementIndex {
    fn from_measure(series: &CategoricalSeries, method: Method, values: Vec<f64>) -> Self {
        DisagreementIndex {
            dates: series.dates.clone(),
            values,
            method,
            standardized: false,
            loadings: None,
            source_questions: vec![series.question_id.clone()],
        }
    }
}

/// `1 - |positive - negative| / 100` per period.
pub fn tail_disagreement(series: &CategoricalSeries) -> DisagreementIndex {
    let values = series
        .positive
        .iter()
        .zip(&series.negative)
        .map(|(b, w)| 1.0 - (b - w).abs() / 100.0)
        .collect();
    DisagreementIndex::from_measure(series, Method::Tail, values)
}

/// Shannon entropy (natural log) of the renormalized shares, with 0 ln 0 = 0.
pub fn entropy_disagreement(series: &CategoricalSeries) -> Result<DisagreementIndex> {
    let values = (0..series.len())
        .map(|t| {
            let p = series.probabilities(t)?;
            Ok(-p
                .iter()
                .filter(|&&q| q > 0.0)
                .map(|q| q * q.ln())
                .sum::<f64>())
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(DisagreementIndex::from_measure(series, Method::Entropy, values))
}

/// Lacy ordinal dispersion `sum_{i<n} F_i (1 - F_i)` over cumulative
/// frequencies taken in `order`. Ranges over `[0, 0.5]` for three categories.
pub fn lacy_disagreement(
    series: &CategoricalSeries,
    order: CategoryOrder,
) -> Result<DisagreementIndex> {
    let values = (0..series.len())
        .map(|t| {
            let p = series.probabilities(t)?;
            let prob = |c: Category| match c {
                Category::Positive => p[0],
                Category::Middle => p[1],
                Category::Negative => p[2],
            };
            let f1 = prob(order.0[0]);
            let f2 = f1 + prob(order.0[1]);
            Ok(f1 * (1.0 - f1) + f2 * (1.0 - f2))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(DisagreementIndex::from_measure(series, Method::Lacy, values))
}

fn check_complete(index: &DisagreementIndex) -> Result<()> {
    if let Some(t) = index.values.iter().position(|v| !v.is_finite()) {
        return Err(Error::IncompleteData(format!(
            "{:?} index from {:?} has a missing value at {}",
            index.method,
            index.source_questions,
            index.dates.get(t).map(|d| d.to_string()).unwrap_or_default()
        )));
    }
    Ok(())
}

/// In-sample z-score using the n-1 sample standard deviation.
pub fn standardize(index: &DisagreementIndex) -> Result<DisagreementIndex> {
    check_complete(index)?;
    if index.values.len() < 2 {
        return Err(Error::DegenerateSeries(
            "standardization needs at least two periods".into(),
        ));
    }
    let m = stats::mean(&index.values);
    let sd = stats::sample_std(&index.values);
    let scale = index.values.iter().fold(1.0f64, |a, v| a.max(v.abs()));
    if !(sd > 1e-12 * scale) {
        return Err(Error::DegenerateSeries(format!(
            "{:?} index from {:?} has zero variance",
            index.method, index.source_questions
        )));
    }
    let mut out = index.clone();
    out.values = index.values.iter().map(|v| (v - m) / sd).collect();
    out.standardized = true;
    Ok(out)
}

/// Result of [`pca_first_component`].
#[derive(Debug, Clone, PartialEq)]
pub struct PrincipalComponent {
    /// Component scores rescaled to mean 0 and unit sample variance.
    pub index: DisagreementIndex,
    /// Largest eigenvalue of the input correlation matrix, which is also the
    /// sample variance of the unscaled component scores.
    pub eigenvalue: f64,
    pub explained_variance_share: f64,
}

/// First principal component of several standardized series on a common grid.
///
/// Loadings are the unit-norm leading eigenvector of the correlation matrix,
/// signed so that they sum to a nonnegative number. When the sum is zero the
/// first nonzero loading is made positive.
pub fn pca_first_component(indices: &[DisagreementIndex]) -> Result<PrincipalComponent> {
    if indices.len() < 2 {
        return Err(Error::Data(
            "principal component needs at least two series".into(),
        ));
    }
    let dates = &indices[0].dates;
    for idx in indices {
        if &idx.dates != dates {
            return Err(Error::Alignment(format!(
                "series {:?} does not share the date grid of {:?}",
                idx.source_questions, indices[0].source_questions
            )));
        }
        if !idx.standardized {
            return Err(Error::Data(format!(
                "series {:?} is not standardized",
                idx.source_questions
            )));
        }
        check_complete(idx)?;
    }
    let t_len = dates.len();
    let m = indices.len();
    if t_len < 2 {
        return Err(Error::DegenerateSeries("fewer than two periods".into()));
    }

    let x = DMatrix::from_fn(t_len, m, |t, j| indices[j].values[t]);
    let corr = (x.transpose() * &x) / (t_len as f64 - 1.0);
    let eig = SymmetricEigen::new(corr.clone());
    let lead = eig
        .eigenvalues
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(b.1))
        .map(|(i, _)| i)
        .expect("non-empty spectrum");
    let eigenvalue = eig.eigenvalues[lead];
    let mut w: Vec<f64> = eig.eigenvectors.column(lead).iter().copied().collect();

    let sum: f64 = w.iter().sum();
    let flip = if sum.abs() > 1e-12 {
        sum < 0.0
    } else {
        w.iter()
            .find(|v| v.abs() > 1e-12)
            .is_some_and(|v| *v < 0.0)
    };
    if flip {
        w.iter_mut().for_each(|v| *v = -*v);
    }

    let scores: Vec<f64> = (0..t_len)
        .map(|t| (0..m).map(|j| x[(t, j)] * w[j]).sum())
        .collect();
    let mean = stats::mean(&scores);
    let sd = stats::sample_std(&scores);
    let values = scores.iter().map(|s| (s - mean) / sd).collect();

    let trace = corr.trace();
    let source_questions = indices
        .iter()
        .flat_map(|i| i.source_questions.iter().cloned())
        .collect();

    Ok(PrincipalComponent {
        index: DisagreementIndex {
            dates: dates.clone(),
            values,
            method: Method::Pca,
            standardized: true,
            loadings: Some(w),
            source_questions,
        },
        eigenvalue,
        explained_variance_share: eigenvalue / trace,
    })
}

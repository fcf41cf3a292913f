//! Bayesian VAR whose reduced-form errors follow a factor structure,
//! `y_t = Φ x_t + Λ f_t + v_t`, with sign and zero restrictions on the
//! impact loadings `Λ` and a Horseshoe prior on the rows of `Φ`.
//!
//! Posterior sampling is a Gibbs scheme, see [`run_mcmc`] and [`Sampler`].

mod sampler;

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::stats;

pub use sampler::{initial_state, log_joint_density, run_mcmc, Sampler, SamplerState};

/// Restriction on one impact loading.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Sign {
    Positive,
    Negative,
    Zero,
    Free,
}

impl Sign {
    pub fn admits(self, x: f64) -> bool {
        match self {
            Sign::Positive => x > 0.0,
            Sign::Negative => x < 0.0,
            Sign::Zero => x == 0.0,
            Sign::Free => x.is_finite(),
        }
    }

    pub fn symbol(self) -> &'static str {
        match self {
            Sign::Positive => "+",
            Sign::Negative => "-",
            Sign::Zero => "0",
            Sign::Free => ".",
        }
    }
}

impl FromStr for Sign {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "+" | "pos" | "positive" => Ok(Sign::Positive),
            "-" | "\u{2212}" | "neg" | "negative" => Ok(Sign::Negative),
            "0" | "zero" => Ok(Sign::Zero),
            "." | "\u{00b7}" | "" | "free" | "*" => Ok(Sign::Free),
            other => Err(Error::Parse {
                input: other.into(),
                what: "sign restriction (+, -, 0, .)",
            }),
        }
    }
}

impl fmt::Display for Sign {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.symbol())
    }
}

/// `n × r` table of impact-loading restrictions.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SignPattern {
    n: usize,
    r: usize,
    /// Row-major.
    entries: Vec<Sign>,
}

impl SignPattern {
    pub fn free(n: usize, r: usize) -> Self {
        SignPattern {
            n,
            r,
            entries: vec![Sign::Free; n * r],
        }
    }

    pub fn from_rows(rows: &[Vec<Sign>]) -> Result<Self> {
        let n = rows.len();
        let r = rows.first().map_or(0, |x| x.len());
        if rows.iter().any(|row| row.len() != r) {
            return Err(Error::Config("sign pattern rows differ in length".into()));
        }
        Ok(SignPattern {
            n,
            r,
            entries: rows.iter().flatten().copied().collect(),
        })
    }

    /// Parses rows like `"+ + ."`, one string per variable.
    pub fn parse_rows(rows: &[&str]) -> Result<Self> {
        let parsed = rows
            .iter()
            .map(|row| row.split_whitespace().map(str::parse).collect::<Result<Vec<Sign>>>())
            .collect::<Result<Vec<_>>>()?;
        Self::from_rows(&parsed)
    }

    pub fn n_vars(&self) -> usize {
        self.n
    }

    pub fn n_shocks(&self) -> usize {
        self.r
    }

    pub fn get(&self, i: usize, j: usize) -> Sign {
        self.entries[i * self.r + j]
    }

    pub fn set(&mut self, i: usize, j: usize, s: Sign) {
        self.entries[i * self.r + j] = s;
    }

    /// Whether every entry of `lambda` obeys its restriction.
    pub fn admits(&self, lambda: &DMatrix<f64>) -> bool {
        lambda.nrows() == self.n
            && lambda.ncols() == self.r
            && (0..self.n).all(|i| (0..self.r).all(|j| self.get(i, j).admits(lambda[(i, j)])))
    }

    /// Whether column `j` carries at least one sign restriction, which pins
    /// the sign of the shock.
    pub fn column_sign_restricted(&self, j: usize) -> bool {
        (0..self.n).any(|i| matches!(self.get(i, j), Sign::Positive | Sign::Negative))
    }

    fn validate(&self) -> Result<()> {
        for j in 0..self.r {
            if (0..self.n).all(|i| self.get(i, j) == Sign::Free) {
                return Err(Error::Identification(format!(
                    "shock column {j} has no restricted entry"
                )));
            }
            if (0..self.n).all(|i| self.get(i, j) == Sign::Zero) {
                return Err(Error::Identification(format!(
                    "shock column {j} is restricted to zero in every row"
                )));
            }
        }
        Ok(())
    }
}

/// Iteration counts for one chain.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct McmcSettings {
    pub draws: usize,
    pub burn_in: usize,
    pub thin: usize,
}

impl McmcSettings {
    /// 600 000 iterations, 100 000 burn-in, every 100th draw kept.
    pub fn paper() -> Self {
        McmcSettings {
            draws: 600_000,
            burn_in: 100_000,
            thin: 100,
        }
    }

    /// Desk-scale default: 12 000 iterations, 2 000 burn-in, thin 5.
    pub fn desk() -> Self {
        McmcSettings {
            draws: 12_000,
            burn_in: 2_000,
            thin: 5,
        }
    }

    pub fn retained(&self) -> usize {
        (self.draws - self.burn_in) / self.thin
    }
}

impl Default for McmcSettings {
    fn default() -> Self {
        Self::desk()
    }
}

/// `(draws, burn_in, thin)` used for the published estimates.
pub fn paper_mcmc_settings() -> (usize, usize, usize) {
    let s = McmcSettings::paper();
    (s.draws, s.burn_in, s.thin)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VarConfig {
    pub n_vars: usize,
    pub n_lags: usize,
    pub n_factors: usize,
    pub sign_pattern: SignPattern,
    pub settings: McmcSettings,
    pub seed: u64,
}

impl VarConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_lags == 0 {
            return Err(Error::Config("at least one lag is required".into()));
        }
        if self.n_factors == 0 || self.n_factors >= self.n_vars {
            return Err(Error::Config(format!(
                "factor count {} must satisfy 0 < r < n = {}",
                self.n_factors, self.n_vars
            )));
        }
        if self.sign_pattern.n_vars() != self.n_vars
            || self.sign_pattern.n_shocks() != self.n_factors
        {
            return Err(Error::Config(format!(
                "sign pattern is {}x{}, expected {}x{}",
                self.sign_pattern.n_vars(),
                self.sign_pattern.n_shocks(),
                self.n_vars,
                self.n_factors
            )));
        }
        let s = &self.settings;
        if s.thin == 0 || s.burn_in >= s.draws {
            return Err(Error::Config(format!(
                "need thin >= 1 and burn_in < draws, got {s:?}"
            )));
        }
        if s.retained() == 0 {
            return Err(Error::Config("settings retain no draws".into()));
        }
        self.sign_pattern.validate()
    }
}

/// Regression form of a VAR(p): `Y = X Φ' + E`.
#[derive(Debug, Clone, PartialEq)]
pub struct DesignData {
    /// `(T - p) × n`.
    pub y: DMatrix<f64>,
    /// `(T - p) × (n p + 1)`; column 0 is the constant, then lag 1 … lag p.
    pub x: DMatrix<f64>,
    pub n_lags: usize,
    pub warnings: Vec<String>,
}

impl DesignData {
    pub fn n_vars(&self) -> usize {
        self.y.ncols()
    }

    pub fn n_obs(&self) -> usize {
        self.y.nrows()
    }

    pub fn n_regressors(&self) -> usize {
        self.x.ncols()
    }
}

/// Builds `Y` and `X = (1, y_{t-1}', …, y_{t-p}')` from a `T × n` panel.
pub fn build_design(data: &DMatrix<f64>, n_lags: usize) -> Result<DesignData> {
    let (t, n) = data.shape();
    if n_lags == 0 {
        return Err(Error::Config("at least one lag is required".into()));
    }
    if n == 0 {
        return Err(Error::Data("no variables".into()));
    }
    if data.iter().any(|v| !v.is_finite()) {
        return Err(Error::Data("panel contains non-finite values".into()));
    }
    let k = n * n_lags + 1;
    if t <= k || t - n_lags < 1 {
        return Err(Error::Data(format!(
            "{t} observations cannot support {k} regressors"
        )));
    }
    let rows = t - n_lags;
    let y = data.rows(n_lags, rows).into_owned();
    let x = DMatrix::from_fn(rows, k, |r, c| {
        if c == 0 {
            1.0
        } else {
            let lag = (c - 1) / n + 1;
            let var = (c - 1) % n;
            data[(r + n_lags - lag, var)]
        }
    });

    let mut warnings = Vec::new();
    for var in 0..n {
        let col: Vec<f64> = data.column(var).iter().copied().collect();
        if stats::sample_variance(&col) <= 1e-12 * (1.0 + stats::mean(&col).abs()) {
            warnings.push(format!(
                "variable {var} is constant; its lag columns are collinear with the intercept"
            ));
        }
    }
    let sv = x.clone().svd(false, false).singular_values;
    let smax = sv.max();
    let rank = sv.iter().filter(|s| **s > smax * 1e-10).count();
    if rank < k {
        warnings.push(format!(
            "regressor matrix has rank {rank} < {k}; the prior regularizes the fit"
        ));
    }
    for w in &warnings {
        log::warn!("{w}");
    }
    Ok(DesignData {
        y,
        x,
        n_lags,
        warnings,
    })
}

/// Hyperparameters of the loading and idiosyncratic-variance priors.
///
/// `Λ_ij ~ N(0, h_ij)` (truncated per the sign pattern) and
/// `σ_i² ~ IG(ρ_i, κ_i)`. The Horseshoe on `Φ` needs no tuning.
#[derive(Debug, Clone, PartialEq)]
pub struct Priors {
    /// `n × r` prior variances `h_ij`.
    pub loading_variance: DMatrix<f64>,
    pub sigma_shape: DVector<f64>,
    pub sigma_scale: DVector<f64>,
}

pub const DEFAULT_LOADING_VARIANCE: f64 = 10.0;
pub const DEFAULT_SIGMA_SHAPE: f64 = 0.01;
pub const DEFAULT_SIGMA_SCALE: f64 = 0.01;

/// Noninformative defaults: `h_ij = 10`, `ρ_i = κ_i = 0.01`.
pub fn prior_defaults(n: usize, r: usize) -> Priors {
    Priors {
        loading_variance: DMatrix::from_element(n, r, DEFAULT_LOADING_VARIANCE),
        sigma_shape: DVector::from_element(n, DEFAULT_SIGMA_SHAPE),
        sigma_scale: DVector::from_element(n, DEFAULT_SIGMA_SCALE),
    }
}

/// Scalar prior overrides; `None` keeps the default.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct PriorOverrides {
    pub loading_variance: Option<f64>,
    pub sigma_shape: Option<f64>,
    pub sigma_scale: Option<f64>,
}

impl Priors {
    pub fn with_overrides(n: usize, r: usize, o: &PriorOverrides) -> Result<Self> {
        let mut p = prior_defaults(n, r);
        if let Some(h) = o.loading_variance {
            p.loading_variance.fill(h);
        }
        if let Some(a) = o.sigma_shape {
            p.sigma_shape.fill(a);
        }
        if let Some(b) = o.sigma_scale {
            p.sigma_scale.fill(b);
        }
        p.validate()?;
        Ok(p)
    }

    pub fn set_loading_variance(&mut self, i: usize, j: usize, h: f64) -> Result<()> {
        if !(h > 0.0) || !h.is_finite() {
            return Err(Error::Config(format!("loading prior variance {h} must be positive")));
        }
        self.loading_variance[(i, j)] = h;
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        if self.loading_variance.iter().any(|h| !(*h > 0.0) || !h.is_finite()) {
            return Err(Error::Config("loading prior variances must be positive".into()));
        }
        if self
            .sigma_shape
            .iter()
            .chain(self.sigma_scale.iter())
            .any(|v| !(*v > 0.0) || !v.is_finite())
        {
            return Err(Error::Config(
                "inverse-gamma shape and scale must be positive".into(),
            ));
        }
        Ok(())
    }

    pub(crate) fn check_dims(&self, n: usize, r: usize) -> Result<()> {
        if self.loading_variance.shape() != (n, r)
            || self.sigma_shape.len() != n
            || self.sigma_scale.len() != n
        {
            return Err(Error::Config(format!(
                "prior dimensions do not match n = {n}, r = {r}"
            )));
        }
        Ok(())
    }
}

/// Retained posterior draws, one entry per kept iteration.
#[derive(Debug, Clone, PartialEq)]
pub struct PosteriorDraws {
    pub n_lags: usize,
    /// `n × (n p + 1)` each.
    pub phi: Vec<DMatrix<f64>>,
    /// `n × r` each.
    pub lambda: Vec<DMatrix<f64>>,
    /// Diagonal of `Σ`.
    pub sigma: Vec<DVector<f64>>,
    /// `T × r` each.
    pub factors: Vec<DMatrix<f64>>,
    /// Horseshoe local scales `ψ_ij`, `n × (n p + 1)`.
    pub horseshoe_local: Vec<DMatrix<f64>>,
    /// Horseshoe global scales `τ_i`.
    pub horseshoe_global: Vec<DVector<f64>>,
}

impl PosteriorDraws {
    pub fn len(&self) -> usize {
        self.phi.len()
    }

    pub fn is_empty(&self) -> bool {
        self.phi.is_empty()
    }

    pub fn n_vars(&self) -> usize {
        self.phi.first().map_or(0, |p| p.nrows())
    }

    pub fn n_shocks(&self) -> usize {
        self.lambda.first().map_or(0, |l| l.ncols())
    }

    /// Per-group effective sample sizes `(group, min, median)` over the
    /// scalar parameters of that group. Entries that are constant across
    /// draws (zero restrictions) are skipped.
    pub fn ess_table(&self) -> Vec<EssSummary> {
        let mut out = Vec::new();
        let mut group = |name: &str, chains: Vec<Vec<f64>>| {
            let mut ess: Vec<f64> = chains
                .iter()
                .filter(|c| c.iter().any(|v| *v != c[0]))
                .map(|c| stats::effective_sample_size(c))
                .collect();
            if ess.is_empty() {
                return;
            }
            ess.sort_by(f64::total_cmp);
            out.push(EssSummary {
                group: name.to_string(),
                parameters: ess.len(),
                min: ess[0],
                median: stats::quantile_sorted(&ess, 0.5),
            });
        };
        let mat_chains = |m: &[DMatrix<f64>]| -> Vec<Vec<f64>> {
            let Some(first) = m.first() else { return Vec::new() };
            (0..first.len())
                .map(|e| m.iter().map(|d| d[e]).collect())
                .collect()
        };
        let vec_chains = |m: &[DVector<f64>]| -> Vec<Vec<f64>> {
            let Some(first) = m.first() else { return Vec::new() };
            (0..first.len())
                .map(|e| m.iter().map(|d| d[e]).collect())
                .collect()
        };
        group("phi", mat_chains(&self.phi));
        group("lambda", mat_chains(&self.lambda));
        group("sigma2", vec_chains(&self.sigma));
        group("horseshoe_global", vec_chains(&self.horseshoe_global));
        out
    }

    /// Element-wise posterior median of `Λ`.
    pub fn lambda_median(&self) -> DMatrix<f64> {
        let (n, r) = self.lambda[0].shape();
        DMatrix::from_fn(n, r, |i, j| {
            let mut v: Vec<f64> = self.lambda.iter().map(|l| l[(i, j)]).collect();
            v.sort_by(f64::total_cmp);
            stats::quantile_sorted(&v, 0.5)
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EssSummary {
    pub group: String,
    pub parameters: usize,
    pub min: f64,
    pub median: f64,
}

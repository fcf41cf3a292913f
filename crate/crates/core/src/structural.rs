//! Impulse responses, posterior bands and variance decompositions from
//! posterior draws of the factor VAR.

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::Serialize;

use crate::bvar::PosteriorDraws;
use crate::error::{Error, Result};
use crate::stats;

pub const DEFAULT_BAND_LEVELS: [f64; 3] = [0.16, 0.50, 0.84];

/// Slope blocks `A_1 … A_p` of an `n × (1 + n p)` coefficient matrix.
pub fn lag_matrices(phi: &DMatrix<f64>, n_lags: usize) -> Vec<DMatrix<f64>> {
    let n = phi.nrows();
    (0..n_lags)
        .map(|l| phi.columns(1 + l * n, n).into_owned())
        .collect()
}

pub fn companion_matrix(phi: &DMatrix<f64>, n_lags: usize) -> DMatrix<f64> {
    let n = phi.nrows();
    let np = n * n_lags;
    let mut c = DMatrix::zeros(np, np);
    c.rows_mut(0, n).copy_from(&phi.columns(1, np));
    for b in 1..n_lags {
        c.view_mut((b * n, (b - 1) * n), (n, n))
            .fill_with_identity();
    }
    c
}

pub fn spectral_radius(m: &DMatrix<f64>) -> f64 {
    m.complex_eigenvalues()
        .iter()
        .map(|z| z.norm())
        .fold(0.0, f64::max)
}

/// Reduced-form moving-average matrices `Ψ_0 = I`,
/// `Ψ_h = Σ_{l=1}^{min(h,p)} A_l Ψ_{h-l}` for `h = 0..=horizon`.
pub fn ma_matrices(phi: &DMatrix<f64>, n_lags: usize, horizon: usize) -> Vec<DMatrix<f64>> {
    let n = phi.nrows();
    let a = lag_matrices(phi, n_lags);
    let mut psi: Vec<DMatrix<f64>> = Vec::with_capacity(horizon + 1);
    psi.push(DMatrix::identity(n, n));
    for h in 1..=horizon {
        let mut m = DMatrix::zeros(n, n);
        for (l, al) in a.iter().enumerate().take(h.min(n_lags)) {
            m += al * &psi[h - l - 1];
        }
        psi.push(m);
    }
    psi
}

fn is_explosive(phi: &DMatrix<f64>, n_lags: usize) -> bool {
    let rho = spectral_radius(&companion_matrix(phi, n_lags));
    !(rho < 1.0)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ImpulseResponseSet {
    pub horizon: usize,
    pub n_vars: usize,
    pub n_shocks: usize,
    /// Per draw, `horizon + 1` matrices of size `n × r`.
    pub responses: Vec<Vec<DMatrix<f64>>>,
    /// Draws whose companion matrix has spectral radius ≥ 1.
    pub explosive: Vec<bool>,
    pub cumulative: bool,
}

impl ImpulseResponseSet {
    pub fn n_draws(&self) -> usize {
        self.responses.len()
    }

    pub fn excluded(&self) -> usize {
        self.explosive.iter().filter(|e| **e).count()
    }

    pub fn response(&self, draw: usize, var: usize, shock: usize, h: usize) -> f64 {
        self.responses[draw][h][(var, shock)]
    }

    /// Running sums over horizons, i.e. responses of the level of a
    /// differenced variable.
    pub fn cumulated(&self) -> Self {
        let responses = self
            .responses
            .iter()
            .map(|path| {
                let mut acc = DMatrix::zeros(self.n_vars, self.n_shocks);
                path.iter()
                    .map(|m| {
                        acc += m;
                        acc.clone()
                    })
                    .collect()
            })
            .collect();
        ImpulseResponseSet {
            responses,
            cumulative: true,
            ..self.clone()
        }
    }
}

/// Responses `Ψ_h Λ` for `h = 0..=horizon`, one path per draw.
pub fn impulse_responses(draws: &PosteriorDraws, horizon: usize) -> Result<ImpulseResponseSet> {
    if draws.is_empty() {
        return Err(Error::Data("no posterior draws".into()));
    }
    let per_draw: Vec<(Vec<DMatrix<f64>>, bool)> = (0..draws.len())
        .into_par_iter()
        .map(|d| {
            let phi = &draws.phi[d];
            let lambda = &draws.lambda[d];
            let path = ma_matrices(phi, draws.n_lags, horizon)
                .iter()
                .map(|psi| psi * lambda)
                .collect();
            (path, is_explosive(phi, draws.n_lags))
        })
        .collect();
    let (responses, explosive) = per_draw.into_iter().unzip();
    Ok(ImpulseResponseSet {
        horizon,
        n_vars: draws.n_vars(),
        n_shocks: draws.n_shocks(),
        responses,
        explosive,
        cumulative: false,
    })
}

/// Pointwise quantiles across the non-explosive draws.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Bands {
    pub levels: Vec<f64>,
    pub n_vars: usize,
    /// Shock slots; for variance decompositions the last one is the residual.
    pub n_shocks: usize,
    pub horizon: usize,
    pub used_draws: usize,
    pub excluded_draws: usize,
    /// `values[level][(var * n_shocks + shock) * (horizon + 1) + h]`.
    values: Vec<Vec<f64>>,
}

impl Bands {
    pub fn get(&self, level: usize, var: usize, shock: usize, h: usize) -> f64 {
        self.values[level][(var * self.n_shocks + shock) * (self.horizon + 1) + h]
    }
}

fn check_levels(levels: &[f64]) -> Result<()> {
    if levels.is_empty() || levels.iter().any(|l| !(0.0..=1.0).contains(l)) {
        return Err(Error::Domain(format!("band levels must lie in [0, 1], got {levels:?}")));
    }
    Ok(())
}

fn build_bands(
    levels: &[f64],
    dims: (usize, usize, usize),
    excluded: &[bool],
    value: impl Fn(usize, usize, usize, usize) -> f64 + Sync,
) -> Result<Bands> {
    check_levels(levels)?;
    let (n, slots, horizon) = dims;
    if excluded.len() < 2 {
        return Err(Error::Data(format!(
            "bands need at least 2 draws, got {}",
            excluded.len()
        )));
    }
    let kept: Vec<usize> = (0..excluded.len()).filter(|d| !excluded[*d]).collect();
    if kept.is_empty() {
        return Err(Error::EmptyBand(format!(
            "all {} draws are explosive",
            excluded.len()
        )));
    }
    let cells = n * slots * (horizon + 1);
    let per_cell: Vec<Vec<f64>> = (0..cells)
        .into_par_iter()
        .map(|c| {
            let h = c % (horizon + 1);
            let slot = (c / (horizon + 1)) % slots;
            let var = c / (horizon + 1) / slots;
            let mut v: Vec<f64> = kept.iter().map(|&d| value(d, var, slot, h)).collect();
            v.sort_by(f64::total_cmp);
            levels.iter().map(|l| stats::quantile_sorted(&v, *l)).collect()
        })
        .collect();
    let values = (0..levels.len())
        .map(|li| per_cell.iter().map(|q| q[li]).collect())
        .collect();
    Ok(Bands {
        levels: levels.to_vec(),
        n_vars: n,
        n_shocks: slots,
        horizon,
        used_draws: kept.len(),
        excluded_draws: excluded.len() - kept.len(),
        values,
    })
}

pub fn posterior_bands(irfs: &ImpulseResponseSet, levels: &[f64]) -> Result<Bands> {
    build_bands(
        levels,
        (irfs.n_vars, irfs.n_shocks, irfs.horizon),
        &irfs.explosive,
        |d, i, j, h| irfs.responses[d][h][(i, j)],
    )
}

#[derive(Debug, Clone, PartialEq)]
pub struct FevdSet {
    pub horizon: usize,
    pub n_vars: usize,
    pub n_shocks: usize,
    /// Per draw, `horizon + 1` matrices of size `n × (r + 1)`; the last
    /// column is the idiosyncratic residual.
    pub shares: Vec<Vec<DMatrix<f64>>>,
    pub explosive: Vec<bool>,
}

impl FevdSet {
    pub fn share(&self, draw: usize, var: usize, slot: usize, h: usize) -> f64 {
        self.shares[draw][h][(var, slot)]
    }

    pub fn excluded(&self) -> usize {
        self.explosive.iter().filter(|e| **e).count()
    }
}

/// Shares of the `h`-step forecast-error variance, `h = 0..=horizon`, due to
/// each factor shock and to the idiosyncratic errors.
pub fn fevd(draws: &PosteriorDraws, horizon: usize) -> Result<FevdSet> {
    if draws.is_empty() {
        return Err(Error::Data("no posterior draws".into()));
    }
    let (n, r) = (draws.n_vars(), draws.n_shocks());
    let per_draw: Vec<Result<(Vec<DMatrix<f64>>, bool)>> = (0..draws.len())
        .into_par_iter()
        .map(|d| {
            let phi = &draws.phi[d];
            let lambda = &draws.lambda[d];
            let sigma = &draws.sigma[d];
            let mut acc = DMatrix::<f64>::zeros(n, r + 1);
            let mut out = Vec::with_capacity(horizon + 1);
            for psi in ma_matrices(phi, draws.n_lags, horizon) {
                let irf = &psi * lambda;
                for i in 0..n {
                    for j in 0..r {
                        acc[(i, j)] += irf[(i, j)].powi(2);
                    }
                    acc[(i, r)] += (0..n).map(|m| psi[(i, m)].powi(2) * sigma[m]).sum::<f64>();
                }
                let mut shares = acc.clone();
                for i in 0..n {
                    let total: f64 = acc.row(i).sum();
                    if !(total > 0.0) || !total.is_finite() {
                        return Err(Error::Domain(format!(
                            "variable {i} has forecast-error variance {total} in draw {d}"
                        )));
                    }
                    shares.row_mut(i).scale_mut(1.0 / total);
                }
                out.push(shares);
            }
            Ok((out, is_explosive(phi, draws.n_lags)))
        })
        .collect();
    let mut shares = Vec::with_capacity(draws.len());
    let mut explosive = Vec::with_capacity(draws.len());
    for item in per_draw {
        let (s, e) = item?;
        shares.push(s);
        explosive.push(e);
    }
    Ok(FevdSet {
        horizon,
        n_vars: n,
        n_shocks: r,
        shares,
        explosive,
    })
}

/// Bands over the `r + 1` share slots.
pub fn fevd_bands(set: &FevdSet, levels: &[f64]) -> Result<Bands> {
    build_bands(
        levels,
        (set.n_vars, set.n_shocks + 1, set.horizon),
        &set.explosive,
        |d, i, j, h| set.shares[d][h][(i, j)],
    )
}

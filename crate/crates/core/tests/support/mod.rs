//! Oracles shared by the integration and acceptance suites.
#![allow(dead_code)]

use disag_core::bvar::{
    build_design, prior_defaults, run_mcmc, DesignData, McmcSettings, PosteriorDraws, Priors, Sampler,
    SamplerState, Sign, SignPattern, VarConfig,
};
use disag_core::sampling::{inv_gamma, normal_negative, normal_positive, std_normal};
use disag_core::stats;
use disag_core::synthetic::FactorVar;
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rayon::prelude::*;
use rand_chacha::ChaCha8Rng;

pub fn harness_truth() -> FactorVar {
    // constant, then lag-1 block
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
    FactorVar {
        phi,
        lambda,
        sigma2: DVector::from_vec(vec![0.3, 0.3, 0.5, 0.3]),
    }
}

pub fn harness_pattern() -> SignPattern {
    SignPattern::parse_rows(&["+ +", "- +", "0 0", "+ 0"]).unwrap()
}

pub struct Recovery {
    pub signs_match: bool,
    pub correlation: f64,
    pub invariants_hold: bool,
    pub min_lambda_ess: f64,
    pub retained: usize,
}

fn sign_of(v: f64) -> i8 {
    if v > 0.0 {
        1
    } else if v < 0.0 {
        -1
    } else {
        0
    }
}

fn column_normalized(m: &DMatrix<f64>) -> Vec<f64> {
    let mut out = m.clone();
    for mut c in out.column_iter_mut() {
        let norm = c.norm();
        if norm > 0.0 {
            c /= norm;
        }
    }
    out.as_slice().to_vec()
}

pub fn run_recovery(data_seed: u64, chain_seed: u64, settings: McmcSettings) -> Recovery {
    let truth = harness_truth();
    let (y, _) = truth.simulate(400, 200, data_seed).unwrap();
    let design = build_design(&y, 1).unwrap();
    let pattern = harness_pattern();
    let cfg = VarConfig {
        n_vars: 4,
        n_lags: 1,
        n_factors: 2,
        sign_pattern: pattern.clone(),
        settings,
        seed: chain_seed,
    };
    let draws = run_mcmc(&design, &cfg, &prior_defaults(4, 2)).unwrap();
    let invariants_hold = draws.lambda.iter().all(|l| {
        pattern.admits(l)
            && (0..4).all(|i| (0..2).all(|j| pattern.get(i, j) != Sign::Zero || l[(i, j)] == 0.0))
    });
    let med = draws.lambda_median();
    let signs_match = truth
        .lambda
        .iter()
        .zip(med.iter())
        .all(|(t, m)| sign_of(*t) == sign_of(*m));
    let correlation = stats::correlation(&column_normalized(&truth.lambda), &column_normalized(&med));
    let min_lambda_ess = draws
        .ess_table()
        .into_iter()
        .find(|s| s.group == "lambda")
        .map_or(0.0, |s| s.min);
    Recovery {
        signs_match,
        correlation,
        invariants_hold,
        min_lambda_ess,
        retained: draws.len(),
    }
}

pub struct GewekeStat {
    pub name: String,
    pub mean: f64,
    pub expected: f64,
    pub se: f64,
}

impl GewekeStat {
    pub fn z(&self) -> f64 {
        (self.mean - self.expected) / self.se
    }
}

const GEWEKE_T: usize = 50;

fn geweke_priors() -> Priors {
    Priors {
        loading_variance: DMatrix::from_element(3, 1, 1.0),
        sigma_shape: DVector::from_element(3, 3.0),
        sigma_scale: DVector::from_element(3, 2.0),
    }
}

fn geweke_pattern() -> SignPattern {
    SignPattern::parse_rows(&["+", "-", "."]).unwrap()
}

fn draw_observations(x: &DMatrix<f64>, st: &SamplerState, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
    let mean = x * st.phi.transpose() + &st.factors * st.lambda.transpose();
    DMatrix::from_fn(mean.nrows(), mean.ncols(), |t, i| {
        mean[(t, i)] + st.sigma2[i].sqrt() * std_normal(rng)
    })
}

fn draw_prior_state(x: &DMatrix<f64>, rng: &mut ChaCha8Rng) -> SamplerState {
    let (n, k, r) = (3, x.ncols(), 1);
    let sigma2 = DVector::from_fn(n, |_, _| inv_gamma(3.0, 2.0, rng));
    let global_aux = DVector::from_fn(n, |_, _| inv_gamma(0.5, 1.0, rng));
    let global2 = DVector::from_fn(n, |i, _| inv_gamma(0.5, 1.0 / global_aux[i], rng));
    let local_aux = DMatrix::from_fn(n, k, |_, _| inv_gamma(0.5, 1.0, rng));
    let local2 = DMatrix::from_fn(n, k, |i, j| inv_gamma(0.5, 1.0 / local_aux[(i, j)], rng));
    let phi = DMatrix::from_fn(n, k, |i, j| {
        let var = (global2[i] * local2[(i, j)]).clamp(1e-12, 1e12) * sigma2[i];
        var.sqrt() * std_normal(rng)
    });
    let lambda = DMatrix::from_fn(n, r, |i, _| match i {
        0 => normal_positive(0.0, 1.0, rng),
        1 => normal_negative(0.0, 1.0, rng),
        _ => std_normal(rng),
    });
    let factors = DMatrix::from_fn(x.nrows(), r, |_, _| std_normal(rng));
    SamplerState {
        phi,
        lambda,
        sigma2,
        factors,
        local2,
        local_aux,
        global2,
        global_aux,
    }
}

/// Successive-conditional simulator on the n = 3, r = 1 toy with fixed
/// regressors, alternating one sweep with a fresh `y | θ, f`. Each of
/// `chains` independent chains starts from an exact joint prior draw, so if
/// the sweep leaves the joint distribution invariant the state after `sweeps`
/// steps is again an exact prior draw. Prior moments of bounded or
/// light-tailed functionals of the end states are compared with their
/// analytic values; the chains are independent so the standard errors are
/// plain iid ones and do not depend on how fast the sampler mixes.
pub fn run_geweke(chains: usize, sweeps: usize, seed: u64) -> Vec<GewekeStat> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let x = DMatrix::from_fn(GEWEKE_T, 4, |_, j| if j == 0 { 1.0 } else { std_normal(&mut rng) });
    let names = [
        "lambda_0", "lambda_1", "lambda_2", "lambda_0^2", "lambda_1^2", "lambda_2^2", "sigma2_0",
        "sigma2_1", "sigma2_2", "P(phi_0>0)", "P(phi_1>0)", "P(phi_2>0)", "P(tau_0<1)",
        "P(tau_1<1)", "P(tau_2<1)", "P(psi<1)", "mean f^2",
    ];
    let m = (2.0 / std::f64::consts::PI).sqrt();
    let expected = [
        m, -m, 0.0, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0, 0.5, 0.5, 0.5, 0.5, 0.5, 0.5, 0.5, 1.0,
    ];
    let ends: Vec<Vec<f64>> = (0..chains)
        .into_par_iter()
        .map(|c| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(c as u64 + 1);
            let state = draw_prior_state(&x, &mut rng);
            let y = draw_observations(&x, &state, &mut rng);
            let design = DesignData {
                y,
                x: x.clone(),
                n_lags: 1,
                warnings: Vec::new(),
            };
            let mut sampler =
                Sampler::with_state(&design, &geweke_pattern(), &geweke_priors(), state, rng.random())
                    .unwrap();
            for _ in 0..sweeps {
                sampler.sweep().unwrap();
                let y = draw_observations(&x, sampler.state(), &mut rng);
                sampler.set_observations(y);
            }
            functionals(sampler.state())
        })
        .collect();
    names
        .iter()
        .zip(expected)
        .enumerate()
        .map(|(idx, (name, expected))| {
            let s: Vec<f64> = ends.iter().map(|e| e[idx]).collect();
            GewekeStat {
                name: name.to_string(),
                mean: stats::mean(&s),
                expected,
                se: stats::sample_std(&s) / (s.len() as f64).sqrt(),
            }
        })
        .collect()
}

fn functionals(st: &SamplerState) -> Vec<f64> {
    let k = st.phi.ncols() as f64;
    let mut vals = Vec::with_capacity(17);
    vals.extend((0..3).map(|i| st.lambda[(i, 0)]));
    vals.extend((0..3).map(|i| st.lambda[(i, 0)].powi(2)));
    vals.extend(st.sigma2.iter().copied());
    vals.extend((0..3).map(|i| st.phi.row(i).iter().filter(|v| **v > 0.0).count() as f64 / k));
    vals.extend(st.global2.iter().map(|t| f64::from(u8::from(*t < 1.0))));
    vals.push(st.local2.iter().filter(|v| **v < 1.0).count() as f64 / st.local2.len() as f64);
    vals.push(st.factors.iter().map(|v| v * v).sum::<f64>() / st.factors.len() as f64);
    vals
}

pub fn batch_means_se(x: &[f64], batches: usize) -> f64 {
    let size = x.len() / batches;
    let means: Vec<f64> = (0..batches)
        .map(|b| stats::mean(&x[b * size..(b + 1) * size]))
        .collect();
    (stats::sample_variance(&means) / batches as f64).sqrt()
}

/// The n = 2, p = 1 variance-decomposition toy.
pub fn fevd_toy() -> PosteriorDraws {
    let phi = DMatrix::from_row_slice(2, 3, &[0.3, 0.6, 0.2, -0.1, -0.3, 0.5]);
    let lambda = DMatrix::from_row_slice(2, 1, &[1.0, -0.7]);
    let sigma = DVector::from_vec(vec![0.5, 0.8]);
    PosteriorDraws {
        n_lags: 1,
        phi: vec![phi.clone(), phi],
        lambda: vec![lambda.clone(), lambda],
        sigma: vec![sigma.clone(), sigma],
        factors: vec![DMatrix::zeros(1, 1); 2],
        horseshoe_local: vec![DMatrix::from_element(2, 3, 1.0); 2],
        horseshoe_global: vec![DVector::from_element(2, 1.0); 2],
    }
}

/// Brute-force variance decomposition of `y_H` for the toy: start from
/// zero, feed `H + 1` periods of shocks through the recursion one source at
/// a time, and average squared outcomes over `paths` draws. Returns
/// `shares[var][slot]` with the idiosyncratic slot last.
pub fn simulated_fevd(draws: &PosteriorDraws, horizon: usize, paths: usize, seed: u64) -> Vec<Vec<f64>> {
    let phi = &draws.phi[0];
    let lambda = &draws.lambda[0];
    let sigma = &draws.sigma[0];
    let n = phi.nrows();
    let r = lambda.ncols();
    let chunks = 64;
    let per_chunk = paths / chunks;
    let sums: Vec<Vec<Vec<f64>>> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(c as u64);
            let mut acc = vec![vec![0.0; r + 1]; n];
            for _ in 0..per_chunk {
                // state per source: r factor sources then the idiosyncratic one
                let mut y = vec![vec![0.0; n]; r + 1];
                for _ in 0..=horizon {
                    let f: Vec<f64> = (0..r).map(|_| std_normal(&mut rng)).collect();
                    let v: Vec<f64> = (0..n).map(|i| sigma[i].sqrt() * std_normal(&mut rng)).collect();
                    for (src, ys) in y.iter_mut().enumerate() {
                        let prev = ys.clone();
                        for i in 0..n {
                            let mut val = 0.0;
                            for m in 0..n {
                                val += phi[(i, 1 + m)] * prev[m];
                            }
                            val += if src < r { lambda[(i, src)] * f[src] } else { v[i] };
                            ys[i] = val;
                        }
                    }
                }
                for i in 0..n {
                    for src in 0..=r {
                        acc[i][src] += y[src][i] * y[src][i];
                    }
                }
            }
            acc
        })
        .collect();
    (0..n)
        .map(|i| {
            let tot: Vec<f64> = (0..=r).map(|s| sums.iter().map(|a| a[i][s]).sum()).collect();
            let all: f64 = tot.iter().sum();
            tot.iter().map(|t| t / all).collect()
        })
        .collect()
}

pub struct FevCell {
    pub sigma_eps2: f64,
    pub sigma_v2: f64,
    pub beta: f64,
    pub k: usize,
    pub closed_form: f64,
    pub monte_carlo: f64,
    pub se: f64,
}

pub const FEV_GRID: [f64; 5] = [1.0, 2.0, 3.0, 4.0, 5.0];
pub const FEV_BETAS: [f64; 3] = [0.3, 0.5, 0.8];
pub const FEV_HORIZONS: [usize; 3] = [1, 6, 12];
pub const FEV_ORDER: usize = 12;

/// Monte Carlo forecast-error variance for every cell of the grid. Each path
/// draws the full shock history `ε_{t+k-n} … ε_{t+k}`; the realized
/// `Δa_{t+k}` is compared with the aggregate forecast, in which the signal
/// on `ε_t` is weighted by the analytic projection coefficient and the
/// idiosyncratic noise has averaged out. One set of standard normal paths is
/// shared by all cells and scaled by `σ_ε`, so cells differ only through
/// their parameters. The standard error uses the fourth sample moment.
pub fn fev_monte_carlo(paths: usize, seed: u64) -> Vec<FevCell> {
    use disag_core::dispersion::{forecast_error_variance, geometric_psi, MAEconomy};
    let mut cells = Vec::new();
    for &beta in &FEV_BETAS {
        for &k in &FEV_HORIZONS {
            for &e in &FEV_GRID {
                for &v in &FEV_GRID {
                    let econ = MAEconomy::geometric(beta, FEV_ORDER, e, v, 1).unwrap();
                    cells.push(FevCell {
                        sigma_eps2: e,
                        sigma_v2: v,
                        beta,
                        k,
                        closed_form: forecast_error_variance(&econ, k).unwrap(),
                        monte_carlo: 0.0,
                        se: 0.0,
                    });
                }
            }
        }
    }
    let psis: Vec<Vec<f64>> = FEV_BETAS.iter().map(|b| geometric_psi(*b, FEV_ORDER)).collect();
    let chunks = 100;
    let per_chunk = paths / chunks;
    let partial: Vec<Vec<(f64, f64)>> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(c as u64);
            let mut acc = vec![(0.0, 0.0); cells.len()];
            // z[s] is the standardized shock dated t + k - s, s = 0..=n
            let mut z = [0.0; FEV_ORDER + 1];
            for _ in 0..per_chunk {
                z.iter_mut().for_each(|x| *x = std_normal(&mut rng));
                for (cell, a) in cells.iter().zip(acc.iter_mut()) {
                    let psi = &psis[FEV_BETAS.iter().position(|b| *b == cell.beta).unwrap()];
                    let sd = cell.sigma_eps2.sqrt();
                    let gamma = cell.sigma_eps2 / (cell.sigma_eps2 + cell.sigma_v2);
                    let k = cell.k;
                    let realized: f64 = (0..=FEV_ORDER).map(|j| psi[j] * sd * z[j]).sum();
                    let forecast: f64 = psi[k] * gamma * sd * z[k]
                        + (k + 1..=FEV_ORDER).map(|j| psi[j] * sd * z[j]).sum::<f64>();
                    let err = realized - forecast;
                    let e2 = err * err;
                    a.0 += e2;
                    a.1 += e2 * e2;
                }
            }
            acc
        })
        .collect();
    let m = (per_chunk * chunks) as f64;
    for (idx, cell) in cells.iter_mut().enumerate() {
        let s2: f64 = partial.iter().map(|p| p[idx].0).sum();
        let s4: f64 = partial.iter().map(|p| p[idx].1).sum();
        let mean = s2 / m;
        let var_e2 = (s4 / m - mean * mean) * m / (m - 1.0);
        cell.monte_carlo = mean;
        cell.se = (var_e2 / m).sqrt();
    }
    cells
}

/// Coefficients of `ψ_0 Π (z - r_i)` for roots drawn inside the unit disc,
/// complex roots in conjugate pairs.
pub fn random_invertible_ma(rng: &mut ChaCha8Rng) -> Vec<f64> {
    let k: usize = rng.random_range(1..=12);
    let pairs = rng.random_range(0..=k / 2);
    let lead = rng.random_range(0.2..3.0) * if rng.random::<bool>() { 1.0 } else { -1.0 };
    // polynomial as coefficients of descending powers
    let mut poly = vec![lead];
    let mul = |poly: &Vec<f64>, factor: &[f64]| {
        let mut out = vec![0.0; poly.len() + factor.len() - 1];
        for (i, a) in poly.iter().enumerate() {
            for (j, b) in factor.iter().enumerate() {
                out[i + j] += a * b;
            }
        }
        out
    };
    for _ in 0..pairs {
        let modulus = 0.999 * rng.random::<f64>().sqrt();
        let angle = rng.random_range(0.0..std::f64::consts::PI);
        let re = modulus * angle.cos();
        poly = mul(&poly, &[1.0, -2.0 * re, modulus * modulus]);
    }
    for _ in 0..k - 2 * pairs {
        poly = mul(&poly, &[1.0, -rng.random_range(-0.999..0.999)]);
    }
    poly
}

/// Correlation between the first principal component of `series` noisy
/// copies of a common N(0, 1) factor and the factor itself.
pub fn pca_factor_recovery(series: usize, t_len: usize, noise_sd: f64, seed: u64) -> f64 {
    use disag_core::survey_index::{pca_first_component, standardize, DisagreementIndex, Method};
    use disag_core::Period;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let factor: Vec<f64> = (0..t_len).map(|_| std_normal(&mut rng)).collect();
    let dates: Vec<Period> = (0..t_len).map(|t| Period::month(1800, 1).offset(t as i64)).collect();
    let indices: Vec<DisagreementIndex> = (0..series)
        .map(|i| {
            let values = factor.iter().map(|f| f + noise_sd * std_normal(&mut rng)).collect();
            let raw = DisagreementIndex {
                dates: dates.clone(),
                values,
                method: Method::Tail,
                standardized: false,
                loadings: None,
                source_questions: vec![format!("S{i}")],
            };
            standardize(&raw).unwrap()
        })
        .collect();
    let pc = pca_first_component(&indices).unwrap();
    stats::correlation(&pc.index.values, &factor)
}

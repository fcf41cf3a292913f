//! Dispersed-information economy with a moving-average fundamental.
//!
//! Growth follows `Δa_t = ψ_0 ε_t + … + ψ_n ε_{t-n}` with `ε_t ~ N(0, σ_ε²)`.
//! Agents see the shock history up to `t-1` and a private signal
//! `s_it = ε_t + v_it`, `v_it ~ N(0, σ_v²)`, and forecast by linear projection.
//! This module provides the closed-form forecast-error variance and its
//! partial derivatives, the MA invertibility check, and a Monte Carlo survey
//! panel that codes agent forecasts into up/down answers.

use nalgebra::DMatrix;
use num_traits::{FromPrimitive, NumOps, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// MA(n) growth process observed through noisy private signals.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MAEconomy {
    psi: Vec<f64>,
    sigma_eps2: f64,
    sigma_v2: f64,
    n_agents: usize,
}

impl MAEconomy {
    pub fn new(psi: Vec<f64>, sigma_eps2: f64, sigma_v2: f64, n_agents: usize) -> Result<Self> {
        if psi.is_empty() {
            return Err(Error::Domain("MA coefficient vector is empty".into()));
        }
        if psi.iter().any(|p| !p.is_finite()) {
            return Err(Error::Domain("MA coefficients must be finite".into()));
        }
        check_variances(sigma_eps2, sigma_v2)?;
        if n_agents == 0 {
            return Err(Error::Domain("agent count must be positive".into()));
        }
        Ok(MAEconomy {
            psi,
            sigma_eps2,
            sigma_v2,
            n_agents,
        })
    }

    /// `ψ_j = β^j` for `j = 0..=order`, the MA(∞) form of a stationary AR(1)
    /// truncated at `order`.
    pub fn geometric(
        beta: f64,
        order: usize,
        sigma_eps2: f64,
        sigma_v2: f64,
        n_agents: usize,
    ) -> Result<Self> {
        if !(beta.abs() < 1.0) {
            return Err(Error::Domain(format!(
                "AR coefficient {beta} is not in (-1, 1)"
            )));
        }
        Self::new(geometric_psi(beta, order), sigma_eps2, sigma_v2, n_agents)
    }

    pub fn psi(&self) -> &[f64] {
        &self.psi
    }

    /// MA order `n` (number of coefficients minus one).
    pub fn order(&self) -> usize {
        self.psi.len() - 1
    }

    pub fn sigma_eps2(&self) -> f64 {
        self.sigma_eps2
    }

    pub fn sigma_v2(&self) -> f64 {
        self.sigma_v2
    }

    pub fn n_agents(&self) -> usize {
        self.n_agents
    }

    pub fn with_variances(&self, sigma_eps2: f64, sigma_v2: f64) -> Result<Self> {
        check_variances(sigma_eps2, sigma_v2)?;
        Ok(MAEconomy {
            sigma_eps2,
            sigma_v2,
            ..self.clone()
        })
    }

    fn check_horizon(&self, k: usize) -> Result<()> {
        if k == 0 || k > self.order() {
            return Err(Error::Domain(format!(
                "horizon {k} outside 1..={} for an MA({}) process",
                self.order(),
                self.order()
            )));
        }
        Ok(())
    }
}

pub fn geometric_psi(beta: f64, order: usize) -> Vec<f64> {
    (0..=order).map(|j| beta.powi(j as i32)).collect()
}

fn check_variances(sigma_eps2: f64, sigma_v2: f64) -> Result<()> {
    if !(sigma_eps2 > 0.0) || !sigma_eps2.is_finite() {
        return Err(Error::Domain(format!(
            "fundamental variance must be positive, got {sigma_eps2}"
        )));
    }
    if !(sigma_v2 >= 0.0) || !sigma_v2.is_finite() {
        return Err(Error::Domain(format!(
            "noise variance must be nonnegative, got {sigma_v2}"
        )));
    }
    Ok(())
}

/// Signal weight `γ = σ_ε² / (σ_ε² + σ_v²)`.
pub fn projection_coefficient(sigma_eps2: f64, sigma_v2: f64) -> Result<f64> {
    check_variances(sigma_eps2, sigma_v2)?;
    Ok(sigma_eps2 / (sigma_eps2 + sigma_v2))
}

/// Variance of the `k`-step aggregate forecast error:
/// `[ψ_0² + … + ψ_{k-1}² + ψ_k² (σ_v²/(σ_ε²+σ_v²))²] σ_ε²`.
pub fn forecast_error_variance(econ: &MAEconomy, k: usize) -> Result<f64> {
    econ.check_horizon(k)?;
    Ok(forecast_error_variance_in(
        &econ.psi,
        econ.sigma_eps2,
        econ.sigma_v2,
        k,
    ))
}

/// [`forecast_error_variance`] over any field type, so the same arithmetic
/// can be evaluated exactly (e.g. in rationals) when differencing it.
/// Callers must check `1 <= k < psi.len()`.
pub fn forecast_error_variance_in<T>(psi: &[f64], sigma_eps2: T, sigma_v2: T, k: usize) -> T
where
    T: Clone + NumOps + FromPrimitive + Zero,
{
    let coef = |p: f64| T::from_f64(p).expect("finite MA coefficient");
    let known = psi[..k]
        .iter()
        .fold(T::zero(), |acc, &p| acc + coef(p) * coef(p));
    let x = sigma_v2.clone() / (sigma_eps2.clone() + sigma_v2);
    (known + coef(psi[k]) * coef(psi[k]) * x.clone() * x) * sigma_eps2
}

/// ∂FEV/∂σ_ε² = Σ_{j<k} ψ_j² + ψ_k² x² (2x − 1), with x = σ_v²/(σ_ε²+σ_v²).
pub fn d_fev_d_sigma_eps2(econ: &MAEconomy, k: usize) -> Result<f64> {
    econ.check_horizon(k)?;
    let psi = &econ.psi;
    let known: f64 = psi[..k].iter().map(|p| p * p).sum();
    let x = econ.sigma_v2 / (econ.sigma_eps2 + econ.sigma_v2);
    Ok(known + psi[k] * psi[k] * x * x * (2.0 * x - 1.0))
}

/// ∂FEV/∂σ_v² = 2 ψ_k² σ_ε⁴ σ_v² / (σ_ε² + σ_v²)³.
pub fn d_fev_d_sigma_v2(econ: &MAEconomy, k: usize) -> Result<f64> {
    econ.check_horizon(k)?;
    let pk2 = econ.psi[k] * econ.psi[k];
    let s = econ.sigma_eps2 + econ.sigma_v2;
    Ok(2.0 * pk2 * econ.sigma_eps2 * econ.sigma_eps2 * econ.sigma_v2 / (s * s * s))
}

/// Outcome of [`check_invertibility`].
#[derive(Debug, Clone, PartialEq)]
pub struct Invertibility {
    pub invertible: bool,
    /// Moduli of the roots of `ψ_0 z^k + ψ_1 z^{k-1} + … + ψ_k`, descending.
    pub root_moduli: Vec<f64>,
    /// Whether `ψ_0² > ψ_k²`, which every invertible polynomial satisfies.
    pub leading_dominates: bool,
}

/// Roots of `ψ(z) = ψ_0 z^k + … + ψ_k` via the eigenvalues of its companion
/// matrix; the process is invertible when every root lies inside the unit circle.
pub fn check_invertibility(psi: &[f64]) -> Result<Invertibility> {
    let Some(&lead) = psi.first() else {
        return Err(Error::DegeneratePolynomial("no coefficients".into()));
    };
    if lead == 0.0 {
        return Err(Error::DegeneratePolynomial(
            "leading coefficient psi_0 is zero".into(),
        ));
    }
    let k = psi.len() - 1;
    let last = psi[k];
    let mut root_moduli = if k == 0 {
        Vec::new()
    } else {
        let mut c = DMatrix::<f64>::zeros(k, k);
        for j in 0..k {
            c[(0, j)] = -psi[j + 1] / lead;
        }
        for i in 1..k {
            c[(i, i - 1)] = 1.0;
        }
        c.complex_eigenvalues().iter().map(|z| z.norm()).collect()
    };
    root_moduli.sort_by(|a, b| b.total_cmp(a));
    Ok(Invertibility {
        invertible: root_moduli.iter().all(|&m| m < 1.0),
        root_moduli,
        leading_dominates: lead * lead > last * last,
    })
}

/// Survey answer implied by a forecast.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Code {
    Up,
    Down,
    Flat,
}

impl Code {
    pub fn from_forecast(f: f64) -> Self {
        if f > 0.0 {
            Code::Up
        } else if f < 0.0 {
            Code::Down
        } else {
            Code::Flat
        }
    }

    pub fn score(self) -> i64 {
        match self {
            Code::Up => 1,
            Code::Down => -1,
            Code::Flat => 0,
        }
    }
}

/// One cross-section of simulated survey answers.
#[derive(Debug, Clone, PartialEq)]
pub struct PanelDraw {
    /// `ε_t, ε_{t-1}, …, ε_{t+k-n}`: the current shock followed by the
    /// history that still matters for the `k`-step forecast.
    pub fundamental_shocks: Vec<f64>,
    pub agent_noise: Vec<f64>,
    pub forecasts: Vec<f64>,
    pub codes: Vec<Code>,
}

struct PanelSetup<'a> {
    psi: &'a [f64],
    k: usize,
    sd_eps: f64,
    sd_v: f64,
    signal_weight: f64,
    n_agents: usize,
}

impl<'a> PanelSetup<'a> {
    fn new(econ: &'a MAEconomy, k: usize) -> Result<Self> {
        econ.check_horizon(k)?;
        Ok(PanelSetup {
            psi: &econ.psi,
            k,
            sd_eps: econ.sigma_eps2.sqrt(),
            sd_v: econ.sigma_v2.sqrt(),
            signal_weight: econ.psi[k] * projection_coefficient(econ.sigma_eps2, econ.sigma_v2)?,
            n_agents: econ.n_agents,
        })
    }

    /// Draws the shock history and returns it with the common (known) part
    /// of every agent's forecast.
    fn draw_history<R: Rng>(&self, rng: &mut R) -> (Vec<f64>, f64) {
        let n = self.psi.len() - 1;
        let shocks: Vec<f64> = (0..=n - self.k)
            .map(|_| self.sd_eps * rng.sample::<f64, _>(StandardNormal))
            .collect();
        let known = (self.k + 1..=n)
            .map(|j| self.psi[j] * shocks[j - self.k])
            .sum();
        (shocks, known)
    }

    fn agent_forecast(&self, eps_now: f64, noise: f64, known: f64) -> f64 {
        self.signal_weight * (eps_now + noise) + known
    }

    fn net_balance<R: Rng>(&self, rng: &mut R) -> i64 {
        let (shocks, known) = self.draw_history(rng);
        let mut net = 0i64;
        for _ in 0..self.n_agents {
            let v = self.sd_v * rng.sample::<f64, _>(StandardNormal);
            net += Code::from_forecast(self.agent_forecast(shocks[0], v, known)).score();
        }
        net
    }
}

fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Simulates one survey cross-section: a shock history, one noise draw per
/// agent, each agent's `k`-step forecast and its coded answer.
pub fn simulate_panel(econ: &MAEconomy, k: usize, seed: u64) -> Result<PanelDraw> {
    if !check_invertibility(&econ.psi)?.invertible {
        return Err(Error::Domain("MA process is not invertible".into()));
    }
    let setup = PanelSetup::new(econ, k)?;
    let mut rng = stream_rng(seed, 0);
    let (shocks, known) = setup.draw_history(&mut rng);
    let mut agent_noise = Vec::with_capacity(setup.n_agents);
    let mut forecasts = Vec::with_capacity(setup.n_agents);
    let mut codes = Vec::with_capacity(setup.n_agents);
    for _ in 0..setup.n_agents {
        let v = setup.sd_v * rng.sample::<f64, _>(StandardNormal);
        let f = setup.agent_forecast(shocks[0], v, known);
        agent_noise.push(v);
        forecasts.push(f);
        codes.push(Code::from_forecast(f));
    }
    Ok(PanelDraw {
        fundamental_shocks: shocks,
        agent_noise,
        forecasts,
        codes,
    })
}

/// `1 − |Σ_i s_i| / N` with `s_i ∈ {+1, −1, 0}`.
pub fn synthetic_tail_index(draw: &PanelDraw) -> f64 {
    tail_from_net(
        draw.codes.iter().map(|c| c.score()).sum(),
        draw.codes.len(),
    )
}

fn tail_from_net(net: i64, n: usize) -> f64 {
    1.0 - net.unsigned_abs() as f64 / n as f64
}

/// Settings for [`disagreement_surface`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SurfaceConfig {
    pub grid_eps2: Vec<f64>,
    pub grid_v2: Vec<f64>,
    pub beta: f64,
    /// MA order.
    pub n: usize,
    /// Forecast horizon.
    pub k: usize,
    pub n_agents: usize,
    pub replications: usize,
    pub seed: u64,
}

impl SurfaceConfig {
    /// Monthly calibration: β = 0.5, n = k = 12, N = 10 000 agents, both
    /// variances on {1, …, 5}.
    pub fn monthly_calibration(replications: usize, seed: u64) -> Self {
        let grid = vec![1.0, 2.0, 3.0, 4.0, 5.0];
        SurfaceConfig {
            grid_eps2: grid.clone(),
            grid_v2: grid,
            beta: 0.5,
            n: 12,
            k: 12,
            n_agents: 10_000,
            replications,
            seed,
        }
    }
}

/// Mean synthetic tail disagreement over a grid of (σ_ε², σ_v²).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DisagreementSurface {
    pub grid_eps2: Vec<f64>,
    pub grid_v2: Vec<f64>,
    /// `mean[i][j]` is the cell at `grid_eps2[i]`, `grid_v2[j]`.
    pub mean: Vec<Vec<f64>>,
    /// Standard error of each cell mean across replications.
    pub se: Vec<Vec<f64>>,
    pub replications: usize,
    pub seed: u64,
}

/// Averages [`synthetic_tail_index`] over independent panel draws in every
/// grid cell. Each (cell, replication) pair gets its own ChaCha stream, so the
/// surface does not depend on thread scheduling.
pub fn disagreement_surface(cfg: &SurfaceConfig) -> Result<DisagreementSurface> {
    if !(cfg.beta.abs() < 1.0) {
        return Err(Error::Domain(format!(
            "AR coefficient {} is not in (-1, 1)",
            cfg.beta
        )));
    }
    if cfg.grid_eps2.is_empty() || cfg.grid_v2.is_empty() {
        return Err(Error::Domain("variance grids must be nonempty".into()));
    }
    if cfg.replications < 2 {
        return Err(Error::Domain("need at least two replications".into()));
    }
    let cols = cfg.grid_v2.len();
    let economies = cfg
        .grid_eps2
        .iter()
        .flat_map(|&e| cfg.grid_v2.iter().map(move |&v| (e, v)))
        .map(|(e, v)| MAEconomy::geometric(cfg.beta, cfg.n, e, v, cfg.n_agents))
        .collect::<Result<Vec<_>>>()?;
    for econ in &economies {
        econ.check_horizon(cfg.k)?;
    }

    let cells: Vec<(f64, f64)> = economies
        .par_iter()
        .enumerate()
        .map(|(cell, econ)| {
            let setup = PanelSetup::new(econ, cfg.k).expect("validated above");
            let draws: Vec<f64> = (0..cfg.replications)
                .into_par_iter()
                .map(|rep| {
                    let mut rng = stream_rng(cfg.seed, ((cell as u64) << 32) | rep as u64);
                    tail_from_net(setup.net_balance(&mut rng), setup.n_agents)
                })
                .collect();
            let r = draws.len() as f64;
            let mean = draws.iter().sum::<f64>() / r;
            let var = draws.iter().map(|d| (d - mean) * (d - mean)).sum::<f64>() / (r - 1.0);
            (mean, (var / r).sqrt())
        })
        .collect();

    let mut mean = vec![vec![0.0; cols]; cfg.grid_eps2.len()];
    let mut se = mean.clone();
    for (idx, (m, s)) in cells.into_iter().enumerate() {
        mean[idx / cols][idx % cols] = m;
        se[idx / cols][idx % cols] = s;
    }
    Ok(DisagreementSurface {
        grid_eps2: cfg.grid_eps2.clone(),
        grid_v2: cfg.grid_v2.clone(),
        mean,
        se,
        replications: cfg.replications,
        seed: cfg.seed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use num_rational::BigRational;
    use num_traits::ToPrimitive;

    fn econ(psi: Vec<f64>, e: f64, v: f64) -> MAEconomy {
        MAEconomy::new(psi, e, v, 100).unwrap()
    }

    #[test]
    fn projection_examples() {
        assert_eq!(projection_coefficient(1.0, 1.0).unwrap(), 0.5);
        assert_eq!(projection_coefficient(4.0, 0.0).unwrap(), 1.0);
        assert_abs_diff_eq!(projection_coefficient(4.0, 1.0).unwrap(), 0.8, epsilon = 1e-15);
        assert!(projection_coefficient(0.0, 1.0).is_err());
        assert!(projection_coefficient(-1.0, 1.0).is_err());
        assert!(projection_coefficient(1.0, -1.0).is_err());
    }

    #[test]
    fn projection_monotone_on_grid() {
        for e in 1..=5 {
            for v in 1..=5 {
                let g = projection_coefficient(e as f64, v as f64).unwrap();
                assert!(projection_coefficient(e as f64 + 1.0, v as f64).unwrap() > g);
                assert!(projection_coefficient(e as f64, v as f64 + 1.0).unwrap() < g);
            }
        }
    }

    #[test]
    fn fev_examples() {
        let psi = vec![1.0, 0.5, 0.25];
        assert_abs_diff_eq!(
            forecast_error_variance(&econ(psi.clone(), 1.0, 0.0), 2).unwrap(),
            1.25,
            epsilon = 1e-15
        );
        assert_abs_diff_eq!(
            forecast_error_variance(&econ(psi.clone(), 1.0, 1.0), 2).unwrap(),
            1.265625,
            epsilon = 1e-15
        );
        assert!(forecast_error_variance(&econ(psi.clone(), 1.0, 1.0), 3).is_err());
        assert!(forecast_error_variance(&econ(psi, 1.0, 1.0), 0).is_err());
    }

    #[test]
    fn derivatives_positive_and_match_central_differences() {
        // Differences are taken in exact rational arithmetic: at β = 0.3 and
        // k = 12 the σ_v² derivative is ~1e-13 and f64 differencing cannot
        // resolve it.
        let h = BigRational::from_f64(1e-6).unwrap();
        let two_h = &h + &h;
        for beta in [0.3, 0.5, 0.8] {
            for k in [1usize, 6, 12] {
                for e in 1..=5 {
                    for v in 1..=5 {
                        let m = MAEconomy::geometric(beta, 12, e as f64, v as f64, 1).unwrap();
                        let (er, vr) = (BigRational::from_integer(e.into()), BigRational::from_integer(v.into()));
                        let f = |e: BigRational, v: BigRational| {
                            forecast_error_variance_in(m.psi(), e, v, k)
                        };
                        let fd_e = ((f(&er + &h, vr.clone()) - f(&er - &h, vr.clone())) / &two_h)
                            .to_f64()
                            .unwrap();
                        let fd_v = ((f(er.clone(), &vr + &h) - f(er.clone(), &vr - &h)) / &two_h)
                            .to_f64()
                            .unwrap();
                        let de = d_fev_d_sigma_eps2(&m, k).unwrap();
                        let dv = d_fev_d_sigma_v2(&m, k).unwrap();
                        assert!(de > 0.0 && dv > 0.0);
                        assert!(((de - fd_e) / de).abs() < 1e-5, "{beta} {k} {e} {v}");
                        assert!(((dv - fd_v) / dv).abs() < 1e-5, "{beta} {k} {e} {v}");
                    }
                }
            }
        }
    }

    #[test]
    fn invertibility_examples() {
        let r = check_invertibility(&geometric_psi(0.5, 12)).unwrap();
        assert!(r.invertible && r.leading_dominates);
        assert_eq!(r.root_moduli.len(), 12);
        for m in &r.root_moduli {
            assert_abs_diff_eq!(*m, 0.5, epsilon = 1e-8);
        }
        let r = check_invertibility(&[1.0, -2.0]).unwrap();
        assert!(!r.invertible);
        assert_abs_diff_eq!(r.root_moduli[0], 2.0, epsilon = 1e-12);
        assert!(matches!(
            check_invertibility(&[0.0, 1.0]),
            Err(Error::DegeneratePolynomial(_))
        ));
        assert!(check_invertibility(&[2.0]).unwrap().invertible);
    }

    #[test]
    fn panel_is_deterministic_and_consistent() {
        let m = MAEconomy::geometric(0.5, 12, 2.0, 3.0, 500).unwrap();
        let a = simulate_panel(&m, 6, 9).unwrap();
        let b = simulate_panel(&m, 6, 9).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.fundamental_shocks.len(), 7);
        for (f, c) in a.forecasts.iter().zip(&a.codes) {
            assert_eq!(*c, Code::from_forecast(*f));
        }
        let c = simulate_panel(&m, 6, 10).unwrap();
        assert_ne!(a.forecasts, c.forecasts);
    }

    #[test]
    fn noiseless_panel_is_unanimous() {
        let m = MAEconomy::geometric(0.5, 12, 1.0, 0.0, 1000).unwrap();
        for seed in 0..20 {
            let d = simulate_panel(&m, 12, seed).unwrap();
            assert_eq!(synthetic_tail_index(&d), 0.0);
        }
    }

    #[test]
    fn panel_rejects_noninvertible() {
        let m = MAEconomy::new(vec![1.0, -2.0], 1.0, 1.0, 10).unwrap();
        assert!(simulate_panel(&m, 1, 0).is_err());
    }

    #[test]
    fn tail_index_examples() {
        let draw = |codes: Vec<Code>| PanelDraw {
            fundamental_shocks: vec![],
            agent_noise: vec![],
            forecasts: vec![],
            codes,
        };
        assert_eq!(synthetic_tail_index(&draw(vec![Code::Up; 4])), 0.0);
        assert_eq!(
            synthetic_tail_index(&draw(vec![Code::Up, Code::Down, Code::Up, Code::Down])),
            1.0
        );
        assert_eq!(
            synthetic_tail_index(&draw(vec![Code::Up, Code::Up, Code::Down, Code::Flat])),
            0.75
        );
    }

    #[test]
    fn surface_rejects_nonstationary_beta() {
        let mut cfg = SurfaceConfig::monthly_calibration(10, 1);
        cfg.beta = 1.0;
        assert!(matches!(disagreement_surface(&cfg), Err(Error::Domain(_))));
    }

    #[test]
    fn surface_zero_noise_column_and_determinism() {
        let cfg = SurfaceConfig {
            grid_eps2: vec![1.0, 3.0],
            grid_v2: vec![0.0, 2.0],
            beta: 0.5,
            n: 12,
            k: 12,
            n_agents: 500,
            replications: 20,
            seed: 5,
        };
        let a = disagreement_surface(&cfg).unwrap();
        assert_eq!(a.mean[0][0], 0.0);
        assert_eq!(a.mean[1][0], 0.0);
        assert!(a.mean[0][1] > 0.0);
        let b = disagreement_surface(&cfg).unwrap();
        assert_eq!(a, b);
        for row in &a.mean {
            for v in row {
                assert!((0.0..=1.0).contains(v));
            }
        }
    }
}

use nalgebra::{Cholesky, DMatrix, DVector, SymmetricEigen};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use statrs::function::gamma::ln_gamma;

use super::{DesignData, PosteriorDraws, Priors, Sign, SignPattern, VarConfig};
use crate::error::{Error, Result};
use crate::sampling::{inv_gamma, normal_negative, normal_positive, std_normal};

/// Bounds on the Horseshoe prior variance `τ_i² ψ_ij²` of a VAR coefficient,
/// and on the individual squared scales, to keep the precision matrix finite.
const PRIOR_VAR_BOUNDS: (f64, f64) = (1e-12, 1e12);
const SCALE2_BOUNDS: (f64, f64) = (1e-20, 1e20);

/// Metropolis steps per sweep on the collapsed `(Λ, log σ²)` block.
const RIDGE_STEPS: usize = 200;
const RIDGE_TARGET_ACCEPTANCE: f64 = 0.234;

/// Running moments of the collapsed block and a global proposal scale,
/// updated while adapting.
#[derive(Debug, Clone, Default)]
struct RidgeProposal {
    count: usize,
    mean: Option<DVector<f64>>,
    /// Sum of squared deviations.
    m2: Option<DMatrix<f64>>,
    log_scale: f64,
}

impl RidgeProposal {
    fn adapt(&mut self, theta: &DVector<f64>, accepted: bool) {
        self.count += 1;
        let d = theta.len();
        let mean = self.mean.get_or_insert_with(|| DVector::zeros(d));
        let m2 = self.m2.get_or_insert_with(|| DMatrix::zeros(d, d));
        let delta = theta - &*mean;
        *mean += &delta / self.count as f64;
        let delta2 = theta - &*mean;
        *m2 += &delta * delta2.transpose();
        let rate = (self.count as f64).powf(-0.6);
        self.log_scale += rate * (f64::from(u8::from(accepted)) - RIDGE_TARGET_ACCEPTANCE);
    }

    /// Lower Cholesky factor of the proposal covariance before scaling.
    fn proposal_factor(&self, d: usize) -> DMatrix<f64> {
        let fallback = DMatrix::identity(d, d) * (0.01 / d as f64).sqrt();
        match &self.m2 {
            Some(m2) if self.count > 20 * d && m2.nrows() == d => {
                let cov = m2 / (self.count - 1) as f64 * (2.38f64.powi(2) / d as f64)
                    + DMatrix::identity(d, d) * 1e-8;
                Cholesky::new(cov).map_or(fallback, |c| c.l())
            }
            _ => fallback,
        }
    }
}

/// Full state of the Gibbs chain, including the auxiliary inverse-gamma
/// variables of the half-Cauchy scale mixtures.
#[derive(Debug, Clone, PartialEq)]
pub struct SamplerState {
    pub phi: DMatrix<f64>,
    pub lambda: DMatrix<f64>,
    pub sigma2: DVector<f64>,
    pub factors: DMatrix<f64>,
    /// `ψ_ij²`.
    pub local2: DMatrix<f64>,
    /// Auxiliary `ν_ij` with `ψ_ij² | ν_ij ~ IG(1/2, 1/ν_ij)`.
    pub local_aux: DMatrix<f64>,
    /// `τ_i²`.
    pub global2: DVector<f64>,
    /// Auxiliary `ξ_i` with `τ_i² | ξ_i ~ IG(1/2, 1/ξ_i)`.
    pub global_aux: DVector<f64>,
}

impl SamplerState {
    fn is_finite(&self) -> bool {
        self.phi.iter().all(|v| v.is_finite())
            && self.lambda.iter().all(|v| v.is_finite())
            && self.sigma2.iter().all(|v| v.is_finite() && *v > 0.0)
            && self.factors.iter().all(|v| v.is_finite())
            && self.local2.iter().all(|v| v.is_finite() && *v > 0.0)
            && self.global2.iter().all(|v| v.is_finite() && *v > 0.0)
    }

    fn phi_prior_var(&self, i: usize, j: usize) -> f64 {
        (self.global2[i] * self.local2[(i, j)]).clamp(PRIOR_VAR_BOUNDS.0, PRIOR_VAR_BOUNDS.1)
    }
}

/// One Gibbs chain. Each [`Sampler::sweep`] updates, in order, the VAR
/// coefficients `Φ`, the block `(Λ, σ²)` with the factors integrated out,
/// the factors `f`, then `Λ`, `σ²` and the Horseshoe scales conditionally.
pub struct Sampler {
    y: DMatrix<f64>,
    x: DMatrix<f64>,
    xtx: DMatrix<f64>,
    pattern: SignPattern,
    priors: Priors,
    state: SamplerState,
    rng: ChaCha8Rng,
    iteration: usize,
    ridge: RidgeProposal,
    adapting: bool,
}

impl Sampler {
    /// Starts a chain from the least-squares initialization described on
    /// [`initial_state`].
    pub fn new(design: &DesignData, pattern: &SignPattern, priors: &Priors, seed: u64) -> Result<Self> {
        let state = initial_state(design, pattern)?;
        Self::with_state(design, pattern, priors, state, seed)
    }

    pub fn with_state(
        design: &DesignData,
        pattern: &SignPattern,
        priors: &Priors,
        state: SamplerState,
        seed: u64,
    ) -> Result<Self> {
        let (n, r) = (design.n_vars(), pattern.n_shocks());
        if pattern.n_vars() != n {
            return Err(Error::Config(format!(
                "sign pattern has {} rows for {n} variables",
                pattern.n_vars()
            )));
        }
        priors.check_dims(n, r)?;
        priors.validate()?;
        if !pattern.admits(&state.lambda) {
            return Err(Error::Config("initial loadings violate the sign pattern".into()));
        }
        Ok(Sampler {
            y: design.y.clone(),
            xtx: design.x.transpose() * &design.x,
            x: design.x.clone(),
            pattern: pattern.clone(),
            priors: priors.clone(),
            state,
            rng: ChaCha8Rng::seed_from_u64(seed),
            iteration: 0,
            ridge: RidgeProposal::default(),
            adapting: false,
        })
    }

    pub fn state(&self) -> &SamplerState {
        &self.state
    }

    /// While on, the collapsed move tunes its step sizes toward a 30%
    /// acceptance rate. Turn off before keeping draws.
    pub fn set_adapting(&mut self, on: bool) {
        self.adapting = on;
    }

    pub fn iteration(&self) -> usize {
        self.iteration
    }

    /// Replaces the observations, keeping the regressors. Used by
    /// joint-distribution tests that alternate parameter and data draws.
    pub fn set_observations(&mut self, y: DMatrix<f64>) {
        assert_eq!(y.shape(), self.y.shape());
        self.y = y;
    }

    pub fn sweep(&mut self) -> Result<()> {
        self.draw_phi()?;
        self.collapsed_loading_moves();
        self.draw_factors()?;
        self.draw_lambda();
        self.draw_sigma2();
        self.draw_horseshoe();
        self.iteration += 1;
        if !self.state.is_finite() {
            return Err(Error::SamplerDivergence {
                iteration: self.iteration,
                reason: "non-finite parameter after Gibbs sweep".into(),
            });
        }
        Ok(())
    }

    fn diverged(&self, reason: &str) -> Error {
        Error::SamplerDivergence {
            iteration: self.iteration + 1,
            reason: reason.into(),
        }
    }

    /// `Y − X Φ'`.
    fn var_residuals(&self) -> DMatrix<f64> {
        &self.y - &self.x * self.state.phi.transpose()
    }

    fn draw_phi(&mut self) -> Result<()> {
        let k = self.x.ncols();
        let common = &self.state.factors * self.state.lambda.transpose();
        for i in 0..self.y.ncols() {
            let s2 = self.state.sigma2[i];
            let target = self.y.column(i) - common.column(i);
            let mut prec = self.xtx.clone();
            for j in 0..k {
                prec[(j, j)] += 1.0 / self.state.phi_prior_var(i, j);
            }
            prec /= s2;
            let rhs = self.x.tr_mul(&target) / s2;
            let chol = Cholesky::new(prec)
                .ok_or_else(|| self.diverged("coefficient precision not positive definite"))?;
            let mean = chol.solve(&rhs);
            let z = DVector::from_fn(k, |_, _| std_normal(&mut self.rng));
            let noise = chol
                .l()
                .tr_solve_lower_triangular(&z)
                .ok_or_else(|| self.diverged("singular coefficient factor"))?;
            self.state.phi.set_row(i, &(mean + noise).transpose());
        }
        Ok(())
    }

    fn draw_factors(&mut self) -> Result<()> {
        let r = self.state.lambda.ncols();
        let t_len = self.y.nrows();
        let e = self.var_residuals();
        let inv_s2 = self.state.sigma2.map(|s| 1.0 / s);
        // Σ^{-1} Λ
        let weighted = DMatrix::from_fn(self.state.lambda.nrows(), r, |i, j| {
            self.state.lambda[(i, j)] * inv_s2[i]
        });
        let prec = DMatrix::identity(r, r) + self.state.lambda.tr_mul(&weighted);
        let chol = Cholesky::new(prec)
            .ok_or_else(|| self.diverged("factor precision not positive definite"))?;
        // r × T matrix of conditional means
        let mean = chol.solve(&(weighted.tr_mul(&e.transpose())));
        let z = DMatrix::from_fn(r, t_len, |_, _| std_normal(&mut self.rng));
        let noise = chol
            .l()
            .tr_solve_lower_triangular(&z)
            .ok_or_else(|| self.diverged("singular factor precision"))?;
        self.state.factors = (mean + noise).transpose();
        Ok(())
    }

    fn draw_lambda(&mut self) {
        let e = self.var_residuals();
        let (n, r) = self.state.lambda.shape();
        let f = &self.state.factors;
        let t_len = f.nrows();
        for i in 0..n {
            let s2 = self.state.sigma2[i];
            for j in 0..r {
                let sign = self.pattern.get(i, j);
                if sign == Sign::Zero {
                    self.state.lambda[(i, j)] = 0.0;
                    continue;
                }
                let mut ff = 0.0;
                let mut fr = 0.0;
                for t in 0..t_len {
                    let mut resid = e[(t, i)];
                    for l in 0..r {
                        if l != j {
                            resid -= self.state.lambda[(i, l)] * f[(t, l)];
                        }
                    }
                    ff += f[(t, j)] * f[(t, j)];
                    fr += f[(t, j)] * resid;
                }
                let prec = ff / s2 + 1.0 / self.priors.loading_variance[(i, j)];
                let mean = fr / s2 / prec;
                let sd = prec.sqrt().recip();
                self.state.lambda[(i, j)] = match sign {
                    Sign::Positive => normal_positive(mean, sd, &mut self.rng),
                    Sign::Negative => normal_negative(mean, sd, &mut self.rng),
                    Sign::Free => mean + sd * std_normal(&mut self.rng),
                    Sign::Zero => unreachable!(),
                };
            }
        }
    }

    /// Log density of `(Λ, σ²)` given `Φ` and the Horseshoe scales with the
    /// factors integrated out, in `(Λ, log σ²)` coordinates. `cross` is
    /// `E'E` for the VAR residuals `E`.
    fn collapsed_log_target(&self, lambda: &DMatrix<f64>, sigma2: &DVector<f64>, cross: &DMatrix<f64>, t_len: usize) -> f64 {
        let n = lambda.nrows();
        let mut omega = lambda * lambda.transpose();
        for i in 0..n {
            omega[(i, i)] += sigma2[i];
        }
        let Some(chol) = Cholesky::new(omega) else {
            return f64::NEG_INFINITY;
        };
        let log_det = 2.0 * chol.l().diagonal().iter().map(|d| d.ln()).sum::<f64>();
        let quad = chol.solve(cross).trace();
        let mut lp = -0.5 * (t_len as f64 * log_det + quad);
        let k = self.state.phi.ncols();
        for i in 0..n {
            for j in 0..lambda.ncols() {
                if self.pattern.get(i, j) != Sign::Zero {
                    lp -= 0.5 * lambda[(i, j)].powi(2) / self.priors.loading_variance[(i, j)];
                }
            }
            let s2 = sigma2[i];
            let penalty: f64 = (0..k)
                .map(|j| self.state.phi[(i, j)].powi(2) / self.state.phi_prior_var(i, j))
                .sum();
            let shape = self.priors.sigma_shape[i] + 0.5 * k as f64;
            let scale = self.priors.sigma_scale[i] + 0.5 * penalty;
            // IG kernel times the Jacobian of log σ²
            lp += -shape * s2.ln() - scale / s2;
        }
        lp
    }

    fn ridge_coords(&self) -> DVector<f64> {
        let (n, r) = self.state.lambda.shape();
        let mut v = Vec::with_capacity(n * r + n);
        for i in 0..n {
            for j in 0..r {
                if self.pattern.get(i, j) != Sign::Zero {
                    v.push(self.state.lambda[(i, j)]);
                }
            }
        }
        v.extend(self.state.sigma2.iter().map(|s| s.ln()));
        DVector::from_vec(v)
    }

    fn unpack_ridge_coords(&self, v: &DVector<f64>) -> (DMatrix<f64>, DVector<f64>) {
        let (n, r) = self.state.lambda.shape();
        let mut lambda = DMatrix::zeros(n, r);
        let mut pos = 0;
        for i in 0..n {
            for j in 0..r {
                if self.pattern.get(i, j) != Sign::Zero {
                    lambda[(i, j)] = v[pos];
                    pos += 1;
                }
            }
        }
        let sigma2 = DVector::from_fn(n, |i, _| v[pos + i].exp());
        (lambda, sigma2)
    }

    /// Random-walk Metropolis on all free loadings and log variances jointly,
    /// with the factors integrated out. With few variables per factor the
    /// posterior has a ridge along which `Λ` and `σ²` trade off and the
    /// conditional updates barely move; the proposal covariance is learned
    /// from the chain while adapting and frozen afterwards.
    fn collapsed_loading_moves(&mut self) {
        let e = self.var_residuals();
        let t_len = e.nrows();
        let cross = e.tr_mul(&e);
        let mut theta = self.ridge_coords();
        let d = theta.len();
        let mut current = self.collapsed_log_target(&self.state.lambda, &self.state.sigma2, &cross, t_len);
        let chol = self.ridge.proposal_factor(d);
        for _ in 0..RIDGE_STEPS {
            let z = DVector::from_fn(d, |_, _| std_normal(&mut self.rng));
            let cand = &theta + &chol * z * self.ridge.log_scale.exp();
            let (lambda, sigma2) = self.unpack_ridge_coords(&cand);
            let proposed = if self.pattern.admits(&lambda) && sigma2.iter().all(|s| s.is_finite() && *s > 0.0) {
                self.collapsed_log_target(&lambda, &sigma2, &cross, t_len)
            } else {
                f64::NEG_INFINITY
            };
            let accepted = rand::Rng::random::<f64>(&mut self.rng).ln() < proposed - current;
            if accepted {
                theta = cand;
                current = proposed;
                self.state.lambda = lambda;
                self.state.sigma2 = sigma2;
            }
            if self.adapting {
                self.ridge.adapt(&theta, accepted);
            }
        }
    }

    fn draw_sigma2(&mut self) {
        let u = self.var_residuals() - &self.state.factors * self.state.lambda.transpose();
        let (t_len, n) = u.shape();
        let k = self.x.ncols();
        for i in 0..n {
            let ssr: f64 = u.column(i).iter().map(|v| v * v).sum();
            let penalty: f64 = (0..k)
                .map(|j| {
                    let c = self.state.phi[(i, j)];
                    c * c / self.state.phi_prior_var(i, j)
                })
                .sum();
            let shape = self.priors.sigma_shape[i] + 0.5 * (t_len + k) as f64;
            let scale = self.priors.sigma_scale[i] + 0.5 * (ssr + penalty);
            self.state.sigma2[i] = inv_gamma(shape, scale, &mut self.rng);
        }
    }

    fn draw_horseshoe(&mut self) {
        let (n, k) = self.state.phi.shape();
        let clamp = |v: f64| v.clamp(SCALE2_BOUNDS.0, SCALE2_BOUNDS.1);
        for i in 0..n {
            let s2 = self.state.sigma2[i];
            let tau2 = self.state.global2[i];
            for j in 0..k {
                let c2 = self.state.phi[(i, j)].powi(2);
                let nu = self.state.local_aux[(i, j)];
                let l2 = clamp(inv_gamma(1.0, 1.0 / nu + c2 / (2.0 * tau2 * s2), &mut self.rng));
                self.state.local2[(i, j)] = l2;
                self.state.local_aux[(i, j)] =
                    clamp(inv_gamma(1.0, 1.0 + 1.0 / l2, &mut self.rng));
            }
            let xi = self.state.global_aux[i];
            let weighted: f64 = (0..k)
                .map(|j| self.state.phi[(i, j)].powi(2) / self.state.local2[(i, j)])
                .sum();
            let tau2 = clamp(inv_gamma(
                0.5 * (k as f64 + 1.0),
                1.0 / xi + weighted / (2.0 * s2),
                &mut self.rng,
            ));
            self.state.global2[i] = tau2;
            self.state.global_aux[i] = clamp(inv_gamma(1.0, 1.0 + 1.0 / tau2, &mut self.rng));
        }
    }
}

/// Starting point: ridge least squares for `Φ`; the leading principal
/// components of the residual covariance for `Λ`, column-flipped and
/// projected onto the sign pattern; residual variance not explained by
/// `Λ` for `σ²`; factors at their conditional mean; unit Horseshoe scales.
pub fn initial_state(design: &DesignData, pattern: &SignPattern) -> Result<SamplerState> {
    let (t_len, n) = design.y.shape();
    let k = design.x.ncols();
    let r = pattern.n_shocks();
    let xtx = design.x.transpose() * &design.x;
    let ridge = 1e-6 * xtx.trace() / k as f64 + 1e-8;
    let reg = &xtx + DMatrix::identity(k, k) * ridge;
    let chol = Cholesky::new(reg)
        .ok_or_else(|| Error::Data("regressor cross-product is not positive definite".into()))?;
    let beta = chol.solve(&design.x.tr_mul(&design.y));
    let phi = beta.transpose();

    let e = &design.y - &design.x * &beta;
    let cov = e.tr_mul(&e) / t_len as f64;
    let eig = SymmetricEigen::new(cov.clone());
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));

    let mut lambda = DMatrix::zeros(n, r);
    for j in 0..r {
        let src = order[j];
        let scale = eig.eigenvalues[src].max(0.0).sqrt();
        let mut col: Vec<f64> = (0..n).map(|i| eig.eigenvectors[(i, src)] * scale).collect();
        let agreement: f64 = (0..n)
            .map(|i| match pattern.get(i, j) {
                Sign::Positive => col[i],
                Sign::Negative => -col[i],
                _ => 0.0,
            })
            .sum();
        if agreement < 0.0 {
            col.iter_mut().for_each(|v| *v = -*v);
        }
        for i in 0..n {
            let floor = 0.1 * cov[(i, i)].max(1e-12).sqrt();
            lambda[(i, j)] = match pattern.get(i, j) {
                Sign::Zero => 0.0,
                Sign::Positive => col[i].max(floor),
                Sign::Negative => col[i].min(-floor),
                Sign::Free => col[i],
            };
        }
    }

    let sigma2 = DVector::from_fn(n, |i, _| {
        let explained: f64 = (0..r).map(|j| lambda[(i, j)].powi(2)).sum();
        (cov[(i, i)] - explained).max(0.1 * cov[(i, i)]).max(1e-8)
    });

    let weighted = DMatrix::from_fn(n, r, |i, j| lambda[(i, j)] / sigma2[i]);
    let prec = DMatrix::identity(r, r) + lambda.tr_mul(&weighted);
    let factors = match Cholesky::new(prec) {
        Some(c) => c.solve(&weighted.tr_mul(&e.transpose())).transpose(),
        None => DMatrix::zeros(t_len, r),
    };

    Ok(SamplerState {
        phi,
        lambda,
        sigma2,
        factors,
        local2: DMatrix::from_element(n, k, 1.0),
        local_aux: DMatrix::from_element(n, k, 1.0),
        global2: DVector::from_element(n, 1.0),
        global_aux: DVector::from_element(n, 1.0),
    })
}

/// Runs one chain and keeps every `thin`-th draw after burn-in.
pub fn run_mcmc(design: &DesignData, config: &VarConfig, priors: &Priors) -> Result<PosteriorDraws> {
    config.validate()?;
    if design.n_vars() != config.n_vars || design.n_lags != config.n_lags {
        return Err(Error::Config(format!(
            "design has {} variables and {} lags, config expects {} and {}",
            design.n_vars(),
            design.n_lags,
            config.n_vars,
            config.n_lags
        )));
    }
    let mut sampler = Sampler::new(design, &config.sign_pattern, priors, config.seed)?;
    let s = config.settings;
    let keep = s.retained();
    let mut out = PosteriorDraws {
        n_lags: design.n_lags,
        phi: Vec::with_capacity(keep),
        lambda: Vec::with_capacity(keep),
        sigma: Vec::with_capacity(keep),
        factors: Vec::with_capacity(keep),
        horseshoe_local: Vec::with_capacity(keep),
        horseshoe_global: Vec::with_capacity(keep),
    };
    for it in 0..s.draws {
        sampler.set_adapting(it < s.burn_in);
        sampler.sweep()?;
        if it >= s.burn_in && (it - s.burn_in) % s.thin == s.thin - 1 {
            let st = sampler.state();
            debug_assert!(config.sign_pattern.admits(&st.lambda));
            out.phi.push(st.phi.clone());
            out.lambda.push(st.lambda.clone());
            out.sigma.push(st.sigma2.clone());
            out.factors.push(st.factors.clone());
            out.horseshoe_local.push(st.local2.map(f64::sqrt));
            out.horseshoe_global.push(st.global2.map(f64::sqrt));
        }
    }
    Ok(out)
}

const LN_2PI: f64 = 1.837_877_066_409_345_5;

fn ln_normal(x: f64, var: f64) -> f64 {
    -0.5 * (LN_2PI + var.ln() + x * x / var)
}

fn ln_half_cauchy(x: f64) -> f64 {
    (2.0 / std::f64::consts::PI).ln() - (1.0 + x * x).ln()
}

/// Log of likelihood times prior at retained draw `index`, conditional on
/// the factors. Returns `-inf` when the loadings leave the restricted set.
pub fn log_joint_density(
    design: &DesignData,
    pattern: &SignPattern,
    priors: &Priors,
    draws: &PosteriorDraws,
    index: usize,
) -> f64 {
    let phi = &draws.phi[index];
    let lambda = &draws.lambda[index];
    let sigma2 = &draws.sigma[index];
    let f = &draws.factors[index];
    let local = &draws.horseshoe_local[index];
    let global = &draws.horseshoe_global[index];
    if !pattern.admits(lambda) {
        return f64::NEG_INFINITY;
    }
    let (n, k) = phi.shape();
    let resid = &design.y - &design.x * phi.transpose() - f * lambda.transpose();
    let mut lp = 0.0;
    for i in 0..n {
        lp += resid.column(i).iter().map(|u| ln_normal(*u, sigma2[i])).sum::<f64>();
    }
    lp += f.iter().map(|v| ln_normal(*v, 1.0)).sum::<f64>();
    for i in 0..n {
        let tau = global[i];
        lp += ln_half_cauchy(tau);
        for j in 0..k {
            let var = (sigma2[i] * tau * tau * local[(i, j)].powi(2))
                .clamp(PRIOR_VAR_BOUNDS.0, PRIOR_VAR_BOUNDS.1);
            lp += ln_normal(phi[(i, j)], var) + ln_half_cauchy(local[(i, j)]);
        }
        for j in 0..lambda.ncols() {
            let h = priors.loading_variance[(i, j)];
            lp += match pattern.get(i, j) {
                Sign::Zero => 0.0,
                Sign::Free => ln_normal(lambda[(i, j)], h),
                _ => std::f64::consts::LN_2 + ln_normal(lambda[(i, j)], h),
            };
        }
        let (a, b) = (priors.sigma_shape[i], priors.sigma_scale[i]);
        lp += a * b.ln() - ln_gamma(a) - (a + 1.0) * sigma2[i].ln() - b / sigma2[i];
    }
    lp
}

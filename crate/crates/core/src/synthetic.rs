//! Draws from the factor VAR, for recovery checks and bundled fixtures.

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::sampling::std_normal;

/// Parameters of `y_t = c + Σ_l A_l y_{t-l} + Λ f_t + v_t` with
/// `f_t ~ N(0, I)` and `v_t ~ N(0, diag(sigma2))`.
#[derive(Debug, Clone)]
pub struct FactorVar {
    /// `n × (1 + n p)`, laid out like the regressor matrix of
    /// [`crate::bvar::build_design`].
    pub phi: DMatrix<f64>,
    pub lambda: DMatrix<f64>,
    pub sigma2: DVector<f64>,
}

impl FactorVar {
    pub fn n_vars(&self) -> usize {
        self.phi.nrows()
    }

    pub fn n_lags(&self) -> usize {
        (self.phi.ncols() - 1) / self.phi.nrows()
    }

    fn check(&self) -> Result<()> {
        let n = self.phi.nrows();
        if n == 0 || !(self.phi.ncols() - 1).is_multiple_of(n) || self.n_lags() == 0 {
            return Err(Error::Config(format!(
                "coefficient matrix {}×{} is not n × (1 + n p)",
                self.phi.nrows(),
                self.phi.ncols()
            )));
        }
        if self.lambda.nrows() != n || self.sigma2.len() != n {
            return Err(Error::Config("loadings or variances do not match n".into()));
        }
        if self.sigma2.iter().any(|s| !(*s >= 0.0)) {
            return Err(Error::Domain("idiosyncratic variances must be non-negative".into()));
        }
        Ok(())
    }

    /// Simulates `t_len` observations after discarding `burn_in` starting
    /// from zeros. Also returns the factor draws for the kept periods.
    pub fn simulate(&self, t_len: usize, burn_in: usize, seed: u64) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
        self.check()?;
        let (n, p, r) = (self.n_vars(), self.n_lags(), self.lambda.ncols());
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let total = burn_in + t_len;
        let mut y = DMatrix::zeros(total + p, n);
        let mut f = DMatrix::zeros(total, r);
        for t in 0..total {
            let row = t + p;
            let ft = DVector::from_fn(r, |_, _| std_normal(&mut rng));
            for i in 0..n {
                let mut v = self.phi[(i, 0)];
                for lag in 1..=p {
                    for m in 0..n {
                        v += self.phi[(i, 1 + (lag - 1) * n + m)] * y[(row - lag, m)];
                    }
                }
                v += (self.lambda.row(i) * &ft)[0];
                v += self.sigma2[i].sqrt() * std_normal(&mut rng);
                y[(row, i)] = v;
            }
            f.set_row(t, &ft.transpose());
        }
        Ok((
            y.rows(p + burn_in, t_len).into_owned(),
            f.rows(burn_in, t_len).into_owned(),
        ))
    }
}

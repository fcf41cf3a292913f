//! Random-variate helpers used by the Gibbs sampler.

use rand::Rng;
use rand_distr::{Distribution, Gamma, StandardNormal};
use statrs::function::erf::{erfc, erfc_inv};

/// Beyond this many standard deviations into the excluded side the normal
/// survival function is too small for the inverse-CDF route.
const TAIL_SWITCH: f64 = 30.0;

/// Upper-tail probability of the standard normal.
pub fn normal_sf(z: f64) -> f64 {
    0.5 * erfc(z / std::f64::consts::SQRT_2)
}

/// Inverse of [`normal_sf`].
pub fn normal_isf(p: f64) -> f64 {
    std::f64::consts::SQRT_2 * erfc_inv(2.0 * p)
}

/// Draws `z ~ N(0, 1)` conditioned on `z > a` by inverting the survival
/// function. Far in the tail the exact inverse is replaced by
/// `sqrt(a² − 2 ln u)`, whose relative error is O(1/a²).
pub fn std_normal_above<R: Rng + ?Sized>(a: f64, rng: &mut R) -> f64 {
    // u in (0, 1]
    let u = 1.0 - rng.random::<f64>();
    let z = if a < TAIL_SWITCH {
        normal_isf(u * normal_sf(a))
    } else {
        (a * a - 2.0 * u.ln()).sqrt()
    };
    if z.is_finite() {
        z.max(a)
    } else {
        a
    }
}

/// `x ~ N(mean, sd²)` restricted to `x > 0`.
pub fn normal_positive<R: Rng + ?Sized>(mean: f64, sd: f64, rng: &mut R) -> f64 {
    let z = std_normal_above(-mean / sd, rng);
    let x = mean + sd * z;
    if x > 0.0 {
        x
    } else {
        f64::MIN_POSITIVE
    }
}

/// `x ~ N(mean, sd²)` restricted to `x < 0`.
pub fn normal_negative<R: Rng + ?Sized>(mean: f64, sd: f64, rng: &mut R) -> f64 {
    -normal_positive(-mean, sd, rng)
}

pub fn std_normal<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    rng.sample(StandardNormal)
}

/// Inverse-gamma with density ∝ x^{-shape-1} exp(-scale / x).
pub fn inv_gamma<R: Rng + ?Sized>(shape: f64, scale: f64, rng: &mut R) -> f64 {
    let g = Gamma::new(shape, 1.0)
        .expect("inverse-gamma shape must be positive")
        .sample(rng);
    scale / g
}

//! The gamma family (GAF) distribution and its discretized form.
//!
//! `GAF(mu, sigma, nu)` is a gamma distribution with mean `mu` and variance
//! `sigma^2 mu^nu`. With `sigma1 = sigma * mu^(nu/2 - 1)` its shape is
//! `sigma1^-2 = sigma^-2 mu^(2 - nu)` and its scale is `sigma1^2 mu`.
//! The CDF is therefore `P(sigma1^-2, w / (sigma1^2 mu))`.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{param_err, Result};

use super::pmf::{discretize, rounded_mass, ContinuousCdf, Pmf};
use super::sampling::{round_ln_draw, sample_ln_gamma, Draw};
use super::special::{exp_clamped, gamma_pq, ln_gamma};

/// Relation of the variance to the mean.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Dispersion {
    Over,
    Equi,
    Under,
}

/// Validated `(mu, sigma, nu)` with the derived gamma shape and scale.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GafParams {
    mu: f64,
    sigma: f64,
    nu: f64,
    shape: f64,
    scale: f64,
}

impl GafParams {
    pub fn new(mu: f64, sigma: f64, nu: f64) -> Result<Self> {
        if !(mu.is_finite() && mu > 0.0) {
            return param_err(format!("GAF mu must be positive and finite, got {mu}"));
        }
        if !(sigma.is_finite() && sigma > 0.0) {
            return param_err(format!("GAF sigma must be positive and finite, got {sigma}"));
        }
        if !nu.is_finite() {
            return param_err(format!("GAF nu must be finite, got {nu}"));
        }
        let ln_shape = -2.0 * sigma.ln() + (2.0 - nu) * mu.ln();
        let shape = ln_shape.exp();
        let scale = (mu.ln() - ln_shape).exp();
        if !(shape.is_finite() && shape > 0.0 && scale.is_finite() && scale > 0.0) {
            return param_err(format!(
                "GAF({mu}, {sigma}, {nu}) has gamma shape e^{ln_shape:.1}, outside floating-point range"
            ));
        }
        Ok(Self {
            mu,
            sigma,
            nu,
            shape,
            scale,
        })
    }

    pub fn mu(&self) -> f64 {
        self.mu
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn nu(&self) -> f64 {
        self.nu
    }

    /// `sigma * mu^(nu/2 - 1)`.
    pub fn sigma1(&self) -> f64 {
        self.sigma * self.mu.powf(self.nu / 2.0 - 1.0)
    }

    /// Gamma shape `sigma1^-2`.
    pub fn shape(&self) -> f64 {
        self.shape
    }

    /// Gamma scale `sigma1^2 mu`.
    pub fn scale(&self) -> f64 {
        self.scale
    }

    /// Continuous variance `sigma^2 mu^nu`.
    pub fn variance(&self) -> f64 {
        self.sigma * self.sigma * self.mu.powf(self.nu)
    }

    pub fn ln_pdf(&self, w: f64) -> f64 {
        if !(w > 0.0) {
            return f64::NEG_INFINITY;
        }
        let a = self.shape;
        (a - 1.0) * w.ln() - w / self.scale - a * self.scale.ln() - ln_gamma(a)
    }

    /// Density at `w`; zero for `w <= 0`.
    pub fn pdf(&self, w: f64) -> f64 {
        exp_clamped(self.ln_pdf(w))
    }

    /// `P(shape, w / scale)`.
    pub fn cdf(&self, w: f64) -> f64 {
        if w <= 0.0 {
            return 0.0;
        }
        gamma_pq(self.shape, w / self.scale).0
    }

    pub fn sf(&self, w: f64) -> f64 {
        if w <= 0.0 {
            return 1.0;
        }
        gamma_pq(self.shape, w / self.scale).1
    }

    /// Mass of the discretized distribution at `y`.
    pub fn pmf(&self, y: u64) -> f64 {
        rounded_mass(self, y)
    }

    /// Tabulate the discretized distribution.
    pub fn discretize(&self, tail_eps: f64) -> Result<Pmf> {
        discretize(self, tail_eps)
    }

    /// Continuous draw `W`.
    pub fn sample_continuous<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        (sample_ln_gamma(self.shape, rng) + self.scale.ln()).exp()
    }

    /// Discretized draw: `W` rounded half up.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Draw {
        round_ln_draw(sample_ln_gamma(self.shape, rng) + self.scale.ln())
    }

    /// Compares `sigma^2 mu^nu` with `mu` directly.
    pub fn dispersion(&self) -> Dispersion {
        let var = self.variance();
        let diff = var - self.mu;
        if diff.abs() <= 1e-12 * self.mu.max(var) {
            Dispersion::Equi
        } else if diff < 0.0 {
            Dispersion::Under
        } else {
            Dispersion::Over
        }
    }
}

impl ContinuousCdf for GafParams {
    fn cdf(&self, w: f64) -> f64 {
        GafParams::cdf(self, w)
    }

    fn sf(&self, w: f64) -> f64 {
        GafParams::sf(self, w)
    }

    fn mean(&self) -> f64 {
        self.mu
    }

    fn variance(&self) -> f64 {
        GafParams::variance(self)
    }
}

/// Value of `nu` at which `GAF(mu, sigma, nu)` switches between over- and
/// underdispersion: `1 - 2 ln(sigma) / ln(mu)`.
///
/// For `mu > 1` the distribution is underdispersed when `nu` is below the
/// threshold; for `mu < 1` when it is above. `None` at `mu = 1`, where the
/// classification depends on `sigma` alone.
pub fn underdispersion_threshold(sigma: f64, mu: f64) -> Option<f64> {
    let ln_mu = mu.ln();
    if ln_mu == 0.0 || !ln_mu.is_finite() {
        None
    } else {
        Some(1.0 - 2.0 * sigma.ln() / ln_mu)
    }
}

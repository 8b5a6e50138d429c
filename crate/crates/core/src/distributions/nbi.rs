//! Negative binomial (NBI) with mean `mu` and variance `mu + sigma mu^2`.

use rand::Rng;

use crate::error::{param_err, Result};

use super::pmf::Pmf;
use super::poisson::poisson_sample;
use super::sampling::{sample_ln_gamma, Draw};
use super::special::{exp_clamped, ln_gamma};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NbiParams {
    mu: f64,
    sigma: f64,
}

impl NbiParams {
    pub fn new(mu: f64, sigma: f64) -> Result<Self> {
        if !(mu.is_finite() && mu > 0.0) {
            return param_err(format!("NBI mu must be positive and finite, got {mu}"));
        }
        if !(sigma.is_finite() && sigma > 0.0) {
            return param_err(format!("NBI sigma must be positive and finite, got {sigma}"));
        }
        Ok(Self { mu, sigma })
    }

    pub fn mu(&self) -> f64 {
        self.mu
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn mean(&self) -> f64 {
        self.mu
    }

    pub fn variance(&self) -> f64 {
        self.mu + self.sigma * self.mu * self.mu
    }

    /// `ln g(x)` with `g(x) = Γ(x + 1/σ) / (Γ(x + 1) Γ(1/σ)) (σμ/(1+σμ))^x (1/(1+σμ))^(1/σ)`.
    pub fn ln_pmf(&self, x: u64) -> f64 {
        let r = 1.0 / self.sigma;
        let sm = self.sigma * self.mu;
        let ln1p_sm = sm.ln_1p();
        let xf = x as f64;
        // ln Γ(x + r) - ln Γ(r) - ln x!
        let ln_coeff = if x <= 1000 {
            (0..x).map(|i| ((r + i as f64) / (i as f64 + 1.0)).ln()).sum::<f64>()
        } else {
            ln_gamma(xf + r) - ln_gamma(r) - ln_gamma(xf + 1.0)
        };
        let tail = if x == 0 { 0.0 } else { xf * (sm.ln() - ln1p_sm) };
        ln_coeff + tail - r * ln1p_sm
    }

    pub fn pmf(&self, x: u64) -> f64 {
        exp_clamped(self.ln_pmf(x))
    }

    /// Tabulate from 0 until the remaining mass is below `tail_eps`, with the
    /// Chebyshev point `mu + sqrt(var / tail_eps)` as a hard stop.
    pub fn to_pmf(&self, tail_eps: f64) -> Result<Pmf> {
        let bound = (self.mu + (self.variance() / tail_eps).sqrt()).ceil();
        if bound > 1e8 {
            return param_err(format!("NBI support bound {bound:e} is too large to tabulate"));
        }
        let mut probs = Vec::new();
        let mut cum = 0.0;
        let mut x = 0u64;
        loop {
            let p = self.pmf(x);
            probs.push(p);
            cum += p;
            if (x as f64 >= self.mu && 1.0 - cum < tail_eps) || x as f64 >= bound {
                break;
            }
            x += 1;
        }
        Pmf::new(0, probs, (1.0 - cum).max(0.0))
    }

    /// Gamma–Poisson mixture: `lambda ~ Gamma(1/σ, σμ)`, then `Poisson(lambda)`.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Draw {
        let ln_lambda = sample_ln_gamma(1.0 / self.sigma, rng) + (self.sigma * self.mu).ln();
        poisson_sample(ln_lambda.exp(), rng)
    }
}

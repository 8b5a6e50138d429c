//! Poisson pmf and sampling.

use rand::Rng;
use rand_distr::{Distribution, Poisson, StandardNormal};

use super::sampling::{round_draw, Draw};
use super::special::{exp_clamped, ln_gamma};

/// `P(X = x)` for `X ~ Poisson(mu)`; `mu = 0` is a point mass at zero.
pub fn poisson_pmf(x: u64, mu: f64) -> f64 {
    if mu == 0.0 {
        return if x == 0 { 1.0 } else { 0.0 };
    }
    if !(mu > 0.0) {
        return f64::NAN;
    }
    let xf = x as f64;
    let lp = if x == 0 { -mu } else { xf * mu.ln() - mu - ln_gamma(xf + 1.0) };
    exp_clamped(lp)
}

/// One `Poisson(mu)` draw.
pub fn poisson_sample<R: Rng + ?Sized>(mu: f64, rng: &mut R) -> Draw {
    if !(mu > 0.0) {
        return Draw::ZERO;
    }
    match Poisson::new(mu) {
        Ok(dist) => round_draw(dist.sample(rng)),
        // beyond the sampler's range the normal approximation is exact to
        // far better than the count resolution
        Err(_) => {
            let z: f64 = StandardNormal.sample(rng);
            round_draw(mu + mu.sqrt() * z)
        }
    }
}

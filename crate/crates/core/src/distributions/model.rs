use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{param_err, Result};

use super::gaf::GafParams;
use super::nbi::NbiParams;
use super::pmf::Pmf;
use super::poisson::{poisson_pmf, poisson_sample};
use super::sampling::Draw;

/// A count distribution family with its tuning parameters; the location `mu`
/// is supplied per cell.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "lowercase")]
pub enum CountModel {
    Poisson,
    Nbi { sigma: f64 },
    Gaf { sigma: f64, nu: f64 },
}

impl CountModel {
    pub fn validate(&self) -> Result<()> {
        match *self {
            CountModel::Poisson => Ok(()),
            CountModel::Nbi { sigma } => NbiParams::new(1.0, sigma).map(|_| ()),
            CountModel::Gaf { sigma, nu } => GafParams::new(1.0, sigma, nu).map(|_| ()),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            CountModel::Poisson => "poisson",
            CountModel::Nbi { .. } => "nbi",
            CountModel::Gaf { .. } => "gaf",
        }
    }

    pub fn sigma(&self) -> Option<f64> {
        match *self {
            CountModel::Poisson => None,
            CountModel::Nbi { sigma } | CountModel::Gaf { sigma, .. } => Some(sigma),
        }
    }

    pub fn nu(&self) -> Option<f64> {
        match *self {
            CountModel::Gaf { nu, .. } => Some(nu),
            _ => None,
        }
    }

    /// Same family with `sigma` replaced (no-op for Poisson).
    pub fn with_sigma(self, sigma: f64) -> Self {
        match self {
            CountModel::Poisson => self,
            CountModel::Nbi { .. } => CountModel::Nbi { sigma },
            CountModel::Gaf { nu, .. } => CountModel::Gaf { sigma, nu },
        }
    }

    /// Same family with `nu` replaced (no-op unless GAF).
    pub fn with_nu(self, nu: f64) -> Self {
        match self {
            CountModel::Gaf { sigma, .. } => CountModel::Gaf { sigma, nu },
            other => other,
        }
    }

    /// `P(Y = y)` for location `mu > 0`.
    pub fn pmf(&self, y: u64, mu: f64) -> Result<f64> {
        match *self {
            CountModel::Poisson => {
                if !(mu >= 0.0 && mu.is_finite()) {
                    return param_err(format!("Poisson mean must be non-negative, got {mu}"));
                }
                Ok(poisson_pmf(y, mu))
            }
            CountModel::Nbi { sigma } => Ok(NbiParams::new(mu, sigma)?.pmf(y)),
            CountModel::Gaf { sigma, nu } => Ok(GafParams::new(mu, sigma, nu)?.pmf(y)),
        }
    }

    /// Model variance at location `mu`: `mu`, `mu + sigma mu^2`, or `sigma^2 mu^nu`.
    pub fn variance(&self, mu: f64) -> f64 {
        match *self {
            CountModel::Poisson => mu,
            CountModel::Nbi { sigma } => mu + sigma * mu * mu,
            CountModel::Gaf { sigma, nu } => sigma * sigma * mu.powf(nu),
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, mu: f64, rng: &mut R) -> Result<Draw> {
        Ok(match *self {
            CountModel::Poisson => poisson_sample(mu, rng),
            CountModel::Nbi { sigma } => NbiParams::new(mu, sigma)?.sample(rng),
            CountModel::Gaf { sigma, nu } => GafParams::new(mu, sigma, nu)?.sample(rng),
        })
    }

    /// Tabulated pmf at location `mu` with omitted mass below `tail_eps`.
    pub fn pmf_table(&self, mu: f64, tail_eps: f64) -> Result<Pmf> {
        match *self {
            CountModel::Gaf { sigma, nu } => GafParams::new(mu, sigma, nu)?.discretize(tail_eps),
            CountModel::Nbi { sigma } => NbiParams::new(mu, sigma)?.to_pmf(tail_eps),
            CountModel::Poisson => {
                if !(mu >= 0.0 && mu.is_finite()) {
                    return param_err(format!("Poisson mean must be non-negative, got {mu}"));
                }
                let mut probs = Vec::new();
                let mut cum = 0.0;
                let mut x = 0u64;
                let bound = mu + (mu / tail_eps).sqrt() + 1.0;
                loop {
                    let p = poisson_pmf(x, mu);
                    probs.push(p);
                    cum += p;
                    if (x as f64 >= mu && 1.0 - cum < tail_eps) || x as f64 >= bound {
                        break;
                    }
                    x += 1;
                }
                Pmf::new(0, probs, (1.0 - cum).max(0.0))
            }
        }
    }
}

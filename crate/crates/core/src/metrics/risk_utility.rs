//! Risk–utility points: risk is `tau4(1)`, utility is `1 - inverse_logit(L1)`.

use serde::{Deserialize, Serialize};

use crate::distributions::special::inverse_logit;
use crate::distributions::CountModel;
use crate::error::Result;
use crate::synthesis::{SyntheticEnsemble, ZeroPolicy};
use crate::table::{CellHistogram, ContingencyTable};

use super::loss::{l1_analytic, l1_empirical};
use super::tau::{tau_analytic_row, tau_empirical};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RiskUtilityPoint {
    /// `tau4(1)`; `None` when undefined.
    pub risk: Option<f64>,
    pub utility: f64,
    /// Raw loss fed to the utility transform.
    pub l1: f64,
}

/// `1 - inverse_logit(l1)`. Saturates at 0 once `l1` exceeds about 37.
pub fn utility_from_l1(l1: f64) -> f64 {
    1.0 - inverse_logit(l1)
}

pub fn risk_utility_analytic(model: &CountModel, zero_policy: &ZeroPolicy, histogram: &CellHistogram, m: usize) -> Result<RiskUtilityPoint> {
    let row = tau_analytic_row(model, zero_policy, histogram, 1)?;
    let l1 = l1_analytic(model, histogram, m)?;
    Ok(RiskUtilityPoint {
        risk: row.tau4,
        utility: utility_from_l1(l1),
        l1,
    })
}

pub fn risk_utility_empirical(original: &ContingencyTable, ensemble: &SyntheticEnsemble) -> Result<RiskUtilityPoint> {
    let tau = tau_empirical(original, ensemble, &[1])?;
    let l1 = l1_empirical(original, ensemble)?;
    Ok(RiskUtilityPoint {
        risk: tau.rows[0].tau4,
        utility: utility_from_l1(l1),
        l1,
    })
}

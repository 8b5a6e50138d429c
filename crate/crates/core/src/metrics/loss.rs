//! Squared-error loss between the original table and the replicate mean.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::distributions::CountModel;
use crate::error::{param_err, Result};
use crate::synthesis::SyntheticEnsemble;
use crate::table::{CellHistogram, ContingencyTable};

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct LossReport {
    /// `sum_k (f_k - mean_r f^syn_k)^2` over nonzero original cells.
    pub l1_empirical: Option<f64>,
    /// `sum_{j > 0} K tau2(j) Var(j) / m`.
    pub l1_analytic: Option<f64>,
    /// Zero cells left out of both sums.
    pub excluded_zero_cells: u64,
    pub replicates: usize,
}

/// Empirical loss over the nonzero cells of `original`.
pub fn l1_empirical(original: &ContingencyTable, ensemble: &SyntheticEnsemble) -> Result<f64> {
    ensemble.check_aligned(original)?;
    let reps = ensemble.replicates();
    let m = reps.len() as f64;
    let counts = original.counts();
    Ok((0..counts.len())
        .into_par_iter()
        .with_min_len(1 << 14)
        .filter(|&k| counts[k] > 0)
        .map(|k| {
            let mean = reps.iter().map(|r| r[k] as f64).sum::<f64>() / m;
            let d = counts[k] as f64 - mean;
            d * d
        })
        .sum())
}

/// Expected loss from the histogram alone: each nonzero cell of size `j`
/// contributes the model variance at `j` divided by `m`.
pub fn l1_analytic(model: &CountModel, histogram: &CellHistogram, m: usize) -> Result<f64> {
    if m == 0 {
        return param_err("m must be at least 1");
    }
    Ok(histogram
        .exact()
        .filter(|&(j, _)| j > 0)
        .map(|(j, freq)| freq as f64 * model.variance(j as f64))
        .sum::<f64>()
        / m as f64)
}

pub fn loss_report(original: &ContingencyTable, ensemble: &SyntheticEnsemble, model: Option<&CountModel>) -> Result<LossReport> {
    let m = ensemble.num_replicates();
    let l1_analytic = match model {
        Some(model) => Some(l1_analytic(model, &original.histogram(u64::MAX), m)?),
        None => None,
    };
    Ok(LossReport {
        l1_empirical: Some(l1_empirical(original, ensemble)?),
        l1_analytic,
        excluded_zero_cells: original.counts().iter().filter(|&&c| c == 0).count() as u64,
        replicates: m,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_cell_arithmetic() {
        let h = CellHistogram::from_frequencies([(4, 1)], 10).unwrap();
        let model = CountModel::Gaf { sigma: 1.0, nu: -0.5 };
        assert!((l1_analytic(&model, &h, 1).unwrap() - 0.5).abs() < 1e-15);
    }

    #[test]
    fn linear_in_frequencies_and_sigma_squared() {
        let h = CellHistogram::from_frequencies([(0, 100), (1, 30), (4, 7), (20, 2)], 10).unwrap();
        let model = CountModel::Gaf { sigma: 1.5, nu: -0.25 };
        let base = l1_analytic(&model, &h, 10).unwrap();
        let doubled = l1_analytic(&model, &h.scaled(2).unwrap(), 10).unwrap();
        assert!((doubled / base - 2.0).abs() < 1e-14);
        let wider = l1_analytic(&model.with_sigma(3.0), &h, 10).unwrap();
        assert!((wider / base - 4.0).abs() < 1e-14);
    }

    #[test]
    fn rejects_zero_replicates() {
        let h = CellHistogram::from_frequencies([(1, 1)], 10).unwrap();
        assert!(l1_analytic(&CountModel::Poisson, &h, 0).is_err());
    }
}

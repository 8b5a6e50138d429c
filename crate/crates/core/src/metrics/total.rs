//! The synthetic grand total `n_syn` and how close it stays to `n`.

use serde::{Deserialize, Serialize};

use crate::distributions::special::normal_cdf;
use crate::distributions::CountModel;
use crate::error::Result;
use crate::synthesis::{SyntheticEnsemble, ZeroPolicy};
use crate::table::{CellHistogram, ContingencyTable};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TotalReport {
    pub n: u64,
    /// Replicate totals; wide enough that clamped draws cannot overflow.
    pub n_syn: Vec<u128>,
    /// `Var(n_syn)`: model variances of nonzero cells plus the zero-cell share.
    pub analytic_variance: Option<f64>,
}

impl TotalReport {
    pub fn analytic_sd(&self) -> Option<f64> {
        self.analytic_variance.map(f64::sqrt)
    }

    /// Normal-approximation probability that `|n_syn - n| < d`.
    pub fn coverage(&self, d: f64) -> Option<f64> {
        self.analytic_variance.map(|v| coverage_probability(v, d))
    }

    /// Fraction of replicates with `|n_syn - n| < d`.
    pub fn empirical_coverage(&self, d: f64) -> f64 {
        if self.n_syn.is_empty() {
            return f64::NAN;
        }
        let n = self.n as f64;
        let inside = self.n_syn.iter().filter(|&&s| (s as f64 - n).abs() < d).count();
        inside as f64 / self.n_syn.len() as f64
    }
}

/// `Var(n_syn) = sum_{j > 0} freq(j) Var(j) + freq(0) Var(zero cell)`.
pub fn total_variance(model: &CountModel, zero_policy: &ZeroPolicy, histogram: &CellHistogram) -> f64 {
    histogram
        .exact()
        .map(|(j, freq)| {
            let v = if j == 0 {
                zero_policy.variance(model)
            } else {
                model.variance(j as f64)
            };
            freq as f64 * v
        })
        .sum()
}

/// `2 Phi(d / sd) - 1`, clamped to `[0, 1]`.
pub fn coverage_probability(variance: f64, d: f64) -> f64 {
    if !(d > 0.0) {
        return 0.0;
    }
    if !(variance > 0.0) {
        return 1.0;
    }
    (2.0 * normal_cdf(d / variance.sqrt()) - 1.0).clamp(0.0, 1.0)
}

/// Analytic coverage for the table's histogram.
pub fn total_coverage(model: &CountModel, zero_policy: &ZeroPolicy, histogram: &CellHistogram, d: f64) -> f64 {
    coverage_probability(total_variance(model, zero_policy, histogram), d)
}

pub fn total_report(original: &ContingencyTable, ensemble: &SyntheticEnsemble) -> Result<TotalReport> {
    ensemble.check_aligned(original)?;
    let n_syn = ensemble
        .replicates()
        .iter()
        .map(|r| r.iter().map(|&c| u128::from(c)).sum())
        .collect();
    let config = ensemble.config();
    let analytic_variance = config
        .model()
        .ok()
        .map(|m| total_variance(&m, &config.zero_policy, &original.histogram(u64::MAX)));
    Ok(TotalReport {
        n: original.total(),
        n_syn,
        analytic_variance,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn coverage_limits_and_table_values() {
        assert_eq!(coverage_probability(4.0, 0.0), 0.0);
        assert!((coverage_probability(4.0, 1e6) - 1.0).abs() < 1e-15);
        assert!((coverage_probability(4.0, 2.0) - 0.682_689_492_137_086).abs() < 1e-12);
        assert!((coverage_probability(4.0, 4.0) - 0.954_499_736_103_642).abs() < 1e-12);
        let mut last = 0.0;
        for i in 0..100 {
            let c = coverage_probability(9.0, i as f64 * 0.1);
            assert!(c >= last);
            last = c;
        }
    }

    #[test]
    fn zero_cell_share_follows_policy() {
        let h = CellHistogram::from_frequencies([(0, 10), (4, 2)], 10).unwrap();
        let model = CountModel::Gaf { sigma: 1.0, nu: 0.0 };
        assert_eq!(total_variance(&model, &ZeroPolicy::KeepZero, &h), 2.0);
        let b = total_variance(&model, &ZeroPolicy::Bernoulli { p: 0.5 }, &h);
        assert!((b - 4.5).abs() < 1e-15);
        let a = total_variance(&model, &ZeroPolicy::Pseudocount { alpha: 0.01 }, &h);
        assert!((a - 12.0).abs() < 1e-12);
    }

    #[test]
    fn empirical_coverage_counts_strictly_inside() {
        let r = TotalReport {
            n: 100,
            n_syn: vec![100, 101, 103, 97],
            analytic_variance: None,
        };
        assert_eq!(r.empirical_coverage(3.0), 0.5);
        assert_eq!(r.empirical_coverage(0.0), 0.0);
    }
}

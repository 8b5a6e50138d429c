//! Risk metrics relating original and synthetic counts of a given size `k`.
//!
//! * `tau1(k)`: proportion of synthetic cells equal to `k`.
//! * `tau2(k)`: proportion of original cells equal to `k`.
//! * `tau3(k)`: probability that an original `k` is synthesized as `k`.
//! * `tau4(k)`: probability that a synthetic `k` came from an original `k`.
//!
//! They satisfy `tau1 * tau4 = tau2 * tau3`.

use std::collections::HashMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::distributions::CountModel;
use crate::error::{Error, Result};
use crate::synthesis::{SyntheticEnsemble, ZeroPolicy};
use crate::table::{CellHistogram, ContingencyTable};

/// Where the numbers in a [`TauReport`] came from.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum TauSource {
    /// Pooled over `replicates` synthetic tables.
    Empirical { replicates: usize },
    Analytic,
}

/// Metrics for one size. `None` marks an undefined value (e.g. `tau4` when no
/// synthetic cell equals `k`). Standard errors are present only for empirical rows.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TauRow {
    pub k: u64,
    pub tau1: f64,
    pub tau2: f64,
    pub tau3: Option<f64>,
    pub tau4: Option<f64>,
    pub se_tau1: Option<f64>,
    pub se_tau3: Option<f64>,
    pub se_tau4: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TauReport {
    pub source: TauSource,
    pub rows: Vec<TauRow>,
}

impl TauReport {
    pub fn row(&self, k: u64) -> Option<&TauRow> {
        self.rows.iter().find(|r| r.k == k)
    }

    pub fn write_csv<W: std::io::Write>(&self, sink: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(sink);
        wtr.write_record(["k", "tau1", "tau2", "tau3", "tau4", "se_tau1", "se_tau3", "se_tau4"])?;
        let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
        for r in &self.rows {
            wtr.write_record([
                r.k.to_string(),
                r.tau1.to_string(),
                r.tau2.to_string(),
                opt(r.tau3),
                opt(r.tau4),
                opt(r.se_tau1),
                opt(r.se_tau3),
                opt(r.se_tau4),
            ])?;
        }
        wtr.flush()?;
        Ok(())
    }
}

fn binomial_se(p: f64, n: u64) -> f64 {
    (p * (1.0 - p) / n as f64).sqrt()
}

#[derive(Clone, Default)]
struct Tally {
    // per requested size: original cells of that size, synthetic draws equal
    // to it, and draws where both match
    orig: Vec<u64>,
    syn: Vec<u64>,
    both: Vec<u64>,
}

impl Tally {
    fn new(n: usize) -> Self {
        Self {
            orig: vec![0; n],
            syn: vec![0; n],
            both: vec![0; n],
        }
    }

    fn merge(mut self, other: Self) -> Self {
        for i in 0..self.orig.len() {
            self.orig[i] += other.orig[i];
            self.syn[i] += other.syn[i];
            self.both[i] += other.both[i];
        }
        self
    }
}

/// Empirical metrics for `sizes`, pooling every (replicate, cell) pair.
pub fn tau_empirical(original: &ContingencyTable, ensemble: &SyntheticEnsemble, sizes: &[u64]) -> Result<TauReport> {
    ensemble.check_aligned(original)?;
    let index: HashMap<u64, usize> = sizes.iter().enumerate().map(|(i, &k)| (k, i)).collect();
    let n = sizes.len();
    let counts = original.counts();

    let mut tally = ensemble
        .replicates()
        .par_iter()
        .map(|rep| {
            let mut t = Tally::new(n);
            for (&f, &s) in counts.iter().zip(rep) {
                if let Some(&i) = index.get(&s) {
                    t.syn[i] += 1;
                    if f == s {
                        t.both[i] += 1;
                    }
                }
            }
            t
        })
        .reduce(|| Tally::new(n), Tally::merge);
    for &f in counts {
        if let Some(&i) = index.get(&f) {
            tally.orig[i] += 1;
        }
    }

    let m = ensemble.num_replicates() as u64;
    let k_cells = counts.len() as u64;
    let pooled = m * k_cells;
    let rows = sizes
        .iter()
        .enumerate()
        .map(|(i, &k)| {
            let tau1 = tally.syn[i] as f64 / pooled as f64;
            let tau2 = tally.orig[i] as f64 / k_cells as f64;
            let n3 = tally.orig[i] * m;
            let tau3 = (n3 > 0).then(|| tally.both[i] as f64 / n3 as f64);
            let tau4 = (tally.syn[i] > 0).then(|| tally.both[i] as f64 / tally.syn[i] as f64);
            TauRow {
                k,
                tau1,
                tau2,
                tau3,
                tau4,
                se_tau1: Some(binomial_se(tau1, pooled)),
                se_tau3: tau3.map(|p| binomial_se(p, n3)),
                se_tau4: tau4.map(|p| binomial_se(p, tally.syn[i])),
            }
        })
        .collect();
    Ok(TauReport {
        source: TauSource::Empirical {
            replicates: ensemble.num_replicates(),
        },
        rows,
    })
}

/// Closed-form `tau3(k)`: the probability that a cell of size `k` is drawn as `k`.
///
/// For `k = 0` the zero policy decides.
pub fn tau3_analytic(model: &CountModel, zero_policy: &ZeroPolicy, k: u64) -> Result<f64> {
    if k == 0 {
        zero_policy.pmf(model, 0)
    } else {
        model.pmf(k, k as f64)
    }
}

/// Closed-form `tau1(k) = sum_{j in R} tau2(j) P(Y = k | mu = j)`.
pub fn tau1_analytic(model: &CountModel, zero_policy: &ZeroPolicy, histogram: &CellHistogram, k: u64) -> Result<f64> {
    let mut total = 0.0;
    for (j, _) in histogram.exact() {
        let p = if j == 0 {
            zero_policy.pmf(model, k)?
        } else {
            model.pmf(k, j as f64)?
        };
        total += histogram.proportion(j) * p;
    }
    Ok(total)
}

/// All four analytic metrics for `k`; `tau4` is `None` when `tau1(k) = 0`.
pub fn tau_analytic_row(model: &CountModel, zero_policy: &ZeroPolicy, histogram: &CellHistogram, k: u64) -> Result<TauRow> {
    let tau1 = tau1_analytic(model, zero_policy, histogram, k)?;
    let tau2 = histogram.proportion(k);
    let tau3 = tau3_analytic(model, zero_policy, k)?;
    let tau4 = (tau1 > 0.0).then(|| (tau2 * tau3 / tau1).min(1.0));
    Ok(TauRow {
        k,
        tau1,
        tau2,
        tau3: Some(tau3),
        tau4,
        se_tau1: None,
        se_tau3: None,
        se_tau4: None,
    })
}

pub fn tau_analytic(model: &CountModel, zero_policy: &ZeroPolicy, histogram: &CellHistogram, sizes: &[u64]) -> Result<TauReport> {
    zero_policy.validate()?;
    let rows = sizes
        .par_iter()
        .map(|&k| tau_analytic_row(model, zero_policy, histogram, k))
        .collect::<Result<Vec<_>>>()?;
    Ok(TauReport {
        source: TauSource::Analytic,
        rows,
    })
}

/// Which of the four metrics.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum TauKind {
    Tau1,
    Tau2,
    Tau3,
    Tau4,
}

/// A single analytic metric; `Err(Error::Parameter)` when `tau4` is undefined.
pub fn tau_value(kind: TauKind, model: &CountModel, zero_policy: &ZeroPolicy, histogram: Option<&CellHistogram>, k: u64) -> Result<f64> {
    let need = || histogram.ok_or_else(|| Error::Parameter("this metric needs a cell-size histogram".into()));
    match kind {
        TauKind::Tau3 => tau3_analytic(model, zero_policy, k),
        TauKind::Tau2 => Ok(need()?.proportion(k)),
        TauKind::Tau1 => tau1_analytic(model, zero_policy, need()?, k),
        TauKind::Tau4 => tau_analytic_row(model, zero_policy, need()?, k)?
            .tau4
            .ok_or_else(|| Error::Parameter(format!("tau4({k}) is undefined: no synthetic mass at {k}"))),
    }
}

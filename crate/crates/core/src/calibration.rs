//! Choosing a tuning parameter so that an analytic metric hits a target, and
//! tabulating metrics over parameter grids.
//!
//! Monotonicity in the free parameter is checked on each call with a 33-point
//! scan. When the scan is monotone the solver bisects between the bounds;
//! otherwise it bisects inside the best adjacent scan pair that brackets the
//! target and reports the result as non-monotone.

use serde::{Deserialize, Serialize};

use crate::distributions::CountModel;
use crate::error::{param_err, Error, Result};
use crate::metrics::{l1_analytic, risk_utility_analytic, tau_analytic_row, total_coverage};
use crate::synthesis::{Family, ZeroPolicy};
use crate::table::CellHistogram;

const SCAN_POINTS: usize = 33;
const MAX_BISECTIONS: usize = 200;

/// Metric to hold at a target value.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "metric", rename_all = "snake_case")]
pub enum TargetMetric {
    Tau3 { k: u64 },
    Tau4 { k: u64 },
    L1 { m: usize },
    TotalCoverage { d: f64 },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FreeParameter {
    Sigma,
    Nu,
}

impl FreeParameter {
    pub fn default_bounds(&self) -> (f64, f64) {
        match self {
            FreeParameter::Sigma => (1e-3, 20.0),
            FreeParameter::Nu => (-3.0, 1.0),
        }
    }

    fn apply(&self, model: CountModel, value: f64) -> CountModel {
        match self {
            FreeParameter::Sigma => model.with_sigma(value),
            FreeParameter::Nu => model.with_nu(value),
        }
    }

    // sigma is searched on a log scale
    fn to_search(self, v: f64) -> f64 {
        match self {
            FreeParameter::Sigma => v.ln(),
            FreeParameter::Nu => v,
        }
    }

    fn value_at(self, s: f64) -> f64 {
        match self {
            FreeParameter::Sigma => s.exp(),
            FreeParameter::Nu => s,
        }
    }
}

/// `model` supplies the family and the fixed parameter; the free one is overwritten.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CalibrationTarget {
    pub model: CountModel,
    pub zero_policy: ZeroPolicy,
    pub metric: TargetMetric,
    pub target: f64,
    pub free: FreeParameter,
    pub bounds: (f64, f64),
    pub tolerance: f64,
}

impl CalibrationTarget {
    pub fn new(model: CountModel, metric: TargetMetric, target: f64, free: FreeParameter) -> Self {
        Self {
            model,
            zero_policy: ZeroPolicy::KeepZero,
            metric,
            target,
            free,
            bounds: free.default_bounds(),
            tolerance: 1e-3,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let (lo, hi) = self.bounds;
        if !(lo.is_finite() && hi.is_finite() && lo < hi) {
            return param_err(format!("bounds must be finite with lower < upper, got [{lo}, {hi}]"));
        }
        if self.free == FreeParameter::Sigma && lo <= 0.0 {
            return param_err("sigma bounds must be positive");
        }
        if !(self.tolerance > 0.0) {
            return param_err("tolerance must be positive");
        }
        if !self.target.is_finite() {
            return param_err("target must be finite");
        }
        match (self.free, self.model) {
            (FreeParameter::Nu, CountModel::Gaf { .. }) => {}
            (FreeParameter::Nu, _) => return param_err("nu can only be calibrated for the gaf family"),
            (FreeParameter::Sigma, CountModel::Poisson) => return param_err("poisson has no sigma to calibrate"),
            _ => {}
        }
        self.zero_policy.validate()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CalibrationResult {
    pub parameter: FreeParameter,
    pub value: f64,
    pub achieved: f64,
    pub iterations: usize,
    /// False when the scan found the metric non-monotone over the bounds.
    pub monotone: bool,
}

/// Value of an analytic metric for `model`.
pub fn evaluate_metric(metric: &TargetMetric, model: &CountModel, zero_policy: &ZeroPolicy, histogram: &CellHistogram) -> Result<f64> {
    match *metric {
        TargetMetric::Tau3 { k } => crate::metrics::tau3_analytic(model, zero_policy, k),
        TargetMetric::Tau4 { k } => tau_analytic_row(model, zero_policy, histogram, k)?
            .tau4
            .ok_or_else(|| Error::Parameter(format!("tau4({k}) is undefined"))),
        TargetMetric::L1 { m } => l1_analytic(model, histogram, m),
        TargetMetric::TotalCoverage { d } => Ok(total_coverage(model, zero_policy, histogram, d)),
    }
}

/// Solve for the free parameter so that the metric is within `tolerance` of the target.
pub fn calibrate(histogram: &CellHistogram, target: &CalibrationTarget) -> Result<CalibrationResult> {
    target.validate()?;
    let free = target.free;
    let eval = |s: f64| {
        let model = free.apply(target.model, free.value_at(s));
        evaluate_metric(&target.metric, &model, &target.zero_policy, histogram)
    };
    let (lo, hi) = (free.to_search(target.bounds.0), free.to_search(target.bounds.1));
    let grid: Vec<f64> = (0..SCAN_POINTS)
        .map(|i| lo + (hi - lo) * i as f64 / (SCAN_POINTS - 1) as f64)
        .collect();
    let values = grid.iter().map(|&s| eval(s)).collect::<Result<Vec<_>>>()?;
    let t = target.target;
    let done = |s: f64, v: f64, iterations, monotone| CalibrationResult {
        parameter: free,
        value: free.value_at(s),
        achieved: v,
        iterations,
        monotone,
    };

    let increasing = values.windows(2).all(|w| w[1] >= w[0]);
    let decreasing = values.windows(2).all(|w| w[1] <= w[0]);
    let monotone = increasing || decreasing;

    for (i, bound) in [(0, target.bounds.0), (SCAN_POINTS - 1, target.bounds.1)] {
        if (values[i] - t).abs() <= target.tolerance && (values[i] == t || monotone) {
            let mut r = done(grid[i], values[i], 0, monotone);
            r.value = bound;
            return Ok(r);
        }
    }

    let low = values.iter().copied().fold(f64::INFINITY, f64::min);
    let high = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if t < low - target.tolerance || t > high + target.tolerance {
        return Err(Error::Unattainable { target: t, low, high });
    }

    // bracket: the whole range when monotone, else the adjacent scan pair
    // straddling the target that lies closest to it
    let bracket = if monotone {
        Some((0, SCAN_POINTS - 1))
    } else {
        (0..SCAN_POINTS - 1)
            .filter(|&i| (values[i] - t) * (values[i + 1] - t) <= 0.0)
            .min_by(|&a, &b| {
                let da = (values[a] - t).abs().min((values[a + 1] - t).abs());
                let db = (values[b] - t).abs().min((values[b + 1] - t).abs());
                da.total_cmp(&db)
            })
            .map(|i| (i, i + 1))
    };

    let Some((i, j)) = bracket else {
        // within tolerance of the range but never crossed: best scan point
        let best = (0..SCAN_POINTS)
            .min_by(|&a, &b| (values[a] - t).abs().total_cmp(&(values[b] - t).abs()))
            .expect("scan is non-empty");
        return Ok(done(grid[best], values[best], 0, monotone));
    };

    let (mut a, mut b) = (grid[i], grid[j]);
    let fa_above = values[i] > t;
    let mut best = if (values[i] - t).abs() < (values[j] - t).abs() {
        (a, values[i])
    } else {
        (b, values[j])
    };
    for iter in 1..=MAX_BISECTIONS {
        let mid = 0.5 * (a + b);
        let v = eval(mid)?;
        if (v - t).abs() < (best.1 - t).abs() {
            best = (mid, v);
        }
        if (v - t).abs() <= target.tolerance {
            return Ok(done(mid, v, iter, monotone));
        }
        if (v > t) == fa_above {
            a = mid;
        } else {
            b = mid;
        }
        if b - a <= f64::EPSILON * (a.abs() + b.abs()) {
            break;
        }
    }
    if (best.1 - t).abs() <= target.tolerance {
        return Ok(done(best.0, best.1, MAX_BISECTIONS, monotone));
    }
    Err(Error::Convergence {
        routine: "calibration bisection",
        iterations: MAX_BISECTIONS,
    })
}

/// One parameter combination of a sweep.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub family: Family,
    pub sigma: Option<f64>,
    pub nu: Option<f64>,
    pub tau1: f64,
    pub tau3: f64,
    /// Also the risk coordinate.
    pub tau4: Option<f64>,
    pub l1: f64,
    pub utility: f64,
}

impl SweepRow {
    pub fn risk(&self) -> Option<f64> {
        self.tau4
    }
}

/// Analytic metrics at `k = 1` for every combination, ordered by family (as
/// given), then sigma, then nu. NBI rows ignore the nu grid and Poisson rows
/// both grids.
pub fn sweep(
    histogram: &CellHistogram,
    sigmas: &[f64],
    nus: &[f64],
    families: &[Family],
    zero_policy: &ZeroPolicy,
    m: usize,
) -> Result<Vec<SweepRow>> {
    if families.is_empty() {
        return param_err("sweep needs at least one family");
    }
    let mut combos: Vec<(Family, CountModel)> = Vec::new();
    for &family in families {
        match family {
            Family::Poisson => combos.push((family, CountModel::Poisson)),
            Family::Nbi => {
                if sigmas.is_empty() {
                    return param_err("sigma grid is empty");
                }
                combos.extend(sigmas.iter().map(|&sigma| (family, CountModel::Nbi { sigma })));
            }
            Family::Gaf => {
                if sigmas.is_empty() || nus.is_empty() {
                    return param_err("sigma and nu grids must be non-empty");
                }
                for &sigma in sigmas {
                    combos.extend(nus.iter().map(|&nu| (family, CountModel::Gaf { sigma, nu })));
                }
            }
        }
    }
    use rayon::prelude::*;
    combos
        .par_iter()
        .map(|&(family, model)| {
            model.validate()?;
            let row = tau_analytic_row(&model, zero_policy, histogram, 1)?;
            let point = risk_utility_analytic(&model, zero_policy, histogram, m)?;
            Ok(SweepRow {
                family,
                sigma: model.sigma(),
                nu: model.nu(),
                tau1: row.tau1,
                tau3: row.tau3.unwrap_or(f64::NAN),
                tau4: row.tau4,
                l1: point.l1,
                utility: point.utility,
            })
        })
        .collect()
}

/// `family,sigma,nu,risk,utility,L1_raw,tau1,tau3` rows.
pub fn write_sweep_csv<W: std::io::Write>(rows: &[SweepRow], sink: W) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(sink);
    wtr.write_record(["family", "sigma", "nu", "risk", "utility", "L1_raw", "tau1", "tau3"])?;
    let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
    for r in rows {
        wtr.write_record([
            r.family.to_string(),
            opt(r.sigma),
            opt(r.nu),
            opt(r.tau4),
            r.utility.to_string(),
            r.l1.to_string(),
            r.tau1.to_string(),
            r.tau3.to_string(),
        ])?;
    }
    wtr.flush()?;
    Ok(())
}

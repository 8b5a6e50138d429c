//! Truncated probability mass functions and half-integer discretization.

use std::io::Write;

use crate::error::{Error, Result};

/// Default bound on the probability mass omitted by truncation.
pub const DEFAULT_TAIL_EPS: f64 = 1e-12;

/// A continuous distribution on `(0, inf)` that can be discretized.
pub trait ContinuousCdf {
    fn cdf(&self, w: f64) -> f64;

    /// `1 - cdf(w)`; override when the upper tail can be computed directly.
    fn sf(&self, w: f64) -> f64 {
        1.0 - self.cdf(w)
    }

    fn mean(&self) -> f64;

    fn variance(&self) -> f64;
}

/// Probabilities on the contiguous support `offset ..= offset + probs.len() - 1`.
#[derive(Clone, Debug, PartialEq)]
pub struct Pmf {
    offset: u64,
    probs: Vec<f64>,
    omitted: f64,
}

impl Pmf {
    pub fn new(offset: u64, probs: Vec<f64>, omitted: f64) -> Result<Self> {
        if probs.iter().any(|p| !(p.is_finite() && *p >= 0.0)) {
            return Err(Error::Parameter("pmf probabilities must be finite and non-negative".into()));
        }
        Ok(Self {
            offset,
            probs,
            omitted: omitted.max(0.0),
        })
    }

    pub fn offset(&self) -> u64 {
        self.offset
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    /// Largest value with stored mass.
    pub fn max_value(&self) -> u64 {
        self.offset + self.probs.len().saturating_sub(1) as u64
    }

    pub fn probabilities(&self) -> &[f64] {
        &self.probs
    }

    /// Upper bound on the mass outside the stored support.
    pub fn omitted_mass(&self) -> f64 {
        self.omitted
    }

    pub fn prob(&self, y: u64) -> f64 {
        y.checked_sub(self.offset)
            .and_then(|i| self.probs.get(i as usize))
            .copied()
            .unwrap_or(0.0)
    }

    pub fn iter(&self) -> impl Iterator<Item = (u64, f64)> + '_ {
        self.probs
            .iter()
            .enumerate()
            .map(move |(i, &p)| (self.offset + i as u64, p))
    }

    pub fn total_mass(&self) -> f64 {
        self.probs.iter().sum()
    }

    /// `P(Y <= y)` over the stored support.
    pub fn cumulative(&self, y: u64) -> f64 {
        self.iter().take_while(|&(v, _)| v <= y).map(|(_, p)| p).sum()
    }

    pub fn mean(&self) -> f64 {
        let mass = self.total_mass();
        self.iter().map(|(y, p)| y as f64 * p).sum::<f64>() / mass
    }

    pub fn variance(&self) -> f64 {
        let mean = self.mean();
        let mass = self.total_mass();
        self.iter()
            .map(|(y, p)| {
                let d = y as f64 - mean;
                d * d * p
            })
            .sum::<f64>()
            / mass
    }

    /// `y,probability` rows.
    pub fn write_csv<W: Write>(&self, sink: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(sink);
        wtr.write_record(["y", "probability"])?;
        for (y, p) in self.iter() {
            wtr.write_record([y.to_string(), format!("{p:e}")])?;
        }
        wtr.flush()?;
        Ok(())
    }
}

/// Mass of the integer `y` under half-integer rounding of `dist`:
/// `F(1/2)` for `y = 0`, otherwise `F(y + 1/2) - F(y - 1/2)`.
///
/// Upper-tail differences are taken on the survival function.
pub fn rounded_mass<D: ContinuousCdf + ?Sized>(dist: &D, y: u64) -> f64 {
    if y == 0 {
        return dist.cdf(0.5);
    }
    let lo = y as f64 - 0.5;
    let hi = y as f64 + 0.5;
    let f_hi = dist.cdf(hi);
    if f_hi <= 0.5 {
        f_hi - dist.cdf(lo)
    } else {
        dist.sf(lo) - dist.sf(hi)
    }
}

/// Discretize a continuous distribution by half-integer rounding, truncating
/// both tails so that the omitted mass is below `tail_eps`.
///
/// The search for the upper truncation point is bounded by Chebyshev's
/// inequality on the continuous distribution.
pub fn discretize<D: ContinuousCdf + ?Sized>(dist: &D, tail_eps: f64) -> Result<Pmf> {
    if !(tail_eps > 0.0 && tail_eps < 1.0) {
        return Err(Error::Parameter(format!("tail_eps must be in (0, 1), got {tail_eps}")));
    }
    let mean = dist.mean();
    let var = dist.variance();
    if !(mean.is_finite() && var.is_finite() && var >= 0.0) {
        return Err(Error::Parameter("distribution moments are not finite".into()));
    }
    let half_eps = 0.5 * tail_eps;
    let chebyshev = mean + (var / half_eps).sqrt() + 1.0;
    if chebyshev > 1e15 {
        return Err(Error::Parameter(format!(
            "support bound {chebyshev:e} is too large to tabulate"
        )));
    }
    let centre = mean.round().max(0.0) as u64;

    // upper: smallest y >= centre with sf(y + 1/2) < half_eps
    let upper_ok = |y: u64| dist.sf(y as f64 + 0.5) < half_eps;
    let mut lo = centre;
    let mut step = 1u64;
    let mut hi = centre;
    while !upper_ok(hi) {
        lo = hi;
        hi = hi.saturating_add(step);
        step = step.saturating_mul(2);
        if hi as f64 > 2.0 * chebyshev {
            return Err(Error::Parameter(
                "survival function does not decay: cdf is not a valid distribution".into(),
            ));
        }
    }
    while lo < hi {
        let mid = lo + (hi - lo) / 2;
        if upper_ok(mid) {
            hi = mid;
        } else {
            lo = mid + 1;
        }
    }
    let upper = hi;

    // lower: largest y <= centre with cdf(y - 1/2) < half_eps
    let lower_ok = |y: u64| y == 0 || dist.cdf(y as f64 - 0.5) < half_eps;
    let (mut lo, mut hi) = (0u64, centre.min(upper));
    while lo < hi {
        let mid = lo + (hi - lo).div_ceil(2);
        if lower_ok(mid) {
            lo = mid;
        } else {
            hi = mid - 1;
        }
    }
    let lower = lo;

    let mut probs = Vec::with_capacity((upper - lower + 1) as usize);
    for y in lower..=upper {
        let p = rounded_mass(dist, y);
        if p < -1e-14 || p.is_nan() {
            return Err(Error::Parameter(format!(
                "cdf is not monotone near y = {y} (mass {p:e})"
            )));
        }
        probs.push(p.max(0.0));
    }
    let omitted = dist.sf(upper as f64 + 0.5)
        + if lower > 0 {
            dist.cdf(lower as f64 - 0.5)
        } else {
            0.0
        };
    Pmf::new(lower, probs, omitted)
}

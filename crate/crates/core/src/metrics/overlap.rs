//! Confidence-interval overlap between original and synthetic model fits.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::loglinear::FitResult;

/// Average of the shared length relative to each interval, floored at 0.
/// `None` if either interval has zero or negative width.
pub fn interval_overlap(lo_o: f64, hi_o: f64, lo_s: f64, hi_s: f64) -> Option<f64> {
    let wo = hi_o - lo_o;
    let ws = hi_s - lo_s;
    if !(wo > 0.0 && ws > 0.0) {
        return None;
    }
    let shared = hi_o.min(hi_s) - lo_o.max(lo_s);
    Some((0.5 * (shared / wo + shared / ws)).max(0.0))
}

/// Overlap for every term and replicate.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OverlapReport {
    pub terms: Vec<String>,
    /// `values[r][t]` for replicate `r`, term `t`.
    pub values: Vec<Vec<Option<f64>>>,
    pub median: Option<f64>,
}

impl OverlapReport {
    /// `replicate,term,overlap` rows; undefined overlaps are left blank.
    pub fn write_csv<W: std::io::Write>(&self, sink: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(sink);
        wtr.write_record(["replicate", "term", "overlap"])?;
        for (r, row) in self.values.iter().enumerate() {
            for (term, v) in self.terms.iter().zip(row) {
                wtr.write_record([r.to_string(), term.clone(), v.map(|x| x.to_string()).unwrap_or_default()])?;
            }
        }
        wtr.flush()?;
        Ok(())
    }
}

pub fn median(values: &mut [f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    values.sort_by(f64::total_cmp);
    let n = values.len();
    Some(if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    })
}

pub fn ci_overlap(original: &FitResult, synthetic: &[FitResult]) -> Result<OverlapReport> {
    let mut values = Vec::with_capacity(synthetic.len());
    for (r, fit) in synthetic.iter().enumerate() {
        if fit.terms != original.terms {
            return Err(Error::Alignment(format!("replicate {r} was fitted with different model terms")));
        }
        values.push(
            (0..original.terms.len())
                .map(|t| interval_overlap(original.ci_lower[t], original.ci_upper[t], fit.ci_lower[t], fit.ci_upper[t]))
                .collect::<Vec<_>>(),
        );
    }
    let mut defined: Vec<f64> = values.iter().flatten().flatten().copied().collect();
    Ok(OverlapReport {
        terms: original.terms.clone(),
        median: median(&mut defined),
        values,
    })
}

//! Joint frequencies of (original count, synthetic count) pairs, pooled over
//! replicates. Read by original count it gives the distribution of synthetic
//! counts for each original size; read by synthetic count, the reverse.

use std::collections::BTreeMap;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::synthesis::SyntheticEnsemble;
use crate::table::ContingencyTable;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CountTransitions {
    /// Counts above `cap` are pooled into `cap + 1`.
    pub cap: u64,
    pub pairs: BTreeMap<(u64, u64), u64>,
}

pub fn count_transitions(original: &ContingencyTable, ensemble: &SyntheticEnsemble, cap: u64) -> Result<CountTransitions> {
    ensemble.check_aligned(original)?;
    let bucket = |c: u64| c.min(cap.saturating_add(1));
    let mut pairs = BTreeMap::new();
    for rep in ensemble.replicates() {
        for (&f, &s) in original.counts().iter().zip(rep) {
            *pairs.entry((bucket(f), bucket(s))).or_insert(0u64) += 1;
        }
    }
    Ok(CountTransitions { cap, pairs })
}

impl CountTransitions {
    fn label(&self, v: u64) -> String {
        if v > self.cap {
            format!("{}+", self.cap + 1)
        } else {
            v.to_string()
        }
    }

    fn write<W: Write>(&self, sink: W, by_original: bool) -> Result<()> {
        let mut margins: BTreeMap<u64, u64> = BTreeMap::new();
        for (&(o, s), &n) in &self.pairs {
            *margins.entry(if by_original { o } else { s }).or_insert(0) += n;
        }
        let mut wtr = csv::Writer::from_writer(sink);
        if by_original {
            wtr.write_record(["original", "synthetic", "frequency", "proportion"])?;
        } else {
            wtr.write_record(["synthetic", "original", "frequency", "proportion"])?;
        }
        let mut rows: Vec<(u64, u64, u64)> = self
            .pairs
            .iter()
            .map(|(&(o, s), &n)| if by_original { (o, s, n) } else { (s, o, n) })
            .collect();
        rows.sort_unstable();
        for (given, other, n) in rows {
            let p = n as f64 / margins[&given] as f64;
            wtr.write_record([self.label(given), self.label(other), n.to_string(), p.to_string()])?;
        }
        wtr.flush()?;
        Ok(())
    }

    /// Distribution of synthetic counts for each original count.
    pub fn write_by_original<W: Write>(&self, sink: W) -> Result<()> {
        self.write(sink, true)
    }

    /// Distribution of original counts for each synthetic count.
    pub fn write_by_synthetic<W: Write>(&self, sink: W) -> Result<()> {
        self.write(sink, false)
    }
}

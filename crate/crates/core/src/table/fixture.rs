//! Synthetic fixture tables with a prescribed cell-size histogram.
//!
//! Cell sizes are allocated by quota (largest-remainder rounding of
//! `proportion * K`) and then scattered over the cells by a seeded shuffle.
//! Inter-variable dependence is not modelled; only the size distribution is.

use std::io::Read;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::synthesis::stream::CellStream;

use super::{checked_total, ContingencyTable, TableSchema, Variable};

/// Sizes at or above `min_size`, drawn as `min_size + Geometric` with the given mean.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TailBucket {
    pub min_size: u64,
    pub proportion: f64,
    pub mean: f64,
}

/// Target proportions per exact size (sizes >= 1) plus an optional open tail.
/// Size 0 takes the remaining mass.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TargetHistogram {
    pub sizes: Vec<(u64, f64)>,
    pub tail: Option<TailBucket>,
}

impl TargetHistogram {
    pub fn new(sizes: Vec<(u64, f64)>, tail: Option<TailBucket>) -> Result<Self> {
        let target = Self { sizes, tail };
        target.validate()?;
        Ok(target)
    }

    fn validate(&self) -> Result<()> {
        let mut seen = std::collections::BTreeSet::new();
        for &(size, p) in &self.sizes {
            if size == 0 {
                return Err(Error::Parameter("target sizes must be >= 1; size 0 is implied".into()));
            }
            if !(p.is_finite() && p >= 0.0) {
                return Err(Error::Parameter(format!("invalid proportion {p} for size {size}")));
            }
            if !seen.insert(size) {
                return Err(Error::Parameter(format!("size {size} listed twice")));
            }
        }
        if let Some(tail) = &self.tail {
            if !(tail.proportion.is_finite() && tail.proportion >= 0.0) {
                return Err(Error::Parameter("invalid tail proportion".into()));
            }
            if !(tail.mean.is_finite() && tail.mean >= tail.min_size as f64) {
                return Err(Error::Parameter(format!(
                    "tail mean {} must be at least the tail start {}",
                    tail.mean, tail.min_size
                )));
            }
            if let Some(&max) = seen.iter().next_back() {
                if max >= tail.min_size {
                    return Err(Error::Parameter("exact sizes overlap the tail bucket".into()));
                }
            }
        }
        let mass = self.nonzero_mass();
        if mass > 1.0 + 1e-9 {
            return Err(Error::Infeasible(format!(
                "nonzero size proportions sum to {mass} > 1"
            )));
        }
        Ok(())
    }

    /// Total proportion of nonzero cells.
    pub fn nonzero_mass(&self) -> f64 {
        self.sizes.iter().map(|&(_, p)| p).sum::<f64>() + self.tail.as_ref().map_or(0.0, |t| t.proportion)
    }

    /// Parse a CSV with a `size` column and either `proportion` or `frequency`.
    ///
    /// A size written `N+` (e.g. `11+`) defines the open tail, whose mean size
    /// is `tail_mean`. With `frequency`, proportions are frequencies over their
    /// sum, including any size-0 row.
    pub fn from_csv<R: Read>(source: R, tail_mean: f64) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(source);
        let headers = rdr.headers()?.clone();
        let size_col = headers.iter().position(|h| h == "size");
        let prop_col = headers.iter().position(|h| h == "proportion");
        let freq_col = headers.iter().position(|h| h == "frequency");
        let (size_col, value_col, is_freq) = match (size_col, prop_col, freq_col) {
            (Some(s), Some(p), _) => (s, p, false),
            (Some(s), None, Some(f)) => (s, f, true),
            _ => {
                return Err(Error::Record {
                    row: 0,
                    column: "size".into(),
                    message: "expected columns `size` and `proportion` or `frequency`".into(),
                })
            }
        };

        let mut rows: Vec<(u64, bool, f64)> = Vec::new();
        for (i, rec) in rdr.records().enumerate() {
            let rec = rec?;
            let raw_size = rec.get(size_col).unwrap_or("");
            let (digits, open) = match raw_size.strip_suffix('+') {
                Some(d) => (d, true),
                None => (raw_size, false),
            };
            let size: u64 = digits.parse().map_err(|_| Error::Record {
                row: i + 1,
                column: "size".into(),
                message: format!("bad size `{raw_size}`"),
            })?;
            let raw_value = rec.get(value_col).unwrap_or("").replace(',', "");
            let value: f64 = raw_value.parse().map_err(|_| Error::Record {
                row: i + 1,
                column: headers[value_col].to_string(),
                message: format!("bad value `{raw_value}`"),
            })?;
            rows.push((size, open, value));
        }

        let denom = if is_freq {
            rows.iter().map(|r| r.2).sum::<f64>()
        } else {
            1.0
        };
        if denom <= 0.0 {
            return Err(Error::Parameter("frequencies sum to zero".into()));
        }
        let mut sizes = Vec::new();
        let mut tail = None;
        for (size, open, value) in rows {
            let p = value / denom;
            if open {
                if tail.is_some() {
                    return Err(Error::Parameter("more than one open tail row".into()));
                }
                tail = Some(TailBucket {
                    min_size: size,
                    proportion: p,
                    mean: tail_mean.max(size as f64),
                });
            } else if size > 0 {
                sizes.push((size, p));
            }
        }
        Self::new(sizes, tail)
    }
}

/// A generated fixture: schema, table and the inputs that produced it.
#[derive(Clone, Debug)]
pub struct Fixture {
    pub table: ContingencyTable,
    pub target: TargetHistogram,
    pub seed: u64,
}

#[derive(Serialize)]
struct FixtureSidecar<'a> {
    schema: &'a TableSchema,
    seed: u64,
    target: &'a TargetHistogram,
    num_cells: usize,
    total: u64,
}

impl Fixture {
    pub fn microdata(&self) -> MicrodataRows<'_> {
        MicrodataRows::new(&self.table)
    }

    /// JSON recording schema, seed and target histogram.
    pub fn sidecar_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&FixtureSidecar {
            schema: self.table.schema(),
            seed: self.seed,
            target: &self.target,
            num_cells: self.table.num_cells(),
            total: self.table.total(),
        })?)
    }
}

/// Individuals of a table as category-index tuples, cells in canonical order.
pub struct MicrodataRows<'a> {
    table: &'a ContingencyTable,
    cell: usize,
    remaining: u64,
}

impl<'a> MicrodataRows<'a> {
    pub fn new(table: &'a ContingencyTable) -> Self {
        let remaining = table.counts().first().copied().unwrap_or(0);
        Self {
            table,
            cell: 0,
            remaining,
        }
    }
}

impl Iterator for MicrodataRows<'_> {
    type Item = Vec<usize>;

    fn next(&mut self) -> Option<Vec<usize>> {
        let counts = self.table.counts();
        while self.remaining == 0 {
            self.cell += 1;
            if self.cell >= counts.len() {
                return None;
            }
            self.remaining = counts[self.cell];
        }
        self.remaining -= 1;
        Some(self.table.schema().categories_of(self.cell))
    }
}

fn quotas(target: &TargetHistogram, num_cells: usize) -> Result<Vec<u64>> {
    let k = num_cells as f64;
    let mut props: Vec<f64> = target.sizes.iter().map(|&(_, p)| p).collect();
    if let Some(t) = &target.tail {
        props.push(t.proportion);
    }
    let wanted: f64 = props.iter().sum::<f64>() * k;
    let total = wanted.round() as u64;
    if total > num_cells as u64 {
        return Err(Error::Infeasible(format!(
            "target needs {total} nonzero cells but the schema has {num_cells}"
        )));
    }
    let mut floors: Vec<u64> = props.iter().map(|p| (p * k).floor() as u64).collect();
    let assigned: u64 = floors.iter().sum();
    let mut order: Vec<usize> = (0..props.len()).collect();
    order.sort_by(|&a, &b| {
        let ra = props[a] * k - floors[a] as f64;
        let rb = props[b] * k - floors[b] as f64;
        rb.total_cmp(&ra).then(a.cmp(&b))
    });
    let extra = total.saturating_sub(assigned) as usize;
    for &i in order.iter().cycle().take(extra) {
        floors[i] += 1;
    }
    Ok(floors)
}

/// Generate a table whose cell-size histogram follows `target`.
pub fn gen_fixture(schema: &TableSchema, target: &TargetHistogram, seed: u64) -> Result<Fixture> {
    target.validate()?;
    let num_cells = schema.num_cells();
    let quota = quotas(target, num_cells)?;
    let mut rng = CellStream::new(seed, u64::MAX, 0);

    let mut counts = Vec::with_capacity(num_cells);
    for (&(size, _), &q) in target.sizes.iter().zip(&quota) {
        counts.extend(std::iter::repeat_n(size, q as usize));
    }
    if let Some(tail) = &target.tail {
        let q = quota[target.sizes.len()];
        let excess = tail.mean - tail.min_size as f64;
        let ln_fail = if excess > 0.0 {
            (excess / (1.0 + excess)).ln()
        } else {
            f64::NEG_INFINITY
        };
        for _ in 0..q {
            let extra = if ln_fail == f64::NEG_INFINITY {
                0
            } else {
                let u: f64 = 1.0 - rng.random::<f64>();
                (u.ln() / ln_fail).floor() as u64
            };
            counts.push(tail.min_size.saturating_add(extra));
        }
    }
    counts.resize(num_cells, 0);
    counts.shuffle(&mut rng);
    checked_total(&counts)?;

    Ok(Fixture {
        table: ContingencyTable::new(schema.clone(), counts)?,
        target: target.clone(),
        seed,
    })
}

/// Five-variable schema shaped like a school census extract:
/// geography (326), ethnicity (20), sex (4), age (19), first language (7).
pub fn school_census_schema() -> TableSchema {
    fn labels(prefix: &str, n: usize) -> Vec<String> {
        let width = n.to_string().len();
        (1..=n).map(|i| format!("{prefix}{i:0width$}")).collect()
    }
    TableSchema::new(vec![
        Variable::new("GEOGRAPHY", labels("LA", 326)),
        Variable::new("ETHNICITY", labels("ETH", 20)),
        Variable::new("SEX", labels("SEX", 4)),
        Variable::new("AGE", labels("AGE", 19)),
        Variable::new("LANGUAGE", labels("LANG", 7)),
    ])
    .expect("static schema is valid")
}

/// Cell-size frequencies of the school-census-like table over 3,468,640 cells,
/// sizes 1..=10 exact and an open `11+` bucket with mean size `tail_mean`.
pub fn school_census_target(tail_mean: f64) -> TargetHistogram {
    const TOTAL: f64 = 3_468_640.0;
    const FREQ: [(u64, f64); 10] = [
        (1, 119_917.0),
        (2, 51_412.0),
        (3, 25_952.0),
        (4, 19_450.0),
        (5, 13_076.0),
        (6, 10_345.0),
        (7, 7_947.0),
        (8, 7_077.0),
        (9, 5_809.0),
        (10, 5_163.0),
    ];
    TargetHistogram {
        sizes: FREQ.iter().map(|&(s, f)| (s, f / TOTAL)).collect(),
        tail: Some(TailBucket {
            min_size: 11,
            proportion: 67_512.0 / TOTAL,
            mean: tail_mean,
        }),
    }
}

//! Saturated-model synthesis: every cell count `f_i` is replaced by a draw
//! from the configured family with location `mu_i = f_i`.
//!
//! Zero cells follow a [`ZeroPolicy`]. Draws for replicate `r`, cell `i`
//! come from [`CellStream::new`]`(seed, r, i)`, so an ensemble does not depend
//! on the number of threads used to build it.

pub mod stream;

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::distributions::CountModel;
use crate::error::{param_err, Error, Result};
use crate::table::{ContingencyTable, TableSchema};

pub use stream::{stream_seed, CellStream};

const CHUNK: usize = 1 << 14;

/// Count distribution family.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Family {
    Poisson,
    Nbi,
    Gaf,
}

impl Family {
    pub fn as_str(&self) -> &'static str {
        match self {
            Family::Poisson => "poisson",
            Family::Nbi => "nbi",
            Family::Gaf => "gaf",
        }
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Family {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "poisson" => Ok(Family::Poisson),
            "nbi" => Ok(Family::Nbi),
            "gaf" => Ok(Family::Gaf),
            other => param_err(format!("unknown family `{other}` (expected poisson, nbi or gaf)")),
        }
    }
}

/// Treatment of cells whose original count is zero.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "policy", rename_all = "snake_case")]
pub enum ZeroPolicy {
    /// Zero cells stay zero.
    KeepZero,
    /// Zero cells are drawn from the family with location `alpha`.
    Pseudocount { alpha: f64 },
    /// Zero cells become one with probability `p`.
    Bernoulli { p: f64 },
}

impl ZeroPolicy {
    pub fn validate(&self) -> Result<()> {
        match *self {
            ZeroPolicy::KeepZero => Ok(()),
            ZeroPolicy::Pseudocount { alpha } if alpha > 0.0 && alpha.is_finite() => Ok(()),
            ZeroPolicy::Pseudocount { alpha } => param_err(format!("pseudocount must be positive, got {alpha}")),
            ZeroPolicy::Bernoulli { p } if (0.0..=1.0).contains(&p) => Ok(()),
            ZeroPolicy::Bernoulli { p } => param_err(format!("bernoulli probability must be in [0, 1], got {p}")),
        }
    }

    /// Distribution of a synthetic zero cell: `P(Y = y)`.
    pub fn pmf(&self, model: &CountModel, y: u64) -> Result<f64> {
        Ok(match *self {
            ZeroPolicy::KeepZero => f64::from(y == 0),
            ZeroPolicy::Pseudocount { alpha } => model.pmf(y, alpha)?,
            ZeroPolicy::Bernoulli { p } => match y {
                0 => 1.0 - p,
                1 => p,
                _ => 0.0,
            },
        })
    }

    /// Variance of a synthetic zero cell.
    pub fn variance(&self, model: &CountModel) -> f64 {
        match *self {
            ZeroPolicy::KeepZero => 0.0,
            ZeroPolicy::Pseudocount { alpha } => model.variance(alpha),
            ZeroPolicy::Bernoulli { p } => p * (1.0 - p),
        }
    }
}

impl fmt::Display for ZeroPolicy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ZeroPolicy::KeepZero => f.write_str("keep"),
            ZeroPolicy::Pseudocount { alpha } => write!(f, "alpha={alpha}"),
            ZeroPolicy::Bernoulli { p } => write!(f, "bernoulli={p}"),
        }
    }
}

/// Parses `keep`, `alpha=<a>` or `bernoulli=<p>`.
impl FromStr for ZeroPolicy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let policy = if s.eq_ignore_ascii_case("keep") || s.eq_ignore_ascii_case("keep_zero") {
            ZeroPolicy::KeepZero
        } else if let Some((key, value)) = s.split_once('=') {
            let v: f64 = value
                .trim()
                .parse()
                .map_err(|_| Error::Parameter(format!("bad zero policy value in `{s}`")))?;
            match key.trim().to_ascii_lowercase().as_str() {
                "alpha" | "pseudocount" => ZeroPolicy::Pseudocount { alpha: v },
                "bernoulli" | "p" => ZeroPolicy::Bernoulli { p: v },
                _ => return param_err(format!("unknown zero policy `{s}`")),
            }
        } else {
            return param_err(format!("unknown zero policy `{s}` (expected keep, alpha=<a> or bernoulli=<p>)"));
        };
        policy.validate()?;
        Ok(policy)
    }
}

/// Everything that determines an ensemble besides the original table.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MechanismConfig {
    pub family: Family,
    pub sigma: Option<f64>,
    pub nu: Option<f64>,
    pub zero_policy: ZeroPolicy,
    pub m: usize,
    pub master_seed: u64,
}

impl MechanismConfig {
    pub fn new(family: Family, sigma: Option<f64>, nu: Option<f64>, zero_policy: ZeroPolicy, m: usize, master_seed: u64) -> Result<Self> {
        let config = Self {
            family,
            sigma,
            nu,
            zero_policy,
            m,
            master_seed,
        };
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        if self.m == 0 {
            return param_err("m must be at least 1");
        }
        self.zero_policy.validate()?;
        self.model().map(|_| ())
    }

    /// The count model, checked for completeness.
    pub fn model(&self) -> Result<CountModel> {
        let model = match self.family {
            Family::Poisson => CountModel::Poisson,
            Family::Nbi => CountModel::Nbi {
                sigma: self.sigma.ok_or_else(|| Error::Parameter("nbi needs sigma".into()))?,
            },
            Family::Gaf => CountModel::Gaf {
                sigma: self.sigma.ok_or_else(|| Error::Parameter("gaf needs sigma".into()))?,
                nu: self.nu.ok_or_else(|| Error::Parameter("gaf needs nu".into()))?,
            },
        };
        model.validate()?;
        Ok(model)
    }
}

/// Counters gathered while synthesizing.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SynthesisStats {
    /// Draws that exceeded the count ceiling and were clamped.
    pub clamped: u64,
    /// Zero-cell draws over all replicates.
    pub zero_cell_draws: u64,
    /// Zero-cell draws that came out nonzero.
    pub zeros_converted: u64,
    /// Largest synthetic count produced for an original zero.
    pub max_zero_draw: u64,
}

impl SynthesisStats {
    fn merge(self, other: Self) -> Self {
        Self {
            clamped: self.clamped + other.clamped,
            zero_cell_draws: self.zero_cell_draws + other.zero_cell_draws,
            zeros_converted: self.zeros_converted + other.zeros_converted,
            max_zero_draw: self.max_zero_draw.max(other.max_zero_draw),
        }
    }

    /// Fraction of zero-cell draws that became nonzero.
    pub fn conversion_rate(&self) -> Option<f64> {
        (self.zero_cell_draws > 0).then(|| self.zeros_converted as f64 / self.zero_cell_draws as f64)
    }
}

/// `m` synthetic tables aligned cell-for-cell with the original.
#[derive(Clone, Debug, PartialEq)]
pub struct SyntheticEnsemble {
    schema: Arc<TableSchema>,
    original_hash: String,
    config: MechanismConfig,
    replicates: Vec<Vec<u64>>,
    stats: SynthesisStats,
}

impl SyntheticEnsemble {
    /// Assemble an ensemble from stored replicates.
    pub fn from_parts(
        schema: Arc<TableSchema>,
        original_hash: String,
        config: MechanismConfig,
        replicates: Vec<Vec<u64>>,
        stats: SynthesisStats,
    ) -> Result<Self> {
        if replicates.len() != config.m {
            return Err(Error::Alignment(format!(
                "config has m = {} but {} replicates were supplied",
                config.m,
                replicates.len()
            )));
        }
        if let Some(bad) = replicates.iter().position(|r| r.len() != schema.num_cells()) {
            return Err(Error::Alignment(format!(
                "replicate {bad} has {} cells, schema has {}",
                replicates[bad].len(),
                schema.num_cells()
            )));
        }
        Ok(Self {
            schema,
            original_hash,
            config,
            replicates,
            stats,
        })
    }

    pub fn schema(&self) -> &TableSchema {
        &self.schema
    }

    pub fn original_hash(&self) -> &str {
        &self.original_hash
    }

    pub fn config(&self) -> &MechanismConfig {
        &self.config
    }

    pub fn stats(&self) -> &SynthesisStats {
        &self.stats
    }

    pub fn num_replicates(&self) -> usize {
        self.replicates.len()
    }

    pub fn num_cells(&self) -> usize {
        self.schema.num_cells()
    }

    pub fn replicates(&self) -> &[Vec<u64>] {
        &self.replicates
    }

    pub fn replicate(&self, r: usize) -> &[u64] {
        &self.replicates[r]
    }

    /// Key of the stream used for replicate `r`, cell 0; each cell's key is
    /// `stream_seed(master_seed, r, cell)`.
    pub fn replicate_seed(&self, r: usize) -> u64 {
        stream_seed(self.config.master_seed, r as u64, 0)
    }

    pub fn to_table(&self, r: usize) -> Result<ContingencyTable> {
        ContingencyTable::new(self.schema.clone(), self.replicates[r].clone())
    }

    /// Per-cell average over replicates.
    pub fn mean_counts(&self) -> Vec<f64> {
        let m = self.replicates.len() as f64;
        (0..self.num_cells())
            .into_par_iter()
            .with_min_len(CHUNK)
            .map(|k| self.replicates.iter().map(|r| r[k] as f64).sum::<f64>() / m)
            .collect()
    }

    /// Check that `original` is the table this ensemble was built from.
    pub fn check_aligned(&self, original: &ContingencyTable) -> Result<()> {
        if original.schema() != self.schema() {
            return Err(Error::Alignment("schemas differ".into()));
        }
        if original.content_hash() != self.original_hash {
            return Err(Error::Alignment("original table hash does not match the ensemble".into()));
        }
        Ok(())
    }
}

fn draw_cell(model: &CountModel, policy: &ZeroPolicy, f: u64, rng: &mut CellStream, stats: &mut SynthesisStats) -> Result<u64> {
    if f > 0 {
        let d = model.sample(f as f64, rng)?;
        stats.clamped += u64::from(d.clamped);
        return Ok(d.count);
    }
    let y = match *policy {
        ZeroPolicy::KeepZero => 0,
        ZeroPolicy::Pseudocount { alpha } => {
            let d = model.sample(alpha, rng)?;
            stats.clamped += u64::from(d.clamped);
            d.count
        }
        ZeroPolicy::Bernoulli { p } => u64::from(rng.random::<f64>() < p),
    };
    stats.zero_cell_draws += 1;
    if y > 0 {
        stats.zeros_converted += 1;
        stats.max_zero_draw = stats.max_zero_draw.max(y);
    }
    Ok(y)
}

/// Draw `config.m` synthetic replicates of `table`.
///
/// Runs on the current rayon pool; the result is identical for any pool size.
pub fn synthesize(table: &ContingencyTable, config: &MechanismConfig) -> Result<SyntheticEnsemble> {
    config.validate()?;
    let model = config.model()?;
    let policy = config.zero_policy;
    let counts = table.counts();
    let seed = config.master_seed;

    let mut replicates = vec![vec![0u64; counts.len()]; config.m];
    let stats = replicates
        .par_iter_mut()
        .enumerate()
        .map(|(r, out)| {
            out.par_chunks_mut(CHUNK)
                .enumerate()
                .map(|(c, chunk)| {
                    let base = c * CHUNK;
                    let mut stats = SynthesisStats::default();
                    for (j, slot) in chunk.iter_mut().enumerate() {
                        let cell = base + j;
                        let f = counts[cell];
                        if f == 0 && policy == ZeroPolicy::KeepZero {
                            stats.zero_cell_draws += 1;
                            continue;
                        }
                        let mut rng = CellStream::new(seed, r as u64, cell as u64);
                        *slot = draw_cell(&model, &policy, f, &mut rng, &mut stats)?;
                    }
                    Ok::<_, Error>(stats)
                })
                .try_reduce(SynthesisStats::default, |a, b| Ok(a.merge(b)))
        })
        .try_reduce(SynthesisStats::default, |a, b| Ok(a.merge(b)))?;

    SyntheticEnsemble::from_parts(table.shared_schema(), table.content_hash(), config.clone(), replicates, stats)
}

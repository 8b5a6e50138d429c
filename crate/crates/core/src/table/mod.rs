//! Contingency tables over a fixed cross-classification.
//!
//! Cells are stored densely in canonical row-major order: the last schema
//! variable varies fastest. For a schema with category counts `(d_0, .., d_{p-1})`
//! the cell holding category indices `(c_0, .., c_{p-1})` sits at
//!
//! ```text
//! k = c_0 * (d_1 * .. * d_{p-1}) + c_1 * (d_2 * .. * d_{p-1}) + .. + c_{p-1}
//! ```

mod fixture;
mod ingest;

use std::collections::{BTreeMap, HashMap};
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

pub use fixture::{
    gen_fixture, school_census_schema, school_census_target, Fixture, MicrodataRows, TailBucket,
    TargetHistogram,
};
pub(crate) use ingest::column_map;
pub use ingest::{
    ingest_aggregated, ingest_microdata, read_aggregated_csv, read_microdata_csv, write_aggregated,
    write_microdata,
};

/// A categorical variable and its ordered category labels.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Variable {
    pub name: String,
    pub categories: Vec<String>,
}

impl Variable {
    pub fn new<S: Into<String>>(name: impl Into<String>, categories: impl IntoIterator<Item = S>) -> Self {
        Self {
            name: name.into(),
            categories: categories.into_iter().map(Into::into).collect(),
        }
    }
}

#[derive(Deserialize, Serialize)]
struct RawSchema {
    variables: Vec<Variable>,
}

/// Ordered list of variables defining the cell space.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(try_from = "RawSchema", into = "RawSchema")]
pub struct TableSchema {
    variables: Vec<Variable>,
    strides: Vec<usize>,
    num_cells: usize,
    lookup: Vec<HashMap<String, usize>>,
}

impl PartialEq for TableSchema {
    fn eq(&self, other: &Self) -> bool {
        self.variables == other.variables
    }
}

impl Eq for TableSchema {}

impl TryFrom<RawSchema> for TableSchema {
    type Error = Error;

    fn try_from(raw: RawSchema) -> Result<Self> {
        Self::new(raw.variables)
    }
}

impl From<TableSchema> for RawSchema {
    fn from(schema: TableSchema) -> Self {
        RawSchema {
            variables: schema.variables,
        }
    }
}

impl TableSchema {
    pub fn new(variables: Vec<Variable>) -> Result<Self> {
        if variables.is_empty() {
            return Err(Error::Schema("schema has no variables".into()));
        }
        let mut names = HashMap::new();
        let mut lookup = Vec::with_capacity(variables.len());
        for (i, var) in variables.iter().enumerate() {
            if names.insert(var.name.as_str(), i).is_some() {
                return Err(Error::Schema(format!("duplicate variable name `{}`", var.name)));
            }
            if var.categories.len() < 2 {
                return Err(Error::Schema(format!(
                    "variable `{}` needs at least 2 categories, has {}",
                    var.name,
                    var.categories.len()
                )));
            }
            let mut cats = HashMap::with_capacity(var.categories.len());
            for (c, label) in var.categories.iter().enumerate() {
                if cats.insert(label.clone(), c).is_some() {
                    return Err(Error::Schema(format!(
                        "duplicate category `{label}` in variable `{}`",
                        var.name
                    )));
                }
            }
            lookup.push(cats);
        }

        let mut num_cells: u64 = 1;
        for var in &variables {
            num_cells = num_cells
                .checked_mul(var.categories.len() as u64)
                .ok_or_else(|| Error::Schema("cell space size overflows 64 bits".into()))?;
        }
        let num_cells = usize::try_from(num_cells)
            .map_err(|_| Error::Schema("cell space size exceeds addressable memory".into()))?;

        let mut strides = vec![1usize; variables.len()];
        for i in (0..variables.len() - 1).rev() {
            strides[i] = strides[i + 1] * variables[i + 1].categories.len();
        }

        Ok(Self {
            variables,
            strides,
            num_cells,
            lookup,
        })
    }

    pub fn variables(&self) -> &[Variable] {
        &self.variables
    }

    /// Number of cells `K`.
    pub fn num_cells(&self) -> usize {
        self.num_cells
    }

    pub fn dims(&self) -> Vec<usize> {
        self.variables.iter().map(|v| v.categories.len()).collect()
    }

    pub fn variable_index(&self, name: &str) -> Option<usize> {
        self.variables.iter().position(|v| v.name == name)
    }

    pub fn category_index(&self, variable: usize, label: &str) -> Option<usize> {
        self.lookup.get(variable)?.get(label).copied()
    }

    /// Canonical index of a category tuple.
    ///
    /// Panics if the tuple has the wrong length or an index is out of range.
    pub fn cell_index(&self, categories: &[usize]) -> usize {
        assert_eq!(categories.len(), self.variables.len(), "category tuple length");
        categories
            .iter()
            .zip(&self.strides)
            .zip(&self.variables)
            .map(|((&c, &stride), var)| {
                assert!(c < var.categories.len(), "category index out of range");
                c * stride
            })
            .sum()
    }

    /// Inverse of [`cell_index`](Self::cell_index).
    pub fn categories_of(&self, cell: usize) -> Vec<usize> {
        assert!(cell < self.num_cells, "cell index out of range");
        let mut rest = cell;
        self.strides
            .iter()
            .map(|&stride| {
                let c = rest / stride;
                rest %= stride;
                c
            })
            .collect()
    }

    pub fn labels_of(&self, cell: usize) -> Vec<&str> {
        self.categories_of(cell)
            .into_iter()
            .zip(&self.variables)
            .map(|(c, v)| v.categories[c].as_str())
            .collect()
    }

    /// Sub-schema keeping the named variables in schema order, plus their positions.
    pub fn subset(&self, names: &[&str]) -> Result<(TableSchema, Vec<usize>)> {
        if names.is_empty() {
            return Err(Error::Schema("variable subset is empty".into()));
        }
        let mut keep = Vec::with_capacity(names.len());
        for name in names {
            let idx = self
                .variable_index(name)
                .ok_or_else(|| Error::Schema(format!("unknown variable `{name}`")))?;
            if !keep.contains(&idx) {
                keep.push(idx);
            }
        }
        keep.sort_unstable();
        let vars = keep.iter().map(|&i| self.variables[i].clone()).collect();
        Ok((TableSchema::new(vars)?, keep))
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }
}

/// Dense table of non-negative counts aligned with a [`TableSchema`].
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ContingencyTable {
    schema: Arc<TableSchema>,
    counts: Vec<u64>,
    total: u64,
}

impl ContingencyTable {
    pub fn new(schema: impl Into<Arc<TableSchema>>, counts: Vec<u64>) -> Result<Self> {
        let schema = schema.into();
        if counts.len() != schema.num_cells() {
            return Err(Error::Schema(format!(
                "expected {} cells, got {}",
                schema.num_cells(),
                counts.len()
            )));
        }
        let total = checked_total(&counts)?;
        Ok(Self {
            schema,
            counts,
            total,
        })
    }

    pub fn zeros(schema: impl Into<Arc<TableSchema>>) -> Self {
        let schema = schema.into();
        let counts = vec![0; schema.num_cells()];
        Self {
            schema,
            counts,
            total: 0,
        }
    }

    pub fn schema(&self) -> &TableSchema {
        &self.schema
    }

    pub fn shared_schema(&self) -> Arc<TableSchema> {
        Arc::clone(&self.schema)
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn into_counts(self) -> Vec<u64> {
        self.counts
    }

    /// Grand total `n`.
    pub fn total(&self) -> u64 {
        self.total
    }

    pub fn num_cells(&self) -> usize {
        self.counts.len()
    }

    /// `(cell index, count)` for every nonzero cell, in canonical order.
    pub fn nonzero(&self) -> impl Iterator<Item = (usize, u64)> + '_ {
        self.counts
            .iter()
            .enumerate()
            .filter(|(_, &c)| c > 0)
            .map(|(i, &c)| (i, c))
    }

    pub fn histogram(&self, cap: u64) -> CellHistogram {
        histogram(self, cap)
    }

    pub fn marginal(&self, variables: &[&str]) -> Result<ContingencyTable> {
        marginal(self, variables)
    }

    /// SHA-256 over the schema JSON and the little-endian counts.
    pub fn content_hash(&self) -> String {
        let mut hasher = Sha256::new();
        if let Ok(json) = serde_json::to_vec(&*self.schema) {
            hasher.update(&json);
        }
        for c in &self.counts {
            hasher.update(c.to_le_bytes());
        }
        hex::encode(hasher.finalize())
    }
}

pub(crate) fn checked_total(counts: &[u64]) -> Result<u64> {
    counts.iter().try_fold(0u64, |acc, &c| {
        acc.checked_add(c)
            .ok_or_else(|| Error::Overflow("grand total exceeds u64".into()))
    })
}

/// Frequencies of exact cell sizes, with a display cap for bucketing.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CellHistogram {
    frequencies: BTreeMap<u64, u64>,
    num_cells: u64,
    cap: u64,
}

/// One displayed histogram row; `at_least` marks the `cap+` bucket.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct HistogramBin {
    pub size: u64,
    pub at_least: bool,
    pub frequency: u64,
    pub proportion: f64,
}

impl CellHistogram {
    /// Build from exact `size -> frequency` pairs. Sizes with zero frequency are dropped.
    pub fn from_frequencies(frequencies: impl IntoIterator<Item = (u64, u64)>, cap: u64) -> Result<Self> {
        let mut map = BTreeMap::new();
        let mut num_cells = 0u64;
        for (size, freq) in frequencies {
            if freq == 0 {
                continue;
            }
            let slot = map.entry(size).or_insert(0u64);
            *slot = slot
                .checked_add(freq)
                .ok_or_else(|| Error::Overflow("histogram frequency".into()))?;
            num_cells = num_cells
                .checked_add(freq)
                .ok_or_else(|| Error::Overflow("histogram cell count".into()))?;
        }
        if num_cells == 0 {
            return Err(Error::Parameter("histogram has no cells".into()));
        }
        Ok(Self {
            frequencies: map,
            num_cells,
            cap: cap.max(1),
        })
    }

    /// Number of cells `K`.
    pub fn num_cells(&self) -> u64 {
        self.num_cells
    }

    pub fn cap(&self) -> u64 {
        self.cap
    }

    /// Exact frequency of cells of size `j`.
    pub fn frequency(&self, size: u64) -> u64 {
        self.frequencies.get(&size).copied().unwrap_or(0)
    }

    /// Proportion of cells of size `j`, i.e. `tau_2(j)`.
    pub fn proportion(&self, size: u64) -> f64 {
        self.frequency(size) as f64 / self.num_cells as f64
    }

    /// Exact `(size, frequency)` pairs with nonzero frequency, ascending.
    pub fn exact(&self) -> impl Iterator<Item = (u64, u64)> + '_ {
        self.frequencies.iter().map(|(&s, &f)| (s, f))
    }

    /// The set of observed cell sizes `R = { j : tau_2(j) > 0 }`.
    pub fn observed_sizes(&self) -> Vec<u64> {
        self.frequencies.keys().copied().collect()
    }

    pub fn nonzero_cells(&self) -> u64 {
        self.num_cells - self.frequency(0)
    }

    /// Sizes above `cap` merged into a single `cap+` bin.
    pub fn bins(&self) -> Vec<HistogramBin> {
        let k = self.num_cells as f64;
        let mut out: Vec<HistogramBin> = Vec::new();
        let mut tail = 0u64;
        for (&size, &frequency) in &self.frequencies {
            if size > self.cap {
                tail += frequency;
            } else {
                out.push(HistogramBin {
                    size,
                    at_least: false,
                    frequency,
                    proportion: frequency as f64 / k,
                });
            }
        }
        if tail > 0 {
            out.push(HistogramBin {
                size: self.cap + 1,
                at_least: true,
                frequency: tail,
                proportion: tail as f64 / k,
            });
        }
        out
    }

    /// Same histogram with every frequency multiplied by `factor`.
    pub fn scaled(&self, factor: u64) -> Result<Self> {
        Self::from_frequencies(
            self.frequencies
                .iter()
                .map(|(&s, &f)| (s, f.saturating_mul(factor))),
            self.cap,
        )
    }
}

pub fn histogram(table: &ContingencyTable, cap: u64) -> CellHistogram {
    let mut map = BTreeMap::new();
    for &c in table.counts() {
        *map.entry(c).or_insert(0u64) += 1;
    }
    CellHistogram {
        frequencies: map,
        num_cells: table.num_cells() as u64,
        cap: cap.max(1),
    }
}

/// Sum counts over every variable not named in `variables`.
///
/// The result keeps the retained variables in schema order.
pub fn marginal(table: &ContingencyTable, variables: &[&str]) -> Result<ContingencyTable> {
    let schema = table.schema();
    let (sub, keep) = schema.subset(variables)?;
    if keep.len() == schema.variables().len() {
        return Ok(table.clone());
    }
    let dims = schema.dims();
    let sub_dims = sub.dims();
    let mut sub_strides = vec![0usize; dims.len()];
    {
        let mut stride = 1usize;
        for (pos, &var) in keep.iter().enumerate().rev() {
            sub_strides[var] = stride;
            stride *= sub_dims[pos];
        }
    }

    let mut out = vec![0u64; sub.num_cells()];
    let mut cats = vec![0usize; dims.len()];
    let mut target = 0usize;
    for &count in table.counts() {
        out[target] += count;
        // odometer increment, last variable fastest
        for v in (0..dims.len()).rev() {
            cats[v] += 1;
            target += sub_strides[v];
            if cats[v] < dims[v] {
                break;
            }
            target -= sub_strides[v] * dims[v];
            cats[v] = 0;
        }
    }
    ContingencyTable::new(sub, out)
}

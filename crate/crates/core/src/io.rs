//! On-disk formats for synthetic ensembles.
//!
//! * Long format: `replicate, <variables..>, count`, one row per nonzero
//!   synthetic cell, replicates and cells in canonical order.
//! * Per-replicate aggregated files in the table format.
//! * A JSON sidecar with the mechanism, the original table hash and counters.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::synthesis::{MechanismConfig, SynthesisStats, SyntheticEnsemble};
use crate::table::{write_aggregated, ContingencyTable, TableSchema};

pub const ENSEMBLE_CSV: &str = "ensemble.csv";
pub const ENSEMBLE_JSON: &str = "ensemble.json";

/// Everything about an ensemble except the counts.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnsembleSidecar {
    pub config: MechanismConfig,
    pub original_hash: String,
    pub num_cells: usize,
    pub stats: SynthesisStats,
    pub schema: TableSchema,
}

impl EnsembleSidecar {
    pub fn of(ensemble: &SyntheticEnsemble) -> Self {
        Self {
            config: ensemble.config().clone(),
            original_hash: ensemble.original_hash().to_string(),
            num_cells: ensemble.num_cells(),
            stats: *ensemble.stats(),
            schema: ensemble.schema().clone(),
        }
    }
}

pub fn write_ensemble_long<W: Write>(ensemble: &SyntheticEnsemble, sink: W) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(sink);
    let schema = ensemble.schema();
    let mut header = vec!["replicate"];
    header.extend(schema.variables().iter().map(|v| v.name.as_str()));
    header.push("count");
    wtr.write_record(&header)?;
    for (r, rep) in ensemble.replicates().iter().enumerate() {
        let r = r.to_string();
        for (k, &c) in rep.iter().enumerate() {
            if c == 0 {
                continue;
            }
            let count = c.to_string();
            let mut rec = vec![r.as_str()];
            rec.extend(schema.labels_of(k));
            rec.push(&count);
            wtr.write_record(&rec)?;
        }
    }
    wtr.flush()?;
    Ok(())
}

/// Read long-format counts for `m` replicates; absent rows are zero.
pub fn read_ensemble_long<R: Read>(source: R, schema: &TableSchema, m: usize) -> Result<Vec<Vec<u64>>> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(source);
    let headers = rdr.headers()?.clone();
    let cols = crate::table::column_map(&headers);
    let need = |name: &str| {
        cols.get(name).copied().ok_or_else(|| Error::Record {
            row: 0,
            column: name.to_string(),
            message: "column missing from header".into(),
        })
    };
    let rep_col = need("replicate")?;
    let count_col = need("count")?;
    let var_cols = schema
        .variables()
        .iter()
        .map(|v| need(&v.name))
        .collect::<Result<Vec<_>>>()?;

    let mut reps = vec![vec![0u64; schema.num_cells()]; m];
    let mut cats = vec![0usize; var_cols.len()];
    for (i, record) in rdr.records().enumerate() {
        let row = i + 1;
        let record = record?;
        let bad = |column: &str, message: String| Error::Record {
            row,
            column: column.to_string(),
            message,
        };
        let r: usize = record[rep_col]
            .parse()
            .map_err(|_| bad("replicate", format!("`{}` is not a replicate index", &record[rep_col])))?;
        if r >= m {
            return Err(bad("replicate", format!("replicate {r} out of range for m = {m}")));
        }
        for (v, &c) in var_cols.iter().enumerate() {
            cats[v] = schema
                .category_index(v, &record[c])
                .ok_or_else(|| bad(&schema.variables()[v].name, format!("unknown category `{}`", &record[c])))?;
        }
        let count: u64 = record[count_col]
            .parse()
            .map_err(|_| bad("count", format!("`{}` is not a non-negative integer", &record[count_col])))?;
        let k = schema.cell_index(&cats);
        if reps[r][k] != 0 {
            return Err(bad("count", "duplicate cell".into()));
        }
        reps[r][k] = count;
    }
    Ok(reps)
}

/// Write `ensemble.csv` and `ensemble.json` into `dir`; with `per_replicate`,
/// also `replicate_<r>.csv` in the aggregated table format. Returns the
/// files written.
pub fn save_ensemble(ensemble: &SyntheticEnsemble, dir: &Path, per_replicate: bool) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir)?;
    let mut written = Vec::new();
    let csv_path = dir.join(ENSEMBLE_CSV);
    write_ensemble_long(ensemble, BufWriter::new(File::create(&csv_path)?))?;
    written.push(csv_path);
    let json_path = dir.join(ENSEMBLE_JSON);
    std::fs::write(&json_path, serde_json::to_string_pretty(&EnsembleSidecar::of(ensemble))?)?;
    written.push(json_path);
    if per_replicate {
        let width = ensemble.num_replicates().saturating_sub(1).to_string().len().max(3);
        for r in 0..ensemble.num_replicates() {
            let path = dir.join(format!("replicate_{r:0width$}.csv"));
            write_aggregated(&ensemble.to_table(r)?, BufWriter::new(File::create(&path)?), false)?;
            written.push(path);
        }
    }
    Ok(written)
}

/// Load an ensemble saved by [`save_ensemble`].
pub fn load_ensemble(dir: &Path) -> Result<SyntheticEnsemble> {
    let sidecar: EnsembleSidecar = serde_json::from_reader(BufReader::new(File::open(dir.join(ENSEMBLE_JSON))?))?;
    let reps = read_ensemble_long(
        BufReader::new(File::open(dir.join(ENSEMBLE_CSV))?),
        &sidecar.schema,
        sidecar.config.m,
    )?;
    SyntheticEnsemble::from_parts(
        Arc::new(sidecar.schema),
        sidecar.original_hash,
        sidecar.config,
        reps,
        sidecar.stats,
    )
}

/// Read a schema JSON file (`{"variables": [{"name", "categories"}]}`).
pub fn read_schema(path: &Path) -> Result<TableSchema> {
    TableSchema::from_json(&std::fs::read_to_string(path)?)
}

pub fn write_table_csv(table: &ContingencyTable, path: &Path) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    write_aggregated(table, &mut w, false)?;
    w.flush()?;
    Ok(())
}

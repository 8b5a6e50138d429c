//! CSV ingestion and emission.
//!
//! Microdata: header of variable names, one row per individual.
//! Aggregated: header of variable names plus `count`, at most one row per cell.

use std::collections::{BTreeSet, HashMap};
use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use crate::error::{Error, Result};

use super::{ContingencyTable, TableSchema, Variable};

fn reader<R: Read>(source: R) -> csv::Reader<R> {
    csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(source)
}

fn header_positions(headers: &csv::StringRecord, schema: &TableSchema) -> Result<Vec<usize>> {
    schema
        .variables()
        .iter()
        .map(|v| {
            headers
                .iter()
                .position(|h| h == v.name)
                .ok_or_else(|| Error::Record {
                    row: 0,
                    column: v.name.clone(),
                    message: "variable missing from header".into(),
                })
        })
        .collect()
}

fn check_width(record: &csv::StringRecord, width: usize, row: usize) -> Result<()> {
    if record.len() != width {
        return Err(Error::Record {
            row,
            column: "*".into(),
            message: format!("ragged row: expected {width} fields, found {}", record.len()),
        });
    }
    Ok(())
}

fn lookup_cell(
    schema: &TableSchema,
    record: &csv::StringRecord,
    positions: &[usize],
    row: usize,
    cats: &mut [usize],
) -> Result<usize> {
    for (v, &pos) in positions.iter().enumerate() {
        let label = &record[pos];
        cats[v] = schema.category_index(v, label).ok_or_else(|| Error::Record {
            row,
            column: schema.variables()[v].name.clone(),
            message: format!("unknown category `{label}`"),
        })?;
    }
    Ok(schema.cell_index(cats))
}

/// Count microdata rows into a dense table.
///
/// With `schema = None` the schema is inferred: variables in header order,
/// categories sorted lexicographically.
pub fn ingest_microdata<R: Read>(source: R, schema: Option<&TableSchema>) -> Result<ContingencyTable> {
    let mut rdr = reader(source);
    let headers = rdr.headers()?.clone();
    match schema {
        Some(schema) => {
            let positions = header_positions(&headers, schema)?;
            let mut counts = vec![0u64; schema.num_cells()];
            let mut cats = vec![0usize; positions.len()];
            for (i, record) in rdr.records().enumerate() {
                let row = i + 1;
                let record = record?;
                check_width(&record, headers.len(), row)?;
                let k = lookup_cell(schema, &record, &positions, row, &mut cats)?;
                counts[k] = counts[k]
                    .checked_add(1)
                    .ok_or_else(|| Error::Overflow("cell count".into()))?;
            }
            ContingencyTable::new(schema.clone(), counts)
        }
        None => {
            let mut rows = Vec::new();
            let mut seen: Vec<BTreeSet<String>> = vec![BTreeSet::new(); headers.len()];
            for (i, record) in rdr.records().enumerate() {
                let record = record?;
                check_width(&record, headers.len(), i + 1)?;
                for (set, field) in seen.iter_mut().zip(record.iter()) {
                    if !set.contains(field) {
                        set.insert(field.to_string());
                    }
                }
                rows.push(record);
            }
            let variables = headers
                .iter()
                .zip(seen)
                .map(|(name, cats)| Variable::new(name, cats))
                .collect();
            let schema = TableSchema::new(variables)?;
            let positions: Vec<usize> = (0..headers.len()).collect();
            let mut counts = vec![0u64; schema.num_cells()];
            let mut cats = vec![0usize; positions.len()];
            for (i, record) in rows.iter().enumerate() {
                let k = lookup_cell(&schema, record, &positions, i + 1, &mut cats)?;
                counts[k] += 1;
            }
            ContingencyTable::new(schema, counts)
        }
    }
}

/// Read an aggregated table. Cells without a row are zero.
pub fn ingest_aggregated<R: Read>(source: R, schema: &TableSchema) -> Result<ContingencyTable> {
    let mut rdr = reader(source);
    let headers = rdr.headers()?.clone();
    let positions = header_positions(&headers, schema)?;
    let count_pos = headers
        .iter()
        .position(|h| h == "count")
        .ok_or_else(|| Error::Record {
            row: 0,
            column: "count".into(),
            message: "column missing from header".into(),
        })?;

    let mut counts = vec![0u64; schema.num_cells()];
    let mut filled = vec![false; schema.num_cells()];
    let mut cats = vec![0usize; positions.len()];
    for (i, record) in rdr.records().enumerate() {
        let row = i + 1;
        let record = record?;
        check_width(&record, headers.len(), row)?;
        let k = lookup_cell(schema, &record, &positions, row, &mut cats)?;
        let raw = &record[count_pos];
        let value: u64 = raw.parse().map_err(|_| Error::Record {
            row,
            column: "count".into(),
            message: format!("`{raw}` is not a non-negative integer"),
        })?;
        if filled[k] {
            return Err(Error::Record {
                row,
                column: "count".into(),
                message: "duplicate cell".into(),
            });
        }
        filled[k] = true;
        counts[k] = value;
    }
    ContingencyTable::new(schema.clone(), counts)
}

pub fn read_aggregated_csv(path: impl AsRef<Path>, schema: &TableSchema) -> Result<ContingencyTable> {
    ingest_aggregated(File::open(path)?, schema)
}

pub fn read_microdata_csv(path: impl AsRef<Path>, schema: Option<&TableSchema>) -> Result<ContingencyTable> {
    ingest_microdata(File::open(path)?, schema)
}

/// Write `variables.., count` rows in canonical order. Zero cells are written
/// only when `include_zero` is set.
pub fn write_aggregated<W: Write>(table: &ContingencyTable, sink: W, include_zero: bool) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(sink);
    let schema = table.schema();
    let mut header: Vec<&str> = schema.variables().iter().map(|v| v.name.as_str()).collect();
    header.push("count");
    wtr.write_record(&header)?;
    for (k, &c) in table.counts().iter().enumerate() {
        if c == 0 && !include_zero {
            continue;
        }
        let count = c.to_string();
        let mut rec = schema.labels_of(k);
        rec.push(&count);
        wtr.write_record(&rec)?;
    }
    wtr.flush()?;
    Ok(())
}

/// One row per individual, cells in canonical order.
pub fn write_microdata<W: Write>(table: &ContingencyTable, sink: W) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(sink);
    let schema = table.schema();
    wtr.write_record(schema.variables().iter().map(|v| v.name.as_str()))?;
    for (k, c) in table.nonzero() {
        let rec = schema.labels_of(k);
        for _ in 0..c {
            wtr.write_record(&rec)?;
        }
    }
    wtr.flush()?;
    Ok(())
}

/// Map from variable name to column position, used by readers of long-format files.
pub(crate) fn column_map(headers: &csv::StringRecord) -> HashMap<String, usize> {
    headers
        .iter()
        .enumerate()
        .map(|(i, h)| (h.to_string(), i))
        .collect()
}

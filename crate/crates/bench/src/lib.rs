//! Shared inputs for the benchmarks.

use countsynth::table::{gen_fixture, TableSchema, TargetHistogram, Variable};
use countsynth::ContingencyTable;

/// A table of `num_cells` cells whose size histogram follows the census
/// target (about 90% zeros, a long tail above 10).
pub fn census_shaped_table(num_cells: usize, seed: u64) -> ContingencyTable {
    let schema = TableSchema::new(vec![
        Variable::new("CELL", (0..num_cells / 2).map(|i| i.to_string())),
        Variable::new("HALF", ["a", "b"]),
    ])
    .expect("valid schema");
    let target: TargetHistogram = countsynth::table::school_census_target(100.0);
    gen_fixture(&schema, &target, seed).expect("feasible target").table
}

//! Contingency-table protection by count-distribution synthesis.
//!
//! Each cell count of an original table is replaced by a draw from a count
//! distribution centred on that count: Poisson, negative binomial (NBI), or the
//! discretized gamma family (GAF), whose variance `sigma^2 * mu^nu` can shrink
//! as counts grow. Disclosure risk and utility can be measured empirically from
//! synthetic replicates or computed in closed form from the cell-size
//! histogram before any data is released.
//!
//! Module map:
//!
//! * [`table`]: schemas, dense contingency tables, ingestion, marginals,
//!   histograms and fixture generation.
//! * [`distributions`]: special functions, the GAF/NBI/Poisson families,
//!   discretization and seeded samplers.
//! * [`synthesis`]: saturated-model synthesis with zero-cell policies and
//!   counter-based per-cell random streams.
//! * [`metrics`]: tau metrics, squared-error loss, grand-total coverage,
//!   log-linear fits and confidence-interval overlap, risk–utility points.
//! * [`calibration`]: solving for a tuning parameter that hits a metric
//!   target, and parameter sweeps.

pub mod calibration;
pub mod distributions;
mod error;
pub mod io;
pub mod metrics;
pub mod synthesis;
pub mod table;

pub use calibration::{calibrate, sweep, CalibrationResult, CalibrationTarget, FreeParameter, SweepRow, TargetMetric};
pub use distributions::{CountModel, Dispersion, GafParams, NbiParams, Pmf};
pub use error::{Error, Result};
pub use metrics::{FitResult, LossReport, TauReport, TotalReport};
pub use synthesis::{synthesize, Family, MechanismConfig, SyntheticEnsemble, ZeroPolicy};
pub use table::{CellHistogram, ContingencyTable, TableSchema, Variable};

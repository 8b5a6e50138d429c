//! Disclosure risk and utility of synthetic tables, measured empirically from
//! an ensemble or computed in closed form from the cell-size histogram.

mod crosstab;
mod loglinear;
mod loss;
mod overlap;
mod risk_utility;
mod tau;
mod total;

pub use crosstab::{count_transitions, CountTransitions};
pub use loglinear::{fit_loglinear, FitResult, LoglinearDesign};
pub use loss::{l1_analytic, l1_empirical, loss_report, LossReport};
pub use overlap::{ci_overlap, interval_overlap, median, OverlapReport};
pub use risk_utility::{risk_utility_analytic, risk_utility_empirical, utility_from_l1, RiskUtilityPoint};
pub use tau::{
    tau1_analytic, tau3_analytic, tau_analytic, tau_analytic_row, tau_empirical, tau_value, TauKind, TauReport,
    TauRow, TauSource,
};
pub use total::{coverage_probability, total_coverage, total_report, total_variance, TotalReport};

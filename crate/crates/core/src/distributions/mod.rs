//! Count distributions and the special functions behind them.

mod gaf;
mod model;
mod nbi;
mod pmf;
mod poisson;
pub mod sampling;
pub mod special;

pub use gaf::{underdispersion_threshold, Dispersion, GafParams};
pub use model::CountModel;
pub use nbi::NbiParams;
pub use pmf::{discretize, rounded_mass, ContinuousCdf, Pmf, DEFAULT_TAIL_EPS};
pub use poisson::{poisson_pmf, poisson_sample};
pub use sampling::{round_draw, sample_gamma, sample_ln_gamma, Draw, COUNT_CEILING};

//! Error metrics, matrix extraction, convergence sweeps and rate theory.

pub mod matrix;
pub mod metrics;
pub mod rates;
pub mod sweep;

pub use matrix::{extract_matrix, ExtractedMatrix, MatrixKind};
pub use metrics::{surface_residual, two_way_error, ResidualReport, TwoWayReport, MOBILITY_DELTA_FACTOR};
pub use rates::{fit_root_exponential, r_acc, RateFit};
pub use sweep::{convergence_sweep, ConvergenceRecord, SweepOptions, SweepPoint};

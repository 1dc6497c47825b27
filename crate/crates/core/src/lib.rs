//! Polarized ensembles of bipartite random pure states: sampling, closed-form
//! typical purities, and Monte Carlo checks of both.

pub mod analytics;
pub mod cli;
pub mod error;
pub mod linalg;
pub mod montecarlo;
pub mod report;
pub mod sampling;

pub use error::{Error, Result};
pub use linalg::{Bipartition, DensityMatrix, PureState, C64};
pub use sampling::{MeasureKind, PolarizationKind, PolarizationSpec, RngStream};

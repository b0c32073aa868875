//! Large-deviation rate functions for the maximum of a branching random walk
//! and of the matched family of independent random walks, together with exact
//! finite-n lattice oracles and Monte Carlo estimators used to check them.

pub mod error;
pub mod exact;
pub mod mc;
pub mod model;
mod numeric;
pub mod rates;

pub use error::{Assumption, Error, Result};
pub use exact::{GwPmf, LatticeCdf};
pub use mc::{BrwSampler, BrwSnapshot, EstimateCI, SimOptions};
pub use model::{Cgf, GaussianStep, LatticeStep, Model, OffspringLaw, StepLaw};
pub use rates::{RatePoint, VariationalSolution};

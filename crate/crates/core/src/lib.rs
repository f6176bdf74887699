//! Numerical kernels for random matching on flat domains: spectral heat
//! kernels, regularized empirical residuals, Poisson potentials, Hopf-Cole
//! dual potentials and exact transport solvers.

pub mod domain;
pub mod error;
pub mod fields;
pub mod grid;
pub mod hjb;
pub mod spectral;
pub mod stats;
pub mod transport;

pub use domain::{DomainGeometry, DomainKind, Point, SemigroupConstants};
pub use error::{Error, Result};
pub use grid::GridField;
pub use spectral::SpectralBasis;

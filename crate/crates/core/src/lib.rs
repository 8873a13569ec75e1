//! Scattering resonances of sound-hard multi-disk obstacles in two dimensions.
//!
//! The library discretizes the exterior Neumann problem with a Nystrom
//! boundary integral method, locates complex resonances with a
//! contour-integral (Sakurai-Sugiura) nonlinear eigensolver, and provides a
//! workbench for finding and diagnosing defective (non-Hermitian degenerate)
//! resonances and exceptional points. Closed-form mass-spring-damper models
//! serve as analytic oracles for the matrix machinery.

pub mod bie;
pub mod epfinder;
pub mod error;
pub mod geometry;
pub mod linalg;
pub mod mech;
pub mod nep;
pub mod specfun;

pub use error::{Error, Result};
pub use linalg::{ComplexMatrix, ComplexVector};

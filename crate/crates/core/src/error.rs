use num_complex::Complex64;
use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("matrix is singular to working precision (pivot magnitude {pivot:.3e})")]
    SingularMatrix { pivot: f64 },

    #[error("eigenvalue iteration failed to converge (lapack info {info})")]
    EigNonConvergence { info: i32 },

    #[error("non-finite value encountered in {context}")]
    NonFinite { context: &'static str },

    #[error("argument {z} is on or too close to the branch cut (negative real axis)")]
    BranchCut { z: Complex64 },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("curves {first} and {second} touch or overlap")]
    OverlappingCurves { first: usize, second: usize },

    #[error("length mismatch: expected {expected}, got {got}")]
    LengthMismatch { expected: usize, got: usize },

    #[error("evaluation point ({x}, {y}) is inside or too close to curve {curve}")]
    PointNearCurve { x: f64, y: f64, curve: usize },

    #[error(
        "system is singular at contour node {node} (k = {k}); \
         move the contour or change the node count"
    )]
    SingularAtNode { node: usize, k: Complex64 },

    #[error("system is singular at k = {k}; a resonance or interior eigenvalue may be nearby")]
    SingularSystem { k: Complex64 },

    #[error("adjoint null space dimension is not one at the given tolerance (sigma ratio {ratio:.3e})")]
    AdjointNullspace { ratio: f64 },

    #[error("eigenvalue clusters are not separated (gap {gap:.3e} < 10 x tolerance {tol:.3e})")]
    IllSeparatedClusters { gap: f64, tol: f64 },

    #[error("trajectory matching is ambiguous at step {step}; use more steps")]
    AmbiguousMatch { step: usize },

    #[error("lapack error: {0}")]
    Lapack(String),
}

impl From<ndarray_linalg::error::LinalgError> for Error {
    fn from(e: ndarray_linalg::error::LinalgError) -> Self {
        let msg = e.to_string();
        // LAPACK reports iteration failures through a positive return code.
        if let Some(code) = msg
            .split("return_code = ")
            .nth(1)
            .and_then(|s| s.trim_end_matches([' ', '`', '.']).parse::<i32>().ok())
        {
            if code > 0 {
                return Error::EigNonConvergence { info: code };
            }
        }
        Error::Lapack(msg)
    }
}

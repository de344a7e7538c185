use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("quadrature did not converge: estimated error {error:e} exceeds tolerance {tolerance:e}")]
    QuadratureNonConvergence { error: f64, tolerance: f64 },

    #[error("finite-difference stencil of half-width {span} around (lambda={lambda}, lambda_p={lambda_p}) crosses a region boundary")]
    BoundaryProximity { lambda: f64, lambda_p: f64, span: f64 },

    #[error("no root could be bracketed: {0}")]
    NoRoot(String),

    #[error("argument {value} outside the range [{lo}, {hi}] of the Hilbert transform")]
    OutOfRange { value: f64, lo: f64, hi: f64 },

    #[error("point {z} lies inside the support [{lo}, {hi}]")]
    InsideSupport { z: f64, lo: f64, hi: f64 },

    #[error("logarithm of nonpositive argument {0:e} (inconsistent edge data)")]
    LogDomain(f64),

    #[error("eigensolver failed to converge within {0} iterations")]
    EigensolverFailure(usize),

    #[error("degenerate input: {0}")]
    DegenerateInput(String),

    #[error("chains did not converge: split R-hat {rhat:.4} on eigendirection {direction} exceeds {threshold}")]
    NonConvergence { rhat: f64, direction: usize, threshold: f64 },

    #[error("dimension {0} too large for dense quadrature (max 4)")]
    DimensionTooLarge(usize),

    #[error("malformed instance dump: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<()> {
    if cond {
        Ok(())
    } else {
        Err(Error::InvalidParameter(msg()))
    }
}

use thiserror::Error;

/// Errors produced by model construction and the numerical routines.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("non-finite background field at grid point {index} (coordinates {coords:?})")]
    NonFiniteField { index: usize, coords: Vec<f64> },
    #[error("background potential {value} below declared minimum {min} at grid point {index}")]
    PotentialBelowMinimum { index: usize, value: f64, min: f64 },
    #[error("invalid single-site profile: {0}")]
    InvalidProfile(String),
    #[error("invalid coupling density: {0}")]
    InvalidDensity(String),
    #[error("covering violation: grid point {index} (coordinates {coords:?}) is not reached by any bump")]
    CoveringViolation { index: usize, coords: Vec<f64> },
    #[error("lattice mismatch: {0}")]
    LatticeMismatch(String),
    #[error("shape mismatch: expected {expected}, found {found}")]
    ShapeMismatch { expected: usize, found: usize },
    #[error("empty domain mask")]
    EmptyMask,
    #[error("mask is not a subset of the operator's active domain")]
    MaskNotSubset,
    #[error("empty indicator set")]
    EmptySet,
    #[error("point {0:?} lies outside the domain")]
    PointOutsideDomain(Vec<f64>),
    #[error("spectral shift requires eps > 0, got {0}")]
    NonPositiveEps(f64),
    #[error("iterative solver did not converge: relative residual {residual:.3e} after {iterations} iterations")]
    SolverNonConvergence { residual: f64, iterations: usize },
    #[error("singular matrix encountered during factorization")]
    Singular,
    #[error("eigen iteration did not converge after {0} iterations")]
    EigenNonConvergence(usize),
    #[error("incomplete eigen window: found {found} pairs, spectrum counting reports {expected}")]
    IncompleteWindow { found: usize, expected: usize },
    #[error("domain too small: L = {l} must exceed {min}")]
    DomainTooSmall { l: f64, min: f64 },
    #[error("ball of radius {radius} around {center:?} does not fit the simulation box")]
    BallOutsideBox { center: Vec<f64>, radius: f64 },
    #[error("exponent s = {0} outside the admissible range {1}")]
    ExponentOutOfRange(f64, &'static str),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("insufficient data for fit: {0}")]
    InsufficientData(String),
    #[error("dimension {dim} exceeds dense cap {cap}")]
    DenseCapExceeded { dim: usize, cap: usize },
    #[error("criterion precondition failed: factor {0} is not below 1")]
    CriterionNotSatisfied(f64),
    #[error("sample {index} (seed {seed}) failed: {source}")]
    SampleFailed {
        index: usize,
        seed: u64,
        #[source]
        source: Box<Error>,
    },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

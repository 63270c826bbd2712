use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("matrix is not square: {rows}x{cols}")]
    NotSquare { rows: usize, cols: usize },
    #[error("input contains a non-finite value")]
    NonFinite,
    #[error("matrix is not invertible: |det| = {det_abs:e}")]
    NotInvertible { det_abs: f64 },
    #[error("matrix is not expansive: eigenvalue modulus {modulus} <= 1 + 1e-10")]
    NotExpansive { modulus: f64 },
    #[error("ellipsoid series did not converge within {terms} terms")]
    ConvergenceFailure { terms: usize },
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("ball index undefined for the zero vector")]
    ZeroVector,
    #[error("ball index search left the window |i| <= {cap}")]
    IndexOverflow { cap: i64 },
    #[error("degenerate annulus: rho_lo = {lo}, rho_hi = {hi}")]
    DegenerateAnnulus { lo: f64, hi: f64 },
    #[error("cover union has a gap at a test point (norm {norm:e})")]
    UnionGapDetected { norm: f64 },
    #[error("grid frequency range {range} cannot hold scale {i_max} (needs {needed})")]
    GridTooCoarse { i_max: usize, range: f64, needed: f64 },
    #[error("no admissible bump radius for the analyzing pair")]
    SupportOverflow,
    #[error("grid functions live on different grids")]
    GridMismatch,
    #[error("frequency ball around {center:?} with radius {radius} leaves the grid window")]
    FrequencyOverflow { center: Vec<f64>, radius: f64 },
    #[error("index set I_{j} is empty")]
    EmptyIndexSet { j: usize },
    #[error("scale {j} not resolvable on the grid: {reason}")]
    ResolutionExceeded { j: i64, reason: String },
    #[error("moment system is rank deficient (condition {condition:e})")]
    SolveFailure { condition: f64 },
    #[error("overflow: {0}")]
    Overflow(String),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("cover geometry search failed: {0}")]
    GeometrySearchFailed(String),
}

impl Error {
    /// Whether the error comes from bad input rather than from a numerical limit.
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            Error::NotSquare { .. }
                | Error::NonFinite
                | Error::NotInvertible { .. }
                | Error::NotExpansive { .. }
                | Error::DimensionMismatch { .. }
                | Error::ZeroVector
                | Error::DegenerateAnnulus { .. }
                | Error::GridMismatch
                | Error::EmptyIndexSet { .. }
                | Error::InvalidParameter(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;

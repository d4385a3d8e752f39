use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("matrix must be square, got {rows}x{cols}")]
    NotSquare { rows: usize, cols: usize },
    #[error("matrix is not Hermitian (asymmetry {0:.3e})")]
    NotHermitian(f64),
    #[error("matrix is numerically singular")]
    Singular,
    #[error("norm of A*t is too large for the exponential ({0:.3e})")]
    ExpOverflow(f64),
    #[error("generator is not exponentially stable: {0}")]
    NotStable(String),
    #[error("matrix is not positive definite")]
    NotPositiveDefinite,
    #[error("negative time {0}")]
    NegativeTime(f64),
    #[error("invalid symbol: {0}")]
    InvalidSymbol(String),
    #[error("symbol parse error at position {pos}: {msg}")]
    Parse { pos: usize, msg: String },
    #[error("unsupported symbol for this operation: {0}")]
    Unsupported(String),
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("wraparound guard violated: tail/peak ratio {0:.3e} exceeds 1e-10")]
    Wraparound(f64),
    #[error("shift {0} is not a non-negative multiple of the grid step")]
    OffGridShift(f64),
    #[error("quadrature did not converge within {0} halvings")]
    QuadratureDivergence(usize),
    #[error("decay horizon search exceeded t = 1e6")]
    HorizonExceeded,
    #[error("spectrum is not real and negative: {0}")]
    NonRealSpectrum(String),
    #[error("observation operator does not commute with the semigroup (defect {0:.3e})")]
    NotCommuting(f64),
    #[error("pair is not exactly observable (m_exact = {0:.3e})")]
    NotExactlyObservable(f64),
    #[error("{0}")]
    Config(String),
}

pub type Result<T> = std::result::Result<T, Error>;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("matrix is numerically singular (|det| = {det:e})")]
    SingularMatrix { det: f64 },

    #[error("singular value function exponent must be non-negative, got {0}")]
    NegativeExponent(f64),

    #[error("map {0} is not invertible")]
    NonInvertible(usize),

    #[error("map {index} has norm {norm} >= 1")]
    NotContracting { index: usize, norm: f64 },

    #[error("expected dimension {expected}, got {actual}")]
    WrongDimension { expected: usize, actual: usize },

    #[error("enumeration of {words:e} words exceeds the word budget {budget}")]
    DepthOverflow { words: f64, budget: u64 },

    #[error("word of length {len} is shorter than the potential level {level}")]
    WordTooShort { len: usize, level: usize },

    #[error("symbol {symbol} outside the alphabet of size {size}")]
    SymbolOutOfRange { symbol: usize, size: usize },

    #[error("quasi-multiplicativity certification failed: {0}")]
    CertificationFailed(String),

    #[error("norm of map {index} is {norm}, above the declared envelope {envelope}")]
    EnvelopeViolation { index: usize, norm: f64, envelope: f64 },

    #[error("tail envelope does not decide convergence of the singular value series")]
    UndecidableTail,

    #[error("no root of the dimension equation below s = {s_max}")]
    NoRoot { s_max: f64 },

    #[error("dual minimization diverged along a ray (|q| > {q_cap})")]
    DivergentRay { q_cap: f64 },

    #[error("iteration limit {0} reached without convergence")]
    MaxIterations(usize),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("invalid input: {0}")]
    Invalid(String),
}

use thiserror::Error;

/// Every failure mode surfaced by the toolkit.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid gate: {0}")]
    InvalidGate(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("invalid partition: {0}")]
    InvalidPartition(String),
    #[error("state not normalized (norm² = {0})")]
    NotNormalized(f64),
    #[error("every amplitude lies below the grain {0}")]
    TotalReduction(f64),
    #[error("zero expected probability in non-empty bin {0}")]
    InvalidBinning(usize),
    #[error("register size mismatch: expected {expected} qubits, got {got}")]
    RegisterMismatch { expected: usize, got: usize },
    #[error("degenerate instance: {0}")]
    Degenerate(String),
    #[error("multiplier {y} is not coprime to {q}: map is not unitary")]
    NonUnitaryMap { y: u64, q: u64 },
    #[error("no nontrivial factor of {0} found within the trial cap")]
    NoFactor(u64),
    #[error("operator cannot be synthesized: {0}")]
    Unsynthesizable(String),
    #[error("repetition cap {0} exceeded")]
    CapExceeded(u64),
    #[error("unsupported model: {0}")]
    UnsupportedModel(String),
    #[error("state leaves the paired subspace (weight outside = {0})")]
    OutOfSubspace(f64),
    #[error("gram matrices of domain and image differ by {0}")]
    GramMismatch(f64),
    #[error("divergence detected at step {0}")]
    Divergence(usize),
    #[error("kernel is singular at t = 0")]
    SingularTime,
    #[error("singular pivot in row {0}")]
    SingularPivot(usize),
    #[error("invalid exchange: {0}")]
    InvalidExchange(String),
    #[error("population died out at step {0}")]
    Extinction(usize),
    #[error("zero density at cell {0} on the integration contour")]
    UndefinedPhase(i64),
    #[error("unsatisfiable cortege target: {0}")]
    Unsatisfiable(String),
    #[error("no group survived selection")]
    SelectionCollapse,
    #[error("parse error on line {line}: {msg}")]
    Parse { line: usize, msg: String },
}

pub type Result<T> = std::result::Result<T, Error>;

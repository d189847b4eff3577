use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid dimension: m = {m}, d = {d} (both must be at least 1)")]
    InvalidDimension { m: usize, d: usize },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("rank {k} out of range (must satisfy {constraint})")]
    RankOutOfRange { k: usize, constraint: String },

    #[error("invalid sparsity: s = {s} must be positive and divide m = {m}")]
    InvalidSparsity { s: usize, m: usize },

    #[error("regularizer must be positive, got {0}")]
    NonpositiveRegularizer(f64),

    #[error("iteration diverged at step {iteration} (|x| = {norm:e})")]
    Diverged { iteration: usize, norm: f64 },

    #[error("sketch budget infeasible: alpha * delta_k = {tail:e} is not below {limit:e}")]
    BudgetInfeasible { tail: f64, limit: f64 },

    #[error("invalid spec: {0}")]
    InvalidSpec(String),

    #[error("parse error at line {line}, column {column}: {reason}")]
    Parse {
        line: usize,
        column: usize,
        reason: String,
    },

    #[error("invalid config: {0}")]
    ConfigInvalid(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

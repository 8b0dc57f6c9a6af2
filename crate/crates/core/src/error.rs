use thiserror::Error;

use crate::trace::IterationTrace;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid partition: {0}")]
    InvalidPartition(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    Shape { expected: usize, got: usize },

    #[error("invalid threshold {0}: must be non-negative")]
    InvalidThreshold(f64),

    #[error("invalid step size {0}: must be positive and finite")]
    InvalidStep(f64),

    #[error("invalid regularizer: {0}")]
    InvalidRegularizer(String),

    #[error("degenerate objective: {0}")]
    DegenerateObjective(String),

    #[error("block index {index} out of range for {blocks} blocks")]
    BlockIndex { index: usize, blocks: usize },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("block {block} is not strongly convex (modulus {modulus:e})")]
    NotStronglyConvex { block: usize, modulus: f64 },

    #[error("starting point is infeasible")]
    Infeasible,

    #[error("objective became non-finite at iteration {iteration}")]
    Diverged {
        iteration: usize,
        trace: Box<IterationTrace>,
    },

    #[error("cycle {cycle}: prox-form defect {defect:e} exceeds {limit:e}")]
    Reconstruction { cycle: usize, defect: f64, limit: f64 },

    #[error("reference solution unavailable: residual {residual:e} after {iterations} iterations")]
    OracleUnavailable { residual: f64, iterations: usize },

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("malformed input: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub(crate) fn check_len(expected: usize, got: usize) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(Error::Shape { expected, got })
    }
}

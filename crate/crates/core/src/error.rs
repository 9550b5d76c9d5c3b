use std::io;

/// Errors raised across the toolkit.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("tensor size {needed} entries exceeds the configured budget of {budget}")]
    Capacity { needed: u128, budget: u128 },

    #[error("dimension mismatch: {what} (expected {expected}, got {got})")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("basis mismatch: {0}")]
    BasisMismatch(String),

    #[error("stream-function linkage k*alpha + l*beta = 0 violated at (k={k}, l={l}), residual {residual:e}")]
    Linkage { k: usize, l: usize, residual: f64 },

    #[error("initial control violates the constraint by {residual:e}")]
    InfeasibleInit { residual: f64 },

    #[error("integration became unstable at t={t}: coefficient magnitude {magnitude:e}")]
    Unstable { t: f64, magnitude: f64 },

    #[error("time step {dt} exceeds the stability budget {limit}")]
    StepTooLarge { dt: f64, limit: f64 },

    #[error("entry bound violated at row {row}, col {col}: |{value:e}| > {bound:e}")]
    BoundViolation {
        row: usize,
        col: usize,
        value: f64,
        bound: f64,
    },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("config line {line}: {msg}")]
    Config { line: usize, msg: String },

    #[error(transparent)]
    Io(#[from] io::Error),
}

impl Error {
    /// True for failures of the numerics rather than of the inputs.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::Unstable { .. } | Error::StepTooLarge { .. } | Error::BoundViolation { .. }
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;

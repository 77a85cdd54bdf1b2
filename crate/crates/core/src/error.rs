use thiserror::Error;

pub type Result<T> = std::result::Result<T, RbError>;

#[derive(Debug, Error)]
pub enum RbError {
    #[error("invalid allocation: {0}")]
    InvalidAllocation(String),

    #[error("invalid budgets: {0}")]
    InvalidBudgets(String),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("invalid model: {0}")]
    InvalidModel(String),

    #[error("invalid risk measure: {0}")]
    InvalidSpec(String),

    #[error("invalid solver configuration: {0}")]
    InvalidConfig(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("numeric failure: {0}")]
    Numeric(String),

    #[error("diverged at iteration {iteration} (objective {value})")]
    Divergence { iteration: usize, value: f64 },

    #[error("no convergence after {iterations} iterations (gradient norm {grad_norm:.3e})")]
    NonConvergence {
        iterations: usize,
        grad_norm: f64,
        trace: Vec<(usize, f64)>,
    },

    #[error("model fit failed: {0}")]
    Fit(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl RbError {
    /// True for failures of the numerical machinery itself, as opposed to bad input.
    pub fn is_numeric(&self) -> bool {
        matches!(
            self,
            RbError::Numeric(_)
                | RbError::Divergence { .. }
                | RbError::NonConvergence { .. }
                | RbError::Fit(_)
        )
    }
}

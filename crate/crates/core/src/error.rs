use thiserror::Error;

/// Errors raised by field operations, drift assembly and time stepping.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum NsfError {
    #[error("invalid cutoff {requested}: must lie in 0..={max}")]
    InvalidCutoff { requested: i64, max: usize },

    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("invalid operand: {0}")]
    InvalidOperand(String),

    #[error("grid mismatch: cutoff/resolution ({0}, {1}) vs ({2}, {3})")]
    GridMismatch(usize, usize, usize, usize),

    #[error("non-finite value {value} at x = {location:?}")]
    NonfiniteEvaluation { location: [f64; 3], value: f64 },

    #[error("wavevector {k:?} outside cutoff {cutoff}{}", context_suffix(.context))]
    InvalidMode {
        k: [i64; 3],
        cutoff: usize,
        context: Option<String>,
    },

    #[error("positivity violated: min value {min} at x = {location:?}")]
    PositivityViolation { min: f64, location: [f64; 3] },

    #[error("non-finite coefficients after step {step}")]
    BlowUp { step: usize },

    #[error("covector cutoff {cutoff} leaves no headroom on grid cutoff {grid_cutoff} (need 3*cutoff <= grid cutoff)")]
    InsufficientHeadroom { cutoff: usize, grid_cutoff: usize },

    #[error("empty trajectory")]
    EmptyTrajectory,

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
}

fn context_suffix(context: &Option<String>) -> String {
    match context {
        Some(c) => format!(" (in {c})"),
        None => String::new(),
    }
}

pub type Result<T> = std::result::Result<T, NsfError>;

use thiserror::Error;

/// Errors raised by the numerical and geometric routines.
#[derive(Debug, Clone, Error, PartialEq)]
pub enum GeomError {
    #[error("non-finite value while evaluating a stencil point ({context})")]
    EvaluationDomain { context: String },

    #[error("linearly dependent input at index {index}")]
    RankDeficient { index: usize },

    #[error("retraction did not converge (last residual {residual:e})")]
    RetractionFailure { residual: f64 },

    #[error("moment map is not regular here (minimal singular value {min_singular_value:e})")]
    Irregular { min_singular_value: f64 },

    #[error("zero level set is empty: {reason}")]
    Infeasible { reason: String },

    #[error("orbit degenerates at this point (|X_{index}| = {norm:e})")]
    DegenerateOrbit { index: usize, norm: f64 },

    #[error("chart coordinate |u| = {norm} exceeds chart radius {radius}")]
    OutsideChart { norm: f64, radius: f64 },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("not applicable: {0}")]
    NotApplicable(String),
}

pub type Result<T, E = GeomError> = std::result::Result<T, E>;

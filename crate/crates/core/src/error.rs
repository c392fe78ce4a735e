use thiserror::Error;

/// Errors raised anywhere in the laboratory.
///
/// Variants split into two families: input validation problems (bad files,
/// inconsistent dimensions, infeasible scenario parameters) and numerical
/// failures (non-convergence, degenerate functionals, ODE blow-ups). The CLI
/// maps the first family to exit code 2 and the second to exit code 3.
#[derive(Debug, Error)]
pub enum LabError {
    #[error("invalid value at `{path}`: {reason}")]
    Validation { path: String, reason: String },

    #[error("length mismatch: expected {expected}, got {got}")]
    LengthMismatch { expected: usize, got: usize },

    #[error("{what} must be positive, got {value}")]
    NonPositiveInput { what: &'static str, value: f64 },

    #[error("price p_{index} must be positive, got {value}")]
    NonPositivePrice { index: usize, value: f64 },

    #[error("wealth must be positive, got {0}")]
    WealthNonPositive(f64),

    #[error("allocation not interior: agent {agent}, date {date}, value {value}")]
    NonInterior { agent: usize, date: usize, value: f64 },

    #[error("no convergence after {iterations} iterations (best residual {best_residual:.3e})")]
    NoConvergence { best_residual: f64, iterations: usize },

    #[error("Jacobian singular and damped fallback stalled (residual {residual:.3e})")]
    JacobianSingular { residual: f64 },

    #[error("degenerate Psi functional: Psi(p) = {psi:.3e} at scale {scale:.3e}")]
    DegeneratePsi { psi: f64, scale: f64 },

    #[error("distortion has zero weighted norm")]
    ZeroDistortion,

    #[error("mean marginal share vanishes at date {date}")]
    ZeroMeanShare { date: usize },

    #[error("operation requires log kernels for every agent")]
    NonLogKernel,

    #[error("balance condition `{condition}` violated by {magnitude:.3e}")]
    ConstraintViolation { condition: String, magnitude: f64 },

    #[error("infeasible scenario constraints: {0}")]
    InfeasibleConstraints(String),

    #[error("taste floor violated: min(1 + delta*eps) = {min_value:.4}")]
    BoundViolation { min_value: f64 },

    #[error("price collapse at t = {t:.6e}: step size fell below floor")]
    PriceCollapse { t: f64 },

    #[error("trajectory diverged at t = {t:.6e} (|p| = {norm:.3e})")]
    Divergence { t: f64, norm: f64 },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl LabError {
    pub fn validation(path: impl Into<String>, reason: impl Into<String>) -> Self {
        LabError::Validation {
            path: path.into(),
            reason: reason.into(),
        }
    }

    /// True for errors caused by bad input rather than numerical trouble.
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            LabError::Validation { .. }
                | LabError::LengthMismatch { .. }
                | LabError::NonPositiveInput { .. }
                | LabError::NonPositivePrice { .. }
                | LabError::WealthNonPositive(_)
                | LabError::NonLogKernel
                | LabError::ConstraintViolation { .. }
                | LabError::InfeasibleConstraints(_)
                | LabError::BoundViolation { .. }
                | LabError::Io(_)
                | LabError::Json(_)
                | LabError::Csv(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, LabError>;

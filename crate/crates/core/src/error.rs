use thiserror::Error;

/// Errors produced by the direct and inverse solvers.
#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("grid mismatch: {left} vs {right} intervals")]
    GridMismatch { left: usize, right: usize },

    #[error("expected {expected} samples, found {found}")]
    InvalidLength { expected: usize, found: usize },

    #[error("non-finite value at node {node}")]
    NonFinite { node: usize },

    #[error("integration failure at node {node} (x = {x})")]
    IntegrationFailure { node: usize, x: f64 },

    #[error("A not positive: no shooting offset in the sweep yields a positive solution")]
    NotPositive,

    #[error("eigenvalue search failed for index {n}: no sign change within the bracket")]
    SearchFailure { n: i64 },

    #[error("lambda = {lambda} is not an eigenvalue (terminal residual {residual:e})")]
    NotAnEigenvalue { lambda: f64, residual: f64 },

    #[error("spectral data rejected: {0}")]
    Validation(String),

    #[error(
        "shift estimates disagree: regression {regression}, enumeration {enumeration}; \
         pass an explicit shift to resolve"
    )]
    ShiftDiscrepancy { regression: f64, enumeration: f64 },

    #[error("reconstruction failure at node {node}: condition estimate {condition:e}")]
    ReconstructionFailure { node: usize, condition: f64 },

    #[error(
        "reconstructed potential does not reproduce its data: \
         max |dlambda| = {max_dlambda:e}, max |dalpha| = {max_dalpha:e}"
    )]
    Convention { max_dlambda: f64, max_dalpha: f64 },

    #[error("gauge angle inconsistent with potential: max |p11| = {max_p11:e}")]
    InconsistentAngle { max_p11: f64 },

    #[error("quantization violation: theta(1) = {theta_end}, nearest n = {n}, residual {residual:e}")]
    QuantizationViolation { theta_end: f64, n: i64, residual: f64 },

    #[error("singular commutation at node {node}: w = {w:e}")]
    SingularCommutation { node: usize, w: f64 },

    #[error("alpha0 independence violated: |dp| = {dp:e}, |dr| = {dr:e}")]
    IndependenceViolation { dp: f64, dr: f64 },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    /// Process exit code used by the command-line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Domain(_)
            | Error::GridMismatch { .. }
            | Error::InvalidLength { .. }
            | Error::NonFinite { .. }
            | Error::NotPositive
            | Error::Validation(_)
            | Error::ShiftDiscrepancy { .. }
            | Error::Io(_)
            | Error::Json(_) => 2,
            Error::IntegrationFailure { .. }
            | Error::SearchFailure { .. }
            | Error::NotAnEigenvalue { .. }
            | Error::ReconstructionFailure { .. }
            | Error::Convention { .. }
            | Error::SingularCommutation { .. } => 3,
            Error::InconsistentAngle { .. } | Error::QuantizationViolation { .. } => 4,
            Error::IndependenceViolation { .. } => 5,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

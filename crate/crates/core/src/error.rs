use thiserror::Error;

#[derive(Debug, Error)]
pub enum LabError {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("aspect ratio c = {0} is unsupported; only c = m/n > 1 is implemented")]
    UnsupportedRatio(f64),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("matrix is not Hermitian (max |H - H*| = {deviation:e})")]
    NotHermitian { deviation: f64 },

    #[error("{what} did not converge after {iterations} iterations (residual {residual:e})")]
    NoConvergence {
        what: &'static str,
        iterations: usize,
        residual: f64,
    },

    #[error("lambda0 = {lambda0} is not in the bulk (Im z = {im_z:e})")]
    NotInBulk { lambda0: f64, im_z: f64 },

    #[error("branch tracking failed at lambda = {lambda} (last good lambda = {last_good:?}): {reason}")]
    BranchTracking {
        lambda: f64,
        last_good: Option<f64>,
        reason: String,
    },

    #[error("{0} is a singular point of the phase function")]
    Singular(f64),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl LabError {
    /// True for errors caused by the caller's input rather than by numerics.
    pub fn is_invalid_input(&self) -> bool {
        matches!(
            self,
            LabError::InvalidInput(_)
                | LabError::UnsupportedRatio(_)
                | LabError::DimensionMismatch(_)
                | LabError::NotHermitian { .. }
                | LabError::NotInBulk { .. }
                | LabError::Singular(_)
                | LabError::Json(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, LabError>;

pub(crate) fn invalid(msg: impl Into<String>) -> LabError {
    LabError::InvalidInput(msg.into())
}

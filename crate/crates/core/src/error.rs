use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid spec: {0}")]
    InvalidSpec(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("invalid geometry ({rule}): {detail}")]
    InvalidGeometry { rule: &'static str, detail: String },

    #[error("quadrature did not converge: estimate {estimate}, residual estimate {residual:e}")]
    Quadrature { estimate: f64, residual: f64 },

    #[error("empty configuration has no dynamics")]
    NoDynamics,

    #[error("time step produced density {value:e} in cell {cell}; reduce dt")]
    StepSize { value: f64, cell: usize },

    #[error("horizon violation ({rule}): {detail}")]
    Horizon { rule: &'static str, detail: String },

    #[error("window too long: exp(alpha * T) = {growth} must stay below 2")]
    WindowTooLong { growth: f64 },

    #[error("picard iteration did not reach tolerance after {} iterations (last delta {:e})", .history.len(), .history.last().copied().unwrap_or(f64::NAN))]
    NonConvergence { history: Vec<f64> },

    #[error("{bound} bound violated at t = {time}: margin {margin:e}")]
    BoundViolation {
        bound: &'static str,
        time: f64,
        margin: f64,
    },

    #[error("budget exceeded: {0}")]
    Budget(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Process exit code: 1 for configuration problems, 2 for numerical
    /// failures, 3 for budget overruns.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::InvalidSpec(_)
            | Error::InvalidInput(_)
            | Error::InvalidGeometry { .. }
            | Error::Horizon { .. }
            | Error::WindowTooLong { .. }
            | Error::Io(_)
            | Error::Json(_) => 1,
            Error::Quadrature { .. }
            | Error::NoDynamics
            | Error::StepSize { .. }
            | Error::NonConvergence { .. }
            | Error::BoundViolation { .. } => 2,
            Error::Budget(_) => 3,
        }
    }
}

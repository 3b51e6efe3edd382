use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error(
        "{solver} did not converge in {iterations} iterations \
         (relative residual {residual:.3e}, target {target:.3e})"
    )]
    NotConverged {
        solver: &'static str,
        iterations: usize,
        residual: f64,
        target: f64,
    },

    #[error("inconsistent state: {0}")]
    InvalidState(String),

    #[error("source evaluated at t = {t} outside its path coverage [{start}, {end}]")]
    OutsidePath { t: f64, start: f64, end: f64 },

    #[error("time step {step}: {source}")]
    Step {
        step: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("configuration error:\n{}", .0.join("\n"))]
    Config(Vec<String>),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Coarse category used for process exit codes.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) | Error::InvalidInput(_) => 2,
            Error::NotConverged { .. }
            | Error::InvalidState(_)
            | Error::DimensionMismatch { .. } => 3,
            Error::Step { source, .. } => source.exit_code(),
            Error::OutsidePath { .. } => 2,
            Error::Io(_) => 4,
        }
    }
}

use thiserror::Error;

use crate::kiops::KiopsStats;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    Dimension { expected: usize, found: usize },

    #[error("non-finite value produced by {0}")]
    NonFinite(&'static str),

    #[error("phi-function order {0} is not supported (maximum is {max})", max = crate::densephi::MAX_PHI_ORDER)]
    UnsupportedOrder(usize),

    #[error("matrix exponential overflowed")]
    Overflow,

    #[error("Krylov phi evaluation failed to converge: substep {tau:e} fell below the minimum")]
    KrylovConvergence { tau: f64, stats: Box<KiopsStats> },

    #[error(
        "Newton iteration did not converge after {iterations} iterations (residual {residual:e})"
    )]
    NewtonNonconvergence { iterations: usize, residual: f64 },

    #[error("GMRES stagnated after {iterations} iterations (relative residual {residual:e})")]
    GmresStagnation { iterations: usize, residual: f64 },

    #[error("explicit stage produced a non-finite value")]
    Instability,

    #[error("field evaluated at ({x}, {y}), which is singular")]
    SingularPoint { x: f64, y: f64 },

    #[error("step starting at t = {t} failed: {source}")]
    StepFailure {
        t: f64,
        #[source]
        source: Box<Error>,
    },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }
}

pub(crate) fn check_len(expected: usize, found: usize) -> Result<()> {
    if expected == found {
        Ok(())
    } else {
        Err(Error::Dimension { expected, found })
    }
}

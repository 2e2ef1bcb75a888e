//! Convergence and precision studies for the `expint-core` integrators.
//!
//! A study file names a test problem, a set of methods and a step-size sweep.
//! Each `(method, h)` cell is integrated to `t_final` and compared with a
//! reference solution on the same grid, so reported errors are pure
//! time-discretization errors.

pub mod config;
pub mod output;
pub mod problem;
pub mod reference;
pub mod study;

use std::fmt;

pub use config::{Assertion, ConfigError, Mode, ProblemSpec, StudyConfig};
pub use output::{emit_csv, read_orders, read_rows};
pub use problem::Problem;
pub use reference::{reference_solution, ReferenceCache};
pub use study::{
    fit_order, run_convergence, run_precision, run_study, verify, OrderFit, Row, StudyReport,
};

/// Failure of a study, mapped onto the process exit code.
#[derive(Debug)]
pub enum StudyError {
    Config(ConfigError),
    Io(String),
    Numeric(String),
}

impl StudyError {
    pub fn exit_code(&self) -> i32 {
        match self {
            StudyError::Config(_) => 1,
            StudyError::Io(_) => 2,
            StudyError::Numeric(_) => 3,
        }
    }
}

impl fmt::Display for StudyError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            StudyError::Config(e) => write!(f, "configuration error: {e}"),
            StudyError::Io(e) => write!(f, "I/O error: {e}"),
            StudyError::Numeric(e) => write!(f, "numerical failure: {e}"),
        }
    }
}

impl std::error::Error for StudyError {}

impl From<config::LoadError> for StudyError {
    fn from(e: config::LoadError) -> Self {
        match e {
            config::LoadError::Io(m) => StudyError::Io(m),
            config::LoadError::Config(c) => StudyError::Config(c),
        }
    }
}

//! Exponential and Runge–Kutta integrators for stiff ODE systems, with a
//! Krylov engine for linear combinations of φ-functions.
//!
//! ```
//! use expint_core::{integrate, FnSystem, Method, StepperConfig};
//!
//! let decay = FnSystem::linear(1, vec![-1.0]);
//! let cfg = StepperConfig::new(Method::Epi2, 0.5);
//! let run = integrate(&decay, &cfg, 0.0, 1.0, &[1.0], None).unwrap();
//! assert!((run.y[0] - (-1.0f64).exp()).abs() < 1e-9);
//! ```

pub mod densephi;
pub mod error;
pub mod kiops;
pub mod numcore;
pub mod problems;
pub mod steppers;

pub use densephi::{expm, phi_combination_dense, phi_k, DenseMatrix};
pub use error::{Error, Result};
pub use kiops::{kiops_eval, KiopsStats, LinearOp, PhiCombinationTask};
pub use numcore::{axpy, dot, grid_l2_norm, jac_vec_fd, l2_norm, FnSystem, OdeSystem, StateVector};
pub use problems::{Diffusion1D, Diffusion1DParams, Diffusion2D, Diffusion2DParams, Field};
pub use steppers::{
    integrate, step, Divergence, Integration, Method, MethodFamily, StepReport, StepperConfig,
};

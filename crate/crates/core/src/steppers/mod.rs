//! Time integrators and the fixed-step driver.

mod eval;
mod exponential;
pub mod newton;
mod runge_kutta;
mod tableau;

use std::fmt;
use std::str::FromStr;

pub use exponential::{epi2_step, epirk4_step, EPIRK4_A31, EPIRK4_A32, EPIRK4_A41, EPIRK4_A42};
pub use newton::{gmres, newton_krylov_solve, FnResidual, NewtonConfig, NewtonStats, Residual};
pub use runge_kutta::{explicit_rk_step, sdirk_step};
pub use tableau::ButcherTableau;

use crate::error::{check_len, Error, Result};
use crate::numcore::{l2_norm, OdeSystem, StateVector};

/// Available time integrators.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Method {
    Epi2,
    Epirk4,
    ForwardEuler,
    Rk2,
    Rk3Ssp,
    Rk4,
    BackwardEuler,
    Sdirk2,
    Sdirk3,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MethodFamily {
    Exponential,
    Explicit,
    Implicit,
}

impl Method {
    pub const ALL: [Method; 9] = [
        Method::ForwardEuler,
        Method::Rk2,
        Method::Rk3Ssp,
        Method::Rk4,
        Method::BackwardEuler,
        Method::Sdirk2,
        Method::Sdirk3,
        Method::Epi2,
        Method::Epirk4,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Method::Epi2 => "EPI2",
            Method::Epirk4 => "EPIRK4",
            Method::ForwardEuler => "FE",
            Method::Rk2 => "RK2",
            Method::Rk3Ssp => "RK3SSP",
            Method::Rk4 => "RK4",
            Method::BackwardEuler => "BE",
            Method::Sdirk2 => "SDIRK2",
            Method::Sdirk3 => "SDIRK3",
        }
    }

    pub fn order(self) -> usize {
        match self {
            Method::ForwardEuler | Method::BackwardEuler => 1,
            Method::Rk2 | Method::Sdirk2 | Method::Epi2 => 2,
            Method::Rk3Ssp | Method::Sdirk3 => 3,
            Method::Rk4 | Method::Epirk4 => 4,
        }
    }

    pub fn family(self) -> MethodFamily {
        match self {
            Method::Epi2 | Method::Epirk4 => MethodFamily::Exponential,
            Method::ForwardEuler | Method::Rk2 | Method::Rk3Ssp | Method::Rk4 => {
                MethodFamily::Explicit
            }
            Method::BackwardEuler | Method::Sdirk2 | Method::Sdirk3 => MethodFamily::Implicit,
        }
    }

    /// Butcher tableau for the Runge–Kutta methods; `None` for exponential ones.
    pub fn tableau(self) -> Option<ButcherTableau> {
        Some(match self {
            Method::ForwardEuler => ButcherTableau::forward_euler(),
            Method::Rk2 => ButcherTableau::rk2(),
            Method::Rk3Ssp => ButcherTableau::rk3_ssp(),
            Method::Rk4 => ButcherTableau::rk4(),
            Method::BackwardEuler => ButcherTableau::backward_euler(),
            Method::Sdirk2 => ButcherTableau::sdirk2(),
            Method::Sdirk3 => ButcherTableau::sdirk3(),
            Method::Epi2 | Method::Epirk4 => return None,
        })
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let upper = s.trim().to_ascii_uppercase();
        Method::ALL
            .into_iter()
            .find(|m| m.name() == upper)
            .ok_or_else(|| Error::invalid(format!("unknown method '{s}'")))
    }
}

/// Integrator selection, step size and solver tolerances.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepperConfig {
    pub method: Method,
    pub h: f64,
    pub krylov_tol: f64,
    pub krylov_m_init: usize,
    pub krylov_m_max: usize,
    pub newton_tol: f64,
    pub newton_max_iter: usize,
    pub gmres_tol: f64,
    pub gmres_max_iter: usize,
    pub use_analytic_jacobian: bool,
}

impl StepperConfig {
    pub fn new(method: Method, h: f64) -> Self {
        StepperConfig {
            method,
            h,
            krylov_tol: 1e-10,
            krylov_m_init: crate::kiops::DEFAULT_M_INIT,
            krylov_m_max: crate::kiops::DEFAULT_M_MAX,
            newton_tol: 1e-10,
            newton_max_iter: 20,
            gmres_tol: 1e-8,
            gmres_max_iter: newton::DEFAULT_GMRES_MAX_ITER,
            use_analytic_jacobian: true,
        }
    }

    pub fn with_krylov_tol(mut self, tol: f64) -> Self {
        self.krylov_tol = tol;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("h", self.h),
            ("krylov_tol", self.krylov_tol),
            ("newton_tol", self.newton_tol),
            ("gmres_tol", self.gmres_tol),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::invalid(format!("{name} must be positive, got {v}")));
            }
        }
        if self.krylov_m_init == 0 || self.krylov_m_init > self.krylov_m_max {
            return Err(Error::invalid(
                "Krylov sizes must satisfy 1 <= m_init <= m_max",
            ));
        }
        if self.newton_max_iter == 0 || self.gmres_max_iter == 0 {
            return Err(Error::invalid("iteration limits must be positive"));
        }
        Ok(())
    }
}

/// Work counters for one step, or summed over many.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct StepReport {
    /// Jacobian actions (Krylov, remainder and GMRES products).
    pub matvecs: usize,
    pub rhs_evals: usize,
    pub newton_iters: usize,
    pub gmres_iters: usize,
    pub krylov_projections: usize,
    pub krylov_vectors: usize,
    pub orth_dot_products: usize,
    pub normalizations: usize,
    /// Seconds.
    pub wall_time: f64,
}

impl StepReport {
    pub fn accumulate(&mut self, other: &StepReport) {
        self.matvecs += other.matvecs;
        self.rhs_evals += other.rhs_evals;
        self.newton_iters += other.newton_iters;
        self.gmres_iters += other.gmres_iters;
        self.krylov_projections += other.krylov_projections;
        self.krylov_vectors += other.krylov_vectors;
        self.orth_dot_products += other.orth_dot_products;
        self.normalizations += other.normalizations;
        self.wall_time += other.wall_time;
    }
}

/// Advances `y` from `t` by `h` with `cfg.method`.
pub fn step<S: OdeSystem + ?Sized>(
    system: &S,
    t: f64,
    y: &[f64],
    h: f64,
    cfg: &StepperConfig,
) -> Result<(StateVector, StepReport)> {
    match cfg.method {
        Method::Epi2 => epi2_step(system, t, y, h, cfg),
        Method::Epirk4 => epirk4_step(system, t, y, h, cfg),
        m => {
            let tableau = m.tableau().expect("Runge-Kutta method has a tableau");
            if tableau.is_explicit() {
                explicit_rk_step(system, t, y, &tableau, h)
            } else {
                sdirk_step(system, t, y, &tableau, h, cfg)
            }
        }
    }
}

/// States whose norm exceeds this are treated as diverged.
pub const DIVERGENCE_NORM: f64 = 1e10;

/// Where and why an integration was abandoned.
#[derive(Debug, Clone, PartialEq)]
pub struct Divergence {
    /// Time at the start of the failing step.
    pub t: f64,
    pub step: usize,
    pub reason: String,
}

#[derive(Debug, Clone)]
pub struct Integration {
    /// Final state, or the last finite state before divergence.
    pub y: StateVector,
    pub report: StepReport,
    pub steps: usize,
    pub divergence: Option<Divergence>,
    pub last_step_shortened: bool,
}

impl Integration {
    pub fn diverged(&self) -> bool {
        self.divergence.is_some()
    }
}

/// Number of full steps of size `h` in `[t0, tf]` and the length of a trailing
/// partial step (0 when the steps tile the interval).
pub fn step_count(t0: f64, tf: f64, h: f64) -> (usize, f64) {
    let span = tf - t0;
    let ratio = span / h;
    let nearest = ratio.round();
    // tolerance covers the rounding of span and h themselves
    if (ratio - nearest).abs() <= 8.0 * f64::EPSILON * nearest.max(1.0) {
        (nearest as usize, 0.0)
    } else {
        let full = ratio.floor();
        (full as usize, span - full * h)
    }
}

/// Fixed-step integration from `t0` to `tf`.
///
/// The observer sees `(t, y, report)` after every step. Divergence (non-finite
/// state, explicit-stage instability, or `‖y‖ > 10¹⁰`) ends the run with a
/// [`Divergence`] record instead of an error; other stepper failures are errors.
pub fn integrate<S: OdeSystem + ?Sized>(
    system: &S,
    cfg: &StepperConfig,
    t0: f64,
    tf: f64,
    y0: &[f64],
    mut observer: Option<&mut dyn FnMut(f64, &[f64], &StepReport)>,
) -> Result<Integration> {
    cfg.validate()?;
    check_len(system.dim(), y0.len())?;
    if tf < t0 {
        return Err(Error::invalid("final time precedes initial time"));
    }
    let (full, partial) = step_count(t0, tf, cfg.h);
    let total = full + usize::from(partial > 0.0);
    let mut y = StateVector::from(y0);
    let mut report = StepReport::default();
    for n in 0..total {
        let t = t0 + n as f64 * cfg.h;
        let h = if n < full { cfg.h } else { partial };
        let diverge = |reason: String| Divergence { t, step: n, reason };
        let (y_new, rep) = match step(system, t, &y, h, cfg) {
            Ok(r) => r,
            Err(Error::Instability) => {
                return Ok(diverged(
                    y,
                    report,
                    n,
                    diverge("explicit stage instability".into()),
                    partial,
                ))
            }
            Err(Error::NonFinite(what)) => {
                return Ok(diverged(
                    y,
                    report,
                    n,
                    diverge(format!("non-finite {what}")),
                    partial,
                ))
            }
            Err(e) => {
                return Err(Error::StepFailure {
                    t,
                    source: Box::new(e),
                })
            }
        };
        report.accumulate(&rep);
        let norm = l2_norm(&y_new);
        if !norm.is_finite() || norm > DIVERGENCE_NORM {
            return Ok(diverged(
                y,
                report,
                n,
                diverge(format!("state norm {norm:e}")),
                partial,
            ));
        }
        y = y_new;
        if let Some(obs) = observer.as_deref_mut() {
            obs(t + h, &y, &rep);
        }
    }
    Ok(Integration {
        y,
        report,
        steps: total,
        divergence: None,
        last_step_shortened: partial > 0.0,
    })
}

fn diverged(
    y: StateVector,
    report: StepReport,
    steps: usize,
    d: Divergence,
    partial: f64,
) -> Integration {
    Integration {
        y,
        report,
        steps,
        divergence: Some(d),
        last_step_shortened: partial > 0.0,
    }
}

#[cfg(test)]
mod tests;

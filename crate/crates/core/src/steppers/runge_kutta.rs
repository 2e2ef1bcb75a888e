//! Explicit Runge–Kutta and singly diagonally implicit (SDIRK) steps.

use std::time::Instant;

use super::eval::Evaluator;
use super::newton::{newton_krylov_solve, NewtonConfig, Residual};
use super::tableau::ButcherTableau;
use super::{StepReport, StepperConfig};
use crate::error::{check_len, Error, Result};
use crate::numcore::{OdeSystem, StateVector};

/// One explicit Runge–Kutta step. A non-finite stage is reported as [`Error::Instability`].
pub fn explicit_rk_step<S: OdeSystem + ?Sized>(
    system: &S,
    t: f64,
    y: &[f64],
    tableau: &ButcherTableau,
    h: f64,
) -> Result<(StateVector, StepReport)> {
    check_len(system.dim(), y.len())?;
    if !tableau.is_explicit() {
        return Err(Error::invalid("explicit step needs an explicit tableau"));
    }
    let start = Instant::now();
    let n = y.len();
    let s = tableau.stages();
    let mut ev = Evaluator::new(system, false);
    let mut k = vec![vec![0.0; n]; s];
    let mut stage = vec![0.0; n];
    for i in 0..s {
        stage.copy_from_slice(y);
        for (j, kj) in k.iter().enumerate().take(i) {
            let a = h * tableau.a(i, j);
            if a != 0.0 {
                crate::numcore::axpy_in_place(a, kj, &mut stage);
            }
        }
        if stage.iter().any(|x| !x.is_finite()) {
            return Err(Error::Instability);
        }
        ev.rhs(t + tableau.c()[i] * h, &stage, &mut k[i])
            .map_err(|_| Error::Instability)?;
    }
    let mut y_new = StateVector::from(y);
    for (bi, ki) in tableau.b().iter().zip(&k) {
        if *bi != 0.0 {
            crate::numcore::axpy_in_place(h * bi, ki, &mut y_new);
        }
    }
    if !y_new.is_finite() {
        return Err(Error::Instability);
    }
    let report = StepReport {
        rhs_evals: ev.rhs_evals,
        wall_time: start.elapsed().as_secs_f64(),
        ..StepReport::default()
    };
    Ok((y_new, report))
}

/// Stage equation `G(Y) = Y − z − hγ·f(t_s, Y)`.
struct StageResidual<'e, 'a, S: ?Sized> {
    ev: &'e mut Evaluator<'a, S>,
    t_stage: f64,
    hg: f64,
    z: &'e [f64],
    /// `f(t_s, Y)` at the most recent residual evaluation, reused by the Jacobian action.
    f_last: Vec<f64>,
    y_last: Vec<f64>,
}

impl<S: OdeSystem + ?Sized> Residual for StageResidual<'_, '_, S> {
    fn dim(&self) -> usize {
        self.z.len()
    }

    fn eval(&mut self, y: &[f64], out: &mut [f64]) -> Result<()> {
        self.ev.rhs(self.t_stage, y, &mut self.f_last)?;
        self.y_last.copy_from_slice(y);
        for (((o, yi), zi), fi) in out.iter_mut().zip(y).zip(self.z).zip(&self.f_last) {
            *o = yi - zi - self.hg * fi;
        }
        Ok(())
    }

    fn jac_action(&mut self, y: &[f64], _g: &[f64], v: &[f64], out: &mut [f64]) -> Result<()> {
        debug_assert_eq!(y, &self.y_last[..]);
        self.ev.jac(self.t_stage, y, &self.f_last, v, out)?;
        for (o, vi) in out.iter_mut().zip(v) {
            *o = vi - self.hg * *o;
        }
        Ok(())
    }
}

/// One SDIRK step; each stage `Yᵢ = zᵢ + hγ·f(t + cᵢh, Yᵢ)` is solved by Newton–Krylov.
pub fn sdirk_step<S: OdeSystem + ?Sized>(
    system: &S,
    t: f64,
    y: &[f64],
    tableau: &ButcherTableau,
    h: f64,
    cfg: &StepperConfig,
) -> Result<(StateVector, StepReport)> {
    check_len(system.dim(), y.len())?;
    let gamma = tableau
        .gamma()
        .ok_or_else(|| Error::invalid("SDIRK step needs a diagonally implicit tableau"))?;
    let start = Instant::now();
    let n = y.len();
    let s = tableau.stages();
    let newton = NewtonConfig {
        tol: cfg.newton_tol,
        max_iter: cfg.newton_max_iter,
        gmres_tol: cfg.gmres_tol,
        gmres_max_iter: cfg.gmres_max_iter,
    };
    let hg = h * gamma;
    let mut ev = Evaluator::new(system, cfg.use_analytic_jacobian);
    let mut report = StepReport::default();
    let mut k = vec![vec![0.0; n]; s];
    let mut guess = y.to_vec();
    for i in 0..s {
        let mut z = y.to_vec();
        for (j, kj) in k.iter().enumerate().take(i) {
            crate::numcore::axpy_in_place(h * tableau.a(i, j), kj, &mut z);
        }
        let (stage, stats) = {
            let mut res = StageResidual {
                ev: &mut ev,
                t_stage: t + tableau.c()[i] * h,
                hg,
                z: &z,
                f_last: vec![0.0; n],
                y_last: vec![0.0; n],
            };
            newton_krylov_solve(&mut res, &guess, &newton)?
        };
        report.newton_iters += stats.iterations;
        report.gmres_iters += stats.gmres_iterations;
        // kᵢ = (Yᵢ − zᵢ)/(hγ) avoids amplifying the Newton residual through a stiff f
        for ((ki, yi), zi) in k[i].iter_mut().zip(stage.iter()).zip(&z) {
            *ki = (yi - zi) / hg;
        }
        guess.copy_from_slice(&stage);
    }
    let mut y_new = StateVector::from(y);
    for (bi, ki) in tableau.b().iter().zip(&k) {
        crate::numcore::axpy_in_place(h * bi, ki, &mut y_new);
    }
    if !y_new.is_finite() {
        return Err(Error::NonFinite("SDIRK update"));
    }
    report.rhs_evals = ev.rhs_evals;
    report.matvecs = ev.jac_actions;
    report.wall_time = start.elapsed().as_secs_f64();
    Ok((y_new, report))
}

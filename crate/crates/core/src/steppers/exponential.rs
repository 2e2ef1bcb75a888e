//! EPI2 (exponential Euler) and EPIRK4.
//!
//! Both linearize around the current state, `f(y) = f_n + J_n(y − y_n) + R(y)`,
//! and treat the linear part exactly through φ-functions of `hJ_n`.

use std::time::Instant;

use super::eval::{Autonomized, Evaluator};
use super::{StepReport, StepperConfig};
use crate::error::Result;
use crate::kiops::{kiops_eval, KiopsStats, PhiCombinationTask};
use crate::numcore::{OdeSystem, StateVector};

pub const EPIRK4_A31: f64 = -1024.0;
pub const EPIRK4_A32: f64 = 1458.0;
pub const EPIRK4_A41: f64 = 27648.0;
pub const EPIRK4_A42: f64 = -34992.0;

/// `y_{n+1} = y_n + φ₁(hJ_n)·h·f_n`, one Krylov projection.
pub fn epi2_step<S: OdeSystem + ?Sized>(
    system: &S,
    t: f64,
    y: &[f64],
    h: f64,
    cfg: &StepperConfig,
) -> Result<(StateVector, StepReport)> {
    with_autonomous(system, t, y, |sys, y| epi2_autonomous(sys, t, y, h, cfg))
}

/// Fourth-order two-stage EPIRK scheme with two Krylov projections:
///
/// ```text
/// Y₁ = y_n + (1/8)·φ₁(hJ/8)·hf_n
/// Y₂ = y_n + (1/9)·φ₁(hJ/9)·hf_n
/// y_{n+1} = y_n + φ₁(hJ)·hf_n
///         + φ₃(hJ)·(α₃₁hR(Y₁) + α₃₂hR(Y₂))
///         + φ₄(hJ)·(α₄₁hR(Y₁) + α₄₂hR(Y₂))
/// ```
///
/// The first projection produces both stages from one Krylov evaluation at
/// `τ ∈ {1/9, 1/8, 1}`; the second evaluates the whole φ combination at once.
pub fn epirk4_step<S: OdeSystem + ?Sized>(
    system: &S,
    t: f64,
    y: &[f64],
    h: f64,
    cfg: &StepperConfig,
) -> Result<(StateVector, StepReport)> {
    with_autonomous(system, t, y, |sys, y| epirk4_autonomous(sys, t, y, h, cfg))
}

fn with_autonomous<S, F>(
    system: &S,
    t: f64,
    y: &[f64],
    step: F,
) -> Result<(StateVector, StepReport)>
where
    S: OdeSystem + ?Sized,
    F: FnOnce(&dyn OdeSystem, &[f64]) -> Result<(StateVector, StepReport)>,
{
    crate::error::check_len(system.dim(), y.len())?;
    let start = Instant::now();
    let (y_new, mut report) = if system.is_autonomous() {
        step(&system, y)?
    } else {
        let aug = Autonomized(system);
        let mut y_aug = y.to_vec();
        y_aug.push(t);
        let (mut y_new, report) = step(&aug, &y_aug)?;
        let mut v = std::mem::take(&mut y_new).into_inner();
        v.pop();
        (StateVector::from(v), report)
    };
    report.wall_time = start.elapsed().as_secs_f64();
    Ok((y_new, report))
}

fn phi_task(cfg: &StepperConfig, vs: Vec<StateVector>, taus: Vec<f64>) -> PhiCombinationTask {
    let n_aug = vs[0].len() + vs.len().saturating_sub(1).max(1);
    let m_max = cfg.krylov_m_max.min(n_aug);
    PhiCombinationTask::new(vs, taus, cfg.krylov_tol)
        .with_krylov_sizes(cfg.krylov_m_init.min(m_max).max(1), m_max)
}

fn record_kiops(report: &mut StepReport, stats: &KiopsStats) {
    report.krylov_projections += 1;
    report.matvecs += stats.matvecs;
    report.krylov_vectors += stats.krylov_vectors;
    report.orth_dot_products += stats.orth_dot_products;
    report.normalizations += stats.normalizations;
}

fn epi2_autonomous(
    system: &dyn OdeSystem,
    t: f64,
    y: &[f64],
    h: f64,
    cfg: &StepperConfig,
) -> Result<(StateVector, StepReport)> {
    let n = y.len();
    let mut ev = Evaluator::new(system, cfg.use_analytic_jacobian);
    let mut fy = vec![0.0; n];
    ev.rhs(t, y, &mut fy)?;
    let hf: StateVector = fy.iter().map(|v| h * v).collect();
    let task = phi_task(cfg, vec![StateVector::zeros(n), hf], vec![1.0]);
    let (w, stats) = {
        let mut op = |v: &[f64], out: &mut [f64]| -> Result<()> {
            ev.jac(t, y, &fy, v, out)?;
            out.iter_mut().for_each(|x| *x *= h);
            Ok(())
        };
        kiops_eval(&mut op, &task)?
    };
    let y_new: StateVector = y.iter().zip(w[0].iter()).map(|(a, b)| a + b).collect();
    let mut report = StepReport::default();
    record_kiops(&mut report, &stats);
    report.rhs_evals = ev.rhs_evals;
    // KIOPS matvecs are Jacobian actions; the evaluator counted the same calls
    debug_assert_eq!(ev.jac_actions, stats.matvecs);
    Ok((y_new, report))
}

fn epirk4_autonomous(
    system: &dyn OdeSystem,
    t: f64,
    y: &[f64],
    h: f64,
    cfg: &StepperConfig,
) -> Result<(StateVector, StepReport)> {
    let n = y.len();
    let mut ev = Evaluator::new(system, cfg.use_analytic_jacobian);
    let mut report = StepReport::default();
    let mut fy = vec![0.0; n];
    ev.rhs(t, y, &mut fy)?;
    let hf: StateVector = fy.iter().map(|v| h * v).collect();

    let stages_task = phi_task(
        cfg,
        vec![StateVector::zeros(n), hf.clone()],
        vec![1.0 / 9.0, 1.0 / 8.0, 1.0],
    );
    let (stage_incr, stats) = {
        let mut op = |v: &[f64], out: &mut [f64]| -> Result<()> {
            ev.jac(t, y, &fy, v, out)?;
            out.iter_mut().for_each(|x| *x *= h);
            Ok(())
        };
        kiops_eval(&mut op, &stages_task)?
    };
    record_kiops(&mut report, &stats);

    // stage increments: index 1 is τ = 1/8 (Y₁), index 0 is τ = 1/9 (Y₂)
    let mut remainders = [vec![0.0; n], vec![0.0; n]];
    let mut stage = vec![0.0; n];
    let mut jd = vec![0.0; n];
    for (r, incr) in remainders.iter_mut().zip([&stage_incr[1], &stage_incr[0]]) {
        for ((s, yi), di) in stage.iter_mut().zip(y).zip(incr.iter()) {
            *s = yi + di;
        }
        ev.rhs(t, &stage, r)?;
        ev.jac(t, y, &fy, incr, &mut jd)?;
        report.matvecs += 1;
        for ((ri, fi), ji) in r.iter_mut().zip(&fy).zip(&jd) {
            *ri -= fi + ji;
        }
    }
    let [r1, r2] = &remainders;
    let v3: StateVector = r1
        .iter()
        .zip(r2)
        .map(|(a, b)| h * (EPIRK4_A31 * a + EPIRK4_A32 * b))
        .collect();
    let v4: StateVector = r1
        .iter()
        .zip(r2)
        .map(|(a, b)| h * (EPIRK4_A41 * a + EPIRK4_A42 * b))
        .collect();

    let final_task = phi_task(
        cfg,
        vec![StateVector::zeros(n), hf, StateVector::zeros(n), v3, v4],
        vec![1.0],
    );
    let (w, stats) = {
        let mut op = |v: &[f64], out: &mut [f64]| -> Result<()> {
            ev.jac(t, y, &fy, v, out)?;
            out.iter_mut().for_each(|x| *x *= h);
            Ok(())
        };
        kiops_eval(&mut op, &final_task)?
    };
    record_kiops(&mut report, &stats);
    report.rhs_evals = ev.rhs_evals;
    let y_new: StateVector = y.iter().zip(w[0].iter()).map(|(a, b)| a + b).collect();
    Ok((y_new, report))
}

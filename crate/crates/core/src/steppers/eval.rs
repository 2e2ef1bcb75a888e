use crate::error::{Error, Result};
use crate::numcore::{jac_vec_fd_into, OdeSystem};

/// Counts right-hand-side evaluations and Jacobian actions for one step.
pub(crate) struct Evaluator<'a, S: ?Sized> {
    system: &'a S,
    analytic: bool,
    pub rhs_evals: usize,
    pub jac_actions: usize,
    scratch: Vec<f64>,
}

impl<'a, S: OdeSystem + ?Sized> Evaluator<'a, S> {
    pub fn new(system: &'a S, use_analytic_jacobian: bool) -> Self {
        Evaluator {
            system,
            analytic: use_analytic_jacobian && system.has_jac_action(),
            rhs_evals: 0,
            jac_actions: 0,
            scratch: vec![0.0; system.dim()],
        }
    }

    pub fn rhs(&mut self, t: f64, y: &[f64], out: &mut [f64]) -> Result<()> {
        self.rhs_evals += 1;
        self.system.rhs(t, y, out);
        if out.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite("rhs"));
        }
        Ok(())
    }

    /// `J(t, y)·v`; `fy` must be `f(t, y)`.
    pub fn jac(&mut self, t: f64, y: &[f64], fy: &[f64], v: &[f64], out: &mut [f64]) -> Result<()> {
        self.jac_actions += 1;
        if self.analytic && self.system.jac_action(t, y, v, out) {
            if out.iter().any(|x| !x.is_finite()) {
                return Err(Error::NonFinite("Jacobian action"));
            }
            return Ok(());
        }
        self.rhs_evals += 1;
        jac_vec_fd_into(self.system, t, y, v, fy, &mut self.scratch, out)
    }
}

/// View of a non-autonomous system with time appended as the last state component.
pub(crate) struct Autonomized<'a, S: ?Sized>(pub &'a S);

impl<S: OdeSystem + ?Sized> OdeSystem for Autonomized<'_, S> {
    fn dim(&self) -> usize {
        self.0.dim() + 1
    }

    fn name(&self) -> &str {
        self.0.name()
    }

    fn rhs(&self, _t: f64, y: &[f64], dydt: &mut [f64]) {
        let n = self.0.dim();
        self.0.rhs(y[n], &y[..n], &mut dydt[..n]);
        dydt[n] = 1.0;
    }

    /// `[J·v + (∂f/∂t)·v_t; 0]`; falls back to finite differences unless the
    /// wrapped system supplies both its Jacobian action and time derivative.
    fn jac_action(&self, _t: f64, y: &[f64], v: &[f64], out: &mut [f64]) -> bool {
        let n = self.0.dim();
        let (t, vt) = (y[n], v[n]);
        if !self.0.jac_action(t, &y[..n], &v[..n], &mut out[..n]) {
            return false;
        }
        if vt != 0.0 {
            let mut ft = vec![0.0; n];
            if !self.0.time_derivative(t, &y[..n], &mut ft) {
                return false;
            }
            crate::numcore::axpy_in_place(vt, &ft, &mut out[..n]);
        }
        out[n] = 0.0;
        true
    }

    fn has_jac_action(&self) -> bool {
        self.0.has_jac_action()
    }

    fn is_autonomous(&self) -> bool {
        true
    }
}

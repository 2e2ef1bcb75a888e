//! Dense vector arithmetic and the ODE-system interface.
//!
//! Everything in the crate works on plain `f64` slices internally; [`StateVector`]
//! is the owned form handed across public boundaries.

use std::ops::{Deref, DerefMut};

use crate::error::{check_len, Error, Result};

/// Owned state of an ODE system: one `f64` per degree of freedom.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct StateVector(Vec<f64>);

impl StateVector {
    pub fn zeros(n: usize) -> Self {
        StateVector(vec![0.0; n])
    }

    pub fn from_fn(n: usize, f: impl FnMut(usize) -> f64) -> Self {
        StateVector((0..n).map(f).collect())
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.0
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|x| x.is_finite())
    }

    pub fn norm(&self) -> f64 {
        l2_norm(&self.0)
    }

    pub fn scaled(&self, a: f64) -> Self {
        StateVector(self.0.iter().map(|x| a * x).collect())
    }
}

impl From<Vec<f64>> for StateVector {
    fn from(v: Vec<f64>) -> Self {
        StateVector(v)
    }
}

impl From<&[f64]> for StateVector {
    fn from(v: &[f64]) -> Self {
        StateVector(v.to_vec())
    }
}

impl From<StateVector> for Vec<f64> {
    fn from(v: StateVector) -> Self {
        v.0
    }
}

impl Deref for StateVector {
    type Target = [f64];

    fn deref(&self) -> &[f64] {
        &self.0
    }
}

impl DerefMut for StateVector {
    fn deref_mut(&mut self) -> &mut [f64] {
        &mut self.0
    }
}

impl FromIterator<f64> for StateVector {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        StateVector(iter.into_iter().collect())
    }
}

/// Returns `a·x + y`.
pub fn axpy(a: f64, x: &[f64], y: &[f64]) -> Result<StateVector> {
    check_len(x.len(), y.len())?;
    Ok(x.iter().zip(y).map(|(xi, yi)| a * xi + yi).collect())
}

/// `y ← a·x + y`. Lengths must already agree.
#[inline]
pub fn axpy_in_place(a: f64, x: &[f64], y: &mut [f64]) {
    debug_assert_eq!(x.len(), y.len());
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += a * xi;
    }
}

#[inline]
pub fn dot(x: &[f64], y: &[f64]) -> f64 {
    debug_assert_eq!(x.len(), y.len());
    x.iter().zip(y).map(|(a, b)| a * b).sum()
}

/// Euclidean norm with scaling so that huge or tiny entries do not over/underflow.
pub fn l2_norm(x: &[f64]) -> f64 {
    let scale = x.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    if scale == 0.0 || !scale.is_finite() {
        return scale;
    }
    let ss: f64 = x.iter().map(|v| (v / scale) * (v / scale)).sum();
    scale * ss.sqrt()
}

/// Discrete L2 norm on a uniform grid: `sqrt(cell_volume · Σ xᵢ²)`.
pub fn grid_l2_norm(x: &[f64], cell_volume: f64) -> f64 {
    l2_norm(x) * cell_volume.sqrt()
}

/// Right-hand side of `y'(t) = f(t, y)` plus optional analytic Jacobian action.
///
/// Implementations take `&self`: a system carries no mutable state between calls.
pub trait OdeSystem {
    fn dim(&self) -> usize;

    fn name(&self) -> &str {
        "ode"
    }

    /// Writes `f(t, y)` into `dydt`.
    fn rhs(&self, t: f64, y: &[f64], dydt: &mut [f64]);

    /// Writes `∂f/∂y(t, y)·v` into `out` if an analytic action exists.
    /// Returns `false` (leaving `out` unspecified) when it does not.
    fn jac_action(&self, _t: f64, _y: &[f64], _v: &[f64], _out: &mut [f64]) -> bool {
        false
    }

    fn has_jac_action(&self) -> bool {
        false
    }

    /// Writes `∂f/∂t(t, y)` into `out` if available; `false` otherwise.
    fn time_derivative(&self, _t: f64, _y: &[f64], _out: &mut [f64]) -> bool {
        false
    }

    /// `true` when `f` does not depend on `t`. Exponential steppers append time
    /// as an extra state component for non-autonomous systems.
    fn is_autonomous(&self) -> bool {
        false
    }
}

impl<S: OdeSystem + ?Sized> OdeSystem for &S {
    fn dim(&self) -> usize {
        (**self).dim()
    }
    fn name(&self) -> &str {
        (**self).name()
    }
    fn rhs(&self, t: f64, y: &[f64], dydt: &mut [f64]) {
        (**self).rhs(t, y, dydt)
    }
    fn jac_action(&self, t: f64, y: &[f64], v: &[f64], out: &mut [f64]) -> bool {
        (**self).jac_action(t, y, v, out)
    }
    fn has_jac_action(&self) -> bool {
        (**self).has_jac_action()
    }
    fn time_derivative(&self, t: f64, y: &[f64], out: &mut [f64]) -> bool {
        (**self).time_derivative(t, y, out)
    }
    fn is_autonomous(&self) -> bool {
        (**self).is_autonomous()
    }
}

type RhsFn = dyn Fn(f64, &[f64], &mut [f64]) + Send + Sync;
type JacFn = dyn Fn(f64, &[f64], &[f64], &mut [f64]) + Send + Sync;

/// Closure-backed [`OdeSystem`], mostly for tests and small examples.
pub struct FnSystem {
    dim: usize,
    name: String,
    rhs: Box<RhsFn>,
    jac: Option<Box<JacFn>>,
    dfdt: Option<Box<RhsFn>>,
    autonomous: bool,
}

impl FnSystem {
    pub fn new(dim: usize, rhs: impl Fn(f64, &[f64], &mut [f64]) + Send + Sync + 'static) -> Self {
        FnSystem {
            dim,
            name: "fn-system".to_string(),
            rhs: Box::new(rhs),
            jac: None,
            dfdt: None,
            autonomous: false,
        }
    }

    pub fn with_name(mut self, name: impl Into<String>) -> Self {
        self.name = name.into();
        self
    }

    pub fn with_jacobian(
        mut self,
        jac: impl Fn(f64, &[f64], &[f64], &mut [f64]) + Send + Sync + 'static,
    ) -> Self {
        self.jac = Some(Box::new(jac));
        self
    }

    pub fn with_time_derivative(
        mut self,
        dfdt: impl Fn(f64, &[f64], &mut [f64]) + Send + Sync + 'static,
    ) -> Self {
        self.dfdt = Some(Box::new(dfdt));
        self
    }

    pub fn autonomous(mut self) -> Self {
        self.autonomous = true;
        self
    }

    /// Linear autonomous system `y' = A·y` from a row-major `n×n` matrix.
    pub fn linear(n: usize, a: Vec<f64>) -> Self {
        assert_eq!(a.len(), n * n, "matrix must be n×n");
        let a = std::sync::Arc::new(a);
        let a2 = a.clone();
        FnSystem::new(n, move |_, y, out| matvec_rows(&a, y, out))
            .with_jacobian(move |_, _, v, out| matvec_rows(&a2, v, out))
            .with_name("linear")
            .autonomous()
    }
}

fn matvec_rows(a: &[f64], x: &[f64], out: &mut [f64]) {
    let n = x.len();
    for (i, o) in out.iter_mut().enumerate() {
        *o = dot(&a[i * n..(i + 1) * n], x);
    }
}

impl OdeSystem for FnSystem {
    fn dim(&self) -> usize {
        self.dim
    }
    fn name(&self) -> &str {
        &self.name
    }
    fn rhs(&self, t: f64, y: &[f64], dydt: &mut [f64]) {
        (self.rhs)(t, y, dydt)
    }
    fn jac_action(&self, t: f64, y: &[f64], v: &[f64], out: &mut [f64]) -> bool {
        match &self.jac {
            Some(j) => {
                j(t, y, v, out);
                true
            }
            None => false,
        }
    }
    fn has_jac_action(&self) -> bool {
        self.jac.is_some()
    }
    fn time_derivative(&self, t: f64, y: &[f64], out: &mut [f64]) -> bool {
        match &self.dfdt {
            Some(d) => {
                d(t, y, out);
                true
            }
            None => false,
        }
    }
    fn is_autonomous(&self) -> bool {
        self.autonomous
    }
}

/// Evaluates `f(t, y)` into a fresh vector, rejecting non-finite output.
pub fn eval_rhs<S: OdeSystem + ?Sized>(system: &S, t: f64, y: &[f64]) -> Result<StateVector> {
    check_len(system.dim(), y.len())?;
    let mut out = StateVector::zeros(y.len());
    system.rhs(t, y, &mut out);
    if !out.is_finite() {
        return Err(Error::NonFinite("rhs"));
    }
    Ok(out)
}

/// Finite-difference increment used for directional derivatives.
#[inline]
pub fn fd_increment(y_norm: f64, v_norm: f64) -> f64 {
    f64::EPSILON.sqrt() * y_norm.max(1.0) / v_norm.max(f64::MIN_POSITIVE)
}

/// One-sided finite-difference Jacobian action `(f(y + δv) − f(y))/δ`.
///
/// `f_of_y` must be `f(t, y)`. A zero `v` yields exactly zero.
pub fn jac_vec_fd<S: OdeSystem + ?Sized>(
    system: &S,
    t: f64,
    y: &[f64],
    v: &[f64],
    f_of_y: &[f64],
) -> Result<StateVector> {
    check_len(system.dim(), y.len())?;
    check_len(y.len(), v.len())?;
    check_len(y.len(), f_of_y.len())?;
    let mut out = StateVector::zeros(y.len());
    let mut scratch = vec![0.0; y.len()];
    jac_vec_fd_into(system, t, y, v, f_of_y, &mut scratch, &mut out)?;
    Ok(out)
}

/// Allocation-free form of [`jac_vec_fd`]; `scratch` has the state's length.
pub fn jac_vec_fd_into<S: OdeSystem + ?Sized>(
    system: &S,
    t: f64,
    y: &[f64],
    v: &[f64],
    f_of_y: &[f64],
    scratch: &mut [f64],
    out: &mut [f64],
) -> Result<()> {
    let v_norm = l2_norm(v);
    if v_norm == 0.0 {
        out.fill(0.0);
        return Ok(());
    }
    let delta = fd_increment(l2_norm(y), v_norm);
    for ((s, yi), vi) in scratch.iter_mut().zip(y).zip(v) {
        *s = yi + delta * vi;
    }
    system.rhs(t, scratch, out);
    for (o, f0) in out.iter_mut().zip(f_of_y) {
        *o = (*o - f0) / delta;
    }
    if out.iter().any(|x| !x.is_finite()) {
        return Err(Error::NonFinite("finite-difference Jacobian action"));
    }
    Ok(())
}

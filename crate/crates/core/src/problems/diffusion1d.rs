use super::{g_flux, g_prime, source_gaussian};
use crate::error::{Error, Result};
use crate::numcore::{OdeSystem, StateVector};

/// `∂u/∂t = ∂²g(u)/∂x² + s(x)` on `[0, 1]`, `u(0) = u(1) = 0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Diffusion1DParams {
    pub beta1: f64,
    pub beta2: f64,
    pub sigma: f64,
    /// Number of grid intervals; the state holds the `n_elem − 1` interior nodes.
    pub n_elem: usize,
}

impl Default for Diffusion1DParams {
    fn default() -> Self {
        Diffusion1DParams {
            beta1: 5e-5,
            beta2: 5e-3,
            sigma: 0.05,
            n_elem: 50,
        }
    }
}

impl Diffusion1DParams {
    pub fn validate(&self) -> Result<()> {
        let ok_beta = self.beta1 >= 0.0 && self.beta2 >= 0.0 && self.beta1 + self.beta2 > 0.0;
        if !ok_beta || !self.beta1.is_finite() || !self.beta2.is_finite() {
            return Err(Error::invalid(
                "need beta1 >= 0, beta2 >= 0 and beta1 + beta2 > 0",
            ));
        }
        if self.n_elem < 4 {
            return Err(Error::invalid(format!(
                "n_elem must be at least 4, got {}",
                self.n_elem
            )));
        }
        if !(self.sigma > 0.0 && self.sigma.is_finite()) {
            return Err(Error::invalid("sigma must be positive"));
        }
        Ok(())
    }
}

/// Second-order finite-difference semi-discretization; node `i` sits at `x = i·Δx`.
#[derive(Debug, Clone)]
pub struct Diffusion1D {
    params: Diffusion1DParams,
    dx: f64,
    source: Vec<f64>,
}

impl Diffusion1D {
    pub fn new(params: Diffusion1DParams) -> Result<Self> {
        params.validate()?;
        let dx = 1.0 / params.n_elem as f64;
        let source = (1..params.n_elem)
            .map(|i| source_gaussian(i as f64 * dx, params.sigma))
            .collect();
        Ok(Diffusion1D { params, dx, source })
    }

    /// Same grid without a source term.
    pub fn without_source(mut self) -> Self {
        self.source.iter_mut().for_each(|s| *s = 0.0);
        self
    }

    pub fn params(&self) -> &Diffusion1DParams {
        &self.params
    }

    pub fn dx(&self) -> f64 {
        self.dx
    }

    pub fn cell_volume(&self) -> f64 {
        self.dx
    }

    pub fn nodes(&self) -> Vec<f64> {
        (1..self.params.n_elem)
            .map(|i| i as f64 * self.dx)
            .collect()
    }

    pub fn source(&self) -> &[f64] {
        &self.source
    }

    pub fn initial_state(&self) -> StateVector {
        StateVector::zeros(self.dim())
    }

    fn second_difference(&self, w: &[f64], out: &mut [f64]) {
        let n = w.len();
        let inv = 1.0 / (self.dx * self.dx);
        for i in 0..n {
            let left = if i > 0 { w[i - 1] } else { 0.0 };
            let right = if i + 1 < n { w[i + 1] } else { 0.0 };
            out[i] = (left - 2.0 * w[i] + right) * inv;
        }
    }
}

impl OdeSystem for Diffusion1D {
    fn dim(&self) -> usize {
        self.params.n_elem - 1
    }

    fn name(&self) -> &str {
        "diffusion1d"
    }

    fn rhs(&self, _t: f64, y: &[f64], dydt: &mut [f64]) {
        let Diffusion1DParams { beta1, beta2, .. } = self.params;
        let g: Vec<f64> = y.iter().map(|&u| g_flux(u, beta1, beta2)).collect();
        self.second_difference(&g, dydt);
        for (d, s) in dydt.iter_mut().zip(&self.source) {
            *d += s;
        }
    }

    fn jac_action(&self, _t: f64, y: &[f64], v: &[f64], out: &mut [f64]) -> bool {
        let Diffusion1DParams { beta1, beta2, .. } = self.params;
        let w: Vec<f64> = y
            .iter()
            .zip(v)
            .map(|(&u, &vi)| g_prime(u, beta1, beta2) * vi)
            .collect();
        self.second_difference(&w, out);
        true
    }

    fn has_jac_action(&self) -> bool {
        true
    }

    fn is_autonomous(&self) -> bool {
        true
    }
}

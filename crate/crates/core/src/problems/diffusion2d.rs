use super::{g_flux, g_prime, source_gaussian, Field};
use crate::error::{Error, Result};
use crate::numcore::{OdeSystem, StateVector};

/// `∂u/∂t = κ[∇·(b̂b̂ᵀ∇g(u)) + ε⊥∇·((I − b̂b̂ᵀ)∇u)] + s(x)` on the unit square.
#[derive(Debug, Clone, PartialEq)]
pub struct Diffusion2DParams {
    pub kappa: f64,
    pub eps_perp: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub sigma: f64,
    /// Grid intervals per side; the state holds `(n_side − 1)²` interior nodes.
    pub n_side: usize,
    pub field: Field,
}

impl Default for Diffusion2DParams {
    fn default() -> Self {
        Diffusion2DParams {
            kappa: 1e-2,
            eps_perp: 1e-3,
            beta1: 0.0,
            beta2: 10.0,
            sigma: 0.05,
            n_side: 20,
            field: Field::default(),
        }
    }
}

impl Diffusion2DParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.kappa > 0.0 && self.kappa.is_finite()) {
            return Err(Error::invalid("kappa must be positive"));
        }
        if !(self.eps_perp > 0.0 && self.eps_perp.is_finite()) {
            return Err(Error::invalid("eps_perp must be positive"));
        }
        if !(self.beta1 >= 0.0
            && self.beta2 >= 0.0
            && self.beta1.is_finite()
            && self.beta2.is_finite())
        {
            return Err(Error::invalid("beta1 and beta2 must be nonnegative"));
        }
        if !(self.sigma > 0.0 && self.sigma.is_finite()) {
            return Err(Error::invalid("sigma must be positive"));
        }
        if self.n_side < 8 {
            return Err(Error::invalid(format!(
                "n_side must be at least 8, got {}",
                self.n_side
            )));
        }
        self.field.validate()
    }
}

/// Tensor entries `(Dxx, Dxy, Dyy)` of `b̂b̂ᵀ` at one cell center.
type CellTensor = [f64; 3];

/// Finite-difference semi-discretization on a uniform grid.
///
/// Interior node `(i, j)`, `1 ≤ i, j ≤ n_side − 1`, sits at `(iΔx, jΔx)` and has
/// state index `(j − 1)(n_side − 1) + (i − 1)`. The field tensor lives at cell
/// centers. Each cell contributes the energy
///
/// ```text
/// Dxx·(a² + b²)/2 + Dyy·(c² + d²)/2 + 2Dxy·((a + b)/2)·((c + d)/2)
/// ```
///
/// built from its bottom/top x-differences `a, b` and left/right y-differences
/// `c, d`, and the operator is minus the gradient of the summed energy. The
/// discrete operator is therefore symmetric and negative semidefinite for any
/// field, and reduces to the 5-point Laplacian when the tensor is the identity.
#[derive(Debug, Clone)]
pub struct Diffusion2D {
    params: Diffusion2DParams,
    dx: f64,
    cells: Vec<CellTensor>,
    source: Vec<f64>,
}

impl Diffusion2D {
    pub fn new(params: Diffusion2DParams) -> Result<Self> {
        params.validate()?;
        let ns = params.n_side;
        let dx = 1.0 / ns as f64;
        let mut cells = Vec::with_capacity(ns * ns);
        for j in 0..ns {
            for i in 0..ns {
                let b = params
                    .field
                    .direction([(i as f64 + 0.5) * dx, (j as f64 + 0.5) * dx])?;
                cells.push([b[0] * b[0], b[0] * b[1], b[1] * b[1]]);
            }
        }
        let m = ns - 1;
        let source = (0..m * m)
            .map(|k| source_gaussian((k % m + 1) as f64 * dx, params.sigma))
            .collect();
        Ok(Diffusion2D {
            params,
            dx,
            cells,
            source,
        })
    }

    pub fn without_source(mut self) -> Self {
        self.source.iter_mut().for_each(|s| *s = 0.0);
        self
    }

    pub fn params(&self) -> &Diffusion2DParams {
        &self.params
    }

    pub fn dx(&self) -> f64 {
        self.dx
    }

    pub fn cell_volume(&self) -> f64 {
        self.dx * self.dx
    }

    /// Coordinates of the interior nodes in state order.
    pub fn nodes(&self) -> Vec<[f64; 2]> {
        let m = self.params.n_side - 1;
        (0..m * m)
            .map(|k| [(k % m + 1) as f64 * self.dx, (k / m + 1) as f64 * self.dx])
            .collect()
    }

    pub fn source(&self) -> &[f64] {
        &self.source
    }

    pub fn initial_state(&self) -> StateVector {
        StateVector::zeros(self.dim())
    }

    /// Accumulates `scale·L_D(w)` into `out`, where `D = b̂b̂ᵀ` when `parallel`
    /// and `I − b̂b̂ᵀ` otherwise.
    fn apply(&self, w: &[f64], parallel: bool, scale: f64, out: &mut [f64]) {
        let ns = self.params.n_side;
        let m = ns - 1;
        let at = |i: usize, j: usize| -> Option<usize> {
            (i >= 1 && i <= m && j >= 1 && j <= m).then(|| (j - 1) * m + (i - 1))
        };
        let val = |idx: Option<usize>| idx.map_or(0.0, |k| w[k]);
        let s = scale / (self.dx * self.dx);
        for j in 0..ns {
            for i in 0..ns {
                let [bxx, bxy, byy] = self.cells[j * ns + i];
                let (dxx, dxy, dyy) = if parallel {
                    (bxx, bxy, byy)
                } else {
                    (1.0 - bxx, -bxy, 1.0 - byy)
                };
                let k00 = at(i, j);
                let k10 = at(i + 1, j);
                let k01 = at(i, j + 1);
                let k11 = at(i + 1, j + 1);
                let (w00, w10, w01, w11) = (val(k00), val(k10), val(k01), val(k11));
                let a = w10 - w00;
                let b = w11 - w01;
                let c = w01 - w00;
                let d = w11 - w10;
                let gx = 0.5 * (a + b);
                let gy = 0.5 * (c + d);
                let fa = 0.5 * (dxx * a + dxy * gy);
                let fb = 0.5 * (dxx * b + dxy * gy);
                let fc = 0.5 * (dyy * c + dxy * gx);
                let fd = 0.5 * (dyy * d + dxy * gx);
                for (k, grad) in [
                    (k00, -fa - fc),
                    (k10, fa - fd),
                    (k01, fc - fb),
                    (k11, fb + fd),
                ] {
                    if let Some(k) = k {
                        out[k] -= s * grad;
                    }
                }
            }
        }
    }
}

impl OdeSystem for Diffusion2D {
    fn dim(&self) -> usize {
        let m = self.params.n_side - 1;
        m * m
    }

    fn name(&self) -> &str {
        "diffusion2d"
    }

    fn rhs(&self, _t: f64, y: &[f64], dydt: &mut [f64]) {
        let p = &self.params;
        let g: Vec<f64> = y.iter().map(|&u| g_flux(u, p.beta1, p.beta2)).collect();
        dydt.copy_from_slice(&self.source);
        self.apply(&g, true, p.kappa, dydt);
        self.apply(y, false, p.kappa * p.eps_perp, dydt);
    }

    fn jac_action(&self, _t: f64, y: &[f64], v: &[f64], out: &mut [f64]) -> bool {
        let p = &self.params;
        let w: Vec<f64> = y
            .iter()
            .zip(v)
            .map(|(&u, &vi)| g_prime(u, p.beta1, p.beta2) * vi)
            .collect();
        out.fill(0.0);
        self.apply(&w, true, p.kappa, out);
        self.apply(v, false, p.kappa * p.eps_perp, out);
        true
    }

    fn has_jac_action(&self) -> bool {
        true
    }

    fn is_autonomous(&self) -> bool {
        true
    }
}

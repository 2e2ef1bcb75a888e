use expint_core::{DenseMatrix, Diffusion1D, Diffusion2D, OdeSystem, Result, StateVector};

use crate::config::ProblemSpec;

/// A configured test problem.
#[derive(Debug, Clone)]
pub enum Problem {
    Diff1d(Diffusion1D),
    Diff2d(Diffusion2D),
}

impl Problem {
    pub fn build(spec: &ProblemSpec) -> Result<Self> {
        Ok(match spec {
            ProblemSpec::Diff1d(p) => Problem::Diff1d(Diffusion1D::new(*p)?),
            ProblemSpec::Diff2d(p) => Problem::Diff2d(Diffusion2D::new(p.clone())?),
        })
    }

    pub fn cell_volume(&self) -> f64 {
        match self {
            Problem::Diff1d(p) => p.cell_volume(),
            Problem::Diff2d(p) => p.cell_volume(),
        }
    }

    pub fn initial_state(&self) -> StateVector {
        StateVector::zeros(self.dim())
    }

    pub fn source(&self) -> &[f64] {
        match self {
            Problem::Diff1d(p) => p.source(),
            Problem::Diff2d(p) => p.source(),
        }
    }

    /// `true` when the right-hand side is affine in the state.
    pub fn is_linear(&self) -> bool {
        match self {
            Problem::Diff1d(p) => p.params().beta2 == 0.0,
            Problem::Diff2d(p) => p.params().beta2 == 0.0,
        }
    }

    /// Jacobian at the zero state, assembled column by column.
    pub fn assemble_jacobian(&self) -> DenseMatrix {
        let n = self.dim();
        let y = vec![0.0; n];
        let mut a = DenseMatrix::zeros(n, n);
        let mut e = vec![0.0; n];
        let mut col = vec![0.0; n];
        for j in 0..n {
            e[j] = 1.0;
            self.jac_action(0.0, &y, &e, &mut col);
            for (i, c) in col.iter().enumerate() {
                a[(i, j)] = *c;
            }
            e[j] = 0.0;
        }
        a
    }

    fn inner(&self) -> &dyn OdeSystem {
        match self {
            Problem::Diff1d(p) => p,
            Problem::Diff2d(p) => p,
        }
    }
}

impl OdeSystem for Problem {
    fn dim(&self) -> usize {
        self.inner().dim()
    }

    fn name(&self) -> &str {
        self.inner().name()
    }

    fn rhs(&self, t: f64, y: &[f64], dydt: &mut [f64]) {
        self.inner().rhs(t, y, dydt)
    }

    fn jac_action(&self, t: f64, y: &[f64], v: &[f64], out: &mut [f64]) -> bool {
        self.inner().jac_action(t, y, v, out)
    }

    fn has_jac_action(&self) -> bool {
        true
    }

    fn is_autonomous(&self) -> bool {
        true
    }
}

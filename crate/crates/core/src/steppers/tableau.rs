use crate::error::{Error, Result};

/// Butcher coefficients of a Runge–Kutta method.
#[derive(Debug, Clone, PartialEq)]
pub struct ButcherTableau {
    /// Row-major `s×s`.
    a: Vec<f64>,
    b: Vec<f64>,
    c: Vec<f64>,
    order: usize,
    gamma: Option<f64>,
}

const CONSISTENCY_TOL: f64 = 1e-14;

impl ButcherTableau {
    /// Checks `Σb = 1`, `cᵢ = Σⱼ aᵢⱼ`, and that `A` is either strictly lower
    /// triangular or lower triangular with a constant diagonal.
    pub fn new(a: Vec<f64>, b: Vec<f64>, c: Vec<f64>, order: usize) -> Result<Self> {
        let s = b.len();
        if s == 0 || a.len() != s * s || c.len() != s {
            return Err(Error::invalid("tableau dimensions do not agree"));
        }
        if (b.iter().sum::<f64>() - 1.0).abs() > CONSISTENCY_TOL {
            return Err(Error::invalid("tableau weights must sum to one"));
        }
        for i in 0..s {
            let row: f64 = a[i * s..(i + 1) * s].iter().sum();
            if (row - c[i]).abs() > CONSISTENCY_TOL {
                return Err(Error::invalid(format!(
                    "tableau row {i} does not sum to c[{i}]"
                )));
            }
            if a[i * s + i + 1..(i + 1) * s].iter().any(|&x| x != 0.0) {
                return Err(Error::invalid("tableau must be lower triangular"));
            }
        }
        let diag: Vec<f64> = (0..s).map(|i| a[i * s + i]).collect();
        let gamma = if diag.iter().all(|&d| d == 0.0) {
            None
        } else if diag.iter().all(|&d| d == diag[0]) {
            Some(diag[0])
        } else {
            return Err(Error::invalid(
                "implicit tableau must have a constant diagonal",
            ));
        };
        Ok(ButcherTableau {
            a,
            b,
            c,
            order,
            gamma,
        })
    }

    pub fn stages(&self) -> usize {
        self.b.len()
    }

    pub fn a(&self, i: usize, j: usize) -> f64 {
        self.a[i * self.stages() + j]
    }

    pub fn b(&self) -> &[f64] {
        &self.b
    }

    pub fn c(&self) -> &[f64] {
        &self.c
    }

    pub fn order(&self) -> usize {
        self.order
    }

    /// Diagonal coefficient of a singly diagonally implicit tableau; `None` when explicit.
    pub fn gamma(&self) -> Option<f64> {
        self.gamma
    }

    pub fn is_explicit(&self) -> bool {
        self.gamma.is_none()
    }

    pub fn forward_euler() -> Self {
        Self::new(vec![0.0], vec![1.0], vec![0.0], 1).expect("valid tableau")
    }

    /// Explicit midpoint.
    pub fn rk2() -> Self {
        Self::new(vec![0.0, 0.0, 0.5, 0.0], vec![0.0, 1.0], vec![0.0, 0.5], 2)
            .expect("valid tableau")
    }

    /// Shu–Osher strong-stability-preserving third-order method.
    pub fn rk3_ssp() -> Self {
        Self::new(
            vec![0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.25, 0.25, 0.0],
            vec![1.0 / 6.0, 1.0 / 6.0, 2.0 / 3.0],
            vec![0.0, 1.0, 0.5],
            3,
        )
        .expect("valid tableau")
    }

    /// Classical fourth-order method.
    pub fn rk4() -> Self {
        #[rustfmt::skip]
        let a = vec![
            0.0, 0.0, 0.0, 0.0,
            0.5, 0.0, 0.0, 0.0,
            0.0, 0.5, 0.0, 0.0,
            0.0, 0.0, 1.0, 0.0,
        ];
        Self::new(
            a,
            vec![1.0 / 6.0, 1.0 / 3.0, 1.0 / 3.0, 1.0 / 6.0],
            vec![0.0, 0.5, 0.5, 1.0],
            4,
        )
        .expect("valid tableau")
    }

    pub fn backward_euler() -> Self {
        Self::new(vec![1.0], vec![1.0], vec![1.0], 1).expect("valid tableau")
    }

    /// Two-stage, stiffly accurate, L-stable, γ = 1 − 1/√2.
    pub fn sdirk2() -> Self {
        let g = 1.0 - std::f64::consts::FRAC_1_SQRT_2;
        Self::new(vec![g, 0.0, 1.0 - g, g], vec![1.0 - g, g], vec![g, 1.0], 2)
            .expect("valid tableau")
    }

    /// Two-stage, A-stable, third order, γ = (3 + √3)/6.
    pub fn sdirk3() -> Self {
        let g = (3.0 + 3f64.sqrt()) / 6.0;
        Self::new(
            vec![g, 0.0, 1.0 - 2.0 * g, g],
            vec![0.5, 0.5],
            vec![g, 1.0 - g],
            3,
        )
        .expect("valid tableau")
    }
}

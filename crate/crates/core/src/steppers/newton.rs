//! Unpreconditioned GMRES and an inexact Newton–Krylov solver.

use crate::error::{Error, Result};
use crate::kiops::LinearOp;
use crate::numcore::{dot, fd_increment, l2_norm, StateVector};

pub const DEFAULT_GMRES_MAX_ITER: usize = 200;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GmresOutcome {
    pub iterations: usize,
    /// Achieved `‖op(x) − b‖/‖b‖`.
    pub relative_residual: f64,
    pub converged: bool,
}

/// Solves `op(x) = b` to `‖op(x) − b‖ ≤ tol·‖b‖` with full-orthogonalization
/// GMRES, no restarts, at most `max_iter` iterations.
pub fn gmres(
    op: &mut impl LinearOp,
    b: &[f64],
    tol: f64,
    max_iter: usize,
) -> Result<(StateVector, usize)> {
    let mut x = StateVector::zeros(b.len());
    let out = gmres_into(op, b, tol, max_iter, &mut x)?;
    if out.converged {
        Ok((x, out.iterations))
    } else {
        Err(Error::GmresStagnation {
            iterations: out.iterations,
            residual: out.relative_residual,
        })
    }
}

/// GMRES from a zero initial guess; writes the best iterate into `x` even
/// when the tolerance is not met.
pub fn gmres_into(
    op: &mut impl LinearOp,
    b: &[f64],
    tol: f64,
    max_iter: usize,
    x: &mut [f64],
) -> Result<GmresOutcome> {
    let n = b.len();
    x.fill(0.0);
    let beta = l2_norm(b);
    if beta == 0.0 {
        return Ok(GmresOutcome {
            iterations: 0,
            relative_residual: 0.0,
            converged: true,
        });
    }
    let max_iter = max_iter.max(1).min(n.max(1));
    let mut basis: Vec<Vec<f64>> = Vec::with_capacity(max_iter + 1);
    basis.push(b.iter().map(|v| v / beta).collect());
    // Column j of the rotated Hessenberg (an upper triangle) is r[j][0..=j].
    let mut r: Vec<Vec<f64>> = Vec::with_capacity(max_iter);
    let mut cs: Vec<(f64, f64)> = Vec::with_capacity(max_iter);
    let mut g = vec![0.0; max_iter + 1];
    g[0] = beta;
    let mut iters = 0;
    let mut resid = beta;

    while iters < max_iter {
        let j = iters;
        let mut w = vec![0.0; n];
        op.apply(&basis[j], &mut w)?;
        if w.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("GMRES operator action"));
        }
        let raw = l2_norm(&w);
        let mut h = vec![0.0; j + 2];
        for (i, v) in basis.iter().enumerate() {
            let hij = dot(v, &w);
            for (wk, vk) in w.iter_mut().zip(v) {
                *wk -= hij * vk;
            }
            h[i] = hij;
        }
        let hnext = l2_norm(&w);
        h[j + 1] = hnext;
        for (i, &(c, s)) in cs.iter().enumerate() {
            let (a, bb) = (h[i], h[i + 1]);
            h[i] = c * a + s * bb;
            h[i + 1] = -s * a + c * bb;
        }
        let (a, bb) = (h[j], h[j + 1]);
        let rho = a.hypot(bb);
        let (c, s) = if rho == 0.0 {
            (1.0, 0.0)
        } else {
            (a / rho, bb / rho)
        };
        h[j] = rho;
        h[j + 1] = 0.0;
        cs.push((c, s));
        g[j + 1] = -s * g[j];
        g[j] *= c;
        h.truncate(j + 1);
        r.push(h);
        iters += 1;
        resid = g[j + 1].abs();
        let breakdown = hnext <= 1e-14 * raw.max(f64::MIN_POSITIVE);
        if resid <= tol * beta || breakdown {
            break;
        }
        basis.push(w.iter().map(|v| v / hnext).collect());
    }

    // Back substitution, dropping trailing columns whose pivot vanished.
    let mut k = iters;
    while k > 0 && r[k - 1][k - 1].abs() <= 1e-300 {
        k -= 1;
    }
    let mut y = vec![0.0; k];
    for i in (0..k).rev() {
        let mut s = g[i];
        for jj in i + 1..k {
            s -= r[jj][i] * y[jj];
        }
        y[i] = s / r[i][i];
    }
    for (yi, v) in y.iter().zip(&basis) {
        for (xk, vk) in x.iter_mut().zip(v) {
            *xk += yi * vk;
        }
    }
    if k < iters {
        // the dropped directions contribute nothing; residual is that of the truncated solve
        resid = g[k].abs().max(resid);
    }
    let rel = resid / beta;
    Ok(GmresOutcome {
        iterations: iters,
        relative_residual: rel,
        converged: rel <= tol,
    })
}

/// Nonlinear residual `G(y)` whose root Newton's method seeks.
pub trait Residual {
    fn dim(&self) -> usize;

    fn eval(&mut self, y: &[f64], out: &mut [f64]) -> Result<()>;

    /// `J_G(y)·v` given `g = G(y)`. Defaults to a one-sided finite difference.
    fn jac_action(&mut self, y: &[f64], g: &[f64], v: &[f64], out: &mut [f64]) -> Result<()> {
        let v_norm = l2_norm(v);
        if v_norm == 0.0 {
            out.fill(0.0);
            return Ok(());
        }
        let delta = fd_increment(l2_norm(y), v_norm);
        let shifted: Vec<f64> = y.iter().zip(v).map(|(a, b)| a + delta * b).collect();
        self.eval(&shifted, out)?;
        for (o, g0) in out.iter_mut().zip(g) {
            *o = (*o - g0) / delta;
        }
        Ok(())
    }
}

/// Closure-backed residual using the finite-difference Jacobian action.
pub struct FnResidual<F> {
    dim: usize,
    f: F,
}

impl<F: FnMut(&[f64], &mut [f64])> FnResidual<F> {
    pub fn new(dim: usize, f: F) -> Self {
        FnResidual { dim, f }
    }
}

impl<F: FnMut(&[f64], &mut [f64])> Residual for FnResidual<F> {
    fn dim(&self) -> usize {
        self.dim
    }

    fn eval(&mut self, y: &[f64], out: &mut [f64]) -> Result<()> {
        (self.f)(y, out);
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NewtonConfig {
    pub tol: f64,
    pub max_iter: usize,
    pub gmres_tol: f64,
    pub gmres_max_iter: usize,
}

impl Default for NewtonConfig {
    fn default() -> Self {
        NewtonConfig {
            tol: 1e-10,
            max_iter: 20,
            gmres_tol: 1e-8,
            gmres_max_iter: DEFAULT_GMRES_MAX_ITER,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct NewtonStats {
    pub iterations: usize,
    pub gmres_iterations: usize,
    pub residual_evals: usize,
    pub jac_actions: usize,
    pub residual_norm: f64,
}

/// Inexact Newton: each correction solves `J_G·Δ = −G(y)` by GMRES.
/// Stops once `‖G(y)‖ ≤ tol·(1 + ‖G(y₀)‖)`.
pub fn newton_krylov_solve<R: Residual>(
    residual: &mut R,
    y_guess: &[f64],
    cfg: &NewtonConfig,
) -> Result<(StateVector, NewtonStats)> {
    let n = residual.dim();
    crate::error::check_len(n, y_guess.len())?;
    let mut stats = NewtonStats::default();
    let mut y = StateVector::from(y_guess);
    let mut g = vec![0.0; n];
    residual.eval(&y, &mut g)?;
    stats.residual_evals += 1;
    let g0 = l2_norm(&g);
    if !g0.is_finite() {
        return Err(Error::NonFinite("Newton residual"));
    }
    let threshold = cfg.tol * (1.0 + g0);
    let mut gnorm = g0;
    let mut delta = vec![0.0; n];
    loop {
        stats.residual_norm = gnorm;
        if gnorm <= threshold {
            return Ok((y, stats));
        }
        if stats.iterations >= cfg.max_iter {
            return Err(Error::NewtonNonconvergence {
                iterations: stats.iterations,
                residual: gnorm,
            });
        }
        let rhs: Vec<f64> = g.iter().map(|v| -v).collect();
        let mut jac_calls = 0;
        let outcome = {
            let y_ref = &y;
            let g_ref = &g;
            let mut op = |v: &[f64], out: &mut [f64]| -> Result<()> {
                jac_calls += 1;
                residual.jac_action(y_ref, g_ref, v, out)
            };
            gmres_into(&mut op, &rhs, cfg.gmres_tol, cfg.gmres_max_iter, &mut delta)?
        };
        stats.jac_actions += jac_calls;
        stats.gmres_iterations += outcome.iterations;
        if !outcome.converged {
            if outcome.relative_residual >= 1.0 - 1e-12 {
                // the linearization is singular in every explored direction
                return Err(Error::NewtonNonconvergence {
                    iterations: stats.iterations,
                    residual: gnorm,
                });
            }
            return Err(Error::GmresStagnation {
                iterations: outcome.iterations,
                residual: outcome.relative_residual,
            });
        }
        for (yi, d) in y.iter_mut().zip(&delta) {
            *yi += d;
        }
        residual.eval(&y, &mut g)?;
        stats.residual_evals += 1;
        stats.iterations += 1;
        gnorm = l2_norm(&g);
        if !gnorm.is_finite() {
            return Err(Error::NonFinite("Newton residual"));
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::densephi::DenseMatrix;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn dense_op(a: &DenseMatrix) -> impl FnMut(&[f64], &mut [f64]) -> Result<()> + '_ {
        move |x, y| {
            y.copy_from_slice(&a.matvec(x)?);
            Ok(())
        }
    }

    #[test]
    fn gmres_identity_one_iteration() {
        let b = [1.0, -2.0, 3.0];
        let mut id = |x: &[f64], y: &mut [f64]| -> Result<()> {
            y.copy_from_slice(x);
            Ok(())
        };
        let (x, it) = gmres(&mut id, &b, 1e-12, 50).unwrap();
        assert_eq!(it, 1);
        for (xi, bi) in x.iter().zip(&b) {
            assert!((xi - bi).abs() <= 4.0 * f64::EPSILON * bi.abs());
        }
    }

    #[test]
    fn gmres_diagonal() {
        let a = DenseMatrix::from_diagonal(&[1.0, 2.0, 3.0, 4.0, 5.0]);
        let (x, _) = gmres(&mut dense_op(&a), &[1.0; 5], 1e-12, 50).unwrap();
        for (i, xi) in x.iter().enumerate() {
            assert!((xi - 1.0 / (i as f64 + 1.0)).abs() < 1e-11);
        }
    }

    #[test]
    fn gmres_spd_matches_direct_solve() {
        let mut rng = ChaCha8Rng::seed_from_u64(30);
        let n = 30;
        let m = nalgebra::DMatrix::<f64>::from_fn(n, n, |_, _| rng.gen_range(-1.0..1.0));
        let spd = &m * m.transpose() + nalgebra::DMatrix::identity(n, n) * (n as f64);
        let b = nalgebra::DVector::<f64>::from_fn(n, |_, _| rng.gen_range(-1.0..1.0));
        let direct = spd.clone().lu().solve(&b).unwrap();
        let a = DenseMatrix::new(n, n, spd.transpose().as_slice().to_vec()).unwrap();
        let tol = 1e-10;
        let (x, _) = gmres(&mut dense_op(&a), b.as_slice(), tol, 200).unwrap();
        let err: f64 = x
            .iter()
            .zip(direct.iter())
            .map(|(p, q)| (p - q).powi(2))
            .sum::<f64>()
            .sqrt();
        // ‖x − x*‖ ≤ ‖A⁻¹‖·tol·‖b‖ and ‖A⁻¹‖ ≤ 1/n here
        assert!(err <= tol * b.norm());
    }

    #[test]
    fn gmres_reports_stagnation() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let n = 40;
        let a =
            DenseMatrix::new(n, n, (0..n * n).map(|_| rng.gen_range(-1.0..1.0)).collect()).unwrap();
        let b = vec![1.0; n];
        let result = gmres(&mut dense_op(&a), &b, 1e-14, 3);
        match result {
            Err(Error::GmresStagnation {
                iterations,
                residual,
            }) => {
                assert_eq!(iterations, 3);
                assert!(residual > 1e-14);
            }
            other => panic!("expected stagnation, got {other:?}"),
        }
    }

    #[test]
    fn gmres_zero_rhs() {
        let a = DenseMatrix::from_diagonal(&[2.0, 3.0]);
        let (x, it) = gmres(&mut dense_op(&a), &[0.0, 0.0], 1e-10, 10).unwrap();
        assert_eq!(it, 0);
        assert_eq!(x.as_slice(), &[0.0, 0.0]);
    }

    #[test]
    fn newton_linear_residual_one_iteration() {
        struct Shift([f64; 3]);
        impl Residual for Shift {
            fn dim(&self) -> usize {
                3
            }
            fn eval(&mut self, y: &[f64], out: &mut [f64]) -> Result<()> {
                for i in 0..3 {
                    out[i] = y[i] - self.0[i];
                }
                Ok(())
            }
            fn jac_action(
                &mut self,
                _: &[f64],
                _: &[f64],
                v: &[f64],
                out: &mut [f64],
            ) -> Result<()> {
                out.copy_from_slice(v);
                Ok(())
            }
        }
        let c = [3.0, -1.0, 0.5];
        let (y, stats) =
            newton_krylov_solve(&mut Shift(c), &[0.0; 3], &NewtonConfig::default()).unwrap();
        assert_eq!(stats.iterations, 1);
        for (yi, ci) in y.iter().zip(&c) {
            assert!((yi - ci).abs() < 1e-14);
        }
        // the finite-difference action needs a second correction at most
        let mut fd = FnResidual::new(3, |y: &[f64], out: &mut [f64]| {
            for i in 0..3 {
                out[i] = y[i] - c[i];
            }
        });
        let (y, stats) = newton_krylov_solve(&mut fd, &[0.0; 3], &NewtonConfig::default()).unwrap();
        assert!(stats.iterations <= 2);
        for (yi, ci) in y.iter().zip(&c) {
            assert!((yi - ci).abs() < 1e-9);
        }
    }

    #[test]
    fn newton_scalar_quadratic() {
        let cfg = NewtonConfig {
            tol: 1e-12,
            ..NewtonConfig::default()
        };
        let mut res = FnResidual::new(1, |y: &[f64], out: &mut [f64]| out[0] = y[0] * y[0] - 4.0);
        let (y, stats) = newton_krylov_solve(&mut res, &[3.0], &cfg).unwrap();
        assert!((y[0] - 2.0).abs() <= 1e-11);
        assert!(stats.iterations >= 3);
    }

    #[test]
    fn newton_singular_jacobian_is_an_error() {
        let mut res = FnResidual::new(1, |y: &[f64], out: &mut [f64]| out[0] = y[0] * y[0] + 1.0);
        // G'(0) = 0; the finite difference yields ~δ, so start exactly at the stationary point
        let mut exact = FnResidual::new(1, |y: &[f64], out: &mut [f64]| out[0] = y[0] * y[0] + 1.0);
        struct Exact<'a, F>(&'a mut FnResidual<F>);
        impl<F: FnMut(&[f64], &mut [f64])> Residual for Exact<'_, F> {
            fn dim(&self) -> usize {
                1
            }
            fn eval(&mut self, y: &[f64], out: &mut [f64]) -> Result<()> {
                self.0.eval(y, out)
            }
            fn jac_action(
                &mut self,
                y: &[f64],
                _: &[f64],
                v: &[f64],
                out: &mut [f64],
            ) -> Result<()> {
                out[0] = 2.0 * y[0] * v[0];
                Ok(())
            }
        }
        let err = newton_krylov_solve(&mut Exact(&mut exact), &[0.0], &NewtonConfig::default())
            .unwrap_err();
        assert!(matches!(err, Error::NewtonNonconvergence { .. }), "{err:?}");
        // no real root: iterations run out instead of crashing
        let err = newton_krylov_solve(&mut res, &[0.5], &NewtonConfig::default()).unwrap_err();
        assert!(matches!(err, Error::NewtonNonconvergence { .. }), "{err:?}");
    }
}

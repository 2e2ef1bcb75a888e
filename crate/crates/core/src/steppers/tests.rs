use super::*;
use crate::densephi::{expm, DenseMatrix};
use crate::numcore::FnSystem;
use approx::assert_relative_eq;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn scalar_linear(lambda: f64) -> FnSystem {
    FnSystem::linear(1, vec![lambda])
}

/// `y' = y·cos t`, exact solution `exp(sin t)`.
fn cos_growth() -> FnSystem {
    FnSystem::new(1, |t, y, out| out[0] = y[0] * t.cos())
        .with_jacobian(|t, _, v, out| out[0] = v[0] * t.cos())
        .with_time_derivative(|t, y, out| out[0] = -y[0] * t.sin())
}

fn random_stable_matrix(n: usize, seed: u64) -> DenseMatrix {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut a = DenseMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            a[(i, j)] = rng.gen_range(-1.0..1.0) / (n as f64).sqrt();
        }
        a[(i, i)] -= 3.0;
    }
    a
}

#[test]
fn method_names_round_trip() {
    for m in Method::ALL {
        assert_eq!(m.name().parse::<Method>().unwrap(), m);
        assert_eq!(m.name().to_lowercase().parse::<Method>().unwrap(), m);
        assert_eq!(
            m.tableau().is_none(),
            m.family() == MethodFamily::Exponential
        );
        if let Some(t) = m.tableau() {
            assert_eq!(t.order(), m.order());
        }
    }
    assert!("SDIRK23".parse::<Method>().is_err());
}

#[test]
fn config_validation() {
    assert!(StepperConfig::new(Method::Rk4, 0.1).validate().is_ok());
    assert!(StepperConfig::new(Method::Rk4, 0.0).validate().is_err());
    assert!(StepperConfig::new(Method::Rk4, f64::NAN)
        .validate()
        .is_err());
    assert!(StepperConfig::new(Method::Epi2, 0.1)
        .with_krylov_tol(-1.0)
        .validate()
        .is_err());
    let mut cfg = StepperConfig::new(Method::Epi2, 0.1);
    cfg.krylov_m_init = 200;
    assert!(cfg.validate().is_err());
}

#[test]
fn zero_rhs_leaves_state_unchanged() {
    let zero = FnSystem::new(3, |_, _, out| out.fill(0.0)).autonomous();
    let y = [1.0, -2.0, 0.5];
    for m in Method::ALL {
        let (y1, rep) = step(&zero, 0.0, &y, 0.3, &StepperConfig::new(m, 0.3)).unwrap();
        assert_eq!(y1.as_slice(), &y, "{m}");
        if m.family() == MethodFamily::Implicit {
            assert_eq!(rep.newton_iters, 0, "{m}");
        }
    }
}

#[test]
fn scalar_examples() {
    let decay = scalar_linear(-1.0);
    let (y, _) = step(
        &decay,
        0.0,
        &[1.0],
        0.5,
        &StepperConfig::new(Method::Epi2, 0.5),
    )
    .unwrap();
    assert_relative_eq!(y[0], (-0.5f64).exp(), max_relative = 1e-9);
    let (y, _) = step(
        &decay,
        0.0,
        &[1.0],
        0.1,
        &StepperConfig::new(Method::Rk4, 0.1),
    )
    .unwrap();
    assert_relative_eq!(y[0], 0.9048375, max_relative = 1e-7);
    let (y, _) = step(
        &decay,
        0.0,
        &[1.0],
        1.0,
        &StepperConfig::new(Method::BackwardEuler, 1.0),
    )
    .unwrap();
    assert_relative_eq!(y[0], 0.5, max_relative = 1e-10);

    let (y, _) = step(
        &scalar_linear(-30.0),
        0.0,
        &[1.0],
        0.1,
        &StepperConfig::new(Method::ForwardEuler, 0.1),
    )
    .unwrap();
    assert_relative_eq!(y[0].abs(), 2.0, max_relative = 1e-14);

    let stiff = scalar_linear(-1e6);
    let (y, _) = step(
        &stiff,
        0.0,
        &[1.0],
        1.0,
        &StepperConfig::new(Method::Sdirk2, 1.0),
    )
    .unwrap();
    assert!(y[0].abs() < 1.0);
}

#[test]
fn integrate_examples() {
    let decay = scalar_linear(-1.0);
    let run = integrate(
        &decay,
        &StepperConfig::new(Method::Epi2, 0.5),
        0.0,
        1.0,
        &[1.0],
        None,
    )
    .unwrap();
    assert_eq!(run.steps, 2);
    assert!(!run.last_step_shortened);
    assert_relative_eq!(run.y[0], (-1.0f64).exp(), max_relative = 1e-9);

    let run = integrate(
        &decay,
        &StepperConfig::new(Method::Rk4, 0.1),
        0.3,
        0.3,
        &[2.0],
        None,
    )
    .unwrap();
    assert_eq!(run.steps, 0);
    assert_eq!(run.y[0], 2.0);
}

#[test]
fn integrate_flags_partial_final_step() {
    let decay = scalar_linear(-1.0);
    let mut times = Vec::new();
    let mut obs = |t: f64, _: &[f64], _: &StepReport| times.push(t);
    let run = integrate(
        &decay,
        &StepperConfig::new(Method::Rk4, 0.3),
        0.0,
        1.0,
        &[1.0],
        Some(&mut obs),
    )
    .unwrap();
    assert!(run.last_step_shortened);
    assert_eq!(run.steps, 4);
    assert_relative_eq!(*times.last().unwrap(), 1.0, max_relative = 1e-15);
    assert_relative_eq!(run.y[0], (-1.0f64).exp(), max_relative = 1e-4);
}

#[test]
fn tiling_tolerates_rounding() {
    assert_eq!(step_count(0.0, 0.1, 0.1 / 64.0), (64, 0.0));
    assert_eq!(step_count(0.0, 1.0, 0.1), (10, 0.0));
    let (full, rest) = step_count(0.0, 1.0, 0.3);
    assert_eq!(full, 3);
    assert_relative_eq!(rest, 0.1, max_relative = 1e-12);
}

#[test]
fn integrate_records_divergence() {
    let stiff = scalar_linear(-1000.0);
    let run = integrate(
        &stiff,
        &StepperConfig::new(Method::ForwardEuler, 0.01),
        0.0,
        1.0,
        &[1.0],
        None,
    )
    .unwrap();
    let d = run
        .divergence
        .expect("forward Euler must blow up at hλ = −10");
    assert!(d.step > 0 && d.step < 100);
    assert!(run.y.is_finite());
}

#[test]
fn integrate_rejects_bad_input() {
    let decay = scalar_linear(-1.0);
    let cfg = StepperConfig::new(Method::Rk4, 0.1);
    assert!(matches!(
        integrate(&decay, &cfg, 0.0, 1.0, &[1.0, 2.0], None),
        Err(Error::Dimension { .. })
    ));
    assert!(integrate(&decay, &cfg, 1.0, 0.0, &[1.0], None).is_err());
}

fn observed_order(method: Method) -> f64 {
    let sys = cos_growth();
    let tf = 1.0;
    let exact = 1.0f64.sin().exp();
    let errs: Vec<(f64, f64)> = (3..=8)
        .map(|k| {
            let h = 0.5 * 0.5f64.powi(k);
            let run =
                integrate(&sys, &StepperConfig::new(method, h), 0.0, tf, &[1.0], None).unwrap();
            (h, (run.y[0] - exact).abs())
        })
        .collect();
    crate::steppers::tests::slope(&errs)
}

/// Least-squares slope of log(error) against log(h).
pub(super) fn slope(points: &[(f64, f64)]) -> f64 {
    let n = points.len() as f64;
    let (sx, sy) = points
        .iter()
        .fold((0.0, 0.0), |(a, b), (h, e)| (a + h.ln(), b + e.ln()));
    let (mx, my) = (sx / n, sy / n);
    let (num, den) = points.iter().fold((0.0, 0.0), |(a, b), (h, e)| {
        let dx = h.ln() - mx;
        (a + dx * (e.ln() - my), b + dx * dx)
    });
    num / den
}

#[test]
fn convergence_orders_on_smooth_scalar_problem() {
    let expected = [
        (Method::ForwardEuler, 1.0, 0.15),
        (Method::BackwardEuler, 1.0, 0.15),
        (Method::Rk2, 2.0, 0.2),
        (Method::Sdirk2, 2.0, 0.2),
        (Method::Epi2, 2.0, 0.2),
        (Method::Rk3Ssp, 3.0, 0.3),
        (Method::Sdirk3, 3.0, 0.3),
        (Method::Rk4, 4.0, 0.4),
        (Method::Epirk4, 4.0, 0.4),
    ];
    for (m, order, tol) in expected {
        let p = observed_order(m);
        assert!((p - order).abs() <= tol, "{m}: observed order {p}");
    }
}

#[test]
fn exponential_methods_are_exact_on_linear_systems() {
    let n = 20;
    let a = random_stable_matrix(n, 17);
    let sys = FnSystem::linear(n, a.data().to_vec());
    let mut rng = ChaCha8Rng::seed_from_u64(23);
    let y0: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let tol = 1e-10;
    for h in [1e-4, 1e-3, 1e-2, 1e-1, 1.0, 10.0] {
        let exact = expm(&a.scaled(h)).unwrap().matvec(&y0).unwrap();
        for m in [Method::Epi2, Method::Epirk4] {
            let cfg = StepperConfig::new(m, h).with_krylov_tol(tol);
            let (y1, rep) = step(&sys, 0.0, &y0, h, &cfg).unwrap();
            let err: f64 = y1
                .iter()
                .zip(exact.iter())
                .map(|(a, b)| (a - b).powi(2))
                .sum::<f64>()
                .sqrt();
            // Krylov tolerance is relative to the size of the update, which scales with y0
            assert!(err <= 10.0 * tol * l2_norm(&y0), "{m} h={h}: {err:e}");
            let want = if m == Method::Epi2 { 1 } else { 2 };
            assert_eq!(rep.krylov_projections, want);
        }
    }
}

#[test]
fn exponential_methods_handle_time_dependence() {
    // y' = −y + t has y = t − 1 + 2e^{−t} from y(0) = 1
    let exact = 2.0 * (-1.0f64).exp();
    let analytic = FnSystem::new(1, |t, y, out| out[0] = -y[0] + t)
        .with_jacobian(|_, _, v, out| out[0] = -v[0])
        .with_time_derivative(|_, _, out| out[0] = 1.0);
    let fd_only = FnSystem::new(1, |t, y, out| out[0] = -y[0] + t);
    for m in [Method::Epi2, Method::Epirk4] {
        // affine in (y, t): the linearization is exact
        let run = integrate(
            &analytic,
            &StepperConfig::new(m, 0.25),
            0.0,
            1.0,
            &[1.0],
            None,
        )
        .unwrap();
        assert_relative_eq!(run.y[0], exact, max_relative = 1e-9);
        // difference quotients carry a relative error near √ε
        let run = integrate(
            &fd_only,
            &StepperConfig::new(m, 0.25),
            0.0,
            1.0,
            &[1.0],
            None,
        )
        .unwrap();
        assert_relative_eq!(run.y[0], exact, max_relative = 1e-6);
    }
}

#[test]
fn projection_and_dot_product_budgets() {
    let sys = crate::problems::Diffusion1D::new(Default::default()).unwrap();
    for (m, projections) in [(Method::Epi2, 1), (Method::Epirk4, 2)] {
        let mut per_step = Vec::new();
        let mut obs = |_: f64, _: &[f64], r: &StepReport| per_step.push(r.clone());
        integrate(
            &sys,
            &StepperConfig::new(m, 0.01),
            0.0,
            0.1,
            &sys.initial_state(),
            Some(&mut obs),
        )
        .unwrap();
        assert_eq!(per_step.len(), 10);
        for r in &per_step {
            assert_eq!(r.krylov_projections, projections);
            assert!(r.orth_dot_products <= 2 * r.krylov_vectors);
            assert!(r.normalizations <= r.krylov_vectors);
        }
    }
}

#[test]
fn implicit_methods_are_stable_for_stiff_decay() {
    for m in [Method::BackwardEuler, Method::Sdirk2] {
        for hl in [-10.0, -1e3, -1e6] {
            let sys = scalar_linear(hl);
            let mut norms = vec![1.0];
            let mut obs = |_: f64, y: &[f64], _: &StepReport| norms.push(y[0].abs());
            integrate(
                &sys,
                &StepperConfig::new(m, 1.0),
                0.0,
                5.0,
                &[1.0],
                Some(&mut obs),
            )
            .unwrap();
            assert!(
                norms.windows(2).all(|w| w[1] <= w[0]),
                "{m} hλ={hl}: {norms:?}"
            );
        }
    }
}

#[test]
fn fd_and_analytic_jacobians_agree_in_steppers() {
    let sys = crate::problems::Diffusion1D::new(Default::default()).unwrap();
    let y0 = sys.initial_state();
    for m in [Method::Epirk4, Method::Sdirk3] {
        let a = integrate(&sys, &StepperConfig::new(m, 0.02), 0.0, 0.1, &y0, None).unwrap();
        let mut cfg = StepperConfig::new(m, 0.02);
        cfg.use_analytic_jacobian = false;
        let b = integrate(&sys, &cfg, 0.0, 0.1, &y0, None).unwrap();
        let diff: Vec<f64> = a.y.iter().zip(b.y.iter()).map(|(x, z)| x - z).collect();
        assert!(l2_norm(&diff) <= 1e-6 * a.y.norm(), "{m}");
        assert!(b.report.rhs_evals > a.report.rhs_evals);
    }
}

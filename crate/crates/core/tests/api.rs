use expint_core::{
    expm, integrate, kiops_eval, phi_combination_dense, step, DenseMatrix, Diffusion1D, Diffusion1DParams,
    Diffusion2D, Diffusion2DParams, FnSystem, Method, OdeSystem, PhiCombinationTask, StateVector, StepperConfig,
};

fn harmonic() -> FnSystem {
    // y'' = -y as a first-order system
    FnSystem::new(2, |_, y, f| {
        f[0] = y[1];
        f[1] = -y[0];
    })
    .with_jacobian(|_, _, v, out| {
        out[0] = v[1];
        out[1] = -v[0];
    })
}

#[test]
fn every_method_tracks_the_oscillator() {
    let sys = harmonic();
    for m in Method::ALL {
        let cfg = StepperConfig::new(m, 1e-3);
        let run = integrate(&sys, &cfg, 0.0, 1.0, &[1.0, 0.0], None).unwrap();
        let err = ((run.y[0] - 1f64.cos()).powi(2) + (run.y[1] + 1f64.sin()).powi(2)).sqrt();
        let bound = if m.order() == 1 { 2e-3 } else { 1e-5 };
        assert!(err < bound, "{m}: {err}");
        assert_eq!(run.steps, 1000);
    }
}

#[test]
fn exponential_step_is_exact_for_the_linear_oscillator() {
    let sys = harmonic();
    let cfg = StepperConfig::new(Method::Epi2, 0.7);
    let (y, report) = step(&sys, 0.0, &[1.0, 0.0], 0.7, &cfg).unwrap();
    assert!((y[0] - 0.7f64.cos()).abs() < 1e-10);
    assert!((y[1] + 0.7f64.sin()).abs() < 1e-10);
    assert_eq!(report.krylov_projections, 1);
}

#[test]
fn krylov_matches_dense_through_public_api() {
    let n = 12;
    let mut a = DenseMatrix::zeros(n, n);
    for i in 0..n {
        a[(i, i)] = -2.0;
        if i > 0 {
            a[(i, i - 1)] = 1.0;
            a[(i - 1, i)] = 1.0;
        }
    }
    let vs = vec![StateVector::from_fn(n, |i| 1.0 / (i + 1) as f64), StateVector::from_fn(n, |i| (i as f64).sin())];
    let task = PhiCombinationTask::new(vs.clone(), vec![1.0], 1e-12);
    let mut op = |x: &[f64], y: &mut [f64]| {
        y.copy_from_slice(&a.matvec(x)?);
        Ok(())
    };
    let (w, _) = kiops_eval(&mut op, &task).unwrap();
    let dense = phi_combination_dense(&a, &vs).unwrap();
    let diff: f64 = w[0].iter().zip(dense.iter()).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
    assert!(diff < 1e-10, "{diff}");

    // φ₀ is the matrix exponential
    let e = expm(&a).unwrap().matvec(&vs[0]).unwrap();
    let only_v0 = phi_combination_dense(&a, &vs[..1]).unwrap();
    assert!(e.iter().zip(only_v0.iter()).all(|(x, y)| (x - y).abs() < 1e-13));
}

#[test]
fn diffusion_problems_decay_without_source() {
    let d1 = Diffusion1D::new(Diffusion1DParams { n_elem: 40, ..Default::default() }).unwrap().without_source();
    let d2 = Diffusion2D::new(Diffusion2DParams { n_side: 12, ..Default::default() }).unwrap().without_source();
    let systems: [&dyn OdeSystem; 2] = [&d1, &d2];
    for sys in systems {
        let y0 = StateVector::from_fn(sys.dim(), |i| ((i * 7 % 5) as f64) * 0.2);
        let cfg = StepperConfig::new(Method::Epirk4, 0.05);
        let run = integrate(sys, &cfg, 0.0, 1.0, &y0, None).unwrap();
        assert!(run.divergence.is_none());
        assert!(run.y.norm() < y0.norm(), "diffusion with zero boundary data must dissipate");
    }
}

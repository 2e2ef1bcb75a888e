use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use expint_core::{
    integrate, kiops_eval, Diffusion1D, Diffusion1DParams, Diffusion2D, Diffusion2DParams, Method,
    OdeSystem, PhiCombinationTask, StateVector, StepperConfig,
};

fn rhs(c: &mut Criterion) {
    let mut g = c.benchmark_group("rhs");
    for n in [50, 200] {
        let p = Diffusion1D::new(Diffusion1DParams {
            n_elem: n,
            ..Default::default()
        })
        .unwrap();
        let y = StateVector::from_fn(p.dim(), |i| (i as f64 * 0.1).sin());
        let mut out = StateVector::zeros(p.dim());
        g.bench_with_input(BenchmarkId::new("diffusion1d", n), &n, |b, _| {
            b.iter(|| p.rhs(0.0, black_box(&y), &mut out))
        });
    }
    for n in [20, 50] {
        let p = Diffusion2D::new(Diffusion2DParams {
            n_side: n,
            ..Default::default()
        })
        .unwrap();
        let y = StateVector::from_fn(p.dim(), |i| (i as f64 * 0.1).sin());
        let mut out = StateVector::zeros(p.dim());
        g.bench_with_input(BenchmarkId::new("diffusion2d", n), &n, |b, _| {
            b.iter(|| p.rhs(0.0, black_box(&y), &mut out))
        });
    }
    g.finish();
}

fn kiops(c: &mut Criterion) {
    let p = Diffusion1D::new(Diffusion1DParams {
        n_elem: 200,
        ..Default::default()
    })
    .unwrap();
    let y = p.initial_state();
    let n = p.dim();
    let b0 = StateVector::from_fn(n, |i| ((i + 1) as f64 * 0.03).sin());
    let b1 = StateVector::from(p.source());
    let h = 0.02;
    let mut g = c.benchmark_group("kiops");
    for tol in [1e-6, 1e-10] {
        let task = PhiCombinationTask::new(vec![b0.clone(), b1.clone()], vec![1.0], tol);
        g.bench_with_input(
            BenchmarkId::new("phi1_diffusion1d_n200", tol),
            &tol,
            |b, _| {
                b.iter(|| {
                    let mut op = |x: &[f64], out: &mut [f64]| {
                        p.jac_action(0.0, &y, x, out);
                        out.iter_mut().for_each(|o| *o *= h);
                        Ok(())
                    };
                    kiops_eval(&mut op, black_box(&task)).unwrap()
                })
            },
        );
    }
    g.finish();
}

fn integrate_1d(c: &mut Criterion) {
    let p = Diffusion1D::new(Diffusion1DParams {
        n_elem: 50,
        ..Default::default()
    })
    .unwrap();
    let y0 = p.initial_state();
    let mut g = c.benchmark_group("integrate_diffusion1d_n50");
    g.sample_size(10);
    for m in [Method::Epi2, Method::Epirk4, Method::Sdirk3] {
        let cfg = StepperConfig::new(m, 0.02);
        g.bench_function(m.name(), |b| {
            b.iter(|| integrate(&p, &cfg, 0.0, 0.2, black_box(&y0), None).unwrap())
        });
    }
    g.finish();
}

criterion_group!(benches, rhs, kiops, integrate_1d);
criterion_main!(benches);

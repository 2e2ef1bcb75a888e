use std::time::Instant;

use expint_core::{grid_l2_norm, integrate, Method, StateVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::{Assertion, Mode, StudyConfig};
use crate::problem::Problem;
use crate::reference::{reference_solution, ReferenceCache};
use crate::StudyError;

/// One `(method, h)` cell of a study; also the CSV row layout.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Row {
    pub method: String,
    pub h: f64,
    /// Grid L2 error at `t_final`; `inf` when diverged.
    pub error: f64,
    pub wall_time_s: f64,
    pub steps: usize,
    pub matvecs: usize,
    pub rhs_evals: usize,
    pub newton_iters: usize,
    pub krylov_projections: usize,
    pub diverged: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum OrderFit {
    Order(f64),
    /// Every error sits below the configured floor, so there is no slope to fit.
    Flat,
    /// Fewer than three usable points.
    Insufficient,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MethodOrder {
    pub method: Method,
    pub fit: OrderFit,
    pub points_used: usize,
}

#[derive(Debug, Clone)]
pub struct StudyReport {
    pub name: String,
    pub rows: Vec<Row>,
    pub orders: Vec<MethodOrder>,
}

impl StudyReport {
    pub fn rows_for(&self, method: Method) -> impl Iterator<Item = &Row> {
        self.rows.iter().filter(move |r| r.method == method.name())
    }

    pub fn order(&self, method: Method) -> Option<&MethodOrder> {
        self.orders.iter().find(|o| o.method == method)
    }
}

/// Runs the study in the mode it declares.
pub fn run_study(
    cfg: &StudyConfig,
    cache: &ReferenceCache,
    verbose: bool,
) -> Result<StudyReport, StudyError> {
    match cfg.mode {
        Mode::Convergence => run_convergence(cfg, cache, verbose),
        Mode::Precision => run_precision(cfg, cache, verbose),
    }
}

/// Error-vs-h sweep; cells run in parallel.
pub fn run_convergence(
    cfg: &StudyConfig,
    cache: &ReferenceCache,
    verbose: bool,
) -> Result<StudyReport, StudyError> {
    let (problem, reference) = prepare(cfg, cache, verbose)?;
    let rows = cells(cfg)
        .par_iter()
        .map(|&(m, h)| run_cell(&problem, cfg, &reference, m, h, verbose))
        .collect();
    Ok(finish(cfg, rows))
}

/// Error-vs-wall-time sweep; cells run one at a time so timings do not compete.
pub fn run_precision(
    cfg: &StudyConfig,
    cache: &ReferenceCache,
    verbose: bool,
) -> Result<StudyReport, StudyError> {
    let (problem, reference) = prepare(cfg, cache, verbose)?;
    let rows = cells(cfg)
        .iter()
        .map(|&(m, h)| run_cell(&problem, cfg, &reference, m, h, verbose))
        .collect();
    Ok(finish(cfg, rows))
}

fn prepare(
    cfg: &StudyConfig,
    cache: &ReferenceCache,
    verbose: bool,
) -> Result<(Problem, StateVector), StudyError> {
    let problem = Problem::build(&cfg.problem).map_err(|e| {
        StudyError::Config(crate::config::ConfigError {
            location: "[problem]".into(),
            message: e.to_string(),
        })
    })?;
    let start = Instant::now();
    let reference = reference_solution(&problem, cfg, cache)?;
    if verbose {
        eprintln!(
            "{}: reference ready in {:.2}s",
            cfg.name,
            start.elapsed().as_secs_f64()
        );
    }
    Ok((problem, reference))
}

fn cells(cfg: &StudyConfig) -> Vec<(Method, f64)> {
    cfg.methods
        .iter()
        .flat_map(|&m| cfg.h_values_for(m).iter().map(move |&h| (m, h)))
        .collect()
}

fn run_cell(
    problem: &Problem,
    cfg: &StudyConfig,
    reference: &[f64],
    method: Method,
    h: f64,
    verbose: bool,
) -> Row {
    let sc = cfg.stepper(method, h);
    let y0 = problem.initial_state();
    let mut times = Vec::with_capacity(cfg.repetitions);
    let mut outcome = None;
    for _ in 0..cfg.repetitions {
        let start = Instant::now();
        let run = integrate(problem, &sc, 0.0, cfg.t_final, &y0, None);
        times.push(start.elapsed().as_secs_f64());
        outcome = Some(run);
    }
    let wall_time_s = median(&mut times);
    let mut row = Row {
        method: method.name().to_string(),
        h,
        error: f64::INFINITY,
        wall_time_s,
        steps: 0,
        matvecs: 0,
        rhs_evals: 0,
        newton_iters: 0,
        krylov_projections: 0,
        diverged: true,
    };
    match outcome.expect("at least one repetition") {
        Ok(run) => {
            row.steps = run.steps;
            row.matvecs = run.report.matvecs;
            row.rhs_evals = run.report.rhs_evals;
            row.newton_iters = run.report.newton_iters;
            row.krylov_projections = run.report.krylov_projections;
            match run.divergence {
                Some(d) if verbose => {
                    eprintln!("{method} h={h}: diverged at t={} ({})", d.t, d.reason)
                }
                Some(_) => {}
                None => {
                    let diff: Vec<f64> = run.y.iter().zip(reference).map(|(a, b)| a - b).collect();
                    row.error = grid_l2_norm(&diff, problem.cell_volume());
                    row.diverged = false;
                }
            }
        }
        Err(e) => eprintln!("warning: {method} h={h} failed and is recorded as diverged: {e}"),
    }
    if verbose {
        eprintln!(
            "{method} h={h}: error {:e}, {:.3}s",
            row.error, row.wall_time_s
        );
    }
    row
}

fn median(v: &mut [f64]) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

fn finish(cfg: &StudyConfig, rows: Vec<Row>) -> StudyReport {
    let orders = cfg
        .methods
        .iter()
        .map(|&m| {
            let points: Vec<(f64, f64)> = rows
                .iter()
                .filter(|r| r.method == m.name() && !r.diverged)
                .map(|r| (r.h, r.error))
                .collect();
            let (fit, points_used) = fit_order(&points, cfg.flat_error);
            MethodOrder {
                method: m,
                fit,
                points_used,
            }
        })
        .collect();
    StudyReport {
        name: cfg.name.clone(),
        rows,
        orders,
    }
}

/// Least-squares slope of `log(error)` against `log(h)`.
///
/// Needs at least three points; zero errors are dropped. Reports
/// [`OrderFit::Flat`] when every error is at most `flat_error`.
pub fn fit_order(points: &[(f64, f64)], flat_error: f64) -> (OrderFit, usize) {
    if points.len() >= 3 && points.iter().all(|p| p.1 <= flat_error) {
        return (OrderFit::Flat, points.len());
    }
    let usable: Vec<(f64, f64)> = points
        .iter()
        .filter(|p| p.1 > 0.0 && p.1.is_finite())
        .map(|&(h, e)| (h.ln(), e.ln()))
        .collect();
    let n = usable.len();
    if n < 3 {
        return (OrderFit::Insufficient, n);
    }
    let mx = usable.iter().map(|p| p.0).sum::<f64>() / n as f64;
    let my = usable.iter().map(|p| p.1).sum::<f64>() / n as f64;
    let (num, den) = usable.iter().fold((0.0, 0.0), |(a, b), (x, y)| {
        (a + (x - mx) * (y - my), b + (x - mx) * (x - mx))
    });
    (OrderFit::Order(num / den), n)
}

/// Outcome of one `[verify]` assertion.
#[derive(Debug, Clone)]
pub struct Check {
    pub assertion: Assertion,
    pub passed: bool,
    pub detail: String,
}

pub fn verify(cfg: &StudyConfig, report: &StudyReport) -> Vec<Check> {
    cfg.verify.iter().map(|a| check(a, report)).collect()
}

fn check(assertion: &Assertion, report: &StudyReport) -> Check {
    let method = match assertion {
        Assertion::Order { method, .. }
        | Assertion::MaxError { method, .. }
        | Assertion::Flat { method }
        | Assertion::DivergesAtLargestH { method }
        | Assertion::Finite { method }
        | Assertion::ErrorIncreasesWithH { method } => *method,
    };
    let rows: Vec<&Row> = report.rows_for(method).collect();
    let (passed, detail) = if rows.is_empty() {
        (false, "method not in study".to_string())
    } else {
        match assertion {
            Assertion::Order { expected, tol, .. } => match report.order(method).map(|o| o.fit) {
                Some(OrderFit::Order(p)) => {
                    ((p - expected).abs() <= *tol, format!("fitted {p:.3}"))
                }
                Some(other) => (false, format!("{other:?}")),
                None => (false, "no fit".into()),
            },
            Assertion::MaxError { bound, .. } => {
                let worst = rows.iter().map(|r| r.error).fold(0.0, f64::max);
                (worst <= *bound, format!("max error {worst:e}"))
            }
            Assertion::Flat { .. } => {
                let fit = report.order(method).map(|o| o.fit);
                (fit == Some(OrderFit::Flat), format!("{fit:?}"))
            }
            Assertion::DivergesAtLargestH { .. } => {
                let largest = rows
                    .iter()
                    .max_by(|a, b| a.h.total_cmp(&b.h))
                    .expect("rows not empty");
                (
                    largest.diverged,
                    format!("h={} diverged={}", largest.h, largest.diverged),
                )
            }
            Assertion::Finite { .. } => {
                let n = rows.iter().filter(|r| r.diverged).count();
                (n == 0, format!("{n} diverged runs"))
            }
            Assertion::ErrorIncreasesWithH { .. } => {
                let mut by_h: Vec<&&Row> = rows.iter().collect();
                by_h.sort_by(|a, b| a.h.total_cmp(&b.h));
                let ok = by_h.windows(2).all(|w| w[1].error > w[0].error);
                let errs: Vec<String> = by_h.iter().map(|r| format!("{:.2e}", r.error)).collect();
                (ok, format!("errors by increasing h: {}", errs.join(" ")))
            }
        }
    };
    Check {
        assertion: assertion.clone(),
        passed,
        detail,
    }
}

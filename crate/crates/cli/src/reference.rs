use std::fs;
use std::path::{Path, PathBuf};

use expint_core::{integrate, phi_combination_dense, OdeSystem, StateVector, StepperConfig};
use sha2::{Digest, Sha256};

use crate::config::{ReferenceMethod, StudyConfig};
use crate::problem::Problem;
use crate::StudyError;

/// Largest system the dense reference will assemble.
pub const MAX_DENSE_DIM: usize = 2500;

/// On-disk store of reference solutions keyed by a content hash.
#[derive(Debug, Clone)]
pub struct ReferenceCache {
    dir: Option<PathBuf>,
}

impl ReferenceCache {
    /// `$BENCH_CACHE_DIR`, or `expint-bench-cache` under the system temp directory.
    pub fn from_env() -> Self {
        let dir = std::env::var_os("BENCH_CACHE_DIR")
            .map(PathBuf::from)
            .unwrap_or_else(|| std::env::temp_dir().join("expint-bench-cache"));
        ReferenceCache { dir: Some(dir) }
    }

    pub fn at(dir: impl Into<PathBuf>) -> Self {
        ReferenceCache {
            dir: Some(dir.into()),
        }
    }

    pub fn disabled() -> Self {
        ReferenceCache { dir: None }
    }

    pub fn dir(&self) -> Option<&Path> {
        self.dir.as_deref()
    }

    fn path(&self, key: &str) -> Option<PathBuf> {
        self.dir.as_ref().map(|d| d.join(format!("{key}.f64")))
    }

    pub fn load(&self, key: &str, dim: usize) -> Option<StateVector> {
        let bytes = fs::read(self.path(key)?).ok()?;
        if bytes.len() != dim * 8 {
            return None;
        }
        let v: Vec<f64> = bytes
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
            .collect();
        v.iter()
            .all(|x| x.is_finite())
            .then(|| StateVector::from(v))
    }

    pub fn store(&self, key: &str, y: &[f64]) -> std::io::Result<()> {
        let (Some(dir), Some(path)) = (self.dir.as_ref(), self.path(key)) else {
            return Ok(());
        };
        fs::create_dir_all(dir)?;
        let bytes: Vec<u8> = y.iter().flat_map(|x| x.to_le_bytes()).collect();
        let tmp = dir.join(format!("{key}.{}.tmp", std::process::id()));
        fs::write(&tmp, bytes)?;
        fs::rename(&tmp, path)
    }
}

/// Hex SHA-256 of everything the reference depends on.
pub fn cache_key(cfg: &StudyConfig) -> String {
    let r = &cfg.reference;
    let text = format!(
        "expint-reference-v1|{:?}|t_final={:?}|{:?}|h_ref={:?}|krylov_tol={:?}",
        cfg.problem, cfg.t_final, r.method, r.h_ref, r.krylov_tol
    );
    hex::encode(Sha256::digest(text.as_bytes()))
}

/// Solution at `t_final` that study errors are measured against.
pub fn reference_solution(
    problem: &Problem,
    cfg: &StudyConfig,
    cache: &ReferenceCache,
) -> Result<StateVector, StudyError> {
    let key = cache_key(cfg);
    if let Some(y) = cache.load(&key, problem.dim()) {
        return Ok(y);
    }
    let y = compute_reference(problem, cfg)?;
    if let Err(e) = cache.store(&key, &y) {
        eprintln!("warning: could not cache reference solution: {e}");
    }
    Ok(y)
}

pub fn compute_reference(problem: &Problem, cfg: &StudyConfig) -> Result<StateVector, StudyError> {
    let y0 = problem.initial_state();
    match cfg.reference.method {
        ReferenceMethod::Expm => dense_reference(problem, cfg.t_final, &y0),
        ReferenceMethod::Stepper(method) => {
            let sc = StepperConfig {
                krylov_tol: cfg.reference.krylov_tol,
                ..cfg.stepper(method, cfg.reference.h_ref)
            };
            let run = integrate(problem, &sc, 0.0, cfg.t_final, &y0, None)
                .map_err(|e| StudyError::Numeric(format!("reference integration failed: {e}")))?;
            if let Some(d) = run.divergence {
                return Err(StudyError::Numeric(format!(
                    "reference solution diverged at t = {} (step {}): {}",
                    d.t, d.step, d.reason
                )));
            }
            Ok(run.y)
        }
    }
}

/// `y(t) = e^{tA}y₀ + tφ₁(tA)·b` for the affine system `y' = Ay + b`.
fn dense_reference(problem: &Problem, t: f64, y0: &[f64]) -> Result<StateVector, StudyError> {
    if !problem.is_linear() {
        return Err(StudyError::Config(crate::config::ConfigError {
            location: "[reference]".into(),
            message: "method = expm needs a linear problem (beta2 = 0)".into(),
        }));
    }
    let n = problem.dim();
    if n > MAX_DENSE_DIM {
        return Err(StudyError::Config(crate::config::ConfigError {
            location: "[reference]".into(),
            message: format!(
                "method = expm supports at most {MAX_DENSE_DIM} unknowns, problem has {n}"
            ),
        }));
    }
    let a = problem.assemble_jacobian().scaled(t);
    let b: StateVector = problem.source().iter().map(|s| t * s).collect();
    phi_combination_dense(&a, &[StateVector::from(y0), b])
        .map_err(|e| StudyError::Numeric(format!("dense reference failed: {e}")))
}

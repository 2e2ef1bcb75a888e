//! Study files: `key = value` lines grouped under `[section]` headers.
//!
//! ```text
//! [study]
//! name = nonlinear-1d-coarse
//! methods = EPI2, EPIRK4, SDIRK3
//! h_values = 0.02, 0.01, 0.005
//! t_final = 2
//!
//! [problem]
//! kind = diff1d
//! n_elem = 50
//! ```
//!
//! `#` starts a comment. Every error names the file line (or `--set` override)
//! it came from.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;

use expint_core::steppers::step_count;
use expint_core::{Diffusion1DParams, Diffusion2DParams, Field, Method, StepperConfig};

#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError {
    pub location: String,
    pub message: String,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.location, self.message)
    }
}

impl std::error::Error for ConfigError {}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Convergence,
    Precision,
}

#[derive(Debug, Clone, PartialEq)]
pub enum ProblemSpec {
    Diff1d(Diffusion1DParams),
    Diff2d(Diffusion2DParams),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ReferenceMethod {
    Stepper(Method),
    /// Dense matrix exponential of the assembled operator (linear problems only).
    Expm,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReferenceSpec {
    pub method: ReferenceMethod,
    pub h_ref: f64,
    pub krylov_tol: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerances {
    pub krylov_tol: f64,
    pub newton_tol: f64,
    pub newton_max_iter: usize,
    pub gmres_tol: f64,
    pub gmres_max_iter: usize,
}

impl Default for Tolerances {
    fn default() -> Self {
        let d = StepperConfig::new(Method::Epi2, 1.0);
        Tolerances {
            krylov_tol: d.krylov_tol,
            newton_tol: d.newton_tol,
            newton_max_iter: d.newton_max_iter,
            gmres_tol: d.gmres_tol,
            gmres_max_iter: d.gmres_max_iter,
        }
    }
}

/// A check evaluated by `bench verify`.
#[derive(Debug, Clone, PartialEq)]
pub enum Assertion {
    /// Fitted order within `expected ± tol`.
    Order {
        method: Method,
        expected: f64,
        tol: f64,
    },
    /// Every run finishes with error at most `bound`.
    MaxError { method: Method, bound: f64 },
    /// Fitted order reported as flat (errors at the floor for every h).
    Flat { method: Method },
    /// The run at the largest h diverges.
    DivergesAtLargestH { method: Method },
    /// No run diverges.
    Finite { method: Method },
    /// Error strictly increases with h.
    ErrorIncreasesWithH { method: Method },
}

impl fmt::Display for Assertion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Assertion::Order {
                method,
                expected,
                tol,
            } => write!(f, "{method} order {expected} +- {tol}"),
            Assertion::MaxError { method, bound } => write!(f, "{method} error <= {bound:e}"),
            Assertion::Flat { method } => write!(f, "{method} error flat in h"),
            Assertion::DivergesAtLargestH { method } => write!(f, "{method} diverges at largest h"),
            Assertion::Finite { method } => write!(f, "{method} finite at every h"),
            Assertion::ErrorIncreasesWithH { method } => {
                write!(f, "{method} error increases with h")
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StudyConfig {
    pub name: String,
    pub mode: Mode,
    pub problem: ProblemSpec,
    pub t_final: f64,
    pub methods: Vec<Method>,
    pub h_values: Vec<f64>,
    /// Per-method sweeps that replace `h_values`.
    pub h_overrides: BTreeMap<Method, Vec<f64>>,
    pub reference: ReferenceSpec,
    pub tolerances: Tolerances,
    pub output: String,
    pub repetitions: usize,
    /// Fitted orders are reported as flat when every error is at most this.
    pub flat_error: f64,
    pub verify: Vec<Assertion>,
}

impl StudyConfig {
    pub fn h_values_for(&self, method: Method) -> &[f64] {
        self.h_overrides.get(&method).unwrap_or(&self.h_values)
    }

    pub fn stepper(&self, method: Method, h: f64) -> StepperConfig {
        let t = &self.tolerances;
        StepperConfig {
            krylov_tol: t.krylov_tol,
            newton_tol: t.newton_tol,
            newton_max_iter: t.newton_max_iter,
            gmres_tol: t.gmres_tol,
            gmres_max_iter: t.gmres_max_iter,
            ..StepperConfig::new(method, h)
        }
    }

    pub fn from_file(path: &Path, overrides: &[String]) -> Result<Self, LoadError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| LoadError::Io(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text, &path.display().to_string(), overrides).map_err(LoadError::Config)
    }

    /// Parses a study file; `source` labels error locations.
    pub fn parse(text: &str, source: &str, overrides: &[String]) -> Result<Self, ConfigError> {
        let mut entries = parse_entries(text, source)?;
        for o in overrides {
            let loc = format!("--set {o}");
            let (key, value) = o
                .split_once('=')
                .ok_or_else(|| err(&loc, "expected section.key=value"))?;
            let key = key.trim();
            if !key.contains('.') {
                return Err(err(&loc, "override key must be section.key"));
            }
            entries.insert(
                key.to_string(),
                Entry {
                    value: value.trim().to_string(),
                    location: loc,
                    used: false,
                },
            );
        }
        let mut r = Reader { entries };
        let cfg = build(&mut r)?;
        r.reject_unused()?;
        Ok(cfg)
    }
}

#[derive(Debug)]
pub enum LoadError {
    Io(String),
    Config(ConfigError),
}

struct Entry {
    value: String,
    location: String,
    used: bool,
}

fn err(location: &str, message: impl Into<String>) -> ConfigError {
    ConfigError {
        location: location.to_string(),
        message: message.into(),
    }
}

fn parse_entries(text: &str, source: &str) -> Result<BTreeMap<String, Entry>, ConfigError> {
    let mut entries = BTreeMap::new();
    let mut section: Option<String> = None;
    for (i, raw) in text.lines().enumerate() {
        let loc = format!("{source}:{}", i + 1);
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        if let Some(rest) = line.strip_prefix('[') {
            let name = rest
                .strip_suffix(']')
                .ok_or_else(|| err(&loc, "unterminated section header"))?
                .trim();
            if !SECTIONS.contains(&name) {
                return Err(err(&loc, format!("unknown section [{name}]")));
            }
            section = Some(name.to_string());
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| err(&loc, "expected key = value"))?;
        let sec = section
            .as_deref()
            .ok_or_else(|| err(&loc, "key outside of any section"))?;
        let full = format!("{sec}.{}", key.trim());
        if let Some(prev) = entries.get(&full) {
            let prev: &Entry = prev;
            return Err(err(
                &loc,
                format!("duplicate key {full} (first set at {})", prev.location),
            ));
        }
        entries.insert(
            full,
            Entry {
                value: value.trim().to_string(),
                location: loc,
                used: false,
            },
        );
    }
    Ok(entries)
}

const SECTIONS: [&str; 5] = ["study", "problem", "reference", "tolerances", "verify"];

struct Reader {
    entries: BTreeMap<String, Entry>,
}

impl Reader {
    fn raw(&mut self, key: &str) -> Option<(String, String)> {
        self.entries.get_mut(key).map(|e| {
            e.used = true;
            (e.value.clone(), e.location.clone())
        })
    }

    fn parse<T>(
        &mut self,
        key: &str,
        what: &str,
        f: impl Fn(&str) -> Option<T>,
    ) -> Result<Option<T>, ConfigError> {
        match self.raw(key) {
            None => Ok(None),
            Some((v, loc)) => f(&v)
                .map(Some)
                .ok_or_else(|| err(&loc, format!("{key}: expected {what}, got '{v}'"))),
        }
    }

    fn f64_or(&mut self, key: &str, default: f64) -> Result<f64, ConfigError> {
        Ok(self.parse(key, "a number", parse_f64)?.unwrap_or(default))
    }

    fn usize_or(&mut self, key: &str, default: usize) -> Result<usize, ConfigError> {
        Ok(self
            .parse(key, "a nonnegative integer", |s| s.parse().ok())?
            .unwrap_or(default))
    }

    fn required(&mut self, key: &str) -> Result<(String, String), ConfigError> {
        self.raw(key)
            .ok_or_else(|| err("study file", format!("missing required key {key}")))
    }

    fn location(&self, key: &str) -> String {
        self.entries
            .get(key)
            .map_or_else(|| "study file".to_string(), |e| e.location.clone())
    }

    /// Keys under `prefix.` that have not been read yet.
    fn keys_with_prefix(&self, prefix: &str) -> Vec<String> {
        self.entries
            .keys()
            .filter(|k| k.starts_with(prefix))
            .cloned()
            .collect()
    }

    fn reject_unused(&self) -> Result<(), ConfigError> {
        match self.entries.iter().find(|(_, e)| !e.used) {
            Some((k, e)) => Err(err(&e.location, format!("unknown key {k}"))),
            None => Ok(()),
        }
    }
}

fn parse_f64(s: &str) -> Option<f64> {
    s.trim().parse::<f64>().ok().filter(|v| v.is_finite())
}

fn parse_list(s: &str) -> Option<Vec<f64>> {
    s.split(',').map(parse_f64).collect()
}

fn parse_methods(s: &str) -> Option<Vec<Method>> {
    if s.trim().is_empty() {
        return Some(Vec::new());
    }
    s.split(',').map(|m| m.trim().parse().ok()).collect()
}

fn parse_point(s: &str) -> Option<[f64; 2]> {
    match parse_list(s)?.as_slice() {
        [x, y] => Some([*x, *y]),
        _ => None,
    }
}

fn parse_bool(s: &str) -> Option<bool> {
    match s.trim() {
        "true" | "yes" => Some(true),
        "false" | "no" => Some(false),
        _ => None,
    }
}

/// `expected +- tol`
fn parse_order(s: &str) -> Option<(f64, f64)> {
    let (a, b) = s.split_once("+-")?;
    Some((parse_f64(a)?, parse_f64(b)?))
}

fn build(r: &mut Reader) -> Result<StudyConfig, ConfigError> {
    let (name, _) = r.required("study.name")?;
    let mode = match r.parse("study.mode", "convergence or precision", |s| match s {
        "convergence" => Some(Mode::Convergence),
        "precision" => Some(Mode::Precision),
        _ => None,
    })? {
        Some(m) => m,
        None => Mode::Convergence,
    };
    let methods_loc = r.location("study.methods");
    let methods = r
        .parse(
            "study.methods",
            "a comma-separated list of method names",
            parse_methods,
        )?
        .ok_or_else(|| err("study file", "missing required key study.methods"))?;
    for (i, m) in methods.iter().enumerate() {
        if methods[..i].contains(m) {
            return Err(err(&methods_loc, format!("method {m} listed twice")));
        }
    }
    let t_final = r
        .parse("study.t_final", "a positive number", parse_f64)?
        .ok_or_else(|| err("study file", "missing required key study.t_final"))?;
    let t_loc = r.location("study.t_final");
    if t_final <= 0.0 {
        return Err(err(&t_loc, "t_final must be positive"));
    }

    let h_loc = r.location("study.h_values");
    let h_values = match r.parse(
        "study.h_values",
        "a comma-separated list of numbers",
        parse_list,
    )? {
        Some(h) => h,
        None => {
            let h_max = r.parse("study.h_max", "a number", parse_f64)?;
            let count = r.parse("study.h_count", "a positive integer", |s| {
                s.parse::<usize>().ok()
            })?;
            match (h_max, count) {
                (Some(h), Some(c)) if c > 0 => (0..c).map(|k| h / 2f64.powi(k as i32)).collect(),
                _ => {
                    return Err(err(
                        "study file",
                        "need study.h_values or both study.h_max and study.h_count",
                    ))
                }
            }
        }
    };
    check_sweep(&h_values, t_final, &h_loc)?;
    let mut h_overrides = BTreeMap::new();
    for key in r.keys_with_prefix("study.h_values.") {
        let loc = r.location(&key);
        let method: Method = key["study.h_values.".len()..]
            .parse()
            .map_err(|_| err(&loc, format!("unknown method in {key}")))?;
        let hs = r
            .parse(&key, "a comma-separated list of numbers", parse_list)?
            .unwrap_or_default();
        check_sweep(&hs, t_final, &loc)?;
        h_overrides.insert(method, hs);
    }

    let repetitions = r.usize_or("study.repetitions", 1)?;
    if repetitions == 0 {
        return Err(err(
            &r.location("study.repetitions"),
            "repetitions must be at least 1",
        ));
    }
    let output = match r.raw("study.output") {
        Some((v, _)) => v,
        None => name.clone(),
    };
    let flat_error = r.f64_or("study.flat_error", 1e-12)?;

    let problem = build_problem(r)?;
    let tolerances = build_tolerances(r)?;

    let min_h = methods
        .iter()
        .flat_map(|m| h_overrides.get(m).unwrap_or(&h_values).iter().copied())
        .fold(f64::INFINITY, f64::min);
    let reference = build_reference(r, min_h, t_final)?;
    let verify = build_verify(r)?;

    Ok(StudyConfig {
        name,
        mode,
        problem,
        t_final,
        methods,
        h_values,
        h_overrides,
        reference,
        tolerances,
        output,
        repetitions,
        flat_error,
        verify,
    })
}

fn check_sweep(hs: &[f64], t_final: f64, loc: &str) -> Result<(), ConfigError> {
    if hs.is_empty() {
        return Err(err(loc, "step size list is empty"));
    }
    for w in hs.windows(2) {
        if w[1] >= w[0] {
            return Err(err(loc, "step sizes must be strictly decreasing"));
        }
    }
    for &h in hs {
        if h <= 0.0 {
            return Err(err(loc, format!("step size {h} is not positive")));
        }
        if step_count(0.0, t_final, h).1 != 0.0 {
            return Err(err(
                loc,
                format!("step size {h} does not divide t_final = {t_final}"),
            ));
        }
    }
    Ok(())
}

fn build_problem(r: &mut Reader) -> Result<ProblemSpec, ConfigError> {
    let (kind, kind_loc) = r.required("problem.kind")?;
    let spec = match kind.as_str() {
        "diff1d" => {
            let d = Diffusion1DParams::default();
            ProblemSpec::Diff1d(Diffusion1DParams {
                beta1: r.f64_or("problem.beta1", d.beta1)?,
                beta2: r.f64_or("problem.beta2", d.beta2)?,
                sigma: r.f64_or("problem.sigma", d.sigma)?,
                n_elem: r.usize_or("problem.n_elem", d.n_elem)?,
            })
        }
        "diff2d" => {
            let d = Diffusion2DParams::default();
            let field = match r.raw("problem.field") {
                None => d.field.clone(),
                Some((v, loc)) => match v.as_str() {
                    "two-wire" => {
                        let (mut positions, mut strengths) = match &d.field {
                            Field::TwoWire {
                                positions,
                                strengths,
                            } => (*positions, *strengths),
                            Field::Uniform(_) => unreachable!("default field is two-wire"),
                        };
                        for (i, key) in ["problem.wire1", "problem.wire2"].iter().enumerate() {
                            if let Some(p) = r.parse(key, "a point x, y", parse_point)? {
                                positions[i] = p;
                            }
                        }
                        if let Some(s) =
                            r.parse("problem.wire_strengths", "two numbers", parse_point)?
                        {
                            strengths = s;
                        }
                        Field::TwoWire {
                            positions,
                            strengths,
                        }
                    }
                    "uniform" => {
                        let b = r
                            .parse("problem.field_direction", "a vector x, y", parse_point)?
                            .ok_or_else(|| {
                                err(&loc, "uniform field needs problem.field_direction")
                            })?;
                        Field::Uniform(b)
                    }
                    other => {
                        return Err(err(
                            &loc,
                            format!("unknown field '{other}' (two-wire or uniform)"),
                        ))
                    }
                },
            };
            ProblemSpec::Diff2d(Diffusion2DParams {
                kappa: r.f64_or("problem.kappa", d.kappa)?,
                eps_perp: r.f64_or("problem.eps_perp", d.eps_perp)?,
                beta1: r.f64_or("problem.beta1", d.beta1)?,
                beta2: r.f64_or("problem.beta2", d.beta2)?,
                sigma: r.f64_or("problem.sigma", d.sigma)?,
                n_side: r.usize_or("problem.n_side", d.n_side)?,
                field,
            })
        }
        other => {
            return Err(err(
                &kind_loc,
                format!("unknown problem kind '{other}' (diff1d or diff2d)"),
            ))
        }
    };
    let valid = match &spec {
        ProblemSpec::Diff1d(p) => p.validate(),
        ProblemSpec::Diff2d(p) => p.validate(),
    };
    valid.map_err(|e| err(&kind_loc, format!("invalid problem parameters: {e}")))?;
    Ok(spec)
}

fn build_tolerances(r: &mut Reader) -> Result<Tolerances, ConfigError> {
    let d = Tolerances::default();
    let t = Tolerances {
        krylov_tol: r.f64_or("tolerances.krylov_tol", d.krylov_tol)?,
        newton_tol: r.f64_or("tolerances.newton_tol", d.newton_tol)?,
        newton_max_iter: r.usize_or("tolerances.newton_max_iter", d.newton_max_iter)?,
        gmres_tol: r.f64_or("tolerances.gmres_tol", d.gmres_tol)?,
        gmres_max_iter: r.usize_or("tolerances.gmres_max_iter", d.gmres_max_iter)?,
    };
    let probe = StepperConfig {
        krylov_tol: t.krylov_tol,
        newton_tol: t.newton_tol,
        newton_max_iter: t.newton_max_iter,
        gmres_tol: t.gmres_tol,
        gmres_max_iter: t.gmres_max_iter,
        ..StepperConfig::new(Method::Epi2, 1.0)
    };
    probe
        .validate()
        .map_err(|e| err("[tolerances]", e.to_string()))?;
    Ok(t)
}

fn build_reference(r: &mut Reader, min_h: f64, t_final: f64) -> Result<ReferenceSpec, ConfigError> {
    let method = r
        .parse("reference.method", "a method name or 'expm'", |s| {
            if s.eq_ignore_ascii_case("expm") {
                Some(ReferenceMethod::Expm)
            } else {
                s.parse().ok().map(ReferenceMethod::Stepper)
            }
        })?
        .unwrap_or(ReferenceMethod::Stepper(Method::Epirk4));
    let loc = r.location("reference.h_ref");
    let h_ref = match r.parse("reference.h_ref", "a positive number", parse_f64)? {
        Some(h) => h,
        None => min_h / 20.0,
    };
    if method != ReferenceMethod::Expm {
        // a few ulps of slack so min_h/20 written out in decimal still passes
        if !(h_ref > 0.0) || h_ref > min_h / 20.0 * (1.0 + 1e-12) {
            return Err(err(
                &loc,
                format!(
                    "h_ref = {h_ref} must be at most min(h)/20 = {}",
                    min_h / 20.0
                ),
            ));
        }
        if step_count(0.0, t_final, h_ref).1 != 0.0 {
            return Err(err(
                &loc,
                format!("h_ref = {h_ref} does not divide t_final = {t_final}"),
            ));
        }
    }
    let krylov_tol = r.f64_or("reference.krylov_tol", 1e-12)?;
    if !(krylov_tol > 0.0) {
        return Err(err(
            &r.location("reference.krylov_tol"),
            "krylov_tol must be positive",
        ));
    }
    Ok(ReferenceSpec {
        method,
        h_ref,
        krylov_tol,
    })
}

fn build_verify(r: &mut Reader) -> Result<Vec<Assertion>, ConfigError> {
    let mut out = Vec::new();
    for key in r.keys_with_prefix("verify.") {
        let loc = r.location(&key);
        let rest = &key["verify.".len()..];
        let (kind, method) = rest.split_once('.').unwrap_or((rest, ""));
        let method: Method = method
            .parse()
            .map_err(|_| err(&loc, format!("{key}: expected verify.<check>.<METHOD>")))?;
        let assertion = match kind {
            "order" => {
                let (expected, tol) = r
                    .parse(&key, "'<order> +- <tolerance>'", parse_order)?
                    .unwrap_or_default();
                Assertion::Order {
                    method,
                    expected,
                    tol,
                }
            }
            "max_error" => {
                let bound = r.parse(&key, "a number", parse_f64)?.unwrap_or_default();
                Assertion::MaxError { method, bound }
            }
            "flat" | "diverges_at_largest_h" | "finite" | "error_increases_with_h" => {
                if !r.parse(&key, "true", parse_bool)?.unwrap_or(false) {
                    continue;
                }
                match kind {
                    "flat" => Assertion::Flat { method },
                    "diverges_at_largest_h" => Assertion::DivergesAtLargestH { method },
                    "finite" => Assertion::Finite { method },
                    _ => Assertion::ErrorIncreasesWithH { method },
                }
            }
            other => return Err(err(&loc, format!("unknown check '{other}'"))),
        };
        out.push(assertion);
    }
    Ok(out)
}

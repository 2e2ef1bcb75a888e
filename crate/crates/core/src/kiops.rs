//! Krylov evaluation of φ-function combinations for large operators.
//!
//! Computes `w(τ) = Σᵢ τⁱ φᵢ(τA)·vᵢ` for a list of output points `τ ∈ (0, 1]`,
//! where `A` is only available through its action `x ↦ A·x`.
//!
//! The combination is rewritten as the exponential of the augmented operator
//! `Ã = [[A, B], [0, K]]` applied to `[v₀; e_p]`, so a single exponential action
//! yields all φ terms. The action is built from an Arnoldi basis orthogonalized
//! against only the last `iop_length` vectors, and the interval `[0, 1]` is
//! covered by adaptive substeps `e^{τ_k Ã} ⋯ e^{τ_1 Ã}`. Output points that fall
//! inside an accepted substep are read from the same Krylov basis.

use crate::densephi::{expm, DenseMatrix, MAX_PHI_ORDER};
use crate::error::{check_len, Error, Result};
use crate::numcore::{dot, l2_norm, StateVector};

pub const DEFAULT_M_INIT: usize = 10;
pub const DEFAULT_M_MIN: usize = 10;
pub const DEFAULT_M_MAX: usize = 128;
pub const DEFAULT_IOP_LENGTH: usize = 2;
/// Smallest substep (as a fraction of the unit interval) before giving up.
pub const TAU_MIN: f64 = 1e-6;

/// Happy-breakdown threshold relative to the norm of the un-orthogonalized product.
const BREAKDOWN_RTOL: f64 = 1e-14;

/// A linear operator given by its action.
pub trait LinearOp {
    fn apply(&mut self, x: &[f64], y: &mut [f64]) -> Result<()>;
}

impl<F> LinearOp for F
where
    F: FnMut(&[f64], &mut [f64]) -> Result<()>,
{
    fn apply(&mut self, x: &[f64], y: &mut [f64]) -> Result<()> {
        self(x, y)
    }
}

/// Vectors, output points and tolerances for one φ-combination evaluation.
#[derive(Debug, Clone)]
pub struct PhiCombinationTask {
    /// `[v₀, v₁, …, v_p]`, all of the operator's dimension.
    pub vs: Vec<StateVector>,
    /// Strictly increasing output points in `(0, 1]`, ending at 1.
    pub taus: Vec<f64>,
    /// Relative tolerance.
    pub tol: f64,
    pub m_init: usize,
    pub m_max: usize,
    pub iop_length: usize,
}

impl PhiCombinationTask {
    /// Task with default Krylov sizes, clipped to the augmented dimension.
    pub fn new(vs: Vec<StateVector>, taus: Vec<f64>, tol: f64) -> Self {
        let n = vs.first().map_or(0, |v| v.len());
        let n_aug = n + vs.len().saturating_sub(1).max(1);
        PhiCombinationTask {
            vs,
            taus,
            tol,
            m_init: DEFAULT_M_INIT.min(n_aug),
            m_max: DEFAULT_M_MAX.min(n_aug),
            iop_length: DEFAULT_IOP_LENGTH,
        }
    }

    pub fn with_krylov_sizes(mut self, m_init: usize, m_max: usize) -> Self {
        self.m_init = m_init;
        self.m_max = m_max;
        self
    }

    pub fn with_iop_length(mut self, iop_length: usize) -> Self {
        self.iop_length = iop_length;
        self
    }

    pub fn dim(&self) -> usize {
        self.vs.first().map_or(0, |v| v.len())
    }

    /// Highest φ index in the combination.
    pub fn order(&self) -> usize {
        self.vs.len().saturating_sub(1)
    }

    pub fn validate(&self) -> Result<()> {
        if self.vs.is_empty() {
            return Err(Error::invalid("at least v0 is required"));
        }
        let n = self.dim();
        if n == 0 {
            return Err(Error::invalid("operator dimension must be positive"));
        }
        for v in &self.vs {
            check_len(n, v.len())?;
            if !v.is_finite() {
                return Err(Error::NonFinite("phi combination input vector"));
            }
        }
        if self.order() > MAX_PHI_ORDER {
            return Err(Error::UnsupportedOrder(self.order()));
        }
        let Some(&last) = self.taus.last() else {
            return Err(Error::invalid("taus must not be empty"));
        };
        if last != 1.0 {
            return Err(Error::invalid("the last output point must be 1"));
        }
        if self.taus[0] <= 0.0 || self.taus.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::invalid("taus must be strictly increasing in (0, 1]"));
        }
        if !(self.tol > 0.0) {
            return Err(Error::invalid("tolerance must be positive"));
        }
        let n_aug = n + self.order().max(1);
        if self.m_init < 1 || self.m_init > self.m_max || self.m_max > n_aug {
            return Err(Error::invalid(format!(
                "Krylov sizes must satisfy 1 <= m_init ({}) <= m_max ({}) <= n + p ({n_aug})",
                self.m_init, self.m_max
            )));
        }
        if self.iop_length < 1 {
            return Err(Error::invalid(
                "orthogonalization length must be at least 1",
            ));
        }
        Ok(())
    }
}

/// Work counters for one or more evaluations.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct KiopsStats {
    pub matvecs: usize,
    pub substeps: usize,
    pub rejected: usize,
    /// Krylov dimension used by each accepted substep.
    pub krylov_dims: Vec<usize>,
    /// Basis vectors appended by the Arnoldi process.
    pub krylov_vectors: usize,
    pub orth_dot_products: usize,
    pub normalizations: usize,
    pub exponentials: usize,
}

impl KiopsStats {
    pub fn merge(&mut self, other: &KiopsStats) {
        self.matvecs += other.matvecs;
        self.substeps += other.substeps;
        self.rejected += other.rejected;
        self.krylov_dims.extend_from_slice(&other.krylov_dims);
        self.krylov_vectors += other.krylov_vectors;
        self.orth_dot_products += other.orth_dot_products;
        self.normalizations += other.normalizations;
        self.exponentials += other.exponentials;
    }
}

/// Arnoldi basis with incomplete orthogonalization and its Hessenberg matrix.
#[derive(Debug, Clone)]
pub struct KrylovWorkspace {
    n: usize,
    capacity: usize,
    iop_length: usize,
    /// Column-major, `capacity + 1` columns of length `n`.
    basis: Vec<f64>,
    /// Row-major `(capacity + 1) × (capacity + 1)`.
    hess: Vec<f64>,
    m: usize,
    beta: f64,
    breakdown: bool,
    pub orth_dot_products: usize,
    pub normalizations: usize,
    pub matvecs: usize,
}

impl KrylovWorkspace {
    pub fn new(n: usize, capacity: usize, iop_length: usize) -> Self {
        KrylovWorkspace {
            n,
            capacity,
            iop_length,
            basis: vec![0.0; n * (capacity + 1)],
            hess: vec![0.0; (capacity + 1) * (capacity + 1)],
            m: 0,
            beta: 0.0,
            breakdown: false,
            orth_dot_products: 0,
            normalizations: 0,
            matvecs: 0,
        }
    }

    /// Resets the basis to `v/‖v‖` and returns `β = ‖v‖`.
    pub fn start(&mut self, v: &[f64]) -> Result<f64> {
        check_len(self.n, v.len())?;
        let beta = l2_norm(v);
        if beta == 0.0 || !beta.is_finite() {
            return Err(Error::invalid(
                "Krylov start vector must be finite and nonzero",
            ));
        }
        for (b, x) in self.basis[..self.n].iter_mut().zip(v) {
            *b = x / beta;
        }
        self.hess.fill(0.0);
        self.m = 0;
        self.beta = beta;
        self.breakdown = false;
        Ok(beta)
    }

    /// Number of completed Arnoldi steps; the basis holds `m + 1` columns unless broken down.
    pub fn m(&self) -> usize {
        self.m
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn breakdown(&self) -> bool {
        self.breakdown
    }

    pub fn column(&self, j: usize) -> &[f64] {
        &self.basis[j * self.n..(j + 1) * self.n]
    }

    /// Entry `H[i, j]` of the Hessenberg matrix (0-based).
    pub fn h(&self, i: usize, j: usize) -> f64 {
        self.hess[i * (self.capacity + 1) + j]
    }

    fn h_mut(&mut self, i: usize, j: usize) -> &mut f64 {
        &mut self.hess[i * (self.capacity + 1) + j]
    }

    /// Appends one basis vector: `w = op(v_m)` orthogonalized against the last
    /// `iop_length` columns. Returns `true` on happy breakdown.
    pub fn extend(&mut self, op: &mut impl LinearOp) -> Result<bool> {
        if self.breakdown {
            return Err(Error::invalid("Krylov space is already invariant"));
        }
        if self.m >= self.capacity {
            return Err(Error::invalid("Krylov workspace is full"));
        }
        let n = self.n;
        let j = self.m;
        let (head, tail) = self.basis.split_at_mut((j + 1) * n);
        let w = &mut tail[..n];
        op.apply(&head[j * n..], w)?;
        self.matvecs += 1;
        if w.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite("Krylov operator action"));
        }
        let raw_norm = l2_norm(w);
        let first = (j + 1).saturating_sub(self.iop_length);
        for i in first..=j {
            let vi = &head[i * n..(i + 1) * n];
            let hij = dot(vi, w);
            for (wk, vk) in w.iter_mut().zip(vi) {
                *wk -= hij * vk;
            }
            self.orth_dot_products += 1;
            self.hess[i * (self.capacity + 1) + j] = hij;
        }
        let nrm = l2_norm(w);
        self.normalizations += 1;
        self.m = j + 1;
        if nrm <= BREAKDOWN_RTOL * raw_norm || raw_norm == 0.0 {
            self.breakdown = true;
            *self.h_mut(j + 1, j) = 0.0;
            return Ok(true);
        }
        for wk in w.iter_mut() {
            *wk /= nrm;
        }
        *self.h_mut(j + 1, j) = nrm;
        Ok(false)
    }

    /// `exp(τ·Ĥ)` with `Ĥ = [[H_m, e₁], [0, 0]]`, `(m+1)×(m+1)`.
    ///
    /// Its first column holds `e^{τH_m}e₁`; entry `(m−1, m)` holds
    /// `[τφ₁(τH_m)e₁]_m`, which drives the error estimate.
    pub fn reduced_exponential(&self, tau: f64) -> Result<DenseMatrix> {
        let m = self.m;
        let mut hh = DenseMatrix::zeros(m + 1, m + 1);
        for i in 0..m {
            for j in i.saturating_sub(1)..m {
                hh[(i, j)] = tau * self.h(i, j);
            }
        }
        hh[(0, m)] = tau;
        expm(&hh)
    }

    /// `exp(τ·H_m)`, `m×m`.
    pub fn projected_exponential(&self, tau: f64) -> Result<DenseMatrix> {
        let m = self.m;
        let mut hh = DenseMatrix::zeros(m, m);
        for i in 0..m {
            for j in i.saturating_sub(1)..m {
                hh[(i, j)] = tau * self.h(i, j);
            }
        }
        expm(&hh)
    }

    /// Writes the first `out.len()` entries of `β·V_m·c` into `out`.
    pub fn combine(&self, coeffs: &[f64], out: &mut [f64]) {
        out.fill(0.0);
        for (j, &c) in coeffs.iter().enumerate().take(self.m) {
            let a = self.beta * c;
            if a == 0.0 {
                continue;
            }
            for (o, v) in out.iter_mut().zip(self.column(j)) {
                *o += a * v;
            }
        }
    }
}

/// Estimated error of the Krylov approximation of `e^{τÃ}` in the current space:
/// `β·h_{m+1,m}·|[small_exp]_{m, m+1}|` with `small_exp` from
/// [`KrylovWorkspace::reduced_exponential`]. Zero after a happy breakdown.
pub fn krylov_error_estimate(ws: &KrylovWorkspace, small_exp: &DenseMatrix) -> f64 {
    let m = ws.m();
    if m == 0 || ws.breakdown() {
        return 0.0;
    }
    ws.beta() * ws.h(m, m - 1).abs() * small_exp[(m - 1, m)].abs()
}

/// Outcome of one controller decision.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SubstepDecision {
    pub accept: bool,
    pub tau_next: f64,
    pub m_next: usize,
}

/// Substep-length and Krylov-dimension controller.
#[derive(Debug, Clone)]
pub struct SubstepController {
    pub m_min: usize,
    pub m_max: usize,
    first_try_streak: usize,
}

impl SubstepController {
    pub fn new(m_min: usize, m_max: usize) -> Self {
        SubstepController {
            m_min: m_min.min(m_max),
            m_max,
            first_try_streak: 0,
        }
    }

    /// Error-per-unit-step control: accepts iff `err_est ≤ tol·τ`. The next
    /// substep is `τ·clamp(0.9·(tol·τ/err_est)^{1/4}, 0.2, 5)`, never past
    /// `remaining`. A rejection grows `m` by a third; two consecutive
    /// first-try acceptances shrink it by 10%.
    pub fn decide(
        &mut self,
        err_est: f64,
        tol: f64,
        tau: f64,
        m: usize,
        first_try: bool,
        remaining: f64,
    ) -> SubstepDecision {
        let (accept, tau_next, _) = substep_controller(err_est, tol, tau, m);
        let m_next = if accept {
            if first_try {
                self.first_try_streak += 1;
            } else {
                self.first_try_streak = 0;
            }
            if self.first_try_streak >= 2 {
                self.first_try_streak = 0;
                ((m as f64 * 0.9).floor() as usize).max(self.m_min)
            } else {
                m
            }
        } else {
            self.first_try_streak = 0;
            ((m as f64 * 4.0 / 3.0).ceil() as usize).min(self.m_max)
        };
        SubstepDecision {
            accept,
            tau_next: tau_next.min(remaining),
            m_next: m_next.clamp(1, self.m_max),
        }
    }
}

/// Stateless part of the controller: `(accept, τ_next, m)` from one error estimate.
pub fn substep_controller(err_est: f64, tol: f64, tau: f64, m: usize) -> (bool, f64, usize) {
    let target = tol * tau;
    let accept = err_est <= target;
    let factor = if err_est == 0.0 {
        5.0
    } else {
        (0.9 * (target / err_est).powf(0.25)).clamp(0.2, 5.0)
    };
    (accept, tau * factor, m)
}

/// Applies `Ã = [[A, B'], [0, K]]` where `B'` holds the scaled `v_p … v₁` columns.
struct AugmentedOp<'a, O: LinearOp> {
    op: &'a mut O,
    n: usize,
    /// Column `c` of `B'` is `ν·v_{p−c}`.
    b_cols: Vec<Vec<f64>>,
}

impl<O: LinearOp> LinearOp for AugmentedOp<'_, O> {
    fn apply(&mut self, x: &[f64], y: &mut [f64]) -> Result<()> {
        let n = self.n;
        let p = self.b_cols.len();
        let (x_top, x_bot) = x.split_at(n);
        let (y_top, y_bot) = y.split_at_mut(n);
        self.op.apply(x_top, y_top)?;
        for (col, &c) in self.b_cols.iter().zip(x_bot) {
            if c != 0.0 {
                for (yi, bi) in y_top.iter_mut().zip(col) {
                    *yi += c * bi;
                }
            }
        }
        for i in 0..p {
            y_bot[i] = if i + 1 < p { x_bot[i + 1] } else { 0.0 };
        }
        Ok(())
    }
}

/// Lower part of the augmented state at `τ`: `(τ^{p−1}/(p−1)!, …, τ, 1)/ν`.
fn augmented_tail(tau: f64, p: usize, nu: f64, out: &mut [f64]) {
    let mut term = 1.0;
    for k in 0..p {
        // out[p-1-k] = τ^k / k!
        if k > 0 {
            term *= tau / k as f64;
        }
        out[p - 1 - k] = term / nu;
    }
}

/// Evaluates `w(τ) = Σᵢ τⁱ φᵢ(τA)·vᵢ` at every `τ` in `task.taus`.
///
/// `op` applies `A` and must be linear. Returns one vector per output point.
pub fn kiops_eval(
    op: &mut impl LinearOp,
    task: &PhiCombinationTask,
) -> Result<(Vec<StateVector>, KiopsStats)> {
    task.validate()?;
    let n = task.dim();
    let mut stats = KiopsStats::default();

    if task.vs.iter().all(|v| v.iter().all(|&x| x == 0.0)) {
        return Ok((vec![StateVector::zeros(n); task.taus.len()], stats));
    }

    // p = 0 is padded with a zero v₁ so the augmented start vector is never zero.
    let p = task.order().max(1);
    let n_aug = n + p;
    let zero = StateVector::zeros(n);
    let v = |i: usize| task.vs.get(i).unwrap_or(&zero);

    let b_norm = (1..=p).map(|i| l2_norm(v(i))).fold(0.0, f64::max);
    // with no forcing columns the tail is inert; scale it like v₀ instead
    let scale = if b_norm > 0.0 { b_norm } else { l2_norm(v(0)) };
    let nu = (-(scale.log2().ceil())).exp2();
    let b_cols = (0..p)
        .map(|c| v(p - c).iter().map(|x| nu * x).collect())
        .collect();
    let mut aug = AugmentedOp { op, n, b_cols };

    let mut ws = KrylovWorkspace::new(n_aug, task.m_max, task.iop_length);
    let mut controller = SubstepController::new(DEFAULT_M_MIN, task.m_max);
    let mut outputs: Vec<StateVector> = Vec::with_capacity(task.taus.len());
    let mut next_out = 0;

    let mut w = v(0).clone();
    let mut start = vec![0.0; n_aug];
    let mut w_new = vec![0.0; n];
    let mut tau_now = 0.0_f64;
    let mut tau = 1.0_f64;
    let mut m = task.m_init;
    let mut restart = true;
    let mut first_try = true;

    while tau_now < 1.0 {
        if restart {
            start[..n].copy_from_slice(&w);
            augmented_tail(tau_now, p, nu, &mut start[n..]);
            ws.start(&start)?;
            restart = false;
            first_try = true;
        }
        while ws.m() < m && !ws.breakdown() {
            ws.extend(&mut aug)?;
        }
        let remaining = 1.0 - tau_now;
        if ws.breakdown() {
            // the space is invariant, so the projection is exact for any τ
            tau = remaining;
        }
        let j = ws.m();
        let small = ws.reduced_exponential(tau)?;
        stats.exponentials += 1;
        let err_abs = krylov_error_estimate(&ws, &small);
        ws.combine(&small.column(0)[..j], &mut w_new);
        let w_norm = l2_norm(&w_new);
        let err = if w_norm > 0.0 {
            err_abs / w_norm
        } else {
            err_abs / ws.beta()
        };

        let mut decision = controller.decide(err, task.tol, tau, m, first_try, remaining);
        if ws.breakdown() {
            decision.accept = true;
        }

        if decision.accept {
            let finishing = tau >= remaining * (1.0 - 1e-13);
            let tau_end = if finishing { 1.0 } else { tau_now + tau };
            while next_out < task.taus.len() && task.taus[next_out] <= tau_end {
                let t_out = task.taus[next_out];
                if t_out == tau_end {
                    outputs.push(StateVector::from(&w_new[..]));
                } else {
                    let f2 = ws.projected_exponential(t_out - tau_now)?;
                    stats.exponentials += 1;
                    let mut out = StateVector::zeros(n);
                    ws.combine(&f2.column(0), &mut out);
                    outputs.push(out);
                }
                next_out += 1;
            }
            if w_new.iter().any(|x| !x.is_finite()) {
                return Err(Error::NonFinite("Krylov substep result"));
            }
            w.copy_from_slice(&w_new);
            tau_now = tau_end;
            stats.substeps += 1;
            stats.krylov_dims.push(j);
            restart = true;
        } else {
            stats.rejected += 1;
            first_try = false;
        }

        tau = decision.tau_next.min(1.0 - tau_now);
        m = decision.m_next.max(1);
        if !decision.accept && tau < TAU_MIN {
            collect_ws_stats(&mut stats, &ws);
            return Err(Error::KrylovConvergence {
                tau,
                stats: Box::new(stats),
            });
        }
    }
    collect_ws_stats(&mut stats, &ws);
    debug_assert_eq!(outputs.len(), task.taus.len());
    Ok((outputs, stats))
}

fn collect_ws_stats(stats: &mut KiopsStats, ws: &KrylovWorkspace) {
    stats.matvecs += ws.matvecs;
    stats.krylov_vectors += ws.normalizations;
    stats.orth_dot_products += ws.orth_dot_products;
    stats.normalizations += ws.normalizations;
}

//! Dense matrix exponential and φ-functions for small matrices.
//!
//! The exponential uses scaling and squaring with diagonal Padé approximants of
//! degree 3, 5, 7, 9 or 13 (Higham's selection thresholds). φₖ and linear
//! combinations `Σ φᵢ(A)·vᵢ` are read off a single exponential of a block
//! augmented matrix, so no division by `A` is ever needed.

use std::ops::{Index, IndexMut};

use crate::error::{check_len, Error, Result};
use crate::numcore::StateVector;

/// Highest φ order (and highest number of combination vectors beyond `v₀`) supported.
pub const MAX_PHI_ORDER: usize = 8;

/// Row-major dense matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl DenseMatrix {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        check_len(rows * cols, data.len())?;
        Ok(DenseMatrix { rows, cols, data })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        DenseMatrix {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = 1.0;
        }
        m
    }

    pub fn from_diagonal(d: &[f64]) -> Self {
        let mut m = Self::zeros(d.len(), d.len());
        for (i, &x) in d.iter().enumerate() {
            m[(i, i)] = x;
        }
        m
    }

    /// Builds a matrix from equal-length rows.
    pub fn from_rows(rows: &[&[f64]]) -> Result<Self> {
        let cols = rows.first().map_or(0, |r| r.len());
        let mut data = Vec::with_capacity(rows.len() * cols);
        for r in rows {
            check_len(cols, r.len())?;
            data.extend_from_slice(r);
        }
        Ok(DenseMatrix {
            rows: rows.len(),
            cols,
            data,
        })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        (0..self.rows).map(|i| self[(i, j)]).collect()
    }

    pub fn transpose(&self) -> Self {
        let mut t = Self::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                t[(j, i)] = self[(i, j)];
            }
        }
        t
    }

    pub fn scaled(&self, a: f64) -> Self {
        DenseMatrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|x| a * x).collect(),
        }
    }

    /// `self + a·other`.
    pub fn add_scaled(&self, a: f64, other: &Self) -> Result<Self> {
        check_len(self.rows, other.rows)?;
        check_len(self.cols, other.cols)?;
        Ok(DenseMatrix {
            rows: self.rows,
            cols: self.cols,
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(x, y)| x + a * y)
                .collect(),
        })
    }

    pub fn matmul(&self, other: &Self) -> Result<Self> {
        check_len(self.cols, other.rows)?;
        let mut out = Self::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            let out_row = &mut out.data[i * other.cols..(i + 1) * other.cols];
            for (k, &a) in self.row(i).iter().enumerate() {
                if a == 0.0 {
                    continue;
                }
                for (o, b) in out_row.iter_mut().zip(other.row(k)) {
                    *o += a * b;
                }
            }
        }
        Ok(out)
    }

    pub fn matvec(&self, x: &[f64]) -> Result<StateVector> {
        check_len(self.cols, x.len())?;
        Ok((0..self.rows)
            .map(|i| self.row(i).iter().zip(x).map(|(a, b)| a * b).sum())
            .collect())
    }

    /// Maximum absolute column sum.
    pub fn norm_1(&self) -> f64 {
        (0..self.cols)
            .map(|j| (0..self.rows).map(|i| self[(i, j)].abs()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    pub fn norm_frobenius(&self) -> f64 {
        crate::numcore::l2_norm(&self.data)
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|x| x.is_finite())
    }

    fn require_square(&self) -> Result<()> {
        if self.is_square() {
            Ok(())
        } else {
            Err(Error::Dimension {
                expected: self.rows,
                found: self.cols,
            })
        }
    }
}

impl Index<(usize, usize)> for DenseMatrix {
    type Output = f64;

    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        &self.data[i * self.cols + j]
    }
}

impl IndexMut<(usize, usize)> for DenseMatrix {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        &mut self.data[i * self.cols + j]
    }
}

/// Solves `A·X = B` in place (B is overwritten with X) by LU with partial pivoting.
fn lu_solve(mut a: DenseMatrix, b: &mut DenseMatrix) -> Result<()> {
    let n = a.rows;
    let nrhs = b.cols;
    for k in 0..n {
        let (piv, pmax) = (k..n)
            .map(|i| (i, a[(i, k)].abs()))
            .fold((k, -1.0), |acc, x| if x.1 > acc.1 { x } else { acc });
        if pmax == 0.0 || !pmax.is_finite() {
            return Err(Error::NonFinite("singular Padé denominator"));
        }
        if piv != k {
            for j in 0..n {
                a.data.swap(k * n + j, piv * n + j);
            }
            for j in 0..nrhs {
                b.data.swap(k * nrhs + j, piv * nrhs + j);
            }
        }
        let akk = a[(k, k)];
        for i in k + 1..n {
            let l = a[(i, k)] / akk;
            if l == 0.0 {
                continue;
            }
            a[(i, k)] = l;
            for j in k + 1..n {
                a.data[i * n + j] -= l * a.data[k * n + j];
            }
            for j in 0..nrhs {
                b.data[i * nrhs + j] -= l * b.data[k * nrhs + j];
            }
        }
    }
    for k in (0..n).rev() {
        let akk = a[(k, k)];
        for j in 0..nrhs {
            let mut s = b.data[k * nrhs + j];
            for i in k + 1..n {
                s -= a.data[k * n + i] * b.data[i * nrhs + j];
            }
            b.data[k * nrhs + j] = s / akk;
        }
    }
    Ok(())
}

const PADE3: [f64; 4] = [120.0, 60.0, 12.0, 1.0];
const PADE5: [f64; 6] = [30240.0, 15120.0, 3360.0, 420.0, 30.0, 1.0];
const PADE7: [f64; 8] = [
    17297280.0, 8648640.0, 1995840.0, 277200.0, 25200.0, 1512.0, 56.0, 1.0,
];
const PADE9: [f64; 10] = [
    17643225600.0,
    8821612800.0,
    2075673600.0,
    302702400.0,
    30270240.0,
    2162160.0,
    110880.0,
    3960.0,
    90.0,
    1.0,
];
const PADE13: [f64; 14] = [
    64764752532480000.0,
    32382376266240000.0,
    7771770303897600.0,
    1187353796428800.0,
    129060195264000.0,
    10559470521600.0,
    670442572800.0,
    33522128640.0,
    1323241920.0,
    40840800.0,
    960960.0,
    16380.0,
    182.0,
    1.0,
];

// 1-norm bounds below which the Padé approximant of that degree is accurate to unit roundoff.
const THETA3: f64 = 1.495585217958292e-2;
const THETA5: f64 = 2.539398330063230e-1;
const THETA7: f64 = 9.504178996162932e-1;
const THETA9: f64 = 2.097847961257068;
const THETA13: f64 = 5.371920351148152;

/// Numerator/denominator pieces `(U, V)` for the low-degree approximants.
fn pade_low(a: &DenseMatrix, b: &[f64]) -> Result<(DenseMatrix, DenseMatrix)> {
    let n = a.rows;
    let a2 = a.matmul(a)?;
    let mut u = DenseMatrix::identity(n).scaled(b[1]);
    let mut v = DenseMatrix::identity(n).scaled(b[0]);
    let mut power = DenseMatrix::identity(n);
    for k in (2..b.len()).step_by(2) {
        power = power.matmul(&a2)?;
        v = v.add_scaled(b[k], &power)?;
        if k + 1 < b.len() {
            u = u.add_scaled(b[k + 1], &power)?;
        }
    }
    Ok((a.matmul(&u)?, v))
}

fn pade13(a: &DenseMatrix) -> Result<(DenseMatrix, DenseMatrix)> {
    let n = a.rows;
    let b = &PADE13;
    let ident = DenseMatrix::identity(n);
    let a2 = a.matmul(a)?;
    let a4 = a2.matmul(&a2)?;
    let a6 = a4.matmul(&a2)?;
    let inner_u = a6
        .scaled(b[13])
        .add_scaled(b[11], &a4)?
        .add_scaled(b[9], &a2)?;
    let u = a6
        .matmul(&inner_u)?
        .add_scaled(b[7], &a6)?
        .add_scaled(b[5], &a4)?
        .add_scaled(b[3], &a2)?
        .add_scaled(b[1], &ident)?;
    let inner_v = a6
        .scaled(b[12])
        .add_scaled(b[10], &a4)?
        .add_scaled(b[8], &a2)?;
    let v = a6
        .matmul(&inner_v)?
        .add_scaled(b[6], &a6)?
        .add_scaled(b[4], &a4)?
        .add_scaled(b[2], &a2)?
        .add_scaled(b[0], &ident)?;
    Ok((a.matmul(&u)?, v))
}

/// Matrix exponential `e^A` by scaling and squaring with a diagonal Padé approximant.
pub fn expm(a: &DenseMatrix) -> Result<DenseMatrix> {
    a.require_square()?;
    if !a.is_finite() {
        return Err(Error::NonFinite("expm input"));
    }
    let n = a.rows;
    if n == 0 {
        return Ok(DenseMatrix::zeros(0, 0));
    }
    let norm = a.norm_1();
    let (mut squarings, (u, v)) = if norm <= THETA3 {
        (0, pade_low(a, &PADE3)?)
    } else if norm <= THETA5 {
        (0, pade_low(a, &PADE5)?)
    } else if norm <= THETA7 {
        (0, pade_low(a, &PADE7)?)
    } else if norm <= THETA9 {
        (0, pade_low(a, &PADE9)?)
    } else {
        let s = (norm / THETA13).log2().ceil().max(0.0) as i32;
        let scaled = a.scaled(0.5f64.powi(s));
        (s, pade13(&scaled)?)
    };
    let denom = v.add_scaled(-1.0, &u)?;
    let mut r = v.add_scaled(1.0, &u)?;
    lu_solve(denom, &mut r)?;
    while squarings > 0 {
        r = r.matmul(&r)?;
        squarings -= 1;
        if !r.is_finite() {
            return Err(Error::Overflow);
        }
    }
    if !r.is_finite() {
        return Err(Error::Overflow);
    }
    Ok(r)
}

/// `[φ₀(A), φ₁(A), …, φₖ(A)]` from one exponential of the block matrix
/// `[[A, I, 0, …], [0, 0, I, …], …, [0, …, 0]]` whose first block row holds the φ's.
pub fn phi_all(a: &DenseMatrix, k: usize) -> Result<Vec<DenseMatrix>> {
    a.require_square()?;
    if k > MAX_PHI_ORDER {
        return Err(Error::UnsupportedOrder(k));
    }
    let n = a.rows;
    let big = n * (k + 1);
    let mut m = DenseMatrix::zeros(big, big);
    for i in 0..n {
        for j in 0..n {
            m[(i, j)] = a[(i, j)];
        }
    }
    for blk in 0..k {
        for i in 0..n {
            m[(blk * n + i, (blk + 1) * n + i)] = 1.0;
        }
    }
    let e = expm(&m)?;
    Ok((0..=k)
        .map(|blk| {
            let mut out = DenseMatrix::zeros(n, n);
            for i in 0..n {
                for j in 0..n {
                    out[(i, j)] = e[(i, blk * n + j)];
                }
            }
            out
        })
        .collect())
}

/// `φₖ(A)` for `k ≤ MAX_PHI_ORDER`.
pub fn phi_k(a: &DenseMatrix, k: usize) -> Result<DenseMatrix> {
    if k == 0 {
        return expm(a);
    }
    Ok(phi_all(a, k)?.pop().expect("phi_all returns k+1 blocks"))
}

/// `Σᵢ φᵢ(A)·vᵢ` for `vs = [v₀, …, v_p]`, evaluated as the leading `n` entries of
/// `exp([[A, B], [0, K]])·[v₀; e_p]` with `B = [v_p | … | v₁]` and `K` the
/// `p×p` shift with ones on the superdiagonal.
pub fn phi_combination_dense(a: &DenseMatrix, vs: &[StateVector]) -> Result<StateVector> {
    a.require_square()?;
    if vs.is_empty() {
        return Err(Error::invalid("phi combination needs at least v0"));
    }
    let n = a.rows;
    let p = vs.len() - 1;
    if p > MAX_PHI_ORDER {
        return Err(Error::UnsupportedOrder(p));
    }
    for v in vs {
        check_len(n, v.len())?;
    }
    let big = n + p;
    let mut m = DenseMatrix::zeros(big, big);
    for i in 0..n {
        for j in 0..n {
            m[(i, j)] = a[(i, j)];
        }
    }
    for col in 0..p {
        let v = &vs[p - col];
        for i in 0..n {
            m[(i, n + col)] = v[i];
        }
    }
    for i in 0..p.saturating_sub(1) {
        m[(n + i, n + i + 1)] = 1.0;
    }
    let e = expm(&m)?;
    let mut start = vec![0.0; big];
    start[..n].copy_from_slice(&vs[0]);
    if p > 0 {
        start[big - 1] = 1.0;
    }
    let full = e.matvec(&start)?;
    Ok(StateVector::from(&full[..n]))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_matrix(rng: &mut impl Rng, n: usize, target_norm: f64) -> DenseMatrix {
        let data: Vec<f64> = (0..n * n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let m = DenseMatrix::new(n, n, data).unwrap();
        let s = target_norm / m.norm_1();
        m.scaled(s)
    }

    fn max_abs_diff(a: &DenseMatrix, b: &DenseMatrix) -> f64 {
        a.data()
            .iter()
            .zip(b.data())
            .map(|(x, y)| (x - y).abs())
            .fold(0.0, f64::max)
    }

    fn factorial(k: usize) -> f64 {
        (1..=k).map(|i| i as f64).product()
    }

    #[test]
    fn expm_of_zero_is_identity() {
        let e = expm(&DenseMatrix::zeros(3, 3)).unwrap();
        assert_eq!(e, DenseMatrix::identity(3));
    }

    #[test]
    fn expm_nilpotent() {
        let a = DenseMatrix::from_rows(&[&[0.0, 1.0], &[0.0, 0.0]]).unwrap();
        let e = expm(&a).unwrap();
        let expected = DenseMatrix::from_rows(&[&[1.0, 1.0], &[0.0, 1.0]]).unwrap();
        assert!(max_abs_diff(&e, &expected) < 1e-15);
    }

    #[test]
    fn expm_diagonal() {
        let e = expm(&DenseMatrix::from_diagonal(&[1.0, -1.0])).unwrap();
        assert_relative_eq!(e[(0, 0)], 2.718281828459045, max_relative = 1e-14);
        assert_relative_eq!(e[(1, 1)], 0.36787944117144233, max_relative = 1e-14);
        assert_eq!(e[(0, 1)], 0.0);
    }

    #[test]
    fn expm_rejects_non_square() {
        assert!(matches!(
            expm(&DenseMatrix::zeros(2, 3)),
            Err(Error::Dimension { .. })
        ));
    }

    #[test]
    fn expm_overflow_is_reported() {
        let a = DenseMatrix::from_diagonal(&[800.0]);
        assert!(matches!(expm(&a), Err(Error::Overflow)));
    }

    #[test]
    fn expm_large_norm_rotation() {
        // exp of a skew matrix is a rotation; exercises many squarings.
        let w = 37.5;
        let a = DenseMatrix::from_rows(&[&[0.0, w], &[-w, 0.0]]).unwrap();
        let e = expm(&a).unwrap();
        assert!((e[(0, 0)] - w.cos()).abs() < 1e-12);
        assert!((e[(0, 1)] - w.sin()).abs() < 1e-12);
    }

    #[test]
    fn expm_symmetric_matches_eigen_route() {
        // normal matrices with ‖A‖ up to 10: compare against Q·e^Λ·Qᵀ
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for &scale in &[0.01, 0.5, 3.0, 10.0] {
            let n = 8;
            let raw = random_matrix(&mut rng, n, 1.0);
            let sym = raw.add_scaled(1.0, &raw.transpose()).unwrap();
            let sym = sym.scaled(scale / sym.norm_1());
            let na = nalgebra::DMatrix::from_row_slice(n, n, sym.data());
            let eig = na.symmetric_eigen();
            let exp_l = nalgebra::DMatrix::from_diagonal(&eig.eigenvalues.map(f64::exp));
            let oracle = &eig.eigenvectors * exp_l * eig.eigenvectors.transpose();
            let e = expm(&sym).unwrap();
            let mut err = 0.0f64;
            for i in 0..n {
                for j in 0..n {
                    err = err.max((e[(i, j)] - oracle[(i, j)]).abs());
                }
            }
            assert!(err <= 1e-12 * oracle.norm(), "scale {scale}: err {err}");
        }
    }

    #[test]
    fn phi_at_zero_is_inverse_factorial() {
        let z = DenseMatrix::zeros(3, 3);
        for k in 0..=MAX_PHI_ORDER {
            let p = phi_k(&z, k).unwrap();
            let expected = DenseMatrix::identity(3).scaled(1.0 / factorial(k));
            assert!(max_abs_diff(&p, &expected) < 1e-15, "k = {k}");
        }
    }

    #[test]
    fn phi_scalar_closed_forms() {
        let one = DenseMatrix::from_diagonal(&[1.0]);
        let e = std::f64::consts::E;
        assert_relative_eq!(
            phi_k(&one, 1).unwrap()[(0, 0)],
            e - 1.0,
            max_relative = 1e-14
        );
        assert_relative_eq!(
            phi_k(&one, 2).unwrap()[(0, 0)],
            e - 2.0,
            max_relative = 1e-14
        );
        // φ₃(1) = e − 5/2
        assert_relative_eq!(
            phi_k(&one, 3).unwrap()[(0, 0)],
            e - 2.5,
            max_relative = 1e-13
        );
    }

    #[test]
    fn phi_order_too_large() {
        let a = DenseMatrix::identity(2);
        assert!(matches!(
            phi_k(&a, MAX_PHI_ORDER + 1),
            Err(Error::UnsupportedOrder(9))
        ));
        let vs = vec![StateVector::zeros(2); MAX_PHI_ORDER + 2];
        assert!(matches!(
            phi_combination_dense(&a, &vs),
            Err(Error::UnsupportedOrder(9))
        ));
    }

    #[test]
    fn phi_recurrence_holds() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..10 {
            // diagonally shifted so A is comfortably invertible
            let a = random_matrix(&mut rng, 6, 1.0)
                .add_scaled(-2.0, &DenseMatrix::identity(6))
                .unwrap();
            let phis = phi_all(&a, 4).unwrap();
            for k in 0..4 {
                let lhs = phis[k + 1].matmul(&a).unwrap();
                let rhs = phis[k]
                    .add_scaled(-1.0 / factorial(k), &DenseMatrix::identity(6))
                    .unwrap();
                let err = lhs.add_scaled(-1.0, &rhs).unwrap().norm_frobenius();
                assert!(err <= 1e-10 * phis[k].norm_frobenius(), "k={k} err={err}");
            }
        }
    }

    #[test]
    fn expm_inverse_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for &s in &[0.1, 1.0, 5.0] {
            let a = random_matrix(&mut rng, 7, s);
            let prod = expm(&a)
                .unwrap()
                .matmul(&expm(&a.scaled(-1.0)).unwrap())
                .unwrap();
            assert!(max_abs_diff(&prod, &DenseMatrix::identity(7)) <= 1e-10);
        }
    }

    #[test]
    fn combination_degenerate_and_zero_cases() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let a = random_matrix(&mut rng, 5, 1.5);
        let v0: StateVector = (0..5).map(|i| i as f64 - 1.5).collect();
        let via_comb = phi_combination_dense(&a, &[v0.clone()]).unwrap();
        let via_expm = expm(&a).unwrap().matvec(&v0).unwrap();
        for (x, y) in via_comb.iter().zip(via_expm.iter()) {
            assert!((x - y).abs() <= 4.0 * f64::EPSILON * y.abs().max(1.0));
        }

        let z = DenseMatrix::zeros(3, 3);
        let vs = [
            StateVector::from(vec![1.0, 2.0, 3.0]),
            StateVector::from(vec![-1.0, 0.5, 0.0]),
            StateVector::from(vec![4.0, 2.0, -2.0]),
        ];
        let w = phi_combination_dense(&z, &vs).unwrap();
        assert_relative_eq!(w.as_slice(), &[2.0, 3.5, 2.0][..], epsilon = 1e-14);
    }

    #[test]
    fn combination_matches_columnwise_assembly() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for _ in 0..5 {
            let a = random_matrix(&mut rng, 6, 1.0);
            let vs: Vec<StateVector> = (0..5)
                .map(|_| (0..6).map(|_| rng.gen_range(-1.0..1.0)).collect())
                .collect();
            let phis = phi_all(&a, 4).unwrap();
            let mut oracle = vec![0.0; 6];
            for (phi, v) in phis.iter().zip(&vs) {
                for (o, x) in oracle.iter_mut().zip(phi.matvec(v).unwrap().iter()) {
                    *o += x;
                }
            }
            let w = phi_combination_dense(&a, &vs).unwrap();
            let err = crate::numcore::l2_norm(&crate::numcore::axpy(-1.0, &oracle, &w).unwrap());
            assert!(err <= 1e-10 * crate::numcore::l2_norm(&oracle));
        }
    }
}

//! Small Hermitian matrices (n ≤ 4), their spectra, elementary symmetric
//! polynomials of the spectrum and the Γ_m positivity cone.
//!
//! For a C² function the pointwise Hessian measure of `ω + dd^c u` is a
//! multiple of `σ_m(λ)` where `λ` is the spectrum of the Hermitian matrix of
//! the form, so everything downstream reduces to the routines in this file.

use std::fmt;
use std::ops::{Add, Mul, Sub};

use num_complex::Complex64;

use crate::error::{argument, validation, Result};

/// Largest supported matrix dimension.
pub const MAX_DIM: usize = 4;

/// Absolute tolerance on `|A_jk - conj(A_kj)|`.
pub const HERMITIAN_TOL: f64 = 1e-12;

/// Relative slack of the closed-cone test, `σ_k ≥ -slack·(1 + |σ_1|)`.
pub const CLOSED_CONE_SLACK: f64 = 1e-12;

const JACOBI_TOL: f64 = 1e-12;
const JACOBI_MAX_SWEEPS: usize = 64;

type Block = [[Complex64; MAX_DIM]; MAX_DIM];

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);

/// An `n×n` complex Hermitian matrix with `1 ≤ n ≤ 4`, stored inline.
#[derive(Clone, Copy, PartialEq)]
pub struct HermitianMatrix {
    n: usize,
    data: Block,
}

impl fmt::Debug for HermitianMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let rows: Vec<Vec<Complex64>> = (0..self.n).map(|j| self.data[j][..self.n].to_vec()).collect();
        f.debug_struct("HermitianMatrix").field("n", &self.n).field("rows", &rows).finish()
    }
}

fn check_dim(n: usize) -> Result<()> {
    if n == 0 || n > MAX_DIM {
        return Err(argument(format!("matrix dimension must be in 1..={MAX_DIM}, got {n}")));
    }
    Ok(())
}

impl HermitianMatrix {
    /// Builds a matrix from rows, validating symmetry within [`HERMITIAN_TOL`]
    /// and then symmetrizing to `(A + A*)/2`.
    pub fn new(rows: &[Vec<Complex64>]) -> Result<Self> {
        let n = rows.len();
        check_dim(n)?;
        let mut data = [[ZERO; MAX_DIM]; MAX_DIM];
        for (j, row) in rows.iter().enumerate() {
            if row.len() != n {
                return Err(argument(format!("row {j} has length {}, expected {n}", row.len())));
            }
            for (k, v) in row.iter().enumerate() {
                if !v.re.is_finite() || !v.im.is_finite() {
                    return Err(validation(format!("entry ({j},{k}) is not finite")));
                }
                data[j][k] = *v;
            }
        }
        for j in 0..n {
            for k in j..n {
                let gap = (data[j][k] - data[k][j].conj()).norm();
                if gap > HERMITIAN_TOL {
                    return Err(validation(format!(
                        "matrix is not Hermitian: |A[{j}][{k}] - conj(A[{k}][{j}])| = {gap:e}"
                    )));
                }
            }
        }
        Ok(Self::symmetrized(n, data))
    }

    /// Builds a real symmetric matrix.
    pub fn from_real(rows: &[Vec<f64>]) -> Result<Self> {
        let rows: Vec<Vec<Complex64>> =
            rows.iter().map(|r| r.iter().map(|&x| Complex64::new(x, 0.0)).collect()).collect();
        Self::new(&rows)
    }

    pub(crate) fn symmetrized(n: usize, mut data: Block) -> Self {
        for j in 0..n {
            data[j][j] = Complex64::new(data[j][j].re, 0.0);
            for k in (j + 1)..n {
                let avg = (data[j][k] + data[k][j].conj()) * 0.5;
                data[j][k] = avg;
                data[k][j] = avg.conj();
            }
        }
        Self { n, data }
    }

    pub fn zeros(n: usize) -> Self {
        assert!((1..=MAX_DIM).contains(&n), "matrix dimension out of range");
        Self { n, data: [[ZERO; MAX_DIM]; MAX_DIM] }
    }

    pub fn identity(n: usize) -> Self {
        Self::scaled_identity(n, 1.0)
    }

    pub fn scaled_identity(n: usize, c: f64) -> Self {
        let mut m = Self::zeros(n);
        for j in 0..n {
            m.data[j][j] = Complex64::new(c, 0.0);
        }
        m
    }

    pub fn diag(values: &[f64]) -> Result<Self> {
        check_dim(values.len())?;
        let mut m = Self::zeros(values.len());
        for (j, &v) in values.iter().enumerate() {
            m.data[j][j] = Complex64::new(v, 0.0);
        }
        Ok(m)
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn get(&self, j: usize, k: usize) -> Complex64 {
        assert!(j < self.n && k < self.n);
        self.data[j][k]
    }

    /// Sets entry `(j,k)` and its mirror `(k,j)` to the conjugate.
    pub fn set(&mut self, j: usize, k: usize, v: Complex64) {
        assert!(j < self.n && k < self.n);
        if j == k {
            self.data[j][j] = Complex64::new(v.re, 0.0);
        } else {
            self.data[j][k] = v;
            self.data[k][j] = v.conj();
        }
    }

    pub fn rows(&self) -> Vec<Vec<Complex64>> {
        (0..self.n).map(|j| self.data[j][..self.n].to_vec()).collect()
    }

    pub fn trace(&self) -> f64 {
        (0..self.n).map(|j| self.data[j][j].re).sum()
    }

    /// Frobenius pairing `Re tr(A B)`, the directional-derivative pairing
    /// between a gradient and a Hermitian perturbation.
    pub fn frobenius_dot(&self, other: &Self) -> f64 {
        debug_assert_eq!(self.n, other.n);
        let mut acc = 0.0;
        for j in 0..self.n {
            for k in 0..self.n {
                let a = self.data[j][k];
                let b = other.data[j][k];
                acc += a.re * b.re + a.im * b.im;
            }
        }
        acc
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.frobenius_dot(self).sqrt()
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        let mut worst: f64 = 0.0;
        for j in 0..self.n {
            for k in 0..self.n {
                worst = worst.max((self.data[j][k] - other.data[j][k]).norm());
            }
        }
        worst
    }

    /// Full eigendecomposition by cyclic Jacobi rotations.
    pub fn eigen(&self) -> Eigen {
        jacobi(self)
    }

    pub fn eigenvalues(&self) -> EigenvalueVector {
        self.eigen().values
    }

    /// `σ_k` of the spectrum.
    pub fn sigma(&self, k: usize) -> Result<f64> {
        sigma_k(&self.eigenvalues(), k)
    }
}

impl Add for HermitianMatrix {
    type Output = Self;
    fn add(mut self, rhs: Self) -> Self {
        debug_assert_eq!(self.n, rhs.n);
        for j in 0..self.n {
            for k in 0..self.n {
                self.data[j][k] += rhs.data[j][k];
            }
        }
        self
    }
}

impl Sub for HermitianMatrix {
    type Output = Self;
    fn sub(mut self, rhs: Self) -> Self {
        debug_assert_eq!(self.n, rhs.n);
        for j in 0..self.n {
            for k in 0..self.n {
                self.data[j][k] -= rhs.data[j][k];
            }
        }
        self
    }
}

impl Mul<f64> for HermitianMatrix {
    type Output = Self;
    fn mul(mut self, c: f64) -> Self {
        for j in 0..self.n {
            for k in 0..self.n {
                self.data[j][k] *= c;
            }
        }
        self
    }
}

impl HermitianMatrix {
    /// `self += c * other`, the hot-path accumulation used by stencils.
    pub fn add_scaled(&mut self, c: f64, other: &Self) {
        for j in 0..self.n {
            for k in 0..self.n {
                self.data[j][k] += other.data[j][k] * c;
            }
        }
    }
}

/// Real spectrum sorted non-decreasing.
#[derive(Clone, Copy, PartialEq)]
pub struct EigenvalueVector {
    len: usize,
    values: [f64; MAX_DIM],
}

impl fmt::Debug for EigenvalueVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_list().entries(self.as_slice()).finish()
    }
}

impl EigenvalueVector {
    /// Sorts the given values; fails on empty, oversized or non-finite input.
    pub fn new(values: &[f64]) -> Result<Self> {
        check_dim(values.len())?;
        if values.iter().any(|v| !v.is_finite()) {
            return Err(validation("eigenvalues must be finite"));
        }
        let mut out = [0.0; MAX_DIM];
        out[..values.len()].copy_from_slice(values);
        out[..values.len()].sort_by(|a, b| a.total_cmp(b));
        Ok(Self { len: values.len(), values: out })
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.values[..self.len]
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }
}

/// Eigenvalues plus unitary eigenvectors (column `i` of `vectors` belongs to `values[i]`).
#[derive(Clone, Copy, Debug)]
pub struct Eigen {
    pub values: EigenvalueVector,
    vectors: Block,
}

impl Eigen {
    /// Entry `j` of eigenvector `i`.
    pub fn vector_entry(&self, j: usize, i: usize) -> Complex64 {
        self.vectors[j][i]
    }

    /// `V diag(d) V*`.
    pub fn compose(&self, d: &[f64]) -> HermitianMatrix {
        let n = self.values.len();
        let mut data = [[ZERO; MAX_DIM]; MAX_DIM];
        for j in 0..n {
            for k in j..n {
                let mut acc = ZERO;
                for (i, &di) in d.iter().enumerate().take(n) {
                    acc += self.vectors[j][i] * self.vectors[k][i].conj() * di;
                }
                data[j][k] = acc;
                data[k][j] = acc.conj();
            }
        }
        HermitianMatrix::symmetrized(n, data)
    }

    pub fn reconstruct(&self) -> HermitianMatrix {
        self.compose(self.values.as_slice())
    }
}

fn off_diagonal_norm(a: &Block, n: usize) -> f64 {
    let mut s = 0.0;
    for j in 0..n {
        for k in (j + 1)..n {
            s += a[j][k].norm_sqr();
        }
    }
    s.sqrt()
}

fn jacobi(m: &HermitianMatrix) -> Eigen {
    let n = m.n;
    let mut a = m.data;
    let mut v = [[ZERO; MAX_DIM]; MAX_DIM];
    for (j, row) in v.iter_mut().enumerate().take(n) {
        row[j] = ONE;
    }
    let scale = m.frobenius_norm().max(f64::MIN_POSITIVE);

    for _ in 0..JACOBI_MAX_SWEEPS {
        let off = off_diagonal_norm(&a, n);
        if off <= JACOBI_TOL * scale || off == 0.0 {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = a[p][q];
                let r = apq.norm();
                if r <= f64::EPSILON * 1e-3 * scale {
                    continue;
                }
                let phase = apq / r;
                let app = a[p][p].re;
                let aqq = a[q][q].re;
                let theta = (aqq - app) / (2.0 * r);
                let t = if theta == 0.0 {
                    1.0
                } else {
                    theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt())
                };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                // U = diag(1, conj(phase)) · [[c, s], [-s, c]] acting on (p, q).
                let upp = Complex64::new(c, 0.0);
                let upq = Complex64::new(s, 0.0);
                let uqp = -phase.conj() * s;
                let uqq = phase.conj() * c;

                // A ← A U (columns p, q)
                for row in a.iter_mut().take(n) {
                    let xp = row[p];
                    let xq = row[q];
                    row[p] = xp * upp + xq * uqp;
                    row[q] = xp * upq + xq * uqq;
                }
                // A ← U* A (rows p, q)
                for k in 0..n {
                    let xp = a[p][k];
                    let xq = a[q][k];
                    a[p][k] = upp.conj() * xp + uqp.conj() * xq;
                    a[q][k] = upq.conj() * xp + uqq.conj() * xq;
                }
                a[p][q] = ZERO;
                a[q][p] = ZERO;
                a[p][p] = Complex64::new(a[p][p].re, 0.0);
                a[q][q] = Complex64::new(a[q][q].re, 0.0);
                for row in v.iter_mut().take(n) {
                    let xp = row[p];
                    let xq = row[q];
                    row[p] = xp * upp + xq * uqp;
                    row[q] = xp * upq + xq * uqq;
                }
            }
        }
    }

    let mut order: [usize; MAX_DIM] = [0, 1, 2, 3];
    order[..n].sort_by(|&i, &j| a[i][i].re.total_cmp(&a[j][j].re));
    let mut values = [0.0; MAX_DIM];
    let mut vectors = [[ZERO; MAX_DIM]; MAX_DIM];
    for (dst, &src) in order[..n].iter().enumerate() {
        values[dst] = a[src][src].re;
        for j in 0..n {
            vectors[j][dst] = v[j][src];
        }
    }
    Eigen { values: EigenvalueVector { len: n, values }, vectors }
}

/// Elementary symmetric polynomials `σ_0..σ_n` of `values`.
pub fn elementary_symmetric(values: &[f64]) -> [f64; MAX_DIM + 1] {
    let mut e = [0.0; MAX_DIM + 1];
    e[0] = 1.0;
    for (count, &x) in values.iter().enumerate() {
        for k in (1..=count + 1).rev() {
            e[k] += x * e[k - 1];
        }
    }
    e
}

/// The k-th elementary symmetric polynomial of the spectrum; `σ_0 = 1`.
pub fn sigma_k(lambda: &EigenvalueVector, k: usize) -> Result<f64> {
    if k > lambda.len() {
        return Err(argument(format!("sigma_k needs 0 ≤ k ≤ n = {}, got k = {k}", lambda.len())));
    }
    Ok(elementary_symmetric(lambda.as_slice())[k])
}

/// Γ_m membership. Strict means `σ_k > 0` for `k = 1..m`; otherwise the closed
/// cone with relative slack [`CLOSED_CONE_SLACK`].
pub fn in_gamma_m(lambda: &EigenvalueVector, m: usize, strict: bool) -> Result<bool> {
    check_order(m, lambda.len())?;
    let e = elementary_symmetric(lambda.as_slice());
    if strict {
        Ok((1..=m).all(|k| e[k] > 0.0))
    } else {
        Ok(closed_cone_test(&e, m, CLOSED_CONE_SLACK))
    }
}

/// Closed-cone membership with a caller-chosen relative slack.
pub fn in_closed_gamma_m(lambda: &EigenvalueVector, m: usize, slack: f64) -> Result<bool> {
    check_order(m, lambda.len())?;
    Ok(closed_cone_test(&elementary_symmetric(lambda.as_slice()), m, slack))
}

pub(crate) fn closed_cone_test(e: &[f64; MAX_DIM + 1], m: usize, slack: f64) -> bool {
    let floor = -slack * (1.0 + e[1].abs());
    (1..=m).all(|k| e[k] >= floor)
}

pub(crate) fn check_order(m: usize, n: usize) -> Result<()> {
    if m == 0 || m > n {
        return Err(argument(format!("order m must satisfy 1 ≤ m ≤ n = {n}, got m = {m}")));
    }
    Ok(())
}

pub fn eigenvalues(a: &HermitianMatrix) -> EigenvalueVector {
    a.eigenvalues()
}

/// Gradient of `A ↦ σ_m(λ(A))` with respect to the Frobenius pairing.
///
/// On each eigenspace the gradient acts as `σ_{m-1}` of the complementary
/// spectrum, so for `A` in the open Γ_m cone the result is positive definite.
pub fn sigma_m_gradient(a: &HermitianMatrix, m: usize) -> Result<HermitianMatrix> {
    check_order(m, a.dim())?;
    let eig = a.eigen();
    Ok(gradient_from_eigen(&eig, m))
}

pub(crate) fn gradient_from_eigen(eig: &Eigen, m: usize) -> HermitianMatrix {
    let lambda = eig.values.as_slice();
    let n = lambda.len();
    let mut d = [0.0; MAX_DIM];
    let mut rest = [0.0; MAX_DIM];
    for (i, di) in d.iter_mut().enumerate().take(n) {
        let mut len = 0;
        for (j, &l) in lambda.iter().enumerate() {
            if j != i {
                rest[len] = l;
                len += 1;
            }
        }
        *di = elementary_symmetric(&rest[..len])[m - 1];
    }
    eig.compose(&d[..n])
}

/// Binomial coefficient for the small sizes used here.
pub fn binomial(n: usize, k: usize) -> f64 {
    if k > n {
        return 0.0;
    }
    let k = k.min(n - k);
    let mut acc = 1.0;
    for i in 0..k {
        acc = acc * (n - i) as f64 / (i + 1) as f64;
    }
    acc.round()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ev(v: &[f64]) -> EigenvalueVector {
        EigenvalueVector::new(v).unwrap()
    }

    #[test]
    fn sigma_examples() {
        assert_eq!(sigma_k(&ev(&[1.0, 2.0, 3.0]), 1).unwrap(), 6.0);
        assert_eq!(sigma_k(&ev(&[1.0, 1.0, 1.0]), 2).unwrap(), 3.0);
        assert_eq!(sigma_k(&ev(&[1.0, -1.0, 3.0]), 2).unwrap(), -1.0);
        assert_eq!(sigma_k(&ev(&[0.3, -7.0]), 0).unwrap(), 1.0);
        assert!(matches!(sigma_k(&ev(&[1.0, 2.0]), 3), Err(crate::Error::Argument(_))));
    }

    #[test]
    fn cone_examples() {
        assert!(in_gamma_m(&ev(&[1.0, 1.0, 1.0]), 3, true).unwrap());
        assert!(in_gamma_m(&ev(&[-0.1, 1.0, 1.0]), 2, true).unwrap());
        assert!(!in_gamma_m(&ev(&[-0.1, 1.0, 1.0]), 3, true).unwrap());
        assert!(in_gamma_m(&ev(&[0.0, 0.0]), 2, false).unwrap());
        assert!(!in_gamma_m(&ev(&[0.0, 0.0]), 2, true).unwrap());
        assert!(in_gamma_m(&ev(&[1.0]), 0, true).is_err());
        assert!(in_gamma_m(&ev(&[1.0]), 2, true).is_err());
    }

    #[test]
    fn eigen_examples() {
        let i2 = HermitianMatrix::identity(2);
        assert_eq!(i2.eigenvalues().as_slice(), &[1.0, 1.0]);

        let d = HermitianMatrix::diag(&[3.0, -2.0]).unwrap();
        assert_eq!(d.eigenvalues().as_slice(), &[-2.0, 3.0]);

        let c = |re, im| Complex64::new(re, im);
        let a = HermitianMatrix::new(&[vec![c(2.0, 0.0), c(0.0, 1.0)], vec![c(0.0, -1.0), c(2.0, 0.0)]])
            .unwrap();
        let l = a.eigenvalues();
        assert!((l.as_slice()[0] - 1.0).abs() < 1e-12);
        assert!((l.as_slice()[1] - 3.0).abs() < 1e-12);
        assert!(a.eigen().reconstruct().max_abs_diff(&a) < 1e-12);
    }

    #[test]
    fn rejects_non_hermitian() {
        let c = |re, im| Complex64::new(re, im);
        let err = HermitianMatrix::new(&[vec![c(1.0, 0.0), c(0.0, 1.0)], vec![c(0.0, 1.0), c(1.0, 0.0)]]);
        assert!(matches!(err, Err(crate::Error::Validation(_))));
        assert!(HermitianMatrix::new(&[]).is_err());
    }

    #[test]
    fn gradient_examples() {
        let g = sigma_m_gradient(&HermitianMatrix::identity(2), 2).unwrap();
        assert!(g.max_abs_diff(&HermitianMatrix::identity(2)) < 1e-14);

        let g = sigma_m_gradient(&HermitianMatrix::diag(&[2.0, 3.0]).unwrap(), 1).unwrap();
        assert!(g.max_abs_diff(&HermitianMatrix::identity(2)) < 1e-14);

        let g = sigma_m_gradient(&HermitianMatrix::diag(&[1.0, 2.0, 3.0]).unwrap(), 2).unwrap();
        assert!(g.max_abs_diff(&HermitianMatrix::diag(&[5.0, 4.0, 3.0]).unwrap()) < 1e-13);
    }

    #[test]
    fn binomials() {
        assert_eq!(binomial(4, 2), 6.0);
        assert_eq!(binomial(2, 2), 1.0);
        assert_eq!(binomial(3, 0), 1.0);
        assert_eq!(binomial(2, 3), 0.0);
    }
}

//! Small dense complex matrices and a Hermitian eigensolver.
//!
//! Used for the per-site `d x d` coefficient blocks and for the brute-force
//! `N x N` operator matrices that back the oracle checks.

use std::ops::{Index, IndexMut};

use num_complex::Complex;

use crate::error::{Error, Result};
use crate::scalar::{abs, Real};

/// Row-major dense complex matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct DenseMatrix<T> {
    rows: usize,
    cols: usize,
    data: Vec<Complex<T>>,
}

impl<T: Real> DenseMatrix<T> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![Complex::new(T::zero(), T::zero()); rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = Complex::new(T::one(), T::zero());
        }
        m
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<Complex<T>>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::InvalidArgument(format!(
                "{} entries for a {rows}x{cols} matrix",
                data.len()
            )));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn from_real_rows(rows: &[&[f64]]) -> Result<Self> {
        let r = rows.len();
        let c = rows.first().map_or(0, |row| row.len());
        if rows.iter().any(|row| row.len() != c) {
            return Err(Error::InvalidArgument("ragged rows".into()));
        }
        let data = rows
            .iter()
            .flat_map(|row| row.iter().map(|&x| Complex::new(T::lit(x), T::zero())))
            .collect();
        Self::from_vec(r, c, data)
    }

    pub fn diagonal(entries: &[T]) -> Self {
        let mut m = Self::zeros(entries.len(), entries.len());
        for (i, &x) in entries.iter().enumerate() {
            m[(i, i)] = Complex::new(x, T::zero());
        }
        m
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn as_slice(&self) -> &[Complex<T>] {
        &self.data
    }

    pub fn into_vec(self) -> Vec<Complex<T>> {
        self.data
    }

    pub fn column(&self, j: usize) -> Vec<Complex<T>> {
        (0..self.rows).map(|i| self[(i, j)]).collect()
    }

    pub fn matvec(&self, x: &[Complex<T>]) -> Result<Vec<Complex<T>>> {
        if x.len() != self.cols {
            return Err(Error::InvalidArgument(format!(
                "vector of length {} for a matrix with {} columns",
                x.len(),
                self.cols
            )));
        }
        Ok(self
            .data
            .chunks(self.cols)
            .map(|row| {
                row.iter()
                    .zip(x)
                    .fold(Complex::new(T::zero(), T::zero()), |acc, (a, b)| acc + a * b)
            })
            .collect())
    }

    pub fn conj_transpose(&self) -> Self {
        let mut out = Self::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                out[(j, i)] = self[(i, j)].conj();
            }
        }
        out
    }

    pub fn scale(&self, alpha: Complex<T>) -> Self {
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|&z| z * alpha).collect(),
        }
    }

    pub fn max_abs(&self) -> T {
        self.data.iter().fold(T::zero(), |acc, z| acc.max(z.norm()))
    }

    /// `max_{k,l} |a_kl - conj(a_lk)|`; infinite for non-square matrices.
    pub fn hermiticity_defect(&self) -> T {
        if !self.is_square() {
            return T::infinity();
        }
        let n = self.rows;
        let mut worst = T::zero();
        for i in 0..n {
            for j in i..n {
                worst = worst.max((self[(i, j)] - self[(j, i)].conj()).norm());
            }
        }
        worst
    }

    /// `(A + A^H) / 2`.
    pub fn hermitian_part(&self) -> Self {
        let half = T::lit(0.5);
        let mut out = self.clone();
        for i in 0..self.rows {
            for j in 0..self.cols {
                out[(i, j)] = (self[(i, j)] + self[(j, i)].conj()) * half;
            }
        }
        out
    }
}

impl<T> Index<(usize, usize)> for DenseMatrix<T> {
    type Output = Complex<T>;

    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &Complex<T> {
        &self.data[i * self.cols + j]
    }
}

impl<T> IndexMut<(usize, usize)> for DenseMatrix<T> {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut Complex<T> {
        &mut self.data[i * self.cols + j]
    }
}

/// Eigen-decomposition `A = V diag(lambda) V^H` of a Hermitian matrix.
#[derive(Clone, Debug)]
pub struct HermitianEigen<T> {
    /// Ascending.
    pub eigenvalues: Vec<T>,
    /// Column `j` is the unit eigenvector of `eigenvalues[j]`.
    pub eigenvectors: DenseMatrix<T>,
}

const MAX_SWEEPS: usize = 100;

/// Cyclic complex Jacobi eigensolver.
///
/// Operates on the Hermitian part of `a`; callers decide whether the
/// anti-Hermitian remainder is acceptable. Cost is `O(n^3)` per sweep, so this
/// is meant for the per-site blocks and oracle matrices of a few hundred rows.
pub fn hermitian_eigen<T: Real>(a: &DenseMatrix<T>) -> Result<HermitianEigen<T>> {
    if !a.is_square() {
        return Err(Error::InvalidArgument(format!(
            "eigensolve of a non-square {}x{} matrix",
            a.rows, a.cols
        )));
    }
    let n = a.rows;
    let mut m = a.hermitian_part();
    for i in 0..n {
        m[(i, i)].im = T::zero();
    }
    let mut v = DenseMatrix::identity(n);

    let frob = m.data.iter().map(|z| z.norm_sqr()).sum::<T>().sqrt();
    let threshold = T::epsilon() * T::epsilon() * frob * frob;

    for _ in 0..MAX_SWEEPS {
        let off: T = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| m[(i, j)].norm_sqr())
            .sum();
        if off <= threshold || off == T::zero() {
            return Ok(sorted(m, v));
        }
        for p in 0..n {
            for q in p + 1..n {
                rotate(&mut m, &mut v, p, q);
            }
        }
    }
    Err(Error::NumericalConsistency(format!(
        "Jacobi eigensolver did not converge in {MAX_SWEEPS} sweeps"
    )))
}

/// Annihilates `m[p][q]` with the unitary `J = D R` where `D` removes the
/// phase of the pivot and `R` is the real Jacobi rotation of the result.
fn rotate<T: Real>(m: &mut DenseMatrix<T>, v: &mut DenseMatrix<T>, p: usize, q: usize) {
    let apq = m[(p, q)];
    let mag = apq.norm();
    if mag == T::zero() {
        return;
    }
    let phase = apq / mag;
    let app = m[(p, p)].re;
    let aqq = m[(q, q)].re;
    let theta = (aqq - app) / (T::lit(2.0) * mag);
    let t = {
        let sign = if theta >= T::zero() { T::one() } else { -T::one() };
        sign / (abs(theta) + (theta * theta + T::one()).sqrt())
    };
    let c = T::one() / (t * t + T::one()).sqrt();
    let s = t * c;

    // J restricted to (p, q): [[c, s], [-s e^{-i phi}, c e^{-i phi}]].
    let cc = Complex::new(c, T::zero());
    let jpp = cc;
    let jpq = Complex::new(s, T::zero());
    let jqp = -phase.conj() * s;
    let jqq = phase.conj() * c;

    let n = m.rows;
    for i in 0..n {
        let (aip, aiq) = (m[(i, p)], m[(i, q)]);
        m[(i, p)] = aip * jpp + aiq * jqp;
        m[(i, q)] = aip * jpq + aiq * jqq;
        let (vip, viq) = (v[(i, p)], v[(i, q)]);
        v[(i, p)] = vip * jpp + viq * jqp;
        v[(i, q)] = vip * jpq + viq * jqq;
    }
    for j in 0..n {
        let (apj, aqj) = (m[(p, j)], m[(q, j)]);
        m[(p, j)] = jpp.conj() * apj + jqp.conj() * aqj;
        m[(q, j)] = jpq.conj() * apj + jqq.conj() * aqj;
    }
    let zero = Complex::new(T::zero(), T::zero());
    m[(p, q)] = zero;
    m[(q, p)] = zero;
    m[(p, p)].im = T::zero();
    m[(q, q)].im = T::zero();
}

fn sorted<T: Real>(m: DenseMatrix<T>, v: DenseMatrix<T>) -> HermitianEigen<T> {
    let n = m.rows;
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| m[(a, a)].re.partial_cmp(&m[(b, b)].re).unwrap());
    let eigenvalues = order.iter().map(|&i| m[(i, i)].re).collect();
    let mut eigenvectors = DenseMatrix::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        for i in 0..n {
            eigenvectors[(i, dst)] = v[(i, src)];
        }
    }
    HermitianEigen {
        eigenvalues,
        eigenvectors,
    }
}

/// Eigenvalues only, ascending.
pub fn hermitian_eigenvalues<T: Real>(a: &DenseMatrix<T>) -> Result<Vec<T>> {
    hermitian_eigen(a).map(|e| e.eigenvalues)
}

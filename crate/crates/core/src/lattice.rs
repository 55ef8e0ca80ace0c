//! Finite lattice domains and complex scalar fields on them.
//!
//! A [`Domain`] is a finite box `[0, N_1) x ... x [0, N_d)` of the integer
//! lattice, closed either periodically (a torus) or by zero padding. Sites are
//! addressed by a flat index in row-major order with the last axis fastest.
//! Axes are zero-based throughout the Rust API.

use std::fmt;

use num_complex::Complex;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::scalar::{is_finite_c, Real};

/// How the finite box is closed at its faces.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Boundary {
    /// Indices wrap modulo the extent.
    Periodic,
    /// Sites outside the box read as zero.
    FixedZero,
}

impl Boundary {
    /// Single-letter code used in file headers.
    pub fn code(self) -> char {
        match self {
            Boundary::Periodic => 'P',
            Boundary::FixedZero => 'Z',
        }
    }

    pub fn from_code(code: &str) -> Option<Self> {
        match code {
            "P" => Some(Boundary::Periodic),
            "Z" => Some(Boundary::FixedZero),
            _ => None,
        }
    }
}

impl fmt::Display for Boundary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Boundary::Periodic => f.write_str("periodic"),
            Boundary::FixedZero => f.write_str("zero"),
        }
    }
}

/// Multi-index `(n_1, ..., n_d)` of a lattice site.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct MultiIndex(pub Vec<usize>);

impl MultiIndex {
    pub fn coords(&self) -> &[usize] {
        &self.0
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Domain {
    extents: Vec<usize>,
    strides: Vec<usize>,
    boundary: Boundary,
    len: usize,
}

impl Domain {
    pub fn new(extents: Vec<usize>, boundary: Boundary) -> Result<Self> {
        if extents.is_empty() {
            return Err(Error::InvalidDomain("dimension must be at least 1".into()));
        }
        if let Some(axis) = extents.iter().position(|&n| n < 2) {
            return Err(Error::InvalidDomain(format!(
                "extent along axis {axis} is {}, need at least 2",
                extents[axis]
            )));
        }
        let len = extents
            .iter()
            .try_fold(1usize, |acc, &n| acc.checked_mul(n))
            .filter(|&n| n <= isize::MAX as usize)
            .ok_or_else(|| Error::InvalidDomain("site count overflows usize".into()))?;
        let mut strides = vec![1usize; extents.len()];
        for axis in (0..extents.len() - 1).rev() {
            strides[axis] = strides[axis + 1] * extents[axis + 1];
        }
        Ok(Self {
            extents,
            strides,
            boundary,
            len,
        })
    }

    pub fn periodic(extents: Vec<usize>) -> Result<Self> {
        Self::new(extents, Boundary::Periodic)
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.extents.len()
    }

    #[inline]
    pub fn extents(&self) -> &[usize] {
        &self.extents
    }

    #[inline]
    pub fn extent(&self, axis: usize) -> usize {
        self.extents[axis]
    }

    #[inline]
    pub fn stride(&self, axis: usize) -> usize {
        self.strides[axis]
    }

    #[inline]
    pub fn boundary(&self) -> Boundary {
        self.boundary
    }

    #[inline]
    pub fn is_periodic(&self) -> bool {
        self.boundary == Boundary::Periodic
    }

    /// Total number of sites `N`.
    #[inline]
    pub fn len(&self) -> usize {
        self.len
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    /// Flat row-major index; `None` when any coordinate is out of range.
    pub fn flat_index(&self, coords: &[usize]) -> Option<usize> {
        if coords.len() != self.dim() {
            return None;
        }
        let mut flat = 0;
        for ((&c, &n), &s) in coords.iter().zip(&self.extents).zip(&self.strides) {
            if c >= n {
                return None;
            }
            flat += c * s;
        }
        Some(flat)
    }

    pub fn multi_index(&self, flat: usize) -> MultiIndex {
        MultiIndex(
            self.strides
                .iter()
                .zip(&self.extents)
                .map(|(&s, &n)| (flat / s) % n)
                .collect(),
        )
    }

    #[inline]
    pub fn coord(&self, flat: usize, axis: usize) -> usize {
        (flat / self.strides[axis]) % self.extents[axis]
    }

    /// Flat index of `flat + offset * e_axis`, or `None` if it falls outside a
    /// zero-padded box. Requires `|offset| < N_axis`.
    #[inline]
    pub fn neighbor(&self, flat: usize, axis: usize, offset: isize) -> Option<usize> {
        let n = self.extents[axis] as isize;
        let c = self.coord(flat, axis) as isize;
        let mut target = c + offset;
        if target < 0 || target >= n {
            match self.boundary {
                Boundary::FixedZero => return None,
                Boundary::Periodic => target = target.rem_euclid(n),
            }
        }
        let s = self.strides[axis] as isize;
        Some((flat as isize + (target - c) * s) as usize)
    }

    /// `N1xN2x...xNd`.
    pub fn shape_string(&self) -> String {
        self.extents
            .iter()
            .map(|n| n.to_string())
            .collect::<Vec<_>>()
            .join("x")
    }

    pub(crate) fn check_same(&self, other: &Domain) -> Result<()> {
        if self == other {
            Ok(())
        } else {
            Err(Error::DomainMismatch {
                left: self.to_string(),
                right: other.to_string(),
            })
        }
    }

    pub(crate) fn check_axis(&self, axis: usize) -> Result<()> {
        if axis < self.dim() {
            Ok(())
        } else {
            Err(Error::InvalidAxis {
                axis,
                dim: self.dim(),
            })
        }
    }
}

impl fmt::Display for Domain {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} ({})", self.shape_string(), self.boundary)
    }
}

/// Chunk length of the fixed reduction tree. Partial sums are formed per chunk
/// and then folded left to right, so the result does not depend on the number
/// of worker threads.
const REDUCTION_CHUNK: usize = 2048;

pub(crate) fn det_sum<X, S, F>(items: &[X], zero: S, f: F) -> S
where
    X: Sync,
    S: Copy + Send + Sync + std::ops::Add<Output = S>,
    F: Fn(usize, &X) -> S + Sync,
{
    let partials: Vec<S> = items
        .par_chunks(REDUCTION_CHUNK)
        .enumerate()
        .map(|(c, chunk)| {
            let base = c * REDUCTION_CHUNK;
            chunk
                .iter()
                .enumerate()
                .fold(zero, |acc, (i, x)| acc + f(base + i, x))
        })
        .collect();
    partials.into_iter().fold(zero, |acc, p| acc + p)
}

/// A complex value per lattice site.
#[derive(Clone, Debug, PartialEq)]
pub struct LatticeField<T> {
    domain: Domain,
    values: Vec<Complex<T>>,
}

impl<T: Real> LatticeField<T> {
    pub fn new(domain: Domain, values: Vec<Complex<T>>) -> Result<Self> {
        if values.len() != domain.len() {
            return Err(Error::InvalidArgument(format!(
                "{} values for a domain of {} sites",
                values.len(),
                domain.len()
            )));
        }
        if let Some(site) = values.iter().position(|z| !is_finite_c(z)) {
            return Err(Error::NonFinite { site });
        }
        Ok(Self { domain, values })
    }

    /// Builds a field from trusted values (length checked, finiteness not).
    pub(crate) fn from_parts(domain: Domain, values: Vec<Complex<T>>) -> Self {
        debug_assert_eq!(values.len(), domain.len());
        Self { domain, values }
    }

    pub fn zeros(domain: Domain) -> Self {
        let n = domain.len();
        Self::from_parts(domain, vec![Complex::new(T::zero(), T::zero()); n])
    }

    pub fn constant(domain: Domain, c: Complex<T>) -> Self {
        let n = domain.len();
        Self::from_parts(domain, vec![c; n])
    }

    /// Unit value at `site`, zero elsewhere.
    pub fn delta(domain: Domain, site: usize) -> Result<Self> {
        if site >= domain.len() {
            return Err(Error::InvalidArgument(format!(
                "site {site} outside a domain of {} sites",
                domain.len()
            )));
        }
        let mut field = Self::zeros(domain);
        field.values[site] = Complex::new(T::one(), T::zero());
        Ok(field)
    }

    pub fn from_fn(domain: Domain, f: impl Fn(usize) -> Complex<T>) -> Result<Self> {
        let values = (0..domain.len()).map(f).collect();
        Self::new(domain, values)
    }

    /// Real and imaginary parts drawn uniformly from `[-1, 1)`, deterministic in `seed`.
    pub fn random(domain: Domain, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let values = (0..domain.len())
            .map(|_| {
                let re: f64 = rng.random_range(-1.0..1.0);
                let im: f64 = rng.random_range(-1.0..1.0);
                Complex::new(T::lit(re), T::lit(im))
            })
            .collect();
        Self::from_parts(domain, values)
    }

    #[inline]
    pub fn domain(&self) -> &Domain {
        &self.domain
    }

    #[inline]
    pub fn values(&self) -> &[Complex<T>] {
        &self.values
    }

    pub fn into_values(self) -> Vec<Complex<T>> {
        self.values
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.values.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    #[inline]
    pub fn get(&self, site: usize) -> Complex<T> {
        self.values[site]
    }

    /// Value at `site + offset * e_axis`, zero outside a zero-padded box.
    #[inline]
    pub(crate) fn at_offset(&self, site: usize, axis: usize, offset: isize) -> Complex<T> {
        match self.domain.neighbor(site, axis, offset) {
            Some(m) => self.values[m],
            None => Complex::new(T::zero(), T::zero()),
        }
    }

    /// Translation: the result at `n` is the input at `n - offset * e_axis`.
    pub fn shift(&self, axis: usize, offset: isize) -> Result<Self> {
        self.domain.check_axis(axis)?;
        let extent = self.domain.extent(axis);
        if offset.unsigned_abs() >= extent {
            return Err(Error::InvalidOffset { offset, extent });
        }
        let values = (0..self.len())
            .into_par_iter()
            .map(|n| self.at_offset(n, axis, -offset))
            .collect();
        Ok(Self::from_parts(self.domain.clone(), values))
    }

    /// `sum_n conj(self_n) * other_n`.
    pub fn inner_product(&self, other: &Self) -> Result<Complex<T>> {
        self.domain.check_same(&other.domain)?;
        let zero = Complex::new(T::zero(), T::zero());
        Ok(det_sum(&self.values, zero, |n, a| a.conj() * other.values[n]))
    }

    pub fn norm_sqr(&self) -> T {
        det_sum(&self.values, T::zero(), |_, a| a.norm_sqr())
    }

    pub fn norm(&self) -> T {
        self.norm_sqr().sqrt()
    }

    pub fn max_abs(&self) -> T {
        self.values
            .iter()
            .fold(T::zero(), |acc, z| acc.max(z.norm()))
    }

    pub fn sum(&self) -> Complex<T> {
        det_sum(&self.values, Complex::new(T::zero(), T::zero()), |_, a| *a)
    }

    pub fn mean_value(&self) -> Complex<T> {
        self.sum() / T::from_usize(self.len()).unwrap()
    }

    /// Mean-zero representative of the field's class modulo constants.
    pub fn subtract_mean(&self) -> Self {
        let mean = self.mean_value();
        self.map(|z| z - mean)
    }

    pub fn map(&self, f: impl Fn(Complex<T>) -> Complex<T> + Sync + Send) -> Self {
        Self::from_parts(
            self.domain.clone(),
            self.values.par_iter().map(|&z| f(z)).collect(),
        )
    }

    pub fn scale(&self, alpha: Complex<T>) -> Self {
        self.map(|z| z * alpha)
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.zip_with(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.zip_with(other, |a, b| a - b)
    }

    pub fn zip_with(
        &self,
        other: &Self,
        f: impl Fn(Complex<T>, Complex<T>) -> Complex<T> + Sync + Send,
    ) -> Result<Self> {
        self.domain.check_same(&other.domain)?;
        let values = self
            .values
            .par_iter()
            .zip(other.values.par_iter())
            .map(|(&a, &b)| f(a, b))
            .collect();
        Ok(Self::from_parts(self.domain.clone(), values))
    }

    /// `self += alpha * other`, for fields already known to share a domain.
    pub(crate) fn axpy_in_place(&mut self, alpha: Complex<T>, other: &Self) {
        debug_assert_eq!(self.domain, other.domain);
        self.values
            .par_iter_mut()
            .zip(other.values.par_iter())
            .for_each(|(a, &b)| *a = *a + alpha * b);
    }

    pub(crate) fn remove_mean_in_place(&mut self) {
        let mean = self.mean_value();
        self.values.par_iter_mut().for_each(|z| *z = *z - mean);
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(is_finite_c)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex<f64> {
        Complex::new(re, im)
    }

    fn real_field(boundary: Boundary, vals: &[f64]) -> LatticeField<f64> {
        let domain = Domain::new(vec![vals.len()], boundary).unwrap();
        LatticeField::new(domain, vals.iter().map(|&v| c(v, 0.0)).collect()).unwrap()
    }

    fn re(field: &LatticeField<f64>) -> Vec<f64> {
        field.values().iter().map(|z| z.re).collect()
    }

    #[test]
    fn domain_rejects_degenerate_extents() {
        assert!(Domain::periodic(vec![]).is_err());
        assert!(Domain::periodic(vec![4, 1]).is_err());
        assert!(Domain::periodic(vec![usize::MAX, 2]).is_err());
        assert_eq!(Domain::periodic(vec![3, 4, 5]).unwrap().len(), 60);
    }

    #[test]
    fn row_major_last_axis_fastest() {
        let d = Domain::periodic(vec![3, 4, 5]).unwrap();
        assert_eq!(d.flat_index(&[0, 0, 1]), Some(1));
        assert_eq!(d.flat_index(&[0, 1, 0]), Some(5));
        assert_eq!(d.flat_index(&[1, 0, 0]), Some(20));
        assert_eq!(d.flat_index(&[3, 0, 0]), None);
        for flat in 0..d.len() {
            assert_eq!(d.flat_index(d.multi_index(flat).coords()), Some(flat));
        }
    }

    #[test]
    fn neighbor_wraps_or_drops() {
        let p = Domain::periodic(vec![4]).unwrap();
        assert_eq!(p.neighbor(0, 0, -1), Some(3));
        assert_eq!(p.neighbor(3, 0, 1), Some(0));
        let z = Domain::new(vec![4], Boundary::FixedZero).unwrap();
        assert_eq!(z.neighbor(0, 0, -1), None);
        assert_eq!(z.neighbor(2, 0, 1), Some(3));
    }

    #[test]
    fn shift_periodic_is_cyclic() {
        let f = real_field(Boundary::Periodic, &[1.0, 2.0, 3.0]);
        assert_eq!(re(&f.shift(0, 1).unwrap()), vec![3.0, 1.0, 2.0]);
    }

    #[test]
    fn shift_fixed_zero_pads() {
        let f = real_field(Boundary::FixedZero, &[1.0, 2.0, 3.0]);
        assert_eq!(re(&f.shift(0, 1).unwrap()), vec![0.0, 1.0, 2.0]);
        assert_eq!(re(&f.shift(0, -1).unwrap()), vec![2.0, 3.0, 0.0]);
    }

    #[test]
    fn shift_by_zero_is_identity() {
        let f = LatticeField::<f64>::random(Domain::periodic(vec![3, 4]).unwrap(), 7);
        assert_eq!(f.shift(1, 0).unwrap(), f);
    }

    #[test]
    fn shift_rejects_bad_axis_and_offset() {
        let f = real_field(Boundary::Periodic, &[1.0, 2.0, 3.0]);
        assert!(matches!(f.shift(1, 1), Err(Error::InvalidAxis { .. })));
        assert!(matches!(f.shift(0, 3), Err(Error::InvalidOffset { .. })));
        assert!(matches!(f.shift(0, -3), Err(Error::InvalidOffset { .. })));
    }

    #[test]
    fn inner_product_examples() {
        let d = Domain::periodic(vec![2]).unwrap();
        let a = LatticeField::new(d.clone(), vec![c(1.0, 0.0), c(0.0, 1.0)]).unwrap();
        assert_eq!(a.inner_product(&a).unwrap(), c(2.0, 0.0));
        let e0 = LatticeField::new(d.clone(), vec![c(1.0, 0.0), c(0.0, 0.0)]).unwrap();
        let e1 = LatticeField::new(d, vec![c(0.0, 0.0), c(0.0, 1.0)]).unwrap();
        assert_eq!(e0.inner_product(&e1).unwrap(), c(0.0, 0.0));
    }

    #[test]
    fn inner_product_domain_mismatch() {
        let a = LatticeField::<f64>::zeros(Domain::periodic(vec![4]).unwrap());
        let b = LatticeField::<f64>::zeros(Domain::periodic(vec![5]).unwrap());
        assert!(matches!(
            a.inner_product(&b),
            Err(Error::DomainMismatch { .. })
        ));
    }

    #[test]
    fn mean_examples() {
        let f = real_field(Boundary::Periodic, &[0.0, 1.0, 2.0, 3.0]);
        assert_eq!(f.mean_value(), c(1.5, 0.0));
        assert_eq!(re(&f.subtract_mean()), vec![-1.5, -0.5, 0.5, 1.5]);

        let k = LatticeField::constant(Domain::periodic(vec![3, 3]).unwrap(), c(2.5, -1.0));
        assert_eq!(k.mean_value(), c(2.5, -1.0));
        assert!(k.subtract_mean().values().iter().all(|z| z.norm() == 0.0));
    }

    #[test]
    fn non_finite_values_rejected() {
        let d = Domain::periodic(vec![2]).unwrap();
        let r = LatticeField::new(d, vec![c(1.0, 0.0), c(f64::NAN, 0.0)]);
        assert!(matches!(r, Err(Error::NonFinite { site: 1 })));
    }

    #[test]
    fn reduction_is_deterministic_across_pools() {
        let f = LatticeField::<f64>::random(Domain::periodic(vec![64, 64]).unwrap(), 3);
        let g = LatticeField::<f64>::random(Domain::periodic(vec![64, 64]).unwrap(), 4);
        let one = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        let many = rayon::ThreadPoolBuilder::new().num_threads(4).build().unwrap();
        let a = one.install(|| f.inner_product(&g).unwrap());
        let b = many.install(|| f.inner_product(&g).unwrap());
        assert_eq!(a.re.to_bits(), b.re.to_bits());
        assert_eq!(a.im.to_bits(), b.im.to_bits());
    }

    #[test]
    fn works_in_single_precision() {
        let d = Domain::periodic(vec![4]).unwrap();
        let f = LatticeField::<f32>::random(d, 1);
        let m = f.subtract_mean().mean_value();
        assert!(m.norm() < 1e-6);
    }
}

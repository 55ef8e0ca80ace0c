//! Unitary discrete Fourier analysis on periodic lattices.
//!
//! Frequencies are indexed like sites: `m_j in [0, N_j)` with
//! `s_j = 2 pi m_j / N_j`. The forward transform is
//! `F(m) = N^{-1/2} sum_n f_n exp(-i s(m) . n)`, so Parseval holds with no
//! extra factors and a backward difference along axis `k` becomes
//! multiplication by `1 - exp(-i s_k)`.

use std::sync::Arc;

use num_complex::Complex;
use rayon::prelude::*;
use rustfft::{Fft, FftDirection, FftPlanner};

use crate::coefficients::HERMITICITY_TOL;
use crate::dense::{hermitian_eigenvalues, DenseMatrix};
use crate::error::{Error, Result};
use crate::lattice::{det_sum, Domain, LatticeField};
use crate::operator::GradientField;
use crate::scalar::{abs, Real};

/// Relative compatibility tolerance for [`fft_solve`].
pub const FFT_COMPAT_TOL: f64 = 1e-10;

/// Complex amplitude per discrete frequency of a periodic domain.
#[derive(Clone, Debug, PartialEq)]
pub struct SpectralField<T> {
    domain: Domain,
    values: Vec<Complex<T>>,
}

impl<T: Real> SpectralField<T> {
    pub fn new(domain: Domain, values: Vec<Complex<T>>) -> Result<Self> {
        if !domain.is_periodic() {
            return Err(Error::NotPeriodic);
        }
        if values.len() != domain.len() {
            return Err(Error::InvalidArgument(format!(
                "{} spectral values for {} frequencies",
                values.len(),
                domain.len()
            )));
        }
        Ok(Self { domain, values })
    }

    pub fn domain(&self) -> &Domain {
        &self.domain
    }

    pub fn values(&self) -> &[Complex<T>] {
        &self.values
    }

    #[inline]
    pub fn get(&self, m: usize) -> Complex<T> {
        self.values[m]
    }

    /// Angular frequency vector `s(m)`.
    pub fn frequency(&self, m: usize) -> Vec<T> {
        frequency_of(&self.domain, m)
    }

    pub fn norm_sqr(&self) -> T {
        det_sum(&self.values, T::zero(), |_, z| z.norm_sqr())
    }

    pub fn max_abs(&self) -> T {
        self.values.iter().fold(T::zero(), |acc, z| acc.max(z.norm()))
    }
}

pub(crate) fn frequency_of<T: Real>(domain: &Domain, m: usize) -> Vec<T> {
    let two_pi = T::PI() + T::PI();
    domain
        .multi_index(m)
        .0
        .iter()
        .zip(domain.extents())
        .map(|(&mj, &nj)| two_pi * T::from_usize(mj).unwrap() / T::from_usize(nj).unwrap())
        .collect()
}

/// `1 - exp(-i s)`, the Fourier factor of a unit backward difference.
#[inline]
pub fn difference_factor<T: Real>(s: T) -> Complex<T> {
    Complex::new(T::one() - s.cos(), s.sin())
}

/// Planned separable transform for one periodic domain.
#[derive(Clone)]
pub struct DftPlan<T: Real> {
    domain: Domain,
    forward: Vec<Arc<dyn Fft<T>>>,
    inverse: Vec<Arc<dyn Fft<T>>>,
    /// Flat index of every line start, per axis.
    line_starts: Vec<Vec<usize>>,
}

impl<T: Real> DftPlan<T> {
    pub fn new(domain: &Domain) -> Result<Self> {
        if !domain.is_periodic() {
            return Err(Error::NotPeriodic);
        }
        let mut planner = FftPlanner::new();
        let forward = domain
            .extents()
            .iter()
            .map(|&n| planner.plan_fft(n, FftDirection::Forward))
            .collect();
        let inverse = domain
            .extents()
            .iter()
            .map(|&n| planner.plan_fft(n, FftDirection::Inverse))
            .collect();
        let line_starts = (0..domain.dim())
            .map(|axis| {
                (0..domain.len())
                    .filter(|&flat| domain.coord(flat, axis) == 0)
                    .collect()
            })
            .collect();
        Ok(Self {
            domain: domain.clone(),
            forward,
            inverse,
            line_starts,
        })
    }

    pub fn domain(&self) -> &Domain {
        &self.domain
    }

    pub fn forward(&self, f: &LatticeField<T>) -> Result<SpectralField<T>> {
        self.domain.check_same(f.domain())?;
        let mut data = f.values().to_vec();
        self.transform(&mut data, &self.forward);
        Ok(SpectralField {
            domain: self.domain.clone(),
            values: data,
        })
    }

    pub fn inverse(&self, spectrum: &SpectralField<T>) -> Result<LatticeField<T>> {
        self.domain.check_same(spectrum.domain())?;
        let mut data = spectrum.values.clone();
        self.transform(&mut data, &self.inverse);
        Ok(LatticeField::from_parts(self.domain.clone(), data))
    }

    fn transform(&self, data: &mut [Complex<T>], plans: &[Arc<dyn Fft<T>>]) {
        for (axis, plan) in plans.iter().enumerate() {
            let n = self.domain.extent(axis);
            let stride = self.domain.stride(axis);
            let starts = &self.line_starts[axis];
            let mut lines: Vec<Complex<T>> = starts
                .iter()
                .flat_map(|&s0| (0..n).map(move |j| s0 + j * stride))
                .map(|i| data[i])
                .collect();
            lines.par_chunks_mut(n).for_each(|line| plan.process(line));
            for (line, &s0) in lines.chunks(n).zip(starts) {
                for (j, &z) in line.iter().enumerate() {
                    data[s0 + j * stride] = z;
                }
            }
        }
        let scale = T::one() / T::from_usize(self.domain.len()).unwrap().sqrt();
        data.par_iter_mut().for_each(|z| *z = *z * scale);
    }
}

pub fn dft<T: Real>(f: &LatticeField<T>) -> Result<SpectralField<T>> {
    DftPlan::new(f.domain())?.forward(f)
}

pub fn idft<T: Real>(spectrum: &SpectralField<T>) -> Result<LatticeField<T>> {
    DftPlan::new(spectrum.domain())?.inverse(spectrum)
}

fn check_hermitian_block<T: Real>(b: &DenseMatrix<T>, dim: usize) -> Result<()> {
    if b.rows() != dim || b.cols() != dim {
        return Err(Error::InvalidArgument(format!(
            "{}x{} coefficient block for {dim} dimensions",
            b.rows(),
            b.cols()
        )));
    }
    let defect = b.hermiticity_defect();
    if defect > T::lit(HERMITICITY_TOL) * b.max_abs() {
        return Err(Error::NonHermitian {
            defect: defect.to_f64_lossy(),
        });
    }
    Ok(())
}

/// Eigenvalue of the constant-coefficient operator on the plane wave of
/// frequency index `m`: `-sum_{k,l} conj(c_k) b_kl c_l`, `c_k = 1 - exp(-i s_k)`.
pub fn symbol<T: Real>(b: &DenseMatrix<T>, m: &[usize], extents: &[usize]) -> Result<Complex<T>> {
    check_hermitian_block(b, extents.len())?;
    if m.len() != extents.len() || m.iter().zip(extents).any(|(&mj, &nj)| mj >= nj) {
        return Err(Error::InvalidArgument(format!(
            "frequency index {m:?} outside extents {extents:?}"
        )));
    }
    let two_pi = T::PI() + T::PI();
    let c: Vec<Complex<T>> = m
        .iter()
        .zip(extents)
        .map(|(&mj, &nj)| {
            difference_factor(two_pi * T::from_usize(mj).unwrap() / T::from_usize(nj).unwrap())
        })
        .collect();
    Ok(symbol_from_factors(b, &c))
}

fn symbol_from_factors<T: Real>(b: &DenseMatrix<T>, c: &[Complex<T>]) -> Complex<T> {
    let d = c.len();
    let mut acc = Complex::new(T::zero(), T::zero());
    for k in 0..d {
        for l in 0..d {
            acc = acc + c[k].conj() * b[(k, l)] * c[l];
        }
    }
    -acc
}

/// Direct solver for constant Hermitian positive definite coefficients.
///
/// Holds the transform plan and the real symbol table, so repeated solves
/// cost two FFTs each.
#[derive(Clone)]
pub struct FftPoissonSolver<T: Real> {
    plan: DftPlan<T>,
    symbols: Vec<T>,
}

impl<T: Real> FftPoissonSolver<T> {
    pub fn new(b: &DenseMatrix<T>, domain: &Domain) -> Result<Self> {
        if !domain.is_periodic() {
            return Err(Error::NotPeriodic);
        }
        check_hermitian_block(b, domain.dim())?;
        let eig = hermitian_eigenvalues(b)?;
        if eig[0] <= T::zero() {
            return Err(Error::SingularSymbol {
                min_eigenvalue: eig[0].to_f64_lossy(),
            });
        }
        let plan = DftPlan::new(domain)?;
        let symbols = (0..domain.len())
            .map(|m| {
                let c: Vec<Complex<T>> = frequency_of::<T>(domain, m)
                    .into_iter()
                    .map(difference_factor)
                    .collect();
                symbol_from_factors(b, &c).re
            })
            .collect();
        Ok(Self { plan, symbols })
    }

    pub fn domain(&self) -> &Domain {
        self.plan.domain()
    }

    /// Real symbol table, indexed like the spectral field.
    pub fn symbols(&self) -> &[T] {
        &self.symbols
    }

    /// Mean-zero solution of `L f = g`; rejects `g` whose mean exceeds
    /// `rel_tol * max|g|`.
    pub fn solve(&self, g: &LatticeField<T>, rel_tol: T) -> Result<LatticeField<T>> {
        self.plan.domain().check_same(g.domain())?;
        let defect = g.mean_value().norm();
        let tolerance = rel_tol * g.max_abs();
        if defect > tolerance {
            return Err(Error::IncompatibleRhs {
                defect: defect.to_f64_lossy(),
                tolerance: tolerance.to_f64_lossy(),
            });
        }
        self.solve_projected(g)
    }

    /// Solves with the zero-frequency component of `g` discarded.
    pub fn solve_projected(&self, g: &LatticeField<T>) -> Result<LatticeField<T>> {
        let mut spectrum = self.plan.forward(g)?;
        spectrum.values[0] = Complex::new(T::zero(), T::zero());
        spectrum.values
            .par_iter_mut()
            .zip(self.symbols.par_iter())
            .skip(1)
            .for_each(|(z, &lam)| *z = *z / lam);
        self.plan.inverse(&spectrum)
    }
}

/// Mean-zero `f` with `L f = g` for the constant coefficient block `b`.
pub fn fft_solve<T: Real>(b: &DenseMatrix<T>, g: &LatticeField<T>) -> Result<LatticeField<T>> {
    FftPoissonSolver::new(b, g.domain())?.solve(g, T::lit(FFT_COMPAT_TOL))
}

/// Measured violation of `v_k1(s) (1 - e^{-i s_k2}) = v_k2(s) (1 - e^{-i s_k1})`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CompatibilityDefect<T> {
    /// Max over axis pairs and frequencies of the residual magnitude.
    pub defect: T,
    /// `max_k max_m |v_k(m)|`, the natural size of each term.
    pub scale: T,
}

impl<T: Real> CompatibilityDefect<T> {
    pub fn relative(&self) -> T {
        if self.scale > T::zero() {
            self.defect / self.scale
        } else {
            self.defect
        }
    }
}

pub fn check_compatibility_relation<T: Real>(v: &GradientField<T>) -> Result<CompatibilityDefect<T>> {
    let domain = v.domain();
    let plan = DftPlan::new(domain)?;
    let d = domain.dim();
    let spectra = (0..d)
        .map(|k| plan.forward(&v.component(k)))
        .collect::<Result<Vec<_>>>()?;
    let scale = spectra
        .iter()
        .fold(T::zero(), |acc, s| acc.max(s.max_abs()));
    let mut defect = T::zero();
    for m in 0..domain.len() {
        let c: Vec<Complex<T>> = frequency_of::<T>(domain, m)
            .into_iter()
            .map(difference_factor)
            .collect();
        for k1 in 0..d {
            for k2 in k1 + 1..d {
                let r = spectra[k1].get(m) * c[k2] - spectra[k2].get(m) * c[k1];
                defect = defect.max(r.norm());
            }
        }
    }
    Ok(CompatibilityDefect { defect, scale })
}

/// Relative imaginary part of a symbol value, for callers asserting realness.
pub fn symbol_imag_ratio<T: Real>(lambda: Complex<T>) -> T {
    let mag = lambda.norm();
    if mag > T::zero() {
        abs(lambda.im) / mag
    } else {
        T::zero()
    }
}

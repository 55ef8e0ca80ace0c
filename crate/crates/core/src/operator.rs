//! The generalized discrete Poisson operator
//!
//! ```text
//! (L f)_n = sum_{k,l} [ b_{n+e_k,kl} (f_{n+e_k} - f_{n+e_k-e_l}) - b_{n,kl} (f_n - f_{n-e_l}) ]
//! ```
//!
//! together with the backward-difference gradient `v_{n,k} = f_n - f_{n-e_k}`,
//! the flux `y_{n,kl} = b_{n,kl} v_{n,l}`, the energy
//! `W = sum_n sum_{k,l} b_{n,kl} conj(v_{n,k}) v_{n,l}`, and a brute-force dense
//! assembly of `L` used as an oracle.
//!
//! On zero-padded boxes, sites outside the box carry `f = 0` and `b = 0`.

use num_complex::Complex;
use rayon::prelude::*;

use crate::coefficients::CoefficientField;
use crate::dense::DenseMatrix;
use crate::error::{Error, Result};
use crate::lattice::{det_sum, Domain, LatticeField};
use crate::scalar::{abs, Real};

/// Default site cap for [`dense_assemble`].
pub const DENSE_CAP: usize = 4096;
/// Relative tolerance on the imaginary part of the energy.
pub const ENERGY_IMAG_TOL: f64 = 1e-12;

/// Backward differences, `d` per site, stored site-major.
#[derive(Clone, Debug, PartialEq)]
pub struct GradientField<T> {
    domain: Domain,
    components: Vec<Complex<T>>,
}

impl<T: Real> GradientField<T> {
    pub fn new(domain: Domain, components: Vec<Complex<T>>) -> Result<Self> {
        if components.len() != domain.len() * domain.dim() {
            return Err(Error::InvalidArgument(format!(
                "{} gradient components for {} sites in {} dimensions",
                components.len(),
                domain.len(),
                domain.dim()
            )));
        }
        Ok(Self { domain, components })
    }

    pub fn domain(&self) -> &Domain {
        &self.domain
    }

    pub fn as_slice(&self) -> &[Complex<T>] {
        &self.components
    }

    #[inline]
    pub fn get(&self, site: usize, k: usize) -> Complex<T> {
        self.components[site * self.domain.dim() + k]
    }

    /// Component `k` as a lattice field.
    pub fn component(&self, k: usize) -> LatticeField<T> {
        let d = self.domain.dim();
        LatticeField::from_parts(
            self.domain.clone(),
            self.components.iter().skip(k).step_by(d).copied().collect(),
        )
    }

    /// Replaces component `k`; used to build non-gradient vector fields.
    pub fn with_component(mut self, k: usize, field: &LatticeField<T>) -> Result<Self> {
        self.domain.check_axis(k)?;
        self.domain.check_same(field.domain())?;
        let d = self.domain.dim();
        for (n, &z) in field.values().iter().enumerate() {
            self.components[n * d + k] = z;
        }
        Ok(self)
    }

    /// `sum_{n,k} |v_{n,k}|^2`.
    pub fn norm_sqr(&self) -> T {
        det_sum(&self.components, T::zero(), |_, z| z.norm_sqr())
    }
}

/// `d x d` flux values per site.
#[derive(Clone, Debug, PartialEq)]
pub struct FluxField<T> {
    domain: Domain,
    components: Vec<Complex<T>>,
}

impl<T: Real> FluxField<T> {
    pub fn domain(&self) -> &Domain {
        &self.domain
    }

    pub fn as_slice(&self) -> &[Complex<T>] {
        &self.components
    }

    #[inline]
    pub fn get(&self, site: usize, k: usize, l: usize) -> Complex<T> {
        let d = self.domain.dim();
        self.components[(site * d + k) * d + l]
    }
}

pub fn gradient<T: Real>(f: &LatticeField<T>) -> GradientField<T> {
    let domain = f.domain().clone();
    let d = domain.dim();
    let components = (0..f.len())
        .into_par_iter()
        .flat_map_iter(|n| {
            let fn_ = f.get(n);
            (0..d).map(move |k| fn_ - f.at_offset(n, k, -1))
        })
        .collect();
    GradientField { domain, components }
}

pub fn flux<T: Real>(b: &CoefficientField<T>, v: &GradientField<T>) -> Result<FluxField<T>> {
    b.domain().check_same(v.domain())?;
    let d = b.dim();
    let components = (0..v.domain().len())
        .into_par_iter()
        .flat_map_iter(|n| {
            (0..d).flat_map(move |k| (0..d).map(move |l| b.entry(n, k, l) * v.get(n, l)))
        })
        .collect();
    Ok(FluxField {
        domain: v.domain().clone(),
        components,
    })
}

/// Applies `L` without validating `b`. Works for any coefficient matrices,
/// including non-Hermitian ones used as negative controls.
pub fn apply_unchecked<T: Real>(b: &CoefficientField<T>, f: &LatticeField<T>) -> Result<LatticeField<T>> {
    b.domain().check_same(f.domain())?;
    let domain = f.domain();
    let d = domain.dim();
    let values = (0..f.len())
        .into_par_iter()
        .map(|n| {
            let fn_ = f.get(n);
            let mut acc = Complex::new(T::zero(), T::zero());
            for k in 0..d {
                let fwd = domain.neighbor(n, k, 1);
                for l in 0..d {
                    acc = acc - b.entry(n, k, l) * (fn_ - f.at_offset(n, l, -1));
                    if let Some(m) = fwd {
                        acc = acc + b.entry(m, k, l) * (f.get(m) - f.at_offset(m, l, -1));
                    }
                }
            }
            acc
        })
        .collect();
    Ok(LatticeField::from_parts(domain.clone(), values))
}

/// `L` bound to a coefficient field that passed validation.
#[derive(Clone, Copy, Debug)]
pub struct PoissonOperator<'a, T> {
    coefficients: &'a CoefficientField<T>,
}

impl<'a, T: Real> PoissonOperator<'a, T> {
    pub fn new(coefficients: &'a CoefficientField<T>) -> Result<Self> {
        let report = coefficients.validate();
        if !report.pass() {
            return Err(Error::InvalidCoefficients(report.failures.join("; ")));
        }
        Ok(Self { coefficients })
    }

    pub fn coefficients(&self) -> &'a CoefficientField<T> {
        self.coefficients
    }

    pub fn domain(&self) -> &'a Domain {
        self.coefficients.domain()
    }

    pub fn apply(&self, f: &LatticeField<T>) -> Result<LatticeField<T>> {
        apply_unchecked(self.coefficients, f)
    }
}

/// Validates `b`, then applies `L` to `f`.
pub fn apply<T: Real>(b: &CoefficientField<T>, f: &LatticeField<T>) -> Result<LatticeField<T>> {
    PoissonOperator::new(b)?.apply(f)
}

/// Complex energy together with the sum of per-term magnitudes, which sets
/// the scale for rounding in the imaginary part.
#[derive(Clone, Copy, Debug)]
pub struct EnergyParts<T> {
    pub value: Complex<T>,
    pub magnitude: T,
}

/// `W` evaluated through the gradient and flux, without the realness check.
pub fn energy_parts<T: Real>(b: &CoefficientField<T>, f: &LatticeField<T>) -> Result<EnergyParts<T>> {
    b.domain().check_same(f.domain())?;
    let d = b.dim();
    let v = gradient(f);
    let y = flux(b, &v)?;
    let zero = (Complex::new(T::zero(), T::zero()), T::zero());
    let sites: Vec<usize> = (0..f.len()).collect();
    let (value, magnitude) = det_sum(&sites, Pair(zero), |_, &n| {
        let mut w = Complex::new(T::zero(), T::zero());
        let mut mag = T::zero();
        for k in 0..d {
            let mut row = Complex::new(T::zero(), T::zero());
            for l in 0..d {
                row = row + y.get(n, k, l);
            }
            let term = v.get(n, k).conj() * row;
            w = w + term;
            mag = mag + term.norm();
        }
        Pair((w, mag))
    })
    .0;
    Ok(EnergyParts { value, magnitude })
}

#[derive(Clone, Copy)]
struct Pair<T>((Complex<T>, T));

impl<T: Real> std::ops::Add for Pair<T> {
    type Output = Self;
    fn add(self, o: Self) -> Self {
        Pair((self.0 .0 + o.0 .0, self.0 .1 + o.0 .1))
    }
}

/// Energy functional `W(f)`; fails if its imaginary part exceeds rounding level.
pub fn energy<T: Real>(b: &CoefficientField<T>, f: &LatticeField<T>) -> Result<T> {
    let parts = energy_parts(b, f)?;
    let tol = T::lit(ENERGY_IMAG_TOL) * parts.magnitude;
    if abs(parts.value.im) > tol {
        return Err(Error::NumericalConsistency(format!(
            "energy has imaginary part {:e} above {:e}",
            parts.value.im, tol
        )));
    }
    Ok(parts.value.re)
}

/// Assembles `L` as a dense `N x N` matrix by scattering the stencil
/// coefficients of every `(n, k, l)` term. This path shares no code with
/// [`apply_unchecked`].
pub fn dense_assemble<T: Real>(b: &CoefficientField<T>) -> Result<DenseMatrix<T>> {
    dense_assemble_with_cap(b, DENSE_CAP)
}

pub fn dense_assemble_with_cap<T: Real>(b: &CoefficientField<T>, cap: usize) -> Result<DenseMatrix<T>> {
    let domain = b.domain();
    let n_sites = domain.len();
    if n_sites > cap {
        return Err(Error::CapExceeded {
            sites: n_sites,
            cap,
        });
    }
    let d = domain.dim();
    let mut a = DenseMatrix::zeros(n_sites, n_sites);
    for row in 0..n_sites {
        let coords = domain.multi_index(row).0;
        let locate = |offsets: &[(usize, isize)]| -> Option<usize> {
            let mut c: Vec<isize> = coords.iter().map(|&x| x as isize).collect();
            for &(axis, off) in offsets {
                c[axis] += off;
            }
            let wrapped: Option<Vec<usize>> = c
                .iter()
                .zip(domain.extents())
                .map(|(&x, &n)| {
                    let n = n as isize;
                    if (0..n).contains(&x) {
                        Some(x as usize)
                    } else if domain.is_periodic() {
                        Some(x.rem_euclid(n) as usize)
                    } else {
                        None
                    }
                })
                .collect();
            wrapped.and_then(|w| domain.flat_index(&w))
        };
        for k in 0..d {
            let fwd = locate(&[(k, 1)]);
            for l in 0..d {
                // - b_{n,kl} (f_n - f_{n-e_l})
                let own = b.entry(row, k, l);
                a[(row, row)] = a[(row, row)] - own;
                if let Some(col) = locate(&[(l, -1)]) {
                    a[(row, col)] = a[(row, col)] + own;
                }
                // + b_{n+e_k,kl} (f_{n+e_k} - f_{n+e_k-e_l})
                if let Some(m) = fwd {
                    let up = b.entry(m, k, l);
                    a[(row, m)] = a[(row, m)] + up;
                    if let Some(col) = locate(&[(k, 1), (l, -1)]) {
                        a[(row, col)] = a[(row, col)] - up;
                    }
                }
            }
        }
    }
    Ok(a)
}

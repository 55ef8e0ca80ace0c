//! Per-site Hermitian coefficient matrices `b_n` with common spectral bounds.

use num_complex::Complex;
use rand::SeedableRng;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::dense::{hermitian_eigenvalues, DenseMatrix};
use crate::error::{Error, Result};
use crate::lattice::Domain;
use crate::scalar::{is_finite_c, Real};

/// Relative Hermiticity tolerance, scaled by the declared upper bound.
pub const HERMITICITY_TOL: f64 = 1e-12;
/// Relative slack above the declared upper bound for eigenvalues.
pub const UPPER_BOUND_SLACK: f64 = 1e-10;
/// Relative width of the gap kept between generated eigenvalues and `b1`.
pub const LOWER_MARGIN: f64 = 1e-6;

/// Declared interval `(lower, upper]` containing every per-site eigenvalue.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SpectralBounds<T> {
    pub lower: T,
    pub upper: T,
}

impl<T: Real> SpectralBounds<T> {
    pub fn new(lower: T, upper: T) -> Result<Self> {
        if !(lower >= T::zero() && upper > lower && upper.is_finite()) {
            return Err(Error::InvalidBounds {
                lower: lower.to_f64_lossy(),
                upper: upper.to_f64_lossy(),
            });
        }
        Ok(Self { lower, upper })
    }

    /// Positivity of `b1` is what makes the energy form coercive on gradients.
    pub fn guarantees_uniqueness(&self) -> bool {
        self.lower > T::zero()
    }
}

/// A `d x d` complex matrix per lattice site, stored site-major and row-major
/// within each block.
#[derive(Clone, Debug, PartialEq)]
pub struct CoefficientField<T> {
    domain: Domain,
    matrices: Vec<Complex<T>>,
    bounds: SpectralBounds<T>,
}

/// Outcome of [`CoefficientField::validate`].
#[derive(Clone, Debug, PartialEq)]
pub struct ValidationReport<T> {
    pub max_hermiticity_defect: T,
    pub worst_hermiticity_site: Option<usize>,
    /// Extremes over all sites of the eigenvalues of the Hermitian parts.
    pub min_eigenvalue: T,
    pub max_eigenvalue: T,
    pub declared: SpectralBounds<T>,
    pub hermitian: bool,
    pub within_bounds: bool,
    pub entries_bounded: bool,
    /// False when `b1 = 0` is declared.
    pub uniqueness_guaranteed: bool,
    pub failures: Vec<String>,
}

impl<T: Real> ValidationReport<T> {
    pub fn pass(&self) -> bool {
        self.hermitian && self.within_bounds && self.entries_bounded
    }
}

/// `splitmix64` finalizer; decorrelates per-site seeds.
pub(crate) fn mix_seed(seed: u64, index: u64) -> u64 {
    let mut z = seed ^ index.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

impl<T: Real> CoefficientField<T> {
    pub fn new(domain: Domain, matrices: Vec<Complex<T>>, bounds: SpectralBounds<T>) -> Result<Self> {
        let d = domain.dim();
        if matrices.len() != domain.len() * d * d {
            return Err(Error::InvalidArgument(format!(
                "{} entries for {} sites of {d}x{d} blocks",
                matrices.len(),
                domain.len()
            )));
        }
        if let Some(i) = matrices.iter().position(|z| !is_finite_c(z)) {
            return Err(Error::NonFinite { site: i / (d * d) });
        }
        Ok(Self {
            domain,
            matrices,
            bounds,
        })
    }

    /// The same matrix at every site.
    pub fn constant(domain: Domain, matrix: &DenseMatrix<T>, bounds: SpectralBounds<T>) -> Result<Self> {
        let d = domain.dim();
        if matrix.rows() != d || matrix.cols() != d {
            return Err(Error::InvalidArgument(format!(
                "{}x{} block for a {d}-dimensional domain",
                matrix.rows(),
                matrix.cols()
            )));
        }
        let matrices = matrix.as_slice().repeat(domain.len());
        Self::new(domain, matrices, bounds)
    }

    /// `scale * I` everywhere, declared bounds `(scale (1 - 1e-6), scale]`.
    pub fn identity(domain: Domain, scale: T) -> Result<Self> {
        if !(scale > T::zero() && scale.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "identity scale must be positive, got {scale}"
            )));
        }
        let d = domain.dim();
        let bounds = SpectralBounds::new(scale * (T::one() - T::lit(LOWER_MARGIN)), scale)?;
        let block = DenseMatrix::identity(d).scale(Complex::new(scale, T::zero()));
        Self::constant(domain, &block, bounds)
    }

    /// Random Hermitian field `U diag(lambda) U^H` per site, with `U` a seeded
    /// Haar-like unitary and each `lambda` uniform in `(lower + delta, upper]`,
    /// `delta = 1e-6 (upper - lower)`. Site `n` draws from its own stream seeded
    /// by `mix(seed, n)`, so the result does not depend on thread count.
    pub fn random_hermitian_pd(domain: Domain, lower: T, upper: T, seed: u64) -> Result<Self> {
        let bounds = SpectralBounds::new(lower, upper)?;
        let d = domain.dim();
        let lo = lower.to_f64_lossy();
        let hi = upper.to_f64_lossy();
        let delta = LOWER_MARGIN * (hi - lo);
        let matrices: Vec<Complex<T>> = (0..domain.len())
            .into_par_iter()
            .flat_map_iter(|site| {
                let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(seed, site as u64));
                random_site_block(&mut rng, d, lo + delta, hi)
            })
            .collect();
        Self::new(domain, matrices, bounds)
    }

    #[inline]
    pub fn domain(&self) -> &Domain {
        &self.domain
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.domain.dim()
    }

    #[inline]
    pub fn bounds(&self) -> SpectralBounds<T> {
        self.bounds
    }

    pub fn with_bounds(mut self, bounds: SpectralBounds<T>) -> Self {
        self.bounds = bounds;
        self
    }

    pub fn as_slice(&self) -> &[Complex<T>] {
        &self.matrices
    }

    /// Row-major `d x d` block of `site`.
    #[inline]
    pub fn site_block(&self, site: usize) -> &[Complex<T>] {
        let dd = self.dim() * self.dim();
        &self.matrices[site * dd..(site + 1) * dd]
    }

    #[inline]
    pub fn entry(&self, site: usize, k: usize, l: usize) -> Complex<T> {
        let d = self.dim();
        self.matrices[(site * d + k) * d + l]
    }

    pub fn entry_mut(&mut self, site: usize, k: usize, l: usize) -> &mut Complex<T> {
        let d = self.dim();
        &mut self.matrices[(site * d + k) * d + l]
    }

    pub fn site_matrix(&self, site: usize) -> DenseMatrix<T> {
        let d = self.dim();
        DenseMatrix::from_vec(d, d, self.site_block(site).to_vec()).unwrap()
    }

    /// Site average `(1/N) sum_n b_n`.
    pub fn mean_matrix(&self) -> DenseMatrix<T> {
        let d = self.dim();
        let n = T::from_usize(self.domain.len()).unwrap();
        let mut sum = vec![Complex::new(T::zero(), T::zero()); d * d];
        for block in self.matrices.chunks(d * d) {
            for (acc, &z) in sum.iter_mut().zip(block) {
                *acc = *acc + z;
            }
        }
        DenseMatrix::from_vec(d, d, sum.into_iter().map(|z| z / n).collect()).unwrap()
    }

    /// The common block if every site carries the same matrix.
    pub fn constant_block(&self) -> Option<DenseMatrix<T>> {
        let first = self.site_block(0);
        let dd = first.len();
        self.matrices
            .chunks(dd)
            .all(|b| b == first)
            .then(|| self.site_matrix(0))
    }

    /// Checks Hermiticity, the declared spectral interval and the entrywise bound.
    pub fn validate(&self) -> ValidationReport<T> {
        let d = self.dim();
        let b1 = self.bounds.lower;
        let b2 = self.bounds.upper;
        let herm_tol = T::lit(HERMITICITY_TOL) * b2;
        let upper_cap = b2 + T::lit(UPPER_BOUND_SLACK) * b2;

        let per_site: Vec<(T, T, T, T)> = (0..self.domain.len())
            .into_par_iter()
            .map(|site| {
                let m = self.site_matrix(site);
                let defect = m.hermiticity_defect();
                let eig = hermitian_eigenvalues(&m)
                    .unwrap_or_else(|_| vec![T::nan(); d]);
                (defect, eig[0], eig[d - 1], m.max_abs())
            })
            .collect();

        let mut max_defect = T::zero();
        let mut worst_site = None;
        let mut min_eig = T::infinity();
        let mut max_eig = T::neg_infinity();
        let mut max_entry = T::zero();
        let mut eig_nan = false;
        for (site, &(defect, lo, hi, entry)) in per_site.iter().enumerate() {
            if defect > max_defect {
                max_defect = defect;
                worst_site = Some(site);
            }
            eig_nan |= lo.is_nan() || hi.is_nan();
            min_eig = min_eig.min(lo);
            max_eig = max_eig.max(hi);
            max_entry = max_entry.max(entry);
        }

        let mut failures = Vec::new();
        let hermitian = max_defect <= herm_tol;
        if !hermitian {
            failures.push(format!(
                "hermiticity defect {max_defect:e} at site {} exceeds {herm_tol:e}",
                worst_site.unwrap_or(0)
            ));
        }
        let within_bounds = !eig_nan && min_eig > b1 && max_eig <= upper_cap;
        if !within_bounds {
            failures.push(format!(
                "eigenvalues span [{min_eig:e}, {max_eig:e}], declared ({b1:e}, {b2:e}]"
            ));
        }
        let entries_bounded = max_entry <= upper_cap;
        if !entries_bounded {
            failures.push(format!("entry magnitude {max_entry:e} exceeds b2 = {b2:e}"));
        }
        let uniqueness_guaranteed = self.bounds.guarantees_uniqueness();
        if !uniqueness_guaranteed {
            failures.push("b1 = 0: uniqueness not guaranteed".into());
        }

        ValidationReport {
            max_hermiticity_defect: max_defect,
            worst_hermiticity_site: worst_site,
            min_eigenvalue: min_eig,
            max_eigenvalue: max_eig,
            declared: self.bounds,
            hermitian,
            within_bounds,
            entries_bounded,
            uniqueness_guaranteed,
            failures,
        }
    }

    /// `(min_n lambda_min(b_n), max_n lambda_max(b_n))`.
    pub fn estimate_spectral_bounds(&self) -> Result<(T, T)> {
        let scale = self
            .matrices
            .iter()
            .fold(T::zero(), |acc, z| acc.max(z.norm()))
            .max(T::min_positive_value());
        let tol = T::lit(HERMITICITY_TOL) * scale;
        let per_site: Vec<Result<(T, T)>> = (0..self.domain.len())
            .into_par_iter()
            .map(|site| {
                let m = self.site_matrix(site);
                let defect = m.hermiticity_defect();
                if defect > tol {
                    return Err(Error::NonHermitian {
                        defect: defect.to_f64_lossy(),
                    });
                }
                let eig = hermitian_eigenvalues(&m)?;
                Ok((eig[0], eig[eig.len() - 1]))
            })
            .collect();
        let mut lo = T::infinity();
        let mut hi = T::neg_infinity();
        for r in per_site {
            let (a, b) = r?;
            lo = lo.min(a);
            hi = hi.max(b);
        }
        Ok((lo, hi))
    }
}

fn random_site_block<T: Real>(rng: &mut ChaCha8Rng, d: usize, lo: f64, hi: f64) -> Vec<Complex<T>> {
    // Gaussian matrix, columns orthonormalised by modified Gram-Schmidt.
    let mut u: Vec<Vec<Complex<f64>>> = (0..d)
        .map(|_| {
            (0..d)
                .map(|_| Complex::new(rng.sample(StandardNormal), rng.sample(StandardNormal)))
                .collect()
        })
        .collect();
    for j in 0..d {
        for i in 0..j {
            let (done, rest) = u.split_at_mut(j);
            let (ui, uj) = (&done[i], &mut rest[0]);
            let proj: Complex<f64> = ui.iter().zip(uj.iter()).map(|(a, b)| a.conj() * b).sum();
            for (x, y) in uj.iter_mut().zip(ui) {
                *x -= proj * y;
            }
        }
        let norm = u[j].iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        for z in &mut u[j] {
            *z /= norm;
        }
    }
    let lambdas: Vec<f64> = (0..d)
        .map(|_| {
            let x: f64 = rng.random();
            hi - x * (hi - lo)
        })
        .collect();
    let mut block = vec![Complex::new(T::zero(), T::zero()); d * d];
    for k in 0..d {
        for l in k..d {
            let mut acc = Complex::new(0.0, 0.0);
            for (j, &lam) in lambdas.iter().enumerate() {
                acc += u[j][k] * u[j][l].conj() * lam;
            }
            if k == l {
                acc.im = 0.0;
            }
            block[k * d + l] = Complex::new(T::lit(acc.re), T::lit(acc.im));
            block[l * d + k] = Complex::new(T::lit(acc.re), T::lit(-acc.im));
        }
    }
    block
}

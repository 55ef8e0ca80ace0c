//! Generalized discrete Poisson equation on finite lattices.
//!
//! The operator
//!
//! ```text
//! (L f)_n = sum_{k,l} [ b_{n+e_k,kl} (f_{n+e_k} - f_{n+e_k-e_l}) - b_{n,kl} (f_n - f_{n-e_l}) ]
//! ```
//!
//! acts on complex fields over a `d`-dimensional box with a Hermitian `d x d`
//! coefficient matrix `b_n` per site. This crate provides the matrix-free
//! operator and its energy form, a dense oracle, Fourier tools, CG and FFT
//! solvers, and verifiers for the kernel, uniqueness, energy and
//! necessary-condition properties.
//!
//! Numerics are generic over [`Real`] (`f32` or `f64`); the `f64` aliases
//! below are what the file formats and the command-line tool use.

pub mod analysis;
pub mod coefficients;
pub mod dense;
pub mod error;
pub mod io;
pub mod lattice;
pub mod operator;
pub mod scalar;
pub mod solver;
pub mod spectral;

pub use analysis::{Outcome, TheoremId, TheoremReport};
pub use coefficients::{CoefficientField, SpectralBounds, ValidationReport};
pub use dense::{DenseMatrix, HermitianEigen};
pub use error::{Error, Result};
pub use lattice::{Boundary, Domain, LatticeField, MultiIndex};
pub use operator::{FluxField, GradientField, PoissonOperator};
pub use scalar::Real;
pub use solver::{Normalization, PreconditionerKind, SolveError, SolveReport, SolverConfig};
pub use spectral::{CompatibilityDefect, SpectralField};

pub use num_complex::Complex;

pub type C64 = Complex<f64>;
pub type C32 = Complex<f32>;

pub type Field = LatticeField<f64>;
pub type Coefficients = CoefficientField<f64>;
pub type Gradient = GradientField<f64>;
pub type Flux = FluxField<f64>;
pub type Spectrum = SpectralField<f64>;
pub type Matrix = DenseMatrix<f64>;
pub type Report = SolveReport<f64>;

pub type Field32 = LatticeField<f32>;
pub type Coefficients32 = CoefficientField<f32>;
pub type Spectrum32 = SpectralField<f32>;
pub type Matrix32 = DenseMatrix<f32>;

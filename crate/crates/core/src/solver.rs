//! Conjugate gradients for the variable-coefficient equation `L f = g`.
//!
//! CG runs on `A = -L`, Hermitian positive semidefinite. On periodic domains
//! its kernel is the constant field, so the right-hand side and every iterate
//! are kept mean-zero. On zero-padded boxes `A` is definite and no deflation
//! is applied.

use std::fmt;

use num_complex::Complex;

use crate::coefficients::CoefficientField;
use crate::dense::hermitian_eigenvalues;
use crate::error::{Error, Result};
use crate::lattice::LatticeField;
use crate::operator::{apply_unchecked, PoissonOperator};
use crate::spectral::FftPoissonSolver;
use crate::scalar::Real;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PreconditionerKind {
    None,
    /// FFT solve with the site-averaged coefficient matrix.
    FftMeanCoeff,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Normalization {
    MeanZero,
    AnchorSiteZero,
}

impl fmt::Display for Normalization {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Normalization::MeanZero => "mean-zero",
            Normalization::AnchorSiteZero => "anchor-site-zero",
        })
    }
}

impl fmt::Display for PreconditionerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            PreconditionerKind::None => "none",
            PreconditionerKind::FftMeanCoeff => "fft-mean",
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SolverConfig {
    /// `None` means `10 N`.
    pub max_iterations: Option<usize>,
    pub rel_tolerance: f64,
    pub preconditioner: PreconditionerKind,
    pub auto_project_rhs: bool,
    pub normalization: Normalization,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            max_iterations: None,
            rel_tolerance: 1e-10,
            preconditioner: PreconditionerKind::None,
            auto_project_rhs: true,
            normalization: Normalization::MeanZero,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.rel_tolerance > 0.0 && self.rel_tolerance < 1.0) {
            return Err(Error::InvalidArgument(format!(
                "relative tolerance {} outside (0, 1)",
                self.rel_tolerance
            )));
        }
        if self.max_iterations == Some(0) {
            return Err(Error::InvalidArgument("max iterations must be at least 1".into()));
        }
        Ok(())
    }

    pub fn iteration_budget(&self, sites: usize) -> usize {
        self.max_iterations.unwrap_or(10 * sites)
    }
}

#[derive(Clone, Debug)]
pub struct SolveReport<T> {
    pub solution: LatticeField<T>,
    pub iterations: usize,
    /// `||r_j|| / ||g'||`, starting with the initial residual.
    pub residual_history: Vec<T>,
    /// [`compatibility_defect`] of the right-hand side as supplied.
    pub compatibility_defect: T,
    pub normalization: Normalization,
    pub uniqueness_warning: Option<String>,
    pub converged: bool,
}

impl<T: Real> SolveReport<T> {
    pub fn final_residual(&self) -> T {
        *self.residual_history.last().unwrap()
    }

    /// `name=value` lines.
    pub fn to_key_value(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!("converged={}\n", self.converged));
        out.push_str(&format!("iterations={}\n", self.iterations));
        out.push_str(&format!("final_residual={:e}\n", self.final_residual()));
        out.push_str(&format!("initial_residual={:e}\n", self.residual_history[0]));
        out.push_str(&format!(
            "compatibility_defect={:e}\n",
            self.compatibility_defect
        ));
        out.push_str(&format!("normalization={}\n", self.normalization));
        out.push_str(&format!(
            "uniqueness_warning={}\n",
            self.uniqueness_warning.as_deref().unwrap_or("none")
        ));
        out.push_str(&format!(
            "residual_history={}\n",
            self.residual_history
                .iter()
                .map(|r| format!("{r:e}"))
                .collect::<Vec<_>>()
                .join(",")
        ));
        out
    }
}

#[derive(Debug, thiserror::Error)]
pub enum SolveError<T: Real> {
    #[error(transparent)]
    Core(#[from] Error),
    #[error("no convergence after {} iterations (residual {:e})", .0.iterations, .0.final_residual())]
    NonConvergence(Box<SolveReport<T>>),
}

/// Inverse of the constant-coefficient operator built from the mean
/// coefficient matrix, negated so it approximates `A^{-1}` on mean-zero fields.
#[derive(Clone)]
pub struct Preconditioner<T: Real> {
    inner: FftPoissonSolver<T>,
}

impl<T: Real> Preconditioner<T> {
    pub fn fft_mean_coefficient(b: &CoefficientField<T>) -> Result<Self> {
        if !b.domain().is_periodic() {
            return Err(Error::NotPeriodic);
        }
        let mean = b.mean_matrix();
        let eig = hermitian_eigenvalues(&mean)?;
        if eig[0] <= T::zero() {
            return Err(Error::NotPositiveDefinite(format!(
                "mean coefficient has eigenvalue {:e}",
                eig[0]
            )));
        }
        Ok(Self {
            inner: FftPoissonSolver::new(&mean, b.domain())?,
        })
    }

    /// `z = -(L_mean)^{-1} r` restricted to mean-zero fields.
    pub fn apply(&self, r: &LatticeField<T>) -> Result<LatticeField<T>> {
        let z = self.inner.solve_projected(r)?;
        Ok(z.scale(Complex::new(-T::one(), T::zero())))
    }
}

pub fn make_preconditioner<T: Real>(b: &CoefficientField<T>) -> Result<Preconditioner<T>> {
    Preconditioner::fft_mean_coefficient(b)
}

/// `||L f - g|| / max(||g||, tiny)`.
pub fn residual<T: Real>(b: &CoefficientField<T>, f: &LatticeField<T>, g: &LatticeField<T>) -> Result<T> {
    let r = apply_unchecked(b, f)?.sub(g)?;
    Ok(r.norm() / g.norm().max(T::tiny()))
}

/// `|sum g| / max(sum |g|, tiny)`; zero for outputs of `L` on a torus.
pub fn compatibility_defect<T: Real>(g: &LatticeField<T>) -> T {
    let total_abs: T = g.values().iter().map(|z| z.norm()).sum();
    g.sum().norm() / total_abs.max(T::tiny())
}

pub fn cg_solve<T: Real>(
    b: &CoefficientField<T>,
    g: &LatticeField<T>,
    cfg: &SolverConfig,
) -> Result<SolveReport<T>, SolveError<T>> {
    cg_solve_from(b, g, cfg, None)
}

/// CG with an optional initial guess.
pub fn cg_solve_from<T: Real>(
    b: &CoefficientField<T>,
    g: &LatticeField<T>,
    cfg: &SolverConfig,
    initial: Option<&LatticeField<T>>,
) -> Result<SolveReport<T>, SolveError<T>> {
    cfg.validate()?;
    b.domain().check_same(g.domain())?;
    if let Some(x0) = initial {
        b.domain().check_same(x0.domain())?;
    }
    let op = PoissonOperator::new(b)?;
    let periodic = b.domain().is_periodic();
    let tol = T::lit(cfg.rel_tolerance);
    let defect = compatibility_defect(g);
    let uniqueness_warning = (!b.bounds().guarantees_uniqueness())
        .then(|| "declared b1 = 0: solution need not be unique up to a constant".to_string());

    let rhs = if periodic {
        if !cfg.auto_project_rhs {
            let mean = g.mean_value().norm();
            let allowed = tol * g.max_abs();
            if mean > allowed {
                return Err(Error::IncompatibleRhs {
                    defect: mean.to_f64_lossy(),
                    tolerance: allowed.to_f64_lossy(),
                }
                .into());
            }
        }
        g.subtract_mean()
    } else {
        g.clone()
    };

    let precond = match cfg.preconditioner {
        PreconditionerKind::None => None,
        PreconditionerKind::FftMeanCoeff if periodic => Some(Preconditioner::fft_mean_coefficient(b)?),
        PreconditionerKind::FftMeanCoeff => {
            return Err(Error::Unsupported(
                "FFT preconditioning on zero-padded domains".into(),
            )
            .into())
        }
    };

    let neg_one = Complex::new(-T::one(), T::zero());
    // A x = h with A = -L, h = -g'.
    let h = rhs.scale(neg_one);
    let h_norm = h.norm();
    let apply_a = |x: &LatticeField<T>| -> Result<LatticeField<T>> {
        let mut ax = op.apply(x)?.scale(neg_one);
        if periodic {
            ax.remove_mean_in_place();
        }
        Ok(ax)
    };
    let precondition = |r: &LatticeField<T>| -> Result<LatticeField<T>> {
        match &precond {
            Some(p) => p.apply(r),
            None => Ok(r.clone()),
        }
    };

    let finish = |x: LatticeField<T>, iterations, history: Vec<T>, converged| {
        let solution = normalize(x, cfg.normalization, periodic);
        SolveReport {
            solution,
            iterations,
            residual_history: history,
            compatibility_defect: defect,
            normalization: cfg.normalization,
            uniqueness_warning: uniqueness_warning.clone(),
            converged,
        }
    };

    if h_norm == T::zero() {
        let x = LatticeField::zeros(b.domain().clone());
        return Ok(finish(x, 0, vec![T::zero()], true));
    }

    let mut x = match initial {
        Some(x0) if periodic => x0.subtract_mean(),
        Some(x0) => x0.clone(),
        None => LatticeField::zeros(b.domain().clone()),
    };
    let true_residual = |x: &LatticeField<T>| -> Result<LatticeField<T>> {
        let mut r = h.sub(&apply_a(x)?)?;
        if periodic {
            r.remove_mean_in_place();
        }
        Ok(r)
    };

    let budget = cfg.iteration_budget(b.domain().len());
    let mut r = true_residual(&x)?;
    let mut history = vec![r.norm() / h_norm];
    let mut iterations = 0;
    if history[0] <= tol {
        return Ok(finish(x, 0, history, true));
    }

    let mut z = precondition(&r)?;
    let mut p = z.clone();
    let mut rz = r.inner_product(&z)?.re;

    while iterations < budget {
        iterations += 1;
        let ap = apply_a(&p)?;
        let pap = p.inner_product(&ap)?.re;
        if pap.is_nan() || pap <= T::zero() {
            break;
        }
        let alpha = Complex::new(rz / pap, T::zero());
        x.axpy_in_place(alpha, &p);
        r.axpy_in_place(-alpha, &ap);
        if periodic {
            r.remove_mean_in_place();
        }
        let mut rel = r.norm() / h_norm;
        if rel <= tol {
            // Guard against drift of the recursive residual.
            r = true_residual(&x)?;
            rel = r.norm() / h_norm;
            history.push(rel);
            if rel <= tol {
                return Ok(finish(x, iterations, history, true));
            }
            z = precondition(&r)?;
            p = z.clone();
            rz = r.inner_product(&z)?.re;
            continue;
        }
        history.push(rel);
        z = precondition(&r)?;
        let rz_next = r.inner_product(&z)?.re;
        let beta = Complex::new(rz_next / rz, T::zero());
        rz = rz_next;
        p = z.add(&p.scale(beta))?;
    }

    let report = finish(x, iterations, history, false);
    Err(SolveError::NonConvergence(Box::new(report)))
}

fn normalize<T: Real>(x: LatticeField<T>, normalization: Normalization, periodic: bool) -> LatticeField<T> {
    if !periodic {
        return x;
    }
    match normalization {
        Normalization::MeanZero => x.subtract_mean(),
        Normalization::AnchorSiteZero => {
            let anchor = x.get(0);
            x.map(|z| z - anchor)
        }
    }
}

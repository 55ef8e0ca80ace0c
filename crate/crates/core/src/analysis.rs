//! Executable checks of the structural facts about `L` on concrete instances.
//!
//! Every verifier returns a [`TheoremReport`]: the measured quantities, the
//! tolerances they were compared against, and the outcome. Reports serialise
//! to flat `name=value` text.
//!
//! Keys written by [`TheoremReport::to_key_value`]:
//!
//! | verifier              | measured keys                                                        |
//! |-----------------------|----------------------------------------------------------------------|
//! | `kernel`              | `sites`, `near_zero_count`, `min_eigenvalue`, `spectral_gap`, `max_eigenvalue`, `kernel_vector_deviation` |
//! | `uniqueness`          | `solves`, `max_pairwise_deviation`, `max_abs_solution`, `relative_deviation`, `max_final_residual` |
//! | `necessary-condition` | `lhs`, `rhs`, `ratio`                                                |
//! | `energy-identity`     | `energy`, `energy_imag`, `identity_defect`, `gradient_norm_sqr`, `lower_bound`, `upper_bound` |
//! | `energy-bounds`       | `energy`, `gradient_norm_sqr`, `lower_bound`, `upper_bound`          |
//! | `compatibility`       | `relation_defect`, `relation_scale`, `rhs_zero_sum_defect`           |

use std::fmt;

use num_complex::Complex;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand::Rng;

use crate::coefficients::{mix_seed, CoefficientField};
use crate::dense::hermitian_eigen;
use crate::error::{Error, Result};
use crate::lattice::LatticeField;
use crate::operator::{apply_unchecked, dense_assemble_with_cap, energy_parts, gradient, DENSE_CAP, ENERGY_IMAG_TOL};
use crate::scalar::{abs, Real};
use crate::solver::{cg_solve_from, compatibility_defect, residual, Normalization, SolveError, SolverConfig};
use crate::spectral::check_compatibility_relation;

/// Relative threshold below which an eigenvalue counts as zero.
pub const KERNEL_EIGEN_TOL: f64 = 1e-10;
/// Max deviation of the kernel eigenvector from its mean, relative to its norm.
pub const KERNEL_VECTOR_TOL: f64 = 1e-10;
/// Max deviation between solutions, relative to the solution magnitude.
pub const UNIQUENESS_TOL: f64 = 1e-8;
/// Slack factor on the necessary-condition inequality.
pub const NECESSARY_SLACK: f64 = 1e-10;
pub const ENERGY_IDENTITY_TOL: f64 = 1e-12;
pub const ENERGY_BOUND_SLACK: f64 = 1e-10;
pub const COMPATIBILITY_TOL: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum TheoremId {
    Kernel,
    Uniqueness,
    NecessaryCondition,
    EnergyIdentity,
    EnergyBounds,
    Compatibility,
}

impl TheoremId {
    pub const ALL: [TheoremId; 6] = [
        TheoremId::Kernel,
        TheoremId::Uniqueness,
        TheoremId::NecessaryCondition,
        TheoremId::EnergyIdentity,
        TheoremId::EnergyBounds,
        TheoremId::Compatibility,
    ];

    pub fn tag(self) -> &'static str {
        match self {
            TheoremId::Kernel => "kernel",
            TheoremId::Uniqueness => "uniqueness",
            TheoremId::NecessaryCondition => "necessary-condition",
            TheoremId::EnergyIdentity => "energy-identity",
            TheoremId::EnergyBounds => "energy-bounds",
            TheoremId::Compatibility => "compatibility",
        }
    }

    pub fn from_tag(tag: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|t| t.tag() == tag)
    }
}

impl fmt::Display for TheoremId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Outcome {
    Pass,
    Fail,
    /// The instance does not meet the hypothesis of the check.
    Refused(String),
}

/// Measured quantities and the tolerances they were compared against.
#[derive(Clone, Debug, PartialEq)]
pub struct TheoremReport {
    pub theorem: TheoremId,
    pub outcome: Outcome,
    pub measured: Vec<(String, f64)>,
    pub tolerances: Vec<(String, f64)>,
    pub notes: Vec<String>,
}

impl TheoremReport {
    fn new(theorem: TheoremId) -> Self {
        Self {
            theorem,
            outcome: Outcome::Fail,
            measured: Vec::new(),
            tolerances: Vec::new(),
            notes: Vec::new(),
        }
    }

    fn refused(theorem: TheoremId, why: impl Into<String>) -> Self {
        let why = why.into();
        Self {
            outcome: Outcome::Refused(why.clone()),
            notes: vec![why],
            ..Self::new(theorem)
        }
    }

    /// A failing report carrying only an explanation.
    pub fn failed(theorem: TheoremId, why: impl Into<String>) -> Self {
        Self {
            notes: vec![why.into()],
            ..Self::new(theorem)
        }
    }

    fn measure<T: Real>(&mut self, key: &str, value: T) {
        self.measured.push((key.to_string(), value.to_f64_lossy()));
    }

    fn tolerance(&mut self, key: &str, value: f64) {
        self.tolerances.push((key.to_string(), value));
    }

    fn decide(mut self, pass: bool) -> Self {
        self.outcome = if pass { Outcome::Pass } else { Outcome::Fail };
        self
    }

    pub fn pass(&self) -> bool {
        self.outcome == Outcome::Pass
    }

    pub fn get(&self, key: &str) -> Option<f64> {
        self.measured
            .iter()
            .find(|(k, _)| k == key)
            .map(|&(_, v)| v)
    }

    pub fn to_key_value(&self) -> String {
        let prefix = self.theorem.tag();
        let mut out = String::new();
        let outcome = match &self.outcome {
            Outcome::Pass => "pass",
            Outcome::Fail => "fail",
            Outcome::Refused(_) => "refused",
        };
        out.push_str(&format!("{prefix}.outcome={outcome}\n"));
        out.push_str(&format!("{prefix}.pass={}\n", self.pass()));
        for (k, v) in &self.measured {
            out.push_str(&format!("{prefix}.measured.{k}={v:e}\n"));
        }
        for (k, v) in &self.tolerances {
            out.push_str(&format!("{prefix}.tolerance.{k}={v:e}\n"));
        }
        for (i, note) in self.notes.iter().enumerate() {
            out.push_str(&format!("{prefix}.note.{i}={}\n", note.replace('\n', " ")));
        }
        out
    }
}

/// Finite-torus analogue of the statement that homogeneous solutions with
/// square-summable gradients are constant: `-L` has a one-dimensional kernel
/// spanned by the constant field.
pub fn verify_kernel<T: Real>(b: &CoefficientField<T>) -> Result<TheoremReport> {
    verify_kernel_with_cap(b, DENSE_CAP)
}

pub fn verify_kernel_with_cap<T: Real>(b: &CoefficientField<T>, cap: usize) -> Result<TheoremReport> {
    let id = TheoremId::Kernel;
    if !b.domain().is_periodic() {
        return Ok(TheoremReport::refused(id, "kernel check needs a periodic domain"));
    }
    if !b.bounds().guarantees_uniqueness() {
        return Ok(TheoremReport::refused(id, "declared b1 = 0: hypothesis b1 > 0 unmet"));
    }
    let validation = b.validate();
    if !validation.pass() {
        return Ok(TheoremReport::failed(
            id,
            format!("coefficients invalid: {}", validation.failures.join("; ")),
        ));
    }
    let a = dense_assemble_with_cap(b, cap)?.scale(Complex::new(-T::one(), T::zero()));
    let eig = hermitian_eigen(&a)?;
    let b2 = b.bounds().upper;
    let zero_tol = T::lit(KERNEL_EIGEN_TOL) * b2;

    let near_zero: Vec<usize> = (0..eig.eigenvalues.len())
        .filter(|&i| abs(eig.eigenvalues[i]) <= zero_tol)
        .collect();
    let gap = eig
        .eigenvalues
        .iter()
        .copied()
        .filter(|&l| abs(l) > zero_tol)
        .fold(T::infinity(), T::min);
    let min_eig = eig.eigenvalues[0];
    let max_eig = *eig.eigenvalues.last().unwrap();

    // Eigenvector of the eigenvalue closest to zero.
    let kernel_index = (0..eig.eigenvalues.len())
        .min_by(|&i, &j| {
            abs(eig.eigenvalues[i])
                .partial_cmp(&abs(eig.eigenvalues[j]))
                .unwrap()
        })
        .unwrap();
    let vec = eig.eigenvectors.column(kernel_index);
    let n = T::from_usize(vec.len()).unwrap();
    let mean = vec.iter().fold(Complex::new(T::zero(), T::zero()), |a, &z| a + z) / n;
    let norm = vec.iter().map(|z| z.norm_sqr()).sum::<T>().sqrt();
    let deviation = vec.iter().fold(T::zero(), |acc, &z| acc.max((z - mean).norm())) / norm;

    let mut report = TheoremReport::new(id);
    report.measure("sites", T::from_usize(vec.len()).unwrap());
    report.measure("near_zero_count", T::from_usize(near_zero.len()).unwrap());
    report.measure("min_eigenvalue", min_eig);
    report.measure("spectral_gap", gap);
    report.measure("max_eigenvalue", max_eig);
    report.measure("kernel_vector_deviation", deviation);
    report.tolerance("zero_eigenvalue", zero_tol.to_f64_lossy());
    report.tolerance("kernel_vector_deviation", KERNEL_VECTOR_TOL);
    let pass = near_zero.len() == 1
        && gap > zero_tol
        && gap.is_finite()
        && min_eig >= -zero_tol
        && deviation <= T::lit(KERNEL_VECTOR_TOL);
    Ok(report.decide(pass))
}

/// Solves `L f = g` from `trials` seeded initial guesses under both
/// normalizations and checks that all solutions agree modulo constants.
pub fn verify_uniqueness<T: Real>(
    b: &CoefficientField<T>,
    g: &LatticeField<T>,
    trials: usize,
    cfg: &SolverConfig,
    seed: u64,
) -> Result<TheoremReport, SolveError<T>> {
    let id = TheoremId::Uniqueness;
    if trials == 0 {
        return Err(Error::InvalidArgument("at least one trial is required".into()).into());
    }
    let mut solutions = Vec::with_capacity(2 * trials);
    let mut worst_residual = T::zero();
    let rhs = if cfg.auto_project_rhs && g.domain().is_periodic() {
        g.subtract_mean()
    } else {
        g.clone()
    };
    for trial in 0..trials {
        for normalization in [Normalization::MeanZero, Normalization::AnchorSiteZero] {
            let guess = random_guess(g, mix_seed(seed, trial as u64));
            let cfg = SolverConfig {
                normalization,
                ..*cfg
            };
            let rep = cg_solve_from(b, g, &cfg, Some(&guess))?;
            worst_residual = worst_residual.max(residual(b, &rep.solution, &rhs)?);
            solutions.push(rep.solution);
        }
    }
    let scale = solutions
        .iter()
        .map(|s| s.subtract_mean().max_abs())
        .fold(T::zero(), T::max);
    let mut worst = T::zero();
    for i in 0..solutions.len() {
        for j in i + 1..solutions.len() {
            let diff = solutions[i].sub(&solutions[j])?.subtract_mean();
            worst = worst.max(diff.max_abs());
        }
    }
    let relative = if scale > T::zero() { worst / scale } else { worst };
    let mut report = TheoremReport::new(id);
    report.measure("solves", T::from_usize(solutions.len()).unwrap());
    report.measure("max_pairwise_deviation", worst);
    report.measure("max_abs_solution", scale);
    report.measure("relative_deviation", relative);
    report.measure("max_final_residual", worst_residual);
    report.tolerance("relative_deviation", UNIQUENESS_TOL);
    report.tolerance("solver_rel_tolerance", cfg.rel_tolerance);
    Ok(report.decide(relative <= T::lit(UNIQUENESS_TOL)))
}

fn random_guess<T: Real>(g: &LatticeField<T>, seed: u64) -> LatticeField<T> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    // Large offset and slope so guesses differ by far more than the tolerance.
    let offset = Complex::new(T::lit(rng.random_range(-5.0..5.0)), T::lit(rng.random_range(-5.0..5.0)));
    LatticeField::random(g.domain().clone(), rng.random::<u64>())
        .map(|z| z + offset)
}

/// `sum |g|^2 <= b2^2 d^4 sum_{n,k} |v_{n,k}|^2` for `g = L f`, with `b2` the
/// declared upper bound.
pub fn verify_necessary_condition<T: Real>(
    b: &CoefficientField<T>,
    f: &LatticeField<T>,
) -> Result<TheoremReport> {
    let id = TheoremId::NecessaryCondition;
    let g = apply_unchecked(b, f)?;
    let d = T::from_usize(b.dim()).unwrap();
    let b2 = b.bounds().upper;
    let lhs = g.norm_sqr();
    let grad = gradient(f).norm_sqr();
    let rhs = b2 * b2 * d * d * d * d * grad;
    let ratio = if rhs > T::zero() { lhs / rhs } else { T::zero() };
    let mut report = TheoremReport::new(id);
    report.measure("lhs", lhs);
    report.measure("rhs", rhs);
    report.measure("ratio", ratio);
    report.tolerance("relative_slack", NECESSARY_SLACK);
    let pass = lhs <= rhs * (T::one() + T::lit(NECESSARY_SLACK));
    Ok(report.decide(pass))
}

struct EnergyMeasurements<T> {
    energy: Complex<T>,
    energy_scale: T,
    identity_defect: T,
    grad_sqr: T,
    lower: T,
    upper: T,
}

fn measure_energy<T: Real>(b: &CoefficientField<T>, x: &LatticeField<T>) -> Result<EnergyMeasurements<T>> {
    let parts = energy_parts(b, x)?;
    let lx = apply_unchecked(b, x)?;
    let pairing = x.inner_product(&lx)?;
    let grad_sqr = gradient(x).norm_sqr();
    Ok(EnergyMeasurements {
        energy: parts.value,
        energy_scale: parts.magnitude,
        identity_defect: (pairing + parts.value).norm(),
        grad_sqr,
        lower: b.bounds().lower * grad_sqr,
        upper: b.bounds().upper * grad_sqr,
    })
}

fn bounds_hold<T: Real>(m: &EnergyMeasurements<T>) -> bool {
    let w = m.energy.re;
    let slack = T::lit(ENERGY_BOUND_SLACK);
    m.lower * (T::one() - slack) <= w && w <= m.upper * (T::one() + slack)
}

/// Summation by parts `<x, L x> = -W(x)`, realness and non-negativity of `W`,
/// and the bounds `b1 sum|v|^2 <= W <= b2 sum|v|^2`.
pub fn verify_energy_identity<T: Real>(b: &CoefficientField<T>, x: &LatticeField<T>) -> Result<TheoremReport> {
    let id = TheoremId::EnergyIdentity;
    if !x.domain().is_periodic() {
        return Ok(TheoremReport::refused(id, "summation by parts is exact only on periodic domains"));
    }
    let m = measure_energy(b, x)?;
    let w = m.energy.re;
    let imag_tol = T::lit(ENERGY_IMAG_TOL) * m.energy_scale;
    let identity_tol = T::lit(ENERGY_IDENTITY_TOL) * T::one().max(abs(w));

    let mut report = TheoremReport::new(id);
    report.measure("energy", w);
    report.measure("energy_imag", m.energy.im);
    report.measure("identity_defect", m.identity_defect);
    report.measure("gradient_norm_sqr", m.grad_sqr);
    report.measure("lower_bound", m.lower);
    report.measure("upper_bound", m.upper);
    report.tolerance("energy_imag", imag_tol.to_f64_lossy());
    report.tolerance("identity_defect", identity_tol.to_f64_lossy());
    report.tolerance("energy_min", -ENERGY_IDENTITY_TOL);
    report.tolerance("bound_slack", ENERGY_BOUND_SLACK);

    let real = abs(m.energy.im) <= imag_tol;
    if !real {
        report.notes.push("energy is not real: coefficients are not Hermitian".into());
    }
    let pass = real
        && m.identity_defect <= identity_tol
        && w >= -T::lit(ENERGY_IDENTITY_TOL)
        && bounds_hold(&m);
    Ok(report.decide(pass))
}

/// Only the two-sided energy bound.
pub fn verify_energy_bounds<T: Real>(b: &CoefficientField<T>, x: &LatticeField<T>) -> Result<TheoremReport> {
    let m = measure_energy(b, x)?;
    let mut report = TheoremReport::new(TheoremId::EnergyBounds);
    report.measure("energy", m.energy.re);
    report.measure("gradient_norm_sqr", m.grad_sqr);
    report.measure("lower_bound", m.lower);
    report.measure("upper_bound", m.upper);
    report.tolerance("bound_slack", ENERGY_BOUND_SLACK);
    let pass = bounds_hold(&m);
    Ok(report.decide(pass))
}

/// Fourier compatibility relation of `gradient(f)` and the zero-sum property
/// of `L f`.
pub fn verify_compatibility<T: Real>(b: &CoefficientField<T>, f: &LatticeField<T>) -> Result<TheoremReport> {
    let id = TheoremId::Compatibility;
    if !f.domain().is_periodic() {
        return Ok(TheoremReport::refused(id, "compatibility relation needs a periodic domain"));
    }
    let rel = check_compatibility_relation(&gradient(f))?;
    let g = apply_unchecked(b, f)?;
    let zero_sum = compatibility_defect(&g);
    let mut report = TheoremReport::new(id);
    report.measure("relation_defect", rel.defect);
    report.measure("relation_scale", rel.scale);
    report.measure("rhs_zero_sum_defect", zero_sum);
    report.tolerance("relation_relative", COMPATIBILITY_TOL);
    report.tolerance("rhs_zero_sum_defect", COMPATIBILITY_TOL);
    let pass = rel.defect <= T::lit(COMPATIBILITY_TOL) * rel.scale && zero_sum <= T::lit(COMPATIBILITY_TOL);
    Ok(report.decide(pass))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coefficients::SpectralBounds;
    use crate::lattice::Domain;
    use crate::operator::apply;

    fn torus(extents: &[usize]) -> Domain {
        Domain::periodic(extents.to_vec()).unwrap()
    }

    #[test]
    fn kernel_of_identity_on_small_torus() {
        let b = CoefficientField::<f64>::identity(torus(&[4, 4]), 1.0).unwrap();
        let r = verify_kernel(&b).unwrap();
        assert!(r.pass(), "{}", r.to_key_value());
        assert_eq!(r.get("near_zero_count"), Some(1.0));
        // Smallest non-zero Laplacian eigenvalue on a 4-torus: 2 - 2 cos(pi/2) = 2.
        assert!((r.get("spectral_gap").unwrap() - 2.0).abs() < 1e-12);
    }

    #[test]
    fn kernel_refuses_zero_lower_bound() {
        let b = CoefficientField::<f64>::random_hermitian_pd(torus(&[3, 3]), 0.0, 1.0, 1).unwrap();
        let r = verify_kernel(&b).unwrap();
        assert!(matches!(r.outcome, Outcome::Refused(_)));
        assert!(r.to_key_value().contains("kernel.outcome=refused"));
    }

    #[test]
    fn necessary_condition_constant_field() {
        let b = CoefficientField::<f64>::identity(torus(&[4, 4]), 1.0).unwrap();
        let f = LatticeField::constant(b.domain().clone(), Complex::new(1.0, 2.0));
        let r = verify_necessary_condition(&b, &f).unwrap();
        assert!(r.pass());
        assert_eq!(r.get("lhs"), Some(0.0));
        assert_eq!(r.get("rhs"), Some(0.0));
    }

    #[test]
    fn necessary_condition_fails_in_one_dimension() {
        // Delta on a 4-site ring with b = I: g = [-2, 1, 0, 1], v = [1, -1, 0, 0].
        let b = CoefficientField::<f64>::identity(torus(&[4]), 1.0).unwrap();
        let f = LatticeField::delta(b.domain().clone(), 0).unwrap();
        let r = verify_necessary_condition(&b, &f).unwrap();
        assert_eq!(r.get("lhs"), Some(6.0));
        assert_eq!(r.get("rhs"), Some(2.0));
        assert!(!r.pass());
    }

    #[test]
    fn energy_identity_constant_and_identity() {
        let b = CoefficientField::<f64>::identity(torus(&[5, 4]), 1.0).unwrap();
        let k = LatticeField::constant(b.domain().clone(), Complex::new(1.0, 0.0));
        let r = verify_energy_identity(&b, &k).unwrap();
        assert!(r.pass());
        assert_eq!(r.get("energy"), Some(0.0));

        let x = LatticeField::random(b.domain().clone(), 3);
        let r = verify_energy_identity(&b, &x).unwrap();
        assert!(r.pass(), "{}", r.to_key_value());
        let (w, v) = (r.get("energy").unwrap(), r.get("gradient_norm_sqr").unwrap());
        assert!((w - v).abs() <= 1e-14 * v);
    }

    #[test]
    fn energy_identity_detects_non_hermitian() {
        let d = torus(&[4, 4]);
        let mut b = CoefficientField::<f64>::identity(d.clone(), 1.0)
            .unwrap()
            .with_bounds(SpectralBounds::new(0.1, 2.0).unwrap());
        for n in 0..d.len() {
            *b.entry_mut(n, 0, 1) = Complex::new(0.5, 0.0);
        }
        let r = verify_energy_identity(&b, &LatticeField::random(d, 1)).unwrap();
        assert!(!r.pass());
        // Summation by parts itself does not need Hermiticity.
        assert!(r.get("identity_defect").unwrap() < 1e-12);
    }

    #[test]
    fn uniqueness_on_constant_coefficients() {
        let b = CoefficientField::<f64>::identity(torus(&[6, 6]), 1.0).unwrap();
        let f = LatticeField::random(b.domain().clone(), 8);
        let g = apply(&b, &f).unwrap();
        let r = verify_uniqueness(&b, &g, 3, &SolverConfig::default(), 1).unwrap();
        assert!(r.pass(), "{}", r.to_key_value());
        assert_eq!(r.get("solves"), Some(6.0));
    }

    #[test]
    fn compatibility_report() {
        let b = CoefficientField::<f64>::random_hermitian_pd(torus(&[4, 5]), 0.5, 2.0, 2).unwrap();
        let f = LatticeField::random(b.domain().clone(), 4);
        let r = verify_compatibility(&b, &f).unwrap();
        assert!(r.pass(), "{}", r.to_key_value());
    }

    #[test]
    fn theorem_tags_round_trip() {
        for t in TheoremId::ALL {
            assert_eq!(TheoremId::from_tag(t.tag()), Some(t));
        }
    }
}

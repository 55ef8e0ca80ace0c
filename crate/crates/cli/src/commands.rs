//! Execution of a [`RunConfig`].

use std::fs;
use std::io::Write;
use std::path::Path;
use std::time::Instant;

use gdpe::analysis::{
    verify_compatibility, verify_energy_bounds, verify_energy_identity, verify_kernel_with_cap,
    verify_necessary_condition, verify_uniqueness,
};
use gdpe::io::{load_coefficients, load_field, save_coefficients, save_field};
use gdpe::operator::{apply, DENSE_CAP};
use gdpe::solver::cg_solve_from;
use gdpe::spectral::DftPlan;
use gdpe::{Coefficients, Domain, Error, Field, PoissonOperator, SolveError, TheoremId, TheoremReport};

use crate::config::{format_extents, Command, GenerateKind, InputRole, RunConfig, VerifyTarget};
use crate::error::CliError;

/// Runs one command. Reports and tables that have no output path go to `out`.
pub fn execute(cfg: &RunConfig, out: &mut dyn Write) -> Result<(), CliError> {
    cfg.solver.validate()?;
    match &cfg.command {
        Command::Generate {
            kind,
            scale,
            lower,
            upper,
        } => generate(cfg, *kind, *scale, *lower, *upper),
        Command::Apply => run_apply(cfg),
        Command::Solve => solve(cfg, out),
        Command::Verify {
            target,
            trials,
            kernel_cap,
        } => verify(cfg, *target, *trials, *kernel_cap, out),
        Command::Bench { sizes, reps } => bench(cfg, sizes, *reps, out),
    }
}

fn require_output(cfg: &RunConfig) -> Result<&Path, CliError> {
    cfg.output
        .as_deref()
        .ok_or_else(|| CliError::Usage(format!("{} needs --output", cfg.command.tag())))
}

fn same_domain(a: &Domain, b: &Domain) -> Result<(), CliError> {
    if a == b {
        Ok(())
    } else {
        Err(Error::DomainMismatch {
            left: a.to_string(),
            right: b.to_string(),
        }
        .into())
    }
}

fn generate(cfg: &RunConfig, kind: GenerateKind, scale: f64, lower: f64, upper: f64) -> Result<(), CliError> {
    let shape = cfg
        .domain
        .as_ref()
        .ok_or_else(|| CliError::Usage("generate needs --extents".into()))?;
    let domain = shape.to_domain()?;
    let path = require_output(cfg)?;
    match kind {
        GenerateKind::CoeffIdentity => save_coefficients(path, &Coefficients::identity(domain, scale)?)?,
        GenerateKind::CoeffRandom => save_coefficients(
            path,
            &Coefficients::random_hermitian_pd(domain, lower, upper, cfg.seed)?,
        )?,
        GenerateKind::RhsRandomCompatible => {
            save_field(path, &Field::random(domain, cfg.seed).subtract_mean())?
        }
        GenerateKind::FieldRandom => save_field(path, &Field::random(domain, cfg.seed))?,
    }
    if cfg.verbosity > 0 {
        eprintln!("wrote {} to {}", kind.tag(), path.display());
    }
    Ok(())
}

fn run_apply(cfg: &RunConfig) -> Result<(), CliError> {
    let b: Coefficients = load_coefficients(cfg.require_input(InputRole::Coefficients)?)?;
    let f: Field = load_field(cfg.require_input(InputRole::Field)?)?;
    same_domain(b.domain(), f.domain())?;
    let g = apply(&b, &f)?;
    save_field(require_output(cfg)?, &g)?;
    Ok(())
}

fn emit_report(cfg: &RunConfig, text: &str, out: &mut dyn Write) -> Result<(), CliError> {
    match &cfg.report {
        Some(path) => fs::write(path, text)?,
        None => out.write_all(text.as_bytes())?,
    }
    Ok(())
}

fn solve(cfg: &RunConfig, out: &mut dyn Write) -> Result<(), CliError> {
    let b: Coefficients = load_coefficients(cfg.require_input(InputRole::Coefficients)?)?;
    let g: Field = load_field(cfg.require_input(InputRole::Rhs)?)?;
    same_domain(b.domain(), g.domain())?;
    let initial: Option<Field> = match cfg.input(InputRole::Initial) {
        Some(p) => {
            let f0: Field = load_field(p)?;
            same_domain(b.domain(), f0.domain())?;
            Some(f0)
        }
        None => None,
    };
    let output = require_output(cfg)?;
    let (report, converged) = match cg_solve_from(&b, &g, &cfg.solver, initial.as_ref()) {
        Ok(rep) => (rep, true),
        Err(SolveError::NonConvergence(rep)) => (*rep, false),
        Err(SolveError::Core(e)) => return Err(e.into()),
    };
    save_field(output, &report.solution)?;
    emit_report(cfg, &report.to_key_value(), out)?;
    if let Some(w) = &report.uniqueness_warning {
        eprintln!("warning: {w}");
    }
    if cfg.verbosity > 0 {
        eprintln!(
            "{} iterations, final residual {:e}",
            report.iterations,
            report.final_residual()
        );
    }
    if converged {
        Ok(())
    } else {
        Err(CliError::NonConvergence(format!(
            "no convergence after {} iterations (residual {:e})",
            report.iterations,
            report.final_residual()
        )))
    }
}

/// Errors about the inputs themselves are usage errors; anything else a
/// verifier raises means the instance fails the check.
fn to_report(id: TheoremId, result: Result<TheoremReport, Error>) -> Result<TheoremReport, CliError> {
    match result {
        Ok(r) => Ok(r),
        Err(e @ (Error::DomainMismatch { .. } | Error::CapExceeded { .. } | Error::Io(_) | Error::Format(_))) => {
            Err(e.into())
        }
        Err(e) => Ok(TheoremReport::failed(id, e.to_string())),
    }
}

fn verify(
    cfg: &RunConfig,
    target: VerifyTarget,
    trials: usize,
    kernel_cap: usize,
    out: &mut dyn Write,
) -> Result<(), CliError> {
    let b: Coefficients = load_coefficients(cfg.require_input(InputRole::Coefficients)?)?;
    let domain = b.domain().clone();
    let field: Field = match cfg.input(InputRole::Field) {
        Some(p) => load_field(p)?,
        None => Field::random(domain.clone(), cfg.seed),
    };
    same_domain(&domain, field.domain())?;
    let rhs: Field = match cfg.input(InputRole::Rhs) {
        Some(p) => load_field(p)?,
        None => Field::random(domain.clone(), cfg.seed ^ 0x9e37_79b9_7f4a_7c15).subtract_mean(),
    };
    same_domain(&domain, rhs.domain())?;

    let mut text = String::new();
    let mut failed = Vec::new();
    for id in target.theorems() {
        let report = match id {
            TheoremId::Kernel => {
                if target == VerifyTarget::All && domain.len() > kernel_cap {
                    text.push_str(&format!(
                        "kernel.outcome=skipped\nkernel.note.0={} sites exceed the kernel cap {kernel_cap}\n",
                        domain.len()
                    ));
                    continue;
                }
                to_report(id, verify_kernel_with_cap(&b, DENSE_CAP.max(kernel_cap)))?
            }
            TheoremId::Uniqueness => match verify_uniqueness(&b, &rhs, trials, &cfg.solver, cfg.seed) {
                Ok(r) => r,
                Err(SolveError::Core(e)) => to_report(id, Err(e))?,
                Err(e @ SolveError::NonConvergence(_)) => TheoremReport::failed(id, e.to_string()),
            },
            TheoremId::NecessaryCondition => to_report(id, verify_necessary_condition(&b, &field))?,
            TheoremId::EnergyIdentity => to_report(id, verify_energy_identity(&b, &field))?,
            TheoremId::EnergyBounds => to_report(id, verify_energy_bounds(&b, &field))?,
            TheoremId::Compatibility => to_report(id, verify_compatibility(&b, &field))?,
        };
        if !report.pass() {
            failed.push(id.tag());
        }
        text.push_str(&report.to_key_value());
    }
    text.push_str(&format!("verify.target={target}\n"));
    text.push_str(&format!("verify.pass={}\n", failed.is_empty()));
    text.push_str(&format!("verify.failed={}\n", failed.join(",")));
    if let Some(path) = &cfg.report {
        fs::write(path, &text)?;
    }
    out.write_all(text.as_bytes())?;
    if failed.is_empty() {
        Ok(())
    } else {
        Err(CliError::Verification(failed.join(", ")))
    }
}

fn median_min(mut samples: Vec<u128>) -> (u128, u128) {
    samples.sort_unstable();
    let n = samples.len();
    let median = if n % 2 == 1 {
        samples[n / 2]
    } else {
        (samples[n / 2 - 1] + samples[n / 2]) / 2
    };
    (median, samples[0])
}

fn time_reps(reps: usize, mut op: impl FnMut() -> Result<(), CliError>) -> Result<(u128, u128), CliError> {
    op()?;
    let mut samples = Vec::with_capacity(reps);
    for _ in 0..reps {
        let start = Instant::now();
        op()?;
        samples.push(start.elapsed().as_nanos());
    }
    Ok(median_min(samples))
}

fn bench(cfg: &RunConfig, sizes: &[Vec<usize>], reps: usize, out: &mut dyn Write) -> Result<(), CliError> {
    if reps == 0 {
        return Err(CliError::Usage("bench needs --reps >= 1".into()));
    }
    let mut csv = String::from("size,op,median_ns,min_ns\n");
    for extents in sizes {
        let domain = Domain::periodic(extents.clone())?;
        let b = Coefficients::random_hermitian_pd(domain.clone(), 0.5, 2.0, cfg.seed)?;
        let f = Field::random(domain.clone(), cfg.seed);
        let op = PoissonOperator::new(&b)?;
        let plan = DftPlan::<f64>::new(&domain)?;
        let size = format_extents(extents);

        let (median, min) = time_reps(reps, || {
            std::hint::black_box(op.apply(&f)?);
            Ok(())
        })?;
        csv.push_str(&format!("{size},apply,{median},{min}\n"));
        let (median, min) = time_reps(reps, || {
            std::hint::black_box(plan.forward(&f)?);
            Ok(())
        })?;
        csv.push_str(&format!("{size},dft,{median},{min}\n"));
    }
    match &cfg.output {
        Some(path) => fs::write(path, csv)?,
        None => out.write_all(csv.as_bytes())?,
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn median_of_even_and_odd_counts() {
        assert_eq!(median_min(vec![5, 1, 3]), (3, 1));
        assert_eq!(median_min(vec![4, 2, 8, 6]), (5, 2));
        assert_eq!(median_min(vec![7]), (7, 7));
    }

    #[test]
    fn bench_table_has_header_and_rows() {
        let cfg = RunConfig::new(Command::Bench {
            sizes: vec![vec![8], vec![4, 4]],
            reps: 1,
        });
        let mut out = Vec::new();
        execute(&cfg, &mut out).unwrap();
        let text = String::from_utf8(out).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "size,op,median_ns,min_ns");
        assert_eq!(lines.len(), 5);
        assert!(lines[1].starts_with("8,apply,"));
        assert!(lines[4].starts_with("4x4,dft,"));
    }

    #[test]
    fn generate_without_extents_is_usage_error() {
        let mut cfg = RunConfig::new(Command::Generate {
            kind: GenerateKind::FieldRandom,
            scale: 1.0,
            lower: 0.5,
            upper: 2.0,
        });
        cfg.output = Some("unused".into());
        let err = execute(&cfg, &mut Vec::new()).unwrap_err();
        assert_eq!(err.exit_code(), 2);
    }
}

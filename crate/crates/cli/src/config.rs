//! Normalized description of one invocation.
//!
//! A [`RunConfig`] is what the argument parser produces and what the command
//! runner consumes. Its text form is `key=value` lines and round-trips
//! losslessly, so a run can be saved with `--save-config` and repeated with
//! `gdpe replay`.

use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use gdpe::{Boundary, Normalization, PreconditionerKind, SolverConfig, TheoremId};

use crate::error::CliError;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum GenerateKind {
    CoeffIdentity,
    CoeffRandom,
    RhsRandomCompatible,
    FieldRandom,
}

impl GenerateKind {
    pub const ALL: [GenerateKind; 4] = [
        GenerateKind::CoeffIdentity,
        GenerateKind::CoeffRandom,
        GenerateKind::RhsRandomCompatible,
        GenerateKind::FieldRandom,
    ];

    pub fn tag(self) -> &'static str {
        match self {
            GenerateKind::CoeffIdentity => "coeff-identity",
            GenerateKind::CoeffRandom => "coeff-random",
            GenerateKind::RhsRandomCompatible => "rhs-random-compatible",
            GenerateKind::FieldRandom => "field-random",
        }
    }
}

impl FromStr for GenerateKind {
    type Err = CliError;

    fn from_str(s: &str) -> Result<Self, CliError> {
        Self::ALL
            .into_iter()
            .find(|k| k.tag() == s)
            .ok_or_else(|| CliError::Usage(format!("unknown generate kind '{s}'")))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum VerifyTarget {
    One(TheoremId),
    All,
}

impl VerifyTarget {
    pub fn theorems(self) -> Vec<TheoremId> {
        match self {
            VerifyTarget::One(t) => vec![t],
            VerifyTarget::All => TheoremId::ALL.to_vec(),
        }
    }
}

impl fmt::Display for VerifyTarget {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            VerifyTarget::One(t) => f.write_str(t.tag()),
            VerifyTarget::All => f.write_str("all"),
        }
    }
}

impl FromStr for VerifyTarget {
    type Err = CliError;

    fn from_str(s: &str) -> Result<Self, CliError> {
        if s == "all" {
            return Ok(VerifyTarget::All);
        }
        TheoremId::from_tag(s)
            .map(VerifyTarget::One)
            .ok_or_else(|| CliError::Usage(format!("unknown theorem tag '{s}'")))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Command {
    Generate {
        kind: GenerateKind,
        /// Identity scale.
        scale: f64,
        /// Declared bounds for random coefficients.
        lower: f64,
        upper: f64,
    },
    Apply,
    Solve,
    Verify {
        target: VerifyTarget,
        trials: usize,
        /// Largest site count for which `all` includes the dense kernel check.
        kernel_cap: usize,
    },
    Bench {
        sizes: Vec<Vec<usize>>,
        reps: usize,
    },
}

impl Command {
    pub fn tag(&self) -> &'static str {
        match self {
            Command::Generate { .. } => "generate",
            Command::Apply => "apply",
            Command::Solve => "solve",
            Command::Verify { .. } => "verify",
            Command::Bench { .. } => "bench",
        }
    }
}

/// Role of an input file.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum InputRole {
    Coefficients,
    Field,
    Rhs,
    Initial,
}

impl InputRole {
    pub const ALL: [InputRole; 4] = [
        InputRole::Coefficients,
        InputRole::Field,
        InputRole::Rhs,
        InputRole::Initial,
    ];

    pub fn tag(self) -> &'static str {
        match self {
            InputRole::Coefficients => "coeff",
            InputRole::Field => "field",
            InputRole::Rhs => "rhs",
            InputRole::Initial => "initial",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DomainSpec {
    pub extents: Vec<usize>,
    pub boundary: Boundary,
}

impl DomainSpec {
    pub fn to_domain(&self) -> Result<gdpe::Domain, CliError> {
        Ok(gdpe::Domain::new(self.extents.clone(), self.boundary)?)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub command: Command,
    pub inputs: Vec<(InputRole, PathBuf)>,
    pub output: Option<PathBuf>,
    /// Where solve and verify write their key-value report.
    pub report: Option<PathBuf>,
    pub domain: Option<DomainSpec>,
    pub seed: u64,
    pub solver: SolverConfig,
    pub verbosity: u8,
}

impl RunConfig {
    pub fn new(command: Command) -> Self {
        Self {
            command,
            inputs: Vec::new(),
            output: None,
            report: None,
            domain: None,
            seed: 0,
            solver: SolverConfig::default(),
            verbosity: 0,
        }
    }

    pub fn input(&self, role: InputRole) -> Option<&PathBuf> {
        self.inputs.iter().find(|(r, _)| *r == role).map(|(_, p)| p)
    }

    pub fn require_input(&self, role: InputRole) -> Result<&PathBuf, CliError> {
        self.input(role).ok_or_else(|| {
            CliError::Usage(format!("{} needs --{}", self.command.tag(), role.tag()))
        })
    }

    /// `key=value` lines. Floats use the shortest representation that parses
    /// back to the same bits.
    pub fn to_text(&self) -> String {
        let mut out = Vec::new();
        out.push(format!("command={}", self.command.tag()));
        match &self.command {
            Command::Generate {
                kind,
                scale,
                lower,
                upper,
            } => {
                out.push(format!("generate.kind={}", kind.tag()));
                out.push(format!("generate.scale={scale:?}"));
                out.push(format!("generate.lower={lower:?}"));
                out.push(format!("generate.upper={upper:?}"));
            }
            Command::Verify {
                target,
                trials,
                kernel_cap,
            } => {
                out.push(format!("verify.target={target}"));
                out.push(format!("verify.trials={trials}"));
                out.push(format!("verify.kernel_cap={kernel_cap}"));
            }
            Command::Bench { sizes, reps } => {
                let sizes: Vec<String> = sizes.iter().map(|s| format_extents(s)).collect();
                out.push(format!("bench.sizes={}", sizes.join(",")));
                out.push(format!("bench.reps={reps}"));
            }
            Command::Apply | Command::Solve => {}
        }
        for (role, path) in &self.inputs {
            out.push(format!("input.{}={}", role.tag(), path.display()));
        }
        if let Some(p) = &self.output {
            out.push(format!("output={}", p.display()));
        }
        if let Some(p) = &self.report {
            out.push(format!("report={}", p.display()));
        }
        if let Some(d) = &self.domain {
            out.push(format!("extents={}", format_extents(&d.extents)));
            out.push(format!("boundary={}", boundary_tag(d.boundary)));
        }
        out.push(format!("seed={}", self.seed));
        let s = &self.solver;
        out.push(format!(
            "solver.max_iterations={}",
            s.max_iterations.map_or("auto".to_string(), |n| n.to_string())
        ));
        out.push(format!("solver.rel_tolerance={:?}", s.rel_tolerance));
        out.push(format!("solver.preconditioner={}", s.preconditioner));
        out.push(format!("solver.auto_project_rhs={}", s.auto_project_rhs));
        out.push(format!("solver.normalization={}", s.normalization));
        out.push(format!("verbosity={}", self.verbosity));
        let mut text = out.join("\n");
        text.push('\n');
        text
    }

    pub fn from_text(text: &str) -> Result<Self, CliError> {
        let mut pairs = Vec::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim_end_matches('\r');
            if line.trim().is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| CliError::Usage(format!("config line {}: expected key=value", i + 1)))?;
            pairs.push((k.trim().to_string(), v.to_string()));
        }
        let get = |key: &str| pairs.iter().rev().find(|(k, _)| k == key).map(|(_, v)| v.as_str());
        let need = |key: &str| get(key).ok_or_else(|| CliError::Usage(format!("config is missing '{key}'")));

        let command = match need("command")? {
            "generate" => Command::Generate {
                kind: need("generate.kind")?.parse()?,
                scale: parse_num(need("generate.scale")?, "generate.scale")?,
                lower: parse_num(need("generate.lower")?, "generate.lower")?,
                upper: parse_num(need("generate.upper")?, "generate.upper")?,
            },
            "apply" => Command::Apply,
            "solve" => Command::Solve,
            "verify" => Command::Verify {
                target: need("verify.target")?.parse()?,
                trials: parse_num(need("verify.trials")?, "verify.trials")?,
                kernel_cap: parse_num(need("verify.kernel_cap")?, "verify.kernel_cap")?,
            },
            "bench" => Command::Bench {
                sizes: parse_size_list(need("bench.sizes")?)?,
                reps: parse_num(need("bench.reps")?, "bench.reps")?,
            },
            other => return Err(CliError::Usage(format!("unknown command '{other}'"))),
        };

        let mut cfg = RunConfig::new(command);
        for (k, v) in &pairs {
            if let Some(role) = k.strip_prefix("input.") {
                let role = InputRole::ALL
                    .into_iter()
                    .find(|r| r.tag() == role)
                    .ok_or_else(|| CliError::Usage(format!("unknown input role '{role}'")))?;
                cfg.inputs.push((role, PathBuf::from(v)));
            }
        }
        cfg.output = get("output").map(PathBuf::from);
        cfg.report = get("report").map(PathBuf::from);
        if let Some(ext) = get("extents") {
            cfg.domain = Some(DomainSpec {
                extents: parse_extents(ext)?,
                boundary: parse_boundary(get("boundary").unwrap_or("periodic"))?,
            });
        }
        if let Some(s) = get("seed") {
            cfg.seed = parse_num(s, "seed")?;
        }
        if let Some(v) = get("solver.max_iterations") {
            cfg.solver.max_iterations = if v == "auto" {
                None
            } else {
                Some(parse_num(v, "solver.max_iterations")?)
            };
        }
        if let Some(v) = get("solver.rel_tolerance") {
            cfg.solver.rel_tolerance = parse_num(v, "solver.rel_tolerance")?;
        }
        if let Some(v) = get("solver.preconditioner") {
            cfg.solver.preconditioner = parse_preconditioner(v)?;
        }
        if let Some(v) = get("solver.auto_project_rhs") {
            cfg.solver.auto_project_rhs = parse_num(v, "solver.auto_project_rhs")?;
        }
        if let Some(v) = get("solver.normalization") {
            cfg.solver.normalization = parse_normalization(v)?;
        }
        if let Some(v) = get("verbosity") {
            cfg.verbosity = parse_num(v, "verbosity")?;
        }
        Ok(cfg)
    }
}

fn parse_num<T: FromStr>(s: &str, what: &str) -> Result<T, CliError> {
    s.trim()
        .parse()
        .map_err(|_| CliError::Usage(format!("invalid value '{s}' for {what}")))
}

/// `N1xN2x...xNd`, each extent at least 1.
pub fn parse_extents(s: &str) -> Result<Vec<usize>, CliError> {
    let bad = || CliError::Usage(format!("invalid extents '{s}': expected N1xN2x...xNd"));
    let extents = s
        .trim()
        .split('x')
        .map(|p| p.parse::<usize>().map_err(|_| bad()))
        .collect::<Result<Vec<_>, _>>()?;
    if extents.is_empty() || extents.contains(&0) {
        return Err(bad());
    }
    Ok(extents)
}

pub fn format_extents(extents: &[usize]) -> String {
    extents
        .iter()
        .map(|n| n.to_string())
        .collect::<Vec<_>>()
        .join("x")
}

pub fn parse_size_list(s: &str) -> Result<Vec<Vec<usize>>, CliError> {
    s.split(',').map(parse_extents).collect()
}

pub fn parse_boundary(s: &str) -> Result<Boundary, CliError> {
    match s {
        "periodic" => Ok(Boundary::Periodic),
        "zero" => Ok(Boundary::FixedZero),
        _ => Err(CliError::Usage(format!("invalid boundary '{s}': expected periodic or zero"))),
    }
}

pub fn boundary_tag(b: Boundary) -> &'static str {
    match b {
        Boundary::Periodic => "periodic",
        Boundary::FixedZero => "zero",
    }
}

pub fn parse_preconditioner(s: &str) -> Result<PreconditionerKind, CliError> {
    match s {
        "none" => Ok(PreconditionerKind::None),
        "fft-mean" => Ok(PreconditionerKind::FftMeanCoeff),
        _ => Err(CliError::Usage(format!("invalid preconditioner '{s}': expected none or fft-mean"))),
    }
}

pub fn parse_normalization(s: &str) -> Result<Normalization, CliError> {
    match s {
        "mean-zero" => Ok(Normalization::MeanZero),
        "anchor-site-zero" => Ok(Normalization::AnchorSiteZero),
        _ => Err(CliError::Usage(format!(
            "invalid normalization '{s}': expected mean-zero or anchor-site-zero"
        ))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn extents_syntax() {
        assert_eq!(parse_extents("4x4x4").unwrap(), vec![4, 4, 4]);
        assert_eq!(parse_extents("64").unwrap(), vec![64]);
        assert!(parse_extents("4x0").is_err());
        assert!(parse_extents("4xx4").is_err());
        assert!(parse_extents("").is_err());
        assert_eq!(format_extents(&[8, 2]), "8x2");
    }

    #[test]
    fn solve_config_round_trips() {
        let mut cfg = RunConfig::new(Command::Solve);
        cfg.inputs.push((InputRole::Coefficients, "b.gdpec".into()));
        cfg.inputs.push((InputRole::Rhs, "dir with space/g=1.gdpef".into()));
        cfg.output = Some("f.gdpef".into());
        cfg.solver.rel_tolerance = 0.1 + 0.2;
        cfg.solver.max_iterations = Some(17);
        cfg.solver.preconditioner = PreconditionerKind::FftMeanCoeff;
        cfg.solver.auto_project_rhs = false;
        cfg.solver.normalization = Normalization::AnchorSiteZero;
        cfg.seed = u64::MAX;
        let text = cfg.to_text();
        assert_eq!(RunConfig::from_text(&text).unwrap(), cfg);
        assert!(text.contains("solver.rel_tolerance=0.30000000000000004\n"));
    }

    #[test]
    fn unknown_values_are_usage_errors() {
        assert!(RunConfig::from_text("command=launch\n").is_err());
        assert!(RunConfig::from_text("command=verify\nverify.target=nope\nverify.trials=1\nverify.kernel_cap=1\n").is_err());
        assert!(RunConfig::from_text("no equals sign\n").is_err());
    }
}

//! The `piis` command line.

pub mod report;

use std::io::Write;
use std::path::PathBuf;
use std::sync::Arc;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};

use piis_core::cutoff::{self, report_on};
use piis_core::iis::{build_model, DEFAULT_STATE_CAP};
use piis_core::logic::IndexedFormula;
use piis_core::pispl::{self, ast::BoundaryMode, CompileOptions, Model, Program, Property};
use piis_core::simrel::{check_jss, lift_relation, projection_relation, JssReport};
use piis_core::template::{instantiate, TemplateAgent, UnmatchedPolicy};
use piis_core::Error;

use report::*;

#[derive(Parser, Debug)]
#[command(name = "piis", version, about = "Cutoff model checking of parameterised interleaved interpreted systems")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    #[command(flatten)]
    pub global: GlobalOpts,
}

#[derive(Args, Debug, Clone)]
pub struct GlobalOpts {
    /// Output format.
    #[arg(long, value_enum, default_value_t = Format::Text, global = true)]
    pub format: Format,
    /// Largest number of reachable states built per instance.
    #[arg(long, env = "PIIS_STATE_CAP", default_value_t = DEFAULT_STATE_CAP, global = true)]
    pub state_cap: usize,
    /// Overrides the template's handling of updates leaving a variable domain.
    #[arg(long, value_enum, global = true)]
    pub boundary: Option<Boundary>,
    /// Overrides what an enabled action without an evolution rule does.
    #[arg(long, value_enum, global = true)]
    pub unmatched: Option<Unmatched>,
    /// List every compiler warning.
    #[arg(long, global = true)]
    pub warnings: bool,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
pub enum Format {
    Text,
    Json,
}

#[derive(ValueEnum, Clone, Copy, Debug)]
pub enum Boundary {
    Disable,
    Clamp,
}

#[derive(ValueEnum, Clone, Copy, Debug)]
pub enum Unmatched {
    Loop,
    Disable,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Decide formulas on the cutoff instance.
    Check {
        file: PathBuf,
        /// Check only this formula.
        #[arg(long, conflicts_with = "all")]
        formula: Option<String>,
        /// Check every formula of the file (the default).
        #[arg(long)]
        all: bool,
    },
    /// Check the reduced formula on every instance from the cutoff to --max-n.
    Sweep {
        file: PathBuf,
        #[arg(long)]
        formula: String,
        #[arg(long)]
        max_n: usize,
    },
    /// Reachable state and transition counts of T(n).
    Stats {
        file: PathBuf,
        #[arg(short = 'n')]
        n: Option<usize>,
    },
    /// Check both canonical simulations between T(k) and T(n).
    Simcheck {
        file: PathBuf,
        #[arg(long)]
        k: usize,
        #[arg(long)]
        n: usize,
    },
    /// Compare the reduced formula with the full expansion on T(n).
    Expand {
        file: PathBuf,
        #[arg(long)]
        formula: String,
        #[arg(short = 'n')]
        n: usize,
    },
}

impl Command {
    pub fn file(&self) -> &PathBuf {
        match self {
            Command::Check { file, .. }
            | Command::Sweep { file, .. }
            | Command::Stats { file, .. }
            | Command::Simcheck { file, .. }
            | Command::Expand { file, .. } => file,
        }
    }
}

/// A failure that maps to exit code 2.
#[derive(Debug)]
pub struct UsageError(pub String);

impl From<Error> for UsageError {
    fn from(e: Error) -> Self {
        UsageError(e.to_string())
    }
}

fn ms_since(t: Instant) -> f64 {
    (t.elapsed().as_secs_f64() * 1e6).round() / 1e3
}

fn load(path: &PathBuf, g: &GlobalOpts, err: &mut dyn Write) -> Result<Program, UsageError> {
    let src = std::fs::read_to_string(path).map_err(|e| UsageError(format!("cannot read {}: {e}", path.display())))?;
    let opts = CompileOptions {
        boundary: g.boundary.map(|b| match b {
            Boundary::Disable => BoundaryMode::Disable,
            Boundary::Clamp => BoundaryMode::Clamp,
        }),
        unmatched: g.unmatched.map(|u| match u {
            Unmatched::Loop => UnmatchedPolicy::SelfLoop,
            Unmatched::Disable => UnmatchedPolicy::Disable,
        }),
    };
    let program = pispl::load(&src, &opts).map_err(|e| UsageError(format!("{}:\n{e}", path.display())))?;
    if !program.warnings.is_empty() {
        if g.warnings {
            for w in &program.warnings {
                let _ = writeln!(err, "warning: {}: {w}", path.display());
            }
        } else {
            let _ = writeln!(
                err,
                "{}: {} warning(s); pass --warnings to list them",
                path.display(),
                program.warnings.len()
            );
        }
    }
    Ok(program)
}

fn template(p: &Program) -> Result<&Arc<TemplateAgent>, UsageError> {
    p.template()
        .ok_or_else(|| UsageError("this command needs a template; the file declares fixed agents".into()))
}

fn indexed<'p>(p: &'p Program, name: &str) -> Result<&'p IndexedFormula, UsageError> {
    match &p.formula(name).ok_or_else(|| UsageError(format!("no formula named `{name}`")))?.property {
        Property::Indexed(f) => Ok(f),
        Property::Ground(_) => Err(UsageError(format!("`{name}` is not an indexed formula"))),
    }
}

fn direction(relation: &str, left: usize, right: usize, r: JssReport) -> DirectionReport {
    DirectionReport {
        relation: relation.into(),
        left_agents: left,
        right_agents: right,
        pairs: r.pairs,
        passed: r.passed(),
        violation_count: r.violations.len(),
        violations: r.violations.into_iter().take(MAX_LISTED_VIOLATIONS).collect(),
    }
}

/// Runs one command; `Ok` carries the outcome and its exit code.
pub fn run(cli: &Cli, err: &mut dyn Write) -> Result<(Outcome, i32, f64), UsageError> {
    let g = &cli.global;
    let cap = g.state_cap;
    let start = Instant::now();
    let p = load(cli.command.file(), g, err)?;
    let load_ms = ms_since(start);
    let outcome = match &cli.command {
        Command::Check { formula, all, .. } => {
            let selected: Vec<_> = match formula {
                Some(name) if !*all => {
                    vec![p.formula(name).ok_or_else(|| UsageError(format!("no formula named `{name}`")))?]
                }
                _ => p.formulae.iter().collect(),
            };
            if selected.is_empty() {
                return Err(UsageError("the file declares no formulae".into()));
            }
            let mut reports = Vec::new();
            match &p.model {
                Model::Template(t) => {
                    for f in selected {
                        reports.push(match &f.property {
                            Property::Indexed(x) => cutoff::verify(t, &f.name, x, cap)?,
                            Property::Ground(x) => cutoff::verify_ground(t, &f.name, x, cap)?,
                        });
                    }
                }
                Model::Agents(agents) => {
                    let t0 = Instant::now();
                    let m = build_model(agents.clone(), cap)?;
                    let build_ms = ms_since(t0);
                    for f in selected {
                        let Property::Ground(x) = &f.property else {
                            return Err(UsageError(format!("`{}` is indexed but the file has no template", f.name)));
                        };
                        reports.push(report_on(&m, &f.name, x.to_string(), None, x, build_ms)?);
                    }
                }
            }
            let code = if reports.iter().all(|r| r.verdict) { 0 } else { 1 };
            (Outcome::Check { reports }, code)
        }
        Command::Sweep { formula, max_n, .. } => {
            let f = indexed(&p, formula)?;
            let table = cutoff::sweep(template(&p)?, formula, f, *max_n, cap)?;
            let code = if table.constant() { 0 } else { 1 };
            (Outcome::Sweep { table }, code)
        }
        Command::Stats { n, .. } => {
            let t0 = Instant::now();
            let (m, n) = match (&p.model, n) {
                (Model::Template(t), Some(n)) => (instantiate(t, *n, cap)?, Some(*n)),
                (Model::Template(_), None) => return Err(UsageError("stats on a template needs -n".into())),
                (Model::Agents(a), _) => (build_model(a.clone(), cap)?, None),
            };
            let stats = StatsReport {
                n,
                agents: m.agent_count(),
                states: m.state_count(),
                transitions: m.transition_count(),
                build_ms: ms_since(t0),
            };
            (Outcome::Stats(stats), 0)
        }
        Command::Simcheck { k, n, .. } => {
            let t = template(&p)?;
            if *k == 0 || k > n {
                return Err(UsageError(format!("need 1 <= k <= n, got k = {k}, n = {n}")));
            }
            let small = instantiate(t, *k, cap)?;
            let big = instantiate(t, *n, cap)?;
            let down = check_jss(&projection_relation(&big, &small)?);
            let up = check_jss(&lift_relation(&small, &big, t)?);
            let report = SimcheckReport {
                k: *k,
                n: *n,
                small_states: small.state_count(),
                big_states: big.state_count(),
                directions: vec![direction("projection", *n, *k, down), direction("lift", *k, *n, up)],
            };
            let code = if report.directions.iter().all(|d| d.passed) { 0 } else { 1 };
            (Outcome::Simcheck(report), code)
        }
        Command::Expand { formula, n, .. } => {
            let f = indexed(&p, formula)?;
            let report = cutoff::expand_check(template(&p)?, formula, f, *n, cap)?;
            let code = if report.agree() { 0 } else { 1 };
            (Outcome::Expand { report }, code)
        }
    };
    Ok((outcome.0, outcome.1, load_ms))
}

/// Parses `args` (without the program name), runs, prints, and returns
/// the exit code.
pub fn execute<S: AsRef<str>>(args: &[S], out: &mut dyn Write, err: &mut dyn Write) -> i32 {
    let argv = std::iter::once("piis").chain(args.iter().map(|s| s.as_ref()));
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = if e.use_stderr() {
                write!(err, "{}", e.render())
            } else {
                write!(out, "{}", e.render())
            };
            return code;
        }
    };
    let start = Instant::now();
    match run(&cli, err) {
        Ok((outcome, code, load_ms)) => {
            let report = RunReport {
                tool: "piis".into(),
                version: env!("CARGO_PKG_VERSION").into(),
                command: args.iter().map(|s| s.as_ref().to_string()).collect(),
                outcome,
                timings: Timings {
                    load_ms,
                    total_ms: ms_since(start),
                },
                exit_code: code,
            };
            let text = match cli.global.format {
                Format::Json => serde_json::to_string_pretty(&report).expect("reports serialize") + "\n",
                Format::Text => render_text(&report),
            };
            let _ = out.write_all(text.as_bytes());
            code
        }
        Err(UsageError(msg)) => {
            let _ = writeln!(err, "error: {msg}");
            2
        }
    }
}

//! `geomphase`: evaluate open-system geometric phases from the command line.
//!
//! Subcommands: `phase` (one scenario point), `sweep` (deterministic CSV
//! grid), `validate` (the built-in cross-check suite), `ramsey`
//! (interferometry protocols).  Exit codes: 0 success, 1 config error,
//! 2 numerical failure, 3 validation failure.

mod config;
mod sweep;

use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use thiserror::Error;

use geomphase::ramsey::{ramsey_pf_fock, ramsey_pg, ramsey_pg_multichannel, RamseyOutcome};
use geomphase::suite::{run_validation, Level};
use geomphase::Method;

use config::{load, BuiltPoint, ModelKind, PointParams};
use sweep::{evaluate_point, expand_grid, parse_methods, run_sweep, CSV_HEADER};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config: {0}")]
    Config(String),
    #[error("numerical: {0}")]
    Numerical(String),
    #[error("validation suite reported failures")]
    Validation,
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 1,
            CliError::Numerical(_) => 2,
            CliError::Validation => 3,
        }
    }
}

impl From<geomphase::PhaseError> for CliError {
    fn from(e: geomphase::PhaseError) -> Self {
        CliError::Numerical(e.to_string())
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum MethodArg {
    Joint,
    Jump,
}

impl From<MethodArg> for Method {
    fn from(m: MethodArg) -> Method {
        match m {
            MethodArg::Joint => Method::JointState,
            MethodArg::Jump => Method::QuantumJump,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum LevelArg {
    Fast,
    Full,
}

#[derive(Parser)]
#[command(
    name = "geomphase",
    version,
    about = "Geometric phases of decaying two-level systems"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Evaluate one configured point and print its phase report
    Phase {
        /// Scenario file (TOML)
        #[arg(long)]
        config: PathBuf,
        /// Also write the point as a CSV table
        #[arg(long)]
        out: Option<PathBuf>,
        /// Restrict to one dynamical-reference convention
        #[arg(long)]
        method: Option<MethodArg>,
    },
    /// Expand the configured grid and write one CSV row per point and method
    Sweep {
        /// Scenario file (TOML)
        #[arg(long)]
        config: PathBuf,
        /// Output CSV path (default: stdout)
        #[arg(long)]
        out: Option<PathBuf>,
        /// Restrict to one dynamical-reference convention
        #[arg(long)]
        method: Option<MethodArg>,
        /// Worker threads (default: one per core)
        #[arg(long)]
        threads: Option<usize>,
    },
    /// Run the built-in validation suite
    Validate {
        /// fast: seconds; full: adds the dense reservoir comparisons
        #[arg(long, default_value = "fast")]
        level: LevelArg,
        /// Also write the check lines to a file
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Simulate the configured interferometry protocol
    Ramsey {
        /// Scenario file (TOML)
        #[arg(long)]
        config: PathBuf,
        /// Also write the outcome as a CSV table
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("geomphase: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

fn run(command: Command) -> Result<(), CliError> {
    match command {
        Command::Phase {
            config,
            out,
            method,
        } => cmd_phase(&config, out.as_deref(), method),
        Command::Sweep {
            config,
            out,
            method,
            threads,
        } => cmd_sweep(&config, out.as_deref(), method, threads),
        Command::Validate { level, out } => cmd_validate(level, out.as_deref()),
        Command::Ramsey { config, out } => cmd_ramsey(&config, out.as_deref()),
    }
}

fn write_text(path: &Path, text: &str) -> Result<(), CliError> {
    std::fs::write(path, text)
        .map_err(|e| CliError::Config(format!("cannot write {}: {e}", path.display())))
}

fn methods_for(flag: Option<MethodArg>) -> Vec<Method> {
    match flag {
        Some(m) => vec![m.into()],
        None => vec![Method::JointState, Method::QuantumJump],
    }
}

fn describe_point(pp: &PointParams) -> String {
    match pp.kind {
        ModelKind::Dispersive => format!(
            "dispersive qubit: b = {}, theta = {}, gamma = {}",
            pp.b, pp.theta, pp.gamma
        ),
        ModelKind::Jc => format!(
            "damped dimer: g = {}, delta = {}, gamma = {}, kappa = {}, n = {}",
            pp.g, pp.delta, pp.gamma, pp.kappa, pp.n
        ),
    }
}

fn cmd_phase(
    config: &Path,
    out: Option<&Path>,
    method: Option<MethodArg>,
) -> Result<(), CliError> {
    let file = load(config)?;
    let point = PointParams::from_model(&file.model)?;
    let methods = methods_for(method);
    let rows = evaluate_point(&point, &methods, file.numerics.dt);

    println!("{}", describe_point(&point));
    for row in &rows {
        if !row.error.is_empty() {
            return Err(CliError::Numerical(row.error.clone()));
        }
        println!(
            "  {:<12} t = {:.6}: phi = {:.12}, phi_d = {:.12}, beta = {:.12} (unwrapped {:.12}), survival = {:.12}",
            row.method,
            row.t.unwrap_or(f64::NAN),
            row.phi.unwrap_or(f64::NAN),
            row.phi_d.unwrap_or(f64::NAN),
            row.beta_principal.unwrap_or(f64::NAN),
            row.beta_unwrapped.unwrap_or(f64::NAN),
            row.survival_prob.unwrap_or(f64::NAN),
        );
        if !row.warning.is_empty() {
            println!("  note: {}", row.warning);
        }
    }
    if let Some(path) = out {
        let mut text = String::from(CSV_HEADER);
        for row in &rows {
            text.push('\n');
            text.push_str(&row.to_csv_line());
        }
        text.push('\n');
        write_text(path, &text)?;
    }
    Ok(())
}

fn cmd_sweep(
    config: &Path,
    out: Option<&Path>,
    method: Option<MethodArg>,
    threads: Option<usize>,
) -> Result<(), CliError> {
    let file = load(config)?;
    let base = PointParams::from_model(&file.model)?;
    let default_sweep = config::SweepSection {
        methods: vec!["joint".into(), "jump".into()],
        axis: Vec::new(),
    };
    let section = file.sweep.as_ref().unwrap_or(&default_sweep);
    let methods = match method {
        Some(m) => vec![m.into()],
        None => parse_methods(&section.methods)?,
    };
    let points = expand_grid(&base, section, file.model.degrees)?;

    let body = match threads {
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .map_err(|e| CliError::Config(format!("cannot build thread pool: {e}")))?;
            pool.install(|| run_sweep(&points, &methods, file.numerics.dt))
        }
        None => run_sweep(&points, &methods, file.numerics.dt),
    };

    let mut text = String::with_capacity(body.len() * 128 + CSV_HEADER.len() + 2);
    text.push_str(CSV_HEADER);
    for line in &body {
        text.push('\n');
        text.push_str(line);
    }
    text.push('\n');
    match out {
        Some(path) => write_text(path, &text)?,
        None => {
            std::io::stdout()
                .write_all(text.as_bytes())
                .map_err(|e| CliError::Config(format!("cannot write stdout: {e}")))?;
        }
    }
    Ok(())
}

fn cmd_validate(level: LevelArg, out: Option<&Path>) -> Result<(), CliError> {
    let level = match level {
        LevelArg::Fast => Level::Fast,
        LevelArg::Full => Level::Full,
    };
    let report = run_validation(level);
    let mut lines = Vec::with_capacity(report.checks.len() + 1);
    for c in &report.checks {
        lines.push(c.line());
    }
    lines.push(format!(
        "{} of {} checks passed in {:.2?}",
        report.checks.iter().filter(|c| c.passed).count(),
        report.checks.len(),
        report.elapsed
    ));
    for l in &lines {
        println!("{l}");
    }
    if let Some(path) = out {
        write_text(path, &(lines.join("\n") + "\n"))?;
    }
    if report.all_passed() {
        Ok(())
    } else {
        Err(CliError::Validation)
    }
}

fn ramsey_csv(out: &RamseyOutcome) -> String {
    let mut text = String::from(
        "protocol,duration,visibility,quadrature,leak_amplitude,beta_reference,\
p_formula,p_simulated,cos_beta_recovered,budget_defect",
    );
    text.push('\n');
    text.push_str(&format!(
        "{},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{},{:.16e}",
        out.protocol,
        out.duration,
        out.visibility,
        out.quadrature,
        out.leak_amplitude,
        out.beta_reference,
        out.p_formula,
        out.p_simulated,
        out.cos_beta_recovered
            .map(|c| format!("{c:.16e}"))
            .unwrap_or_default(),
        out.budget_defect,
    ));
    text.push('\n');
    text
}

fn cmd_ramsey(config: &Path, out: Option<&Path>) -> Result<(), CliError> {
    let file = load(config)?;
    let point = PointParams::from_model(&file.model)?;
    let built = point.build()?;
    let BuiltPoint::Jc { p, t } = built else {
        return Err(CliError::Config(
            "interferometry protocols need model.kind = \"jc\"".into(),
        ));
    };

    let protocol = file
        .ramsey
        .as_ref()
        .map(|r| r.protocol.as_str())
        .unwrap_or("auto");
    let outcome = match protocol {
        "auto" => {
            if p.n == 0 && p.kappa == 0.0 {
                ramsey_pg(&p, t)?
            } else {
                ramsey_pf_fock(&p, t)?
            }
        }
        "ground" => ramsey_pg(&p, t)?,
        "multichannel" => {
            let recapture = file
                .ramsey
                .as_ref()
                .and_then(|r| r.recapture)
                .ok_or_else(|| {
                    CliError::Config(
                        "ramsey.recapture is required for the multichannel protocol".into(),
                    )
                })?;
            ramsey_pg_multichannel(&p, t, recapture)?
        }
        "fock" => ramsey_pf_fock(&p, t)?,
        other => {
            return Err(CliError::Config(format!(
                "unknown ramsey.protocol \"{other}\" (auto|ground|multichannel|fock)"
            )))
        }
    };

    println!("{}", describe_point(&point));
    println!(
        "  protocol {} over t = {:.6}: fringe p = {:.12} (formula {:.12})",
        outcome.protocol, outcome.duration, outcome.p_simulated, outcome.p_formula
    );
    println!(
        "  visibility u = {:.12}, quadrature v = {:.12}, leak xi = {:.12}",
        outcome.visibility, outcome.quadrature, outcome.leak_amplitude
    );
    match outcome.cos_beta_recovered {
        Some(c) => println!(
            "  cos beta recovered = {:.12} (reference cos beta = {:.12})",
            c,
            outcome.beta_reference.cos()
        ),
        None => println!(
            "  cos beta not recovered (no inversion for this protocol, or visibility under floor); reference cos beta = {:.12}",
            outcome.beta_reference.cos()
        ),
    }
    for (name, weight) in &outcome.sectors {
        println!("  sector {name}: {weight:.12}");
    }
    println!("  budget defect = {:.3e}", outcome.budget_defect);
    if let Some(path) = out {
        write_text(path, &ramsey_csv(&outcome))?;
    }
    Ok(())
}

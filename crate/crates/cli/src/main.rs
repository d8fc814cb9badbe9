//! `ptq` — command-line front end: load a problem description, run the
//! classical oracle or the simulated circuits, verify invariants, and emit
//! reports.
//!
//! Exit codes: 0 success, 1 verification failure, 2 configuration error.
//! Errors are written to stderr as one-line JSON records.

mod checks;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use ptq_core::builders::build_term_circuit;
use ptq_core::complexity::{scaling_report, CostModel};
use ptq_core::estimator::{estimate_all_terms, EstimateMode};
use ptq_core::oracle::PTCorrections;
use ptq_core::synthesis::{UeVariant, UvBackend};
use ptq_core::system::{load_system, PerturbedSystem};
use ptq_core::terms::TermKind;
use ptq_core::{PtqError, Result};

#[derive(Parser)]
#[command(
    name = "ptq",
    version,
    about = "Perturbation-theory energy corrections from simulated quantum circuits"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Print the classical corrections and auxiliary terms for a problem
    Oracle(OracleArgs),
    /// Simulate the term circuits and emit the estimation report
    Estimate(EstimateArgs),
    /// Run the invariant suite against a problem (exit 1 on any failure)
    Verify(VerifyArgs),
    /// Emit the gate-count scaling report
    Complexity(ComplexityArgs),
    /// Serialize one term circuit as JSON
    Circuit(CircuitArgs),
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Csv,
    /// Whitespace-separated columns for log-log plotting (complexity only)
    Plot,
}

#[derive(Args)]
struct OracleArgs {
    /// Problem description (JSON file)
    #[arg(long)]
    problem: PathBuf,
    /// Output file (stdout when omitted)
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Json)]
    format: Format,
}

#[derive(Args)]
struct EstimateArgs {
    /// Problem description (JSON file)
    #[arg(long)]
    problem: PathBuf,
    /// linearized | unitary-amplitude | sampling
    #[arg(long, default_value = "linearized")]
    mode: EstimateMode,
    /// standard | improved
    #[arg(long, default_value = "improved")]
    ue_variant: UeVariant,
    /// exact | trotter:<steps> | linearized
    #[arg(long, default_value = "exact")]
    uv_backend: UvBackend,
    /// Measurement shots (required by, and only valid in, sampling mode)
    #[arg(long)]
    shots: Option<u64>,
    /// Sampling seed (sampling mode only; defaults to 0)
    #[arg(long)]
    seed: Option<u64>,
    /// Output file (stdout when omitted)
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Json)]
    format: Format,
}

#[derive(Args)]
struct VerifyArgs {
    /// Problem description (JSON file)
    #[arg(long)]
    problem: PathBuf,
    /// Seed for the determinism checks
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct ComplexityArgs {
    /// Inclusive qubit-count range, e.g. 2..10, or a single value
    #[arg(long, default_value = "2..10")]
    n: String,
    /// Output file (stdout when omitted)
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Json)]
    format: Format,
}

#[derive(Args)]
struct CircuitArgs {
    /// Problem description (JSON file)
    #[arg(long)]
    problem: PathBuf,
    /// eps3 | eps4 | m_a | m_b | m_c | e2 | state1
    #[arg(long)]
    term: TermKind,
    /// standard | improved
    #[arg(long, default_value = "improved")]
    ue_variant: UeVariant,
    /// exact | trotter:<steps> | linearized
    #[arg(long, default_value = "exact")]
    uv_backend: UvBackend,
    /// Output file (stdout when omitted)
    #[arg(long)]
    out: Option<PathBuf>,
}

fn main() -> ExitCode {
    if let Err(err) = configure_threads() {
        emit_error(&err);
        return ExitCode::from(2);
    }
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Outcome::Config(err)) => {
            emit_error(&err);
            ExitCode::from(2)
        }
        Err(Outcome::VerificationFailed { failed }) => {
            eprintln!(
                "{}",
                serde_json::json!({
                    "kind": "verification-failure",
                    "error": format!("{failed} invariant check(s) failed"),
                })
            );
            ExitCode::from(1)
        }
    }
}

enum Outcome {
    Config(PtqError),
    VerificationFailed { failed: usize },
}

impl From<PtqError> for Outcome {
    fn from(err: PtqError) -> Self {
        Outcome::Config(err)
    }
}

fn run(command: Command) -> std::result::Result<(), Outcome> {
    match command {
        Command::Oracle(args) => {
            let sys = load_problem(&args.problem)?;
            let corrections = PTCorrections::compute(&sys)?;
            let text = match args.format {
                Format::Json => serde_json::to_string_pretty(&corrections)
                    .map_err(PtqError::from)?,
                Format::Csv => corrections_csv(&corrections),
                Format::Plot => return Err(bad_format("oracle")),
            };
            write_output(args.out.as_deref(), &text)?;
        }
        Command::Estimate(args) => {
            match (args.mode, args.shots) {
                (EstimateMode::Sampling, None) => {
                    return Err(PtqError::InvalidInput(
                        "sampling mode requires --shots".into(),
                    )
                    .into())
                }
                (EstimateMode::Sampling, Some(_)) => {}
                (_, Some(_)) => {
                    return Err(PtqError::InvalidInput(
                        "--shots is only meaningful in sampling mode".into(),
                    )
                    .into())
                }
                (_, None) => {}
            }
            let sys = load_problem(&args.problem)?;
            let report = estimate_all_terms(
                &sys,
                args.mode,
                args.ue_variant,
                args.uv_backend,
                args.shots,
                args.seed.or(if args.shots.is_some() { Some(0) } else { None }),
            )?;
            let text = match args.format {
                Format::Json => report.to_json()?,
                Format::Csv => report.to_csv(),
                Format::Plot => return Err(bad_format("estimate")),
            };
            write_output(args.out.as_deref(), &text)?;
        }
        Command::Verify(args) => {
            let sys = load_problem(&args.problem)?;
            let failed = checks::run_all(&sys, args.seed);
            if failed > 0 {
                return Err(Outcome::VerificationFailed { failed });
            }
        }
        Command::Complexity(args) => {
            let ns = parse_n_range(&args.n)?;
            let report = scaling_report(&ns, &CostModel::default())?;
            let text = match args.format {
                Format::Json => report.to_json()?,
                Format::Csv => report.to_csv(),
                Format::Plot => report.to_plot_data(),
            };
            write_output(args.out.as_deref(), &text)?;
        }
        Command::Circuit(args) => {
            let sys = load_problem(&args.problem)?;
            let tc = build_term_circuit(&sys, args.term, args.ue_variant, args.uv_backend)?;
            write_output(args.out.as_deref(), &tc.to_json()?)?;
        }
    }
    Ok(())
}

fn load_problem(path: &Path) -> Result<PerturbedSystem> {
    let text = fs::read_to_string(path).map_err(|e| {
        PtqError::InvalidInput(format!("cannot read problem file {}: {e}", path.display()))
    })?;
    load_system(&text)
}

fn write_output(out: Option<&Path>, text: &str) -> Result<()> {
    let mut text = text.to_string();
    if !text.ends_with('\n') {
        text.push('\n');
    }
    match out {
        Some(path) => fs::write(path, text)?,
        None => print!("{text}"),
    }
    Ok(())
}

fn corrections_csv(c: &PTCorrections) -> String {
    let mut out = String::from("quantity,value\n");
    for (name, value) in [
        ("e1", c.e1),
        ("e2", c.e2),
        ("e3", c.e3),
        ("e4", c.e4),
        ("eps3", c.eps3),
        ("eps4", c.eps4),
        ("m_a", c.m_a),
        ("m_b", c.m_b),
        ("m_c", c.m_c),
    ] {
        out.push_str(&format!("{name},{value:.11e}\n"));
    }
    out
}

fn bad_format(command: &str) -> Outcome {
    Outcome::Config(PtqError::InvalidInput(format!(
        "the plot format is only available for the complexity report, not {command}"
    )))
}

/// Parses an inclusive `START..END` range (or a single integer) of system
/// qubit counts.
fn parse_n_range(text: &str) -> Result<Vec<u32>> {
    let parse_one = |s: &str| -> Result<u32> {
        s.trim()
            .parse::<u32>()
            .map_err(|_| PtqError::InvalidInput(format!("invalid qubit count {s:?} in --n")))
    };
    let (lo, hi) = match text.split_once("..") {
        Some((a, b)) => (parse_one(a)?, parse_one(b)?),
        None => {
            let n = parse_one(text)?;
            (n, n)
        }
    };
    if lo == 0 || hi < lo || hi > 40 {
        return Err(PtqError::InvalidInput(format!(
            "--n must satisfy 1 <= START <= END <= 40, got {text:?}"
        )));
    }
    Ok((lo..=hi).collect())
}

/// Applies the PTQ_THREADS cap (0 or unset = automatic).
fn configure_threads() -> Result<()> {
    let Ok(raw) = std::env::var("PTQ_THREADS") else {
        return Ok(());
    };
    let n: usize = raw.parse().map_err(|_| {
        PtqError::InvalidInput(format!("PTQ_THREADS must be a nonnegative integer, got {raw:?}"))
    })?;
    if n > 0 {
        // A second global-pool initialization cannot happen in this binary;
        // tolerate it anyway rather than aborting a working run.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    Ok(())
}

fn emit_error(err: &PtqError) {
    eprintln!(
        "{}",
        serde_json::json!({ "kind": error_kind(err), "error": err.to_string() })
    );
}

fn error_kind(err: &PtqError) -> &'static str {
    match err {
        PtqError::Parse(_) => "parse",
        PtqError::InvalidInput(_) => "invalid-input",
        PtqError::Degenerate { .. } => "degenerate-levels",
        PtqError::NotHermitian { .. } => "not-hermitian",
        PtqError::PauliMismatch { .. } => "pauli-mismatch",
        PtqError::InvalidPauliString { .. } => "invalid-pauli-string",
        PtqError::MissingPauliTerms => "missing-pauli-terms",
        PtqError::BudgetExceeded { .. } => "budget-exceeded",
        PtqError::AmbiguousMatching { .. } => "ambiguous-matching",
        PtqError::DimensionMismatch { .. } => "dimension-mismatch",
        PtqError::InvalidCircuit { .. } => "invalid-circuit",
        PtqError::ConstraintResidual { .. } => "constraint-residual",
        PtqError::UnnormalizedState { .. } => "unnormalized-state",
        PtqError::MissingEstimate { .. } => "missing-estimate",
        PtqError::Internal(_) => "internal",
        PtqError::Io(_) => "io",
        PtqError::Json(_) => "json",
    }
}

//! `itrm`: run, trace, scan, enumerate and verify register machine programs.

use std::fmt::Display;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use num_bigint::BigUint;

use itrm_core::analysis::{halting_scan, ScanOptions};
use itrm_core::engine::{run_with, verify_divergence, Budget, DivergenceCertificate, Outcome, RunOptions};
use itrm_core::isa::{decode_program, parse_program, render_program, Program};
use itrm_core::oracle::OracleReal;

const EXIT_HALTED: u8 = 0;
const EXIT_DIVERGES: u8 = 10;
const EXIT_BUDGET: u8 = 11;
const EXIT_USAGE: u8 = 2;
/// Step records kept in a trace file.
const TRACE_STEPS: usize = 1024;

#[derive(Parser)]
#[command(name = "itrm", version, about = "Infinite-time register machine simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a program and print its outcome.
    Run(RunArgs),
    /// Run a program and write its trace as JSON lines.
    Trace(RunArgs),
    /// Run every program in a code range and report verdicts.
    Scan(ScanArgs),
    /// Print the program with a given code.
    Enum(EnumArgs),
    /// Check a divergence certificate.
    Verify(VerifyArgs),
}

#[derive(Args)]
struct BudgetArgs {
    /// Concrete steps (or units of one level) allowed before a higher limit.
    #[arg(long, default_value_t = Budget::default().max_steps_per_level, value_parser = clap::value_parser!(u64).range(1..))]
    budget_steps: u64,
    /// Highest order of limit the engine may take.
    #[arg(long, default_value_t = Budget::default().max_level, value_parser = clap::value_parser!(u32).range(1..))]
    budget_level: u32,
    /// Limits plus fast-forwards allowed.
    #[arg(long, default_value_t = Budget::default().max_accelerations, value_parser = clap::value_parser!(u64).range(1..))]
    budget_accel: u64,
}

impl BudgetArgs {
    fn budget(&self) -> Budget {
        Budget {
            max_steps_per_level: self.budget_steps,
            max_level: self.budget_level,
            max_accelerations: self.budget_accel,
        }
    }
}

#[derive(Args)]
struct RunArgs {
    /// Assembly source file.
    #[arg(long)]
    program: PathBuf,
    /// Oracle: `empty`, `evens`, `naturals`, `finite:{1,3}` or `periodic:pre=01,per=10`.
    #[arg(long, default_value = "empty")]
    oracle: String,
    #[arg(long, default_value_t = 0)]
    input: u64,
    #[command(flatten)]
    budget: BudgetArgs,
    /// Write the trace here as JSON lines (standard output for `trace` if absent).
    #[arg(long)]
    trace: Option<PathBuf>,
    /// Write the divergence certificate here when the run diverges.
    #[arg(long)]
    cert: Option<PathBuf>,
}

#[derive(Args)]
struct ScanArgs {
    /// Register count of the scanned programs.
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    registers: u64,
    /// First code past the scanned range.
    #[arg(long)]
    bound: BigUint,
    /// First scanned code.
    #[arg(long, default_value = "0")]
    start: BigUint,
    #[arg(long, default_value = "empty")]
    oracle: String,
    /// Run each program on inputs `0..inputs`.
    #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u64).range(1..))]
    inputs: u64,
    #[command(flatten)]
    budget: BudgetArgs,
    /// Worker threads; 0 uses every core, 1 runs sequentially.
    #[arg(long, default_value_t = 0)]
    jobs: usize,
    /// Write the JSON report here instead of standard output.
    #[arg(long)]
    report: Option<PathBuf>,
}

#[derive(Args)]
struct EnumArgs {
    #[arg(long)]
    index: BigUint,
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    registers: u64,
}

#[derive(Args)]
struct VerifyArgs {
    /// Certificate JSON as written by `run --cert`.
    #[arg(long)]
    cert: PathBuf,
    #[arg(long)]
    program: PathBuf,
    #[arg(long, default_value = "empty")]
    oracle: String,
}

/// A failure reported as `error: ...` with exit status 2.
struct UsageError(String);

impl<E: Display> From<E> for UsageError {
    fn from(e: E) -> Self {
        UsageError(e.to_string())
    }
}

fn read(path: &Path) -> Result<String, UsageError> {
    fs::read_to_string(path).map_err(|e| UsageError(format!("{}: {e}", path.display())))
}

fn write(path: &Path, contents: &str) -> Result<(), UsageError> {
    fs::write(path, contents).map_err(|e| UsageError(format!("{}: {e}", path.display())))
}

fn load_program(path: &Path) -> Result<Program, UsageError> {
    parse_program(&read(path)?).map_err(|e| UsageError(format!("{}:{e}", path.display())))
}

fn load_oracle(text: &str) -> Result<OracleReal, UsageError> {
    text.parse().map_err(|e| UsageError(format!("oracle `{text}`: {e}")))
}

fn cmd_run(args: &RunArgs, force_trace: bool) -> Result<u8, UsageError> {
    let program = load_program(&args.program)?;
    let oracle = load_oracle(&args.oracle)?;
    let tracing = force_trace || args.trace.is_some();
    let options = RunOptions {
        trace_steps: tracing.then_some(TRACE_STEPS),
    };
    let result = run_with(&program, &oracle, args.input, &args.budget.budget(), &options);
    if let Some(trace) = &result.trace {
        match &args.trace {
            Some(path) => write(path, &trace.to_jsonl())?,
            None => print!("{}", trace.to_jsonl()),
        }
    }
    if let (Outcome::Diverges { certificate }, Some(path)) = (&result.outcome, &args.cert) {
        write(path, &serde_json::to_string_pretty(certificate)?)?;
    }
    if !(force_trace && args.trace.is_none()) {
        println!("{}", result.outcome);
    }
    Ok(match result.outcome {
        Outcome::Halted { .. } => EXIT_HALTED,
        Outcome::Diverges { .. } => EXIT_DIVERGES,
        Outcome::BudgetExhausted { .. } => EXIT_BUDGET,
    })
}

fn cmd_scan(args: &ScanArgs) -> Result<u8, UsageError> {
    let oracle = load_oracle(&args.oracle)?;
    let options = ScanOptions {
        budget: args.budget.budget(),
        inputs: 0..args.inputs,
        jobs: args.jobs,
    };
    let report = halting_scan(args.registers as usize, &args.start, &args.bound, &oracle, &options)?;
    let json = report.to_json();
    match &args.report {
        Some(path) => {
            write(path, &json)?;
            let c = &report.counts;
            println!(
                "scanned {} runs: halted={} diverges={} unknown={}",
                c.total, c.halted, c.diverges, c.unknown
            );
        }
        None => println!("{json}"),
    }
    Ok(0)
}

fn cmd_enum(args: &EnumArgs) -> u8 {
    print!("{}", render_program(&decode_program(&args.index, args.registers as usize)));
    0
}

fn cmd_verify(args: &VerifyArgs) -> Result<u8, UsageError> {
    let program = load_program(&args.program)?;
    let oracle = load_oracle(&args.oracle)?;
    let text = read(&args.cert)?;
    let cert: DivergenceCertificate =
        serde_json::from_str(&text).map_err(|e| UsageError(format!("{}: {e}", args.cert.display())))?;
    if verify_divergence(&cert, &program, &oracle) {
        println!("verified cert=({}, {})", cert.clock_a, cert.clock_b);
        Ok(0)
    } else {
        println!("rejected");
        Ok(1)
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Run(a) => cmd_run(a, false),
        Command::Trace(a) => cmd_run(a, true),
        Command::Scan(a) => cmd_scan(a),
        Command::Enum(a) => Ok(cmd_enum(a)),
        Command::Verify(a) => cmd_verify(a),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(UsageError(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(EXIT_USAGE)
        }
    }
}

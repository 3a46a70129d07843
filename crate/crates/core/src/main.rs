use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand, ValueEnum};

use qpsolver::harness::{self, Experiment, ResultRow, TableKind};
use qpsolver::Error;

#[derive(Parser)]
#[command(
    name = "qpsolver",
    version,
    about = "Spectral BDF2 solver for quasiperiodic parabolic problems"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one solve and print its row.
    Solve(SolveArgs),
    /// Error against N at a fixed step size.
    SpaceSweep(Common),
    /// Error and order against the step size at a fixed N.
    TimeSweep(Common),
    /// Quick internal consistency checks.
    Selftest,
}

#[derive(Args)]
struct Common {
    #[arg(long)]
    config: PathBuf,
    /// Write the table here instead of the config's `output` or stdout.
    #[arg(long)]
    output: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    format: Format,
    /// Worker threads for the operator application.
    #[arg(long)]
    threads: Option<usize>,
}

#[derive(Args)]
struct SolveArgs {
    #[command(flatten)]
    common: Common,
    /// Overrides a single-entry N_list.
    #[arg(long = "modes")]
    n_modes: Option<usize>,
    /// Overrides a single-entry tau_list.
    #[arg(long)]
    tau: Option<f64>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Csv,
    Json,
}

enum Failure {
    Config(anyhow::Error),
    Solver(anyhow::Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        if e.is_solver_failure() {
            Failure::Solver(e.into())
        } else {
            Failure::Config(e.into())
        }
    }
}

fn load(common: &Common) -> Result<Experiment, Failure> {
    if let Some(k) = common.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(k)
            .build_global()
            .map_err(|e| Failure::Config(anyhow::anyhow!("--threads: {e}")))?;
    }
    Ok(Experiment::from_path(&common.config)?)
}

fn emit(common: &Common, exp: &Experiment, kind: TableKind, rows: &[ResultRow]) -> Result<(), Failure> {
    let text = match common.format {
        Format::Csv => harness::to_csv(kind, rows)?,
        Format::Json => harness::to_json(rows)? + "\n",
    };
    match common.output.as_deref().or(exp.output.as_deref()) {
        Some(path) => write_file(path, &text).map_err(Failure::Config),
        None => {
            let mut out = std::io::stdout().lock();
            out.write_all(text.as_bytes())
                .context("writing to stdout")
                .map_err(Failure::Config)
        }
    }
}

fn write_file(path: &Path, text: &str) -> anyhow::Result<()> {
    std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

fn single(list_name: &str, values: &[f64], flag: Option<f64>) -> Result<f64, Failure> {
    match (flag, values) {
        (Some(v), _) => Ok(v),
        (None, [v]) => Ok(*v),
        (None, _) => Err(Failure::Config(anyhow::anyhow!(
            "{list_name}: `solve` needs exactly one entry (or a command-line override), got {}",
            values.len()
        ))),
    }
}

fn execute(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::Solve(args) => {
            let exp = load(&args.common)?;
            let n_list: Vec<f64> = exp.n_list.iter().map(|&n| n as f64).collect();
            let n_modes = single("N_list", &n_list, args.n_modes.map(|n| n as f64))? as usize;
            let tau = single("tau_list", &exp.tau_list, args.tau)?;
            let row = harness::run_single(&exp, n_modes, tau)?;
            emit(&args.common, &exp, TableKind::Solve, &[row])
        }
        Command::SpaceSweep(common) => {
            let exp = load(&common)?;
            let rows = harness::space_sweep(&exp)?;
            emit(&common, &exp, TableKind::Space, &rows)
        }
        Command::TimeSweep(common) => {
            let exp = load(&common)?;
            let rows = harness::time_sweep(&exp)?;
            emit(&common, &exp, TableKind::Time, &rows)
        }
        Command::Selftest => {
            let checks = harness::selftest();
            for c in &checks {
                println!("{} {}: {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail);
            }
            if checks.iter().all(|c| c.passed) {
                Ok(())
            } else {
                Err(Failure::Solver(anyhow::anyhow!("self-test failed")))
            }
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(2)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Config(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
        Err(Failure::Solver(e)) => {
            eprintln!("solver failure: {e:#}");
            ExitCode::from(3)
        }
    }
}

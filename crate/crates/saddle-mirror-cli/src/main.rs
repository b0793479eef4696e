use std::path::PathBuf;
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand, ValueEnum};

use saddle_mirror_cli::config::load_spec;
use saddle_mirror_cli::experiment::{median, run_experiment, CheckStatus, RunOptions};
use saddle_mirror_cli::trace_io::read_trace_csv;
use saddle_mirror_cli::verify::{default_verification_spec, verify};
use saddle_mirror_cli::CliError;

#[derive(Parser)]
#[command(
    name = "saddle-mirror",
    version,
    about = "Mirror-descent solvers and dynamics for constrained saddle-point problems"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct RunArgs {
    /// Path to the JSON experiment spec.
    spec: PathBuf,
    /// Write traces and the summary here instead of the spec's output directory.
    #[arg(long, value_name = "PATH")]
    out_dir: Option<PathBuf>,
    /// Override the base seed; any seed sweep in the spec is dropped.
    #[arg(long)]
    seed: Option<u64>,
    /// Suppress per-run progress lines.
    #[arg(long)]
    quiet: bool,
}

#[derive(Clone, Copy, ValueEnum)]
enum StatColumn {
    /// Duality gap.
    Gap,
    /// Bregman distance to the reference saddle set.
    #[value(name = "v_star")]
    VStar,
    /// Euclidean distance to the reference saddle set.
    Dist,
}

#[derive(Subcommand)]
enum Command {
    /// Execute a spec: every grid point runs, one CSV per run plus a summary.
    Run(RunArgs),
    /// Same as run, but the spec must declare a sweep grid.
    Sweep(RunArgs),
    /// Run the property suite (geometry, oracles, solver, dynamics) against a
    /// spec, or against the built-in short matching-pennies spec.
    Verify {
        spec: Option<PathBuf>,
        /// Print failing checks only.
        #[arg(long)]
        quiet: bool,
    },
    /// Summarize one diagnostic column of a trace CSV.
    Trace {
        trace: PathBuf,
        /// Which diagnostic column to summarize.
        #[arg(long, value_enum)]
        stat: StatColumn,
    },
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => ExitCode::SUCCESS,
                _ => ExitCode::from(1),
            };
        }
    };
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

fn dispatch(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Run(args) => execute(args, false),
        Command::Sweep(args) => execute(args, true),
        Command::Verify { spec, quiet } => {
            let resolved = match spec {
                Some(path) => load_spec(&path)?,
                None => default_verification_spec(),
            };
            let report = verify(&resolved)?;
            for check in &report.checks {
                let tag = match check.status {
                    CheckStatus::Pass => "pass",
                    CheckStatus::Fail => "FAIL",
                    CheckStatus::Skipped => "skip",
                };
                let line = format!("{tag}  {:<22} {}", check.name, check.detail);
                if check.status == CheckStatus::Fail {
                    eprintln!("{line}");
                } else if !quiet {
                    println!("{line}");
                }
            }
            let failed = report.failed_checks();
            if failed > 0 {
                Err(CliError::Verification(format!("{failed} of {} checks", report.checks.len())))
            } else {
                if !quiet {
                    println!("all {} checks passed or were skipped", report.checks.len());
                }
                Ok(())
            }
        }
        Command::Trace { trace, stat } => {
            let records = read_trace_csv(&trace)?;
            let (name, column): (&str, Vec<f64>) = match stat {
                StatColumn::Gap => ("gap", records.iter().filter_map(|r| r.gap).collect()),
                StatColumn::VStar => ("v_star", records.iter().filter_map(|r| r.v_star).collect()),
                StatColumn::Dist => {
                    ("dist_euclid", records.iter().filter_map(|r| r.dist_euclid).collect())
                }
            };
            if column.is_empty() {
                return Err(CliError::Runtime(format!(
                    "{}: no recorded {name} values",
                    trace.display()
                )));
            }
            let min = column.iter().copied().fold(f64::INFINITY, f64::min);
            let max = column.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            println!(
                "{name}: count {} min {min:.6e} median {:.6e} max {max:.6e} final {:.6e}",
                column.len(),
                median(&column),
                column.last().expect("nonempty"),
            );
            Ok(())
        }
    }
}

fn execute(args: RunArgs, require_grid: bool) -> Result<(), CliError> {
    let resolved = load_spec(&args.spec)?;
    if require_grid && resolved.spec.sweep.is_none() {
        return Err(CliError::Validation(
            "sweep requires a spec with a sweep block (use run for single configurations)"
                .to_string(),
        ));
    }
    let opts = RunOptions { out_dir: args.out_dir, seed: args.seed, quiet: args.quiet };
    let report = run_experiment(&resolved, &opts)?;
    if report.aggregate.failed_runs > 0 {
        return Err(CliError::Runtime(format!(
            "{} of {} runs failed; see the summary for details",
            report.aggregate.failed_runs,
            report.runs.len()
        )));
    }
    Ok(())
}

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use clap::{Parser, Subcommand};
use inexact_lmbm::{SolverConfig, StepsizeRule};
use lmbm_bench::range::{parse_list, parse_noise, parse_problems};
use lmbm_bench::{run_experiment_with, summarize, CsvSink, ExperimentSpec, RunOptions};

#[derive(Parser)]
#[command(
    name = "bench",
    about = "Benchmark grids for the inexact limited-memory bundle method"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a problem/dimension/noise grid and write one CSV row per run.
    Run(RunArgs),
}

#[derive(Parser)]
struct RunArgs {
    /// Problems, e.g. `f1..f10` or `f1,f6,f8`.
    #[arg(long, default_value = "f1..f10")]
    problems: String,
    /// Dimensions, comma-separated.
    #[arg(long, default_value = "2,5,10,50")]
    dims: String,
    /// Noise kinds, e.g. `N0..N4` or `N1,N3`.
    #[arg(long, default_value = "N0")]
    noise: String,
    /// Noise bounds, comma-separated; ignored for N0.
    #[arg(long = "qbar", default_value = "0.01")]
    q_bars: String,
    /// Seeds per noisy cell.
    #[arg(long, default_value_t = 10)]
    repeats: usize,
    /// First seed; run i uses seed + i.
    #[arg(long, default_value_t = 42)]
    seed: u64,
    /// Output CSV; standard output when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Print per-cell summary statistics to standard error at the end.
    #[arg(long)]
    summary: bool,
    /// Print one line per finished run to standard error.
    #[arg(long)]
    trace: bool,
    #[arg(long, default_value_t = StepsizeRule::Interpolated)]
    stepsize: StepsizeRule,
    /// Evaluation budget per run.
    #[arg(long, default_value_t = 10_000)]
    max_evals: usize,
    /// Worker threads; 0 uses one per core.
    #[arg(long, default_value_t = 0)]
    jobs: usize,
    /// Finish the grid after a failed run instead of stopping.
    #[arg(long)]
    keep_going: bool,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::Run(args) => match run(args) {
            Ok(true) => ExitCode::SUCCESS,
            Ok(false) => ExitCode::FAILURE,
            Err(e) => {
                eprintln!("error: {e:#}");
                ExitCode::from(2)
            }
        },
    }
}

/// Returns whether every row completed.
fn run(args: RunArgs) -> anyhow::Result<bool> {
    let spec = ExperimentSpec {
        problems: parse_problems(&args.problems).context("--problems")?,
        dims: parse_list(&args.dims).context("--dims")?,
        noise_kinds: parse_noise(&args.noise).context("--noise")?,
        q_bars: parse_list(&args.q_bars).context("--qbar")?,
        repeats: args.repeats,
        base_seed: args.seed,
        config: SolverConfig {
            stepsize_rule: args.stepsize,
            max_evals: args.max_evals,
            ..SolverConfig::default()
        },
    };
    let out: Box<dyn Write> = match &args.out {
        Some(path) => Box::new(BufWriter::new(
            File::create(path).with_context(|| format!("cannot create {}", path.display()))?,
        )),
        None => Box::new(io::stdout().lock()),
    };
    let mut sink = CsvSink::new(out)?;
    let mut rows = Vec::new();
    let options = RunOptions {
        jobs: args.jobs,
        keep_going: args.keep_going,
    };
    let total = spec.tasks().len();
    let summary = run_experiment_with(&spec, options, |row| {
        if args.trace {
            eprintln!(
                "[{}/{total}] {} n={} {} q_bar={} seed={}: f={:.6e} evals={} {} ({:.3}s)",
                rows.len() + 1,
                row.problem,
                row.n,
                row.noise,
                row.q_bar,
                row.seed,
                row.f_final_true,
                row.evaluations,
                row.termination,
                row.cpu_seconds
            );
        }
        sink.write(row)?;
        rows.push(row.clone());
        Ok(())
    })?;
    sink.finish()?;

    if args.summary {
        eprintln!("problem,n,noise,q_bar,runs,errors,mean_f,std_f,mean_accuracy,mean_evaluations");
        for c in summarize(&rows) {
            let opt = |v: Option<f64>| v.map(|x| format!("{x:.6e}")).unwrap_or_default();
            eprintln!(
                "{},{},{},{},{},{},{:.6e},{},{},{:.1}",
                c.problem,
                c.n,
                c.noise,
                c.q_bar,
                c.runs,
                c.errors,
                c.mean_f,
                opt(c.std_f),
                c.mean_accuracy.map(|a| format!("{a:.3}")).unwrap_or_default(),
                c.mean_evaluations
            );
        }
    }
    if summary.aborted {
        eprintln!(
            "stopped after a failed run ({} of {total} rows written); use --keep-going to continue past failures",
            summary.rows
        );
    }
    Ok(summary.completed() || (args.keep_going && !summary.aborted))
}

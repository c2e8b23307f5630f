use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use tibpalm_bench::{emit_figure_series, label_from_path, load_config, run_suite, CliOverrides, ProblemKind, RunConfig};

#[derive(Parser)]
#[command(name = "bench", about = "Run the NMF, signal recovery and QFP experiment suites")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Sparse nonnegative matrix factorization.
    Nmf(RunArgs),
    /// Sparse signal recovery with the half-quasi-norm penalty.
    Sigrec(RunArgs),
    /// Quadratic fractional programming.
    Qfp(RunArgs),
    /// Merge trace CSVs into one long-format table.
    Series {
        #[arg(long)]
        out: PathBuf,
        /// Trace files; the algorithm label is taken from the file name.
        #[arg(required = true)]
        traces: Vec<PathBuf>,
    },
}

#[derive(Args)]
struct RunArgs {
    /// TOML config; all defaults when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    variant: Option<String>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Run schedules that violate the descent condition.
    #[arg(long)]
    override_theory: bool,
    /// Print the resolved config and exit.
    #[arg(long)]
    print_config: bool,
}

fn run(kind: ProblemKind, args: RunArgs) -> Result<ExitCode, Box<dyn std::error::Error>> {
    let cli = CliOverrides {
        seed: args.seed,
        variant: args.variant,
        out: args.out,
        override_theory: args.override_theory,
    };
    let cfg = match &args.config {
        Some(path) => load_config(path, kind, &cli)?,
        None => {
            let mut cfg = RunConfig::defaults(kind);
            cfg.apply(&cli)?;
            cfg
        }
    };
    if args.print_config {
        print!("{}", cfg.emit());
        return Ok(ExitCode::SUCCESS);
    }
    let report = run_suite(&cfg)?;
    for r in &report.runs {
        if !r.completed {
            eprintln!("{} seed {}: {}", r.algorithm, r.seed, r.termination);
        }
    }
    println!("{} runs, summary in {}", report.runs.len(), report.summary.display());
    Ok(ExitCode::from(report.exit_code() as u8))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Nmf(a) => run(ProblemKind::Nmf, a),
        Command::Sigrec(a) => run(ProblemKind::Sigrec, a),
        Command::Qfp(a) => run(ProblemKind::Qfp, a),
        Command::Series { out, traces } => {
            let labelled: Vec<_> = traces.into_iter().map(|p| (label_from_path(&p), p)).collect();
            emit_figure_series(&labelled, &out).map(|n| {
                println!("{n} rows written to {}", out.display());
                ExitCode::SUCCESS
            }).map_err(Into::into)
        }
    };
    result.unwrap_or_else(|e| {
        eprintln!("error: {e}");
        ExitCode::from(2)
    })
}

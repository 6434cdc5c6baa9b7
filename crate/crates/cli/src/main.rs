//! `ustat`: sample paths, jackknife summaries, Monte Carlo studies and exact
//! decomposition checks from the command line.

mod commands;
mod svg;

use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

#[derive(Parser)]
#[command(
    name = "ustat",
    version,
    about = "U-statistic processes and jackknife checks"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum ProcessKind {
    Pseudo,
    Studentized,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Scaling {
    FullSample,
    RootNMultiplier,
}

#[derive(Subcommand)]
enum Command {
    /// Sample data and write the normalized prefix process as CSV.
    Path {
        /// Kernel registry name, e.g. `product:m=2,a=2`.
        #[arg(long)]
        kernel: String,
        /// Distribution registry name, e.g. `example:a=2`.
        #[arg(long)]
        dist: String,
        /// Centre of the process; defaults to the value known for the kernel.
        #[arg(long)]
        theta: Option<f64>,
        #[arg(long)]
        n: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, value_enum, default_value = "studentized")]
        process: ProcessKind,
        #[arg(long, value_enum, default_value = "full-sample")]
        scaling: Scaling,
        /// CSV output (`k,t,value`).
        #[arg(long)]
        out: std::path::PathBuf,
        /// Optional SVG plot of the path.
        #[arg(long)]
        svg: Option<std::path::PathBuf>,
    },
    /// Jackknife summary of one sampled data set, printed as JSON.
    Jackknife {
        #[arg(long)]
        kernel: String,
        #[arg(long)]
        dist: String,
        #[arg(long)]
        n: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Also run the leave-one-out enumeration and report the discrepancy.
        #[arg(long)]
        naive: bool,
        #[arg(long)]
        out: Option<std::path::PathBuf>,
    },
    /// Run a Monte Carlo study from a JSON config.
    Study {
        #[arg(long)]
        config: std::path::PathBuf,
        #[arg(long)]
        out: std::path::PathBuf,
        /// Worker threads; 0 uses every core.
        #[arg(long, env = "USTAT_WORKERS", default_value_t = 0)]
        workers: usize,
    },
    /// Exact expansion of the shared-argument product statistic over a finite law.
    Decomp {
        #[arg(long)]
        kernel: String,
        /// A `finite:` distribution.
        #[arg(long)]
        dist: String,
        /// Leading arguments shared by the two kernel factors (1 or 2).
        #[arg(long, default_value_t = 1)]
        shared: usize,
        /// Also bound the degenerate sum of the centred kernel at this n.
        #[arg(long)]
        bound_n: Option<usize>,
        #[arg(long)]
        out: Option<std::path::PathBuf>,
    },
    /// Compare leave-one-out enumeration with the closed-form jackknife.
    VerifyIdentity {
        #[arg(long)]
        kernel: String,
        #[arg(long)]
        dist: String,
        #[arg(long)]
        n: usize,
        #[arg(long, default_value_t = 100)]
        trials: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match commands::run(cli.command) {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(commands::exit_code(&err))
        }
    }
}

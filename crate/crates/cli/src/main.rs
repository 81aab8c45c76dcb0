//! `otrank` command-line interface.

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Parser, Debug)]
#[command(name = "otrank", version, about = "Distribution-free multivariate rank tests from optimal transport")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generalized Wilcoxon rank-sum test of X versus Y.
    Ranksum {
        x: PathBuf,
        y: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Rank-kernel MMD two-sample test.
    RankMmd {
        x: PathBuf,
        y: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Generalized Wilcoxon signed-rank test of G-symmetry.
    Signedrank {
        x: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// OT-MMD test of G-symmetry.
    SymmetryMmd {
        x: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Hotelling T²: one-sample (mean zero) or two-sample.
    Hotelling {
        x: PathBuf,
        y: Option<PathBuf>,
        #[command(flatten)]
        common: Common,
    },
    /// Power study over a suite of simulated scenarios.
    Power {
        suite: PathBuf,
        /// List the scenarios without running them.
        #[arg(long)]
        dry_run: bool,
        /// Override the replication count of every scenario.
        #[arg(long)]
        reps: Option<usize>,
        /// Also write a gnuplot long-format table here.
        #[arg(long)]
        gnuplot: Option<PathBuf>,
        #[command(flatten)]
        common: Common,
    },
    /// Exchangeability test of asset returns; one `date,adj_close` CSV per asset.
    Returns {
        #[arg(required = true)]
        prices: Vec<PathBuf>,
        #[command(flatten)]
        common: Common,
    },
    /// Draw a reference grid and write it as CSV.
    MakeGrid {
        #[arg(long)]
        n: usize,
        #[arg(long)]
        p: usize,
        #[command(flatten)]
        common: Common,
    },
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Csv,
}

/// Flags shared by every subcommand.
#[derive(Args, Debug, Clone)]
struct Common {
    /// Symmetry group: trivial, central, sign, spherical, permutation,
    /// reflection:<u1,..,up>, zonal:<u1,u2,u3>.
    #[arg(long)]
    group: Option<String>,
    /// Reference generator name or a CSV file holding an explicit grid.
    #[arg(long)]
    reference: Option<String>,
    /// Score function: identity or normal_cdf.
    #[arg(long, default_value = "identity")]
    score: String,
    /// Kernel: gaussian, laplace or distance.
    #[arg(long, default_value = "gaussian")]
    kernel: String,
    /// Kernel bandwidth (exponent for the distance kernel); default 1/(4p).
    #[arg(long)]
    sigma: Option<f64>,
    /// Monte Carlo null draws.
    #[arg(long = "B", default_value_t = 999)]
    b: usize,
    /// Master seed; drawn from system entropy and printed when absent.
    #[arg(long)]
    seed: Option<u64>,
    /// mc or asymptotic.
    #[arg(long, default_value = "mc")]
    calibration: String,
    /// Worker threads; defaults to the available cores.
    #[arg(long)]
    threads: Option<usize>,
    /// Do not read or write the null cache.
    #[arg(long)]
    no_cache: bool,
    /// Null cache directory.
    #[arg(long, env = "OTRANK_CACHE_DIR", default_value = ".otrank-cache")]
    cache_dir: PathBuf,
    /// Add uniform noise of this half-width to break ties.
    #[arg(long)]
    jitter: Option<f64>,
    /// Output file; standard output when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum)]
    format: Option<Format>,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn"))
        .format_timestamp(None)
        .init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match commands::run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

//! `subspace-merge`: merge checkpoints, measure subspace overlap, run the
//! synthetic leave-one-domain-out evaluation.

mod commands;
mod manifest;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use subspace_merge::Error;

#[derive(Debug, Parser)]
#[command(name = "subspace-merge", version, about = "Subspace conflict-resolving model merging")]
struct Cli {
    /// Worker threads (default: available parallelism).
    #[arg(long, global = true, env = "SUBSPACE_MERGE_THREADS")]
    threads: Option<usize>,

    /// JSON config layered between the defaults and command-line flags.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Where to write the run manifest (default: beside the primary output).
    #[arg(long, global = true)]
    manifest: Option<PathBuf>,

    /// Log verbosity: -v info, -vv debug.
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Print the tensors of a checkpoint as a table.
    Inspect {
        path: PathBuf,
    },
    /// Merge fine-tuned checkpoints into one.
    Merge(MergeArgs),
    /// Pairwise subspace alignment ratio between task vectors.
    Sar(PairwiseArgs),
    /// Pairwise mean principal angle between task-vector subspaces.
    Angles(PairwiseArgs),
    /// Untrimmed shared-basis core sum of one layer, as a CSV grid.
    ConflictMap(ConflictArgs),
    /// Leave-one-domain-out evaluation on synthetic domains.
    Eval(EvalArgs),
    /// Method × target accuracy table from a results CSV.
    Report(ReportArgs),
}

#[derive(Debug, Args)]
struct MergeArgs {
    #[arg(long)]
    pre: PathBuf,
    #[arg(long, num_args = 1.., required = true)]
    models: Vec<PathBuf>,
    /// task_arithmetic, ties, magmax, iso_c or score.
    #[arg(long)]
    method: Option<String>,
    /// trimmed, diagonal_only, offdiag_only or full.
    #[arg(long)]
    variant: Option<String>,
    #[arg(long)]
    lambda: Option<f64>,
    #[arg(long)]
    tau: Option<f64>,
    #[arg(long)]
    ties_density: Option<f64>,
    /// Divide the off-diagonal spread by the number of merged models.
    #[arg(long)]
    normalize_sigma: bool,
    /// Output checkpoint directory.
    #[arg(long)]
    out: PathBuf,
    /// Per-layer JSON report.
    #[arg(long)]
    report: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct PairwiseArgs {
    #[arg(long)]
    pre: PathBuf,
    #[arg(long, num_args = 1.., required = true)]
    models: Vec<PathBuf>,
    #[arg(long)]
    epsilon: Option<f64>,
    /// CSV output; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    /// JSON output with labels and values.
    #[arg(long)]
    json: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct ConflictArgs {
    #[arg(long)]
    pre: PathBuf,
    #[arg(long, num_args = 1.., required = true)]
    models: Vec<PathBuf>,
    #[arg(long)]
    layer: String,
    /// CSV output; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    /// JSON output with the grid and its energy split.
    #[arg(long)]
    json: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct EvalArgs {
    /// JSON with SyntheticSpec fields; missing fields keep their defaults.
    #[arg(long)]
    spec: Option<PathBuf>,
    /// Comma-separated methods, `score/<variant>` for variants, or `all`.
    #[arg(long, default_value = "all")]
    methods: String,
    /// Number of consecutive seeds starting at the spec seed.
    #[arg(long, default_value_t = 1)]
    seeds: u64,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    lr: Option<f64>,
    /// Fill the wall_time_ms column (makes the CSV run-dependent).
    #[arg(long)]
    timings: bool,
    /// Merge with this λ instead of 1, for exploration only.
    #[arg(long)]
    explore_lambda: Option<f64>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct ReportArgs {
    #[arg(long)]
    results: PathBuf,
    /// Output table; `.md` selects markdown, anything else CSV. Stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn exit_code(err: &Error) -> u8 {
    if err.is_numerical() {
        2
    } else {
        1
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level))
        .format_timestamp_millis()
        .init();

    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = cli.threads {
        builder = builder.num_threads(n);
    }
    let pool = match builder.build() {
        Ok(pool) => pool,
        Err(e) => {
            eprintln!("error: cannot start worker pool: {e}");
            return ExitCode::from(1);
        }
    };
    log::info!("using {} worker threads", pool.current_num_threads());

    match pool.install(|| commands::run(&cli)) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}

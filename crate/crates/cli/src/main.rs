use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use dse_core::{HeadStyle, Metric, NetScoreWeights};

mod commands;

#[derive(Parser)]
#[command(name = "dse", version, about = "MobileNetV2-SSD width/resolution design-space exploration")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Modified NetScore of one (accuracy, params, runtime) triple
    Score(ScoreArgs),
    /// Parameter (and MAC) count of one design point
    Count(CountArgs),
    /// Evaluate every grid point not yet in the ledger
    Explore(ExploreArgs),
    /// Export surfaces or the ranking table from a ledger
    Report(ReportArgs),
    /// Print the best design point in a ledger
    Best(BestArgs),
}

#[derive(Args, Clone, Copy)]
struct WeightArgs {
    #[arg(long, default_value_t = 1.0)]
    kappa: f64,
    #[arg(long, default_value_t = 0.45)]
    beta: f64,
    #[arg(long, default_value_t = 0.2)]
    gamma: f64,
}

impl WeightArgs {
    fn weights(&self) -> anyhow::Result<NetScoreWeights> {
        Ok(NetScoreWeights::new(self.kappa, self.beta, self.gamma)?)
    }
}

#[derive(Args)]
struct ScoreArgs {
    /// mAP in percent
    #[arg(long, allow_negative_numbers = true)]
    accuracy: f64,
    /// Parameters in millions
    #[arg(long, allow_negative_numbers = true)]
    params: f64,
    /// CPU seconds per inference
    #[arg(long, allow_negative_numbers = true)]
    runtime: f64,
    #[command(flatten)]
    weights: WeightArgs,
}

#[derive(Args, Clone)]
struct ArchArgs {
    /// Foreground classes (background is added by the head)
    #[arg(long, default_value_t = 21)]
    classes: u32,
    #[arg(long, default_value = "ssdlite")]
    head_style: HeadStyle,
}

#[derive(Args)]
struct CountArgs {
    #[arg(long)]
    alpha: f64,
    #[arg(long)]
    resolution: u32,
    #[command(flatten)]
    arch: ArchArgs,
    /// Also print multiply-accumulates
    #[arg(long)]
    macs: bool,
    /// Write the graph as JSON to this path ("-" for stdout)
    #[arg(long)]
    dump_graph: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Mode {
    Surrogate,
    File,
    Process,
}

#[derive(Clone, Copy, ValueEnum)]
enum RuntimeModelArg {
    Linear,
    Mac,
}

#[derive(Args)]
struct ExploreArgs {
    /// Ledger file (JSON lines); created if missing
    #[arg(long)]
    ledger: PathBuf,
    /// JSON file with {"alphas": [...], "resolutions": [...]}
    #[arg(long)]
    space: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "surrogate")]
    mode: Mode,
    /// Results CSV for file mode
    #[arg(long)]
    results: Option<PathBuf>,
    /// Per-request timeout for process mode, seconds
    #[arg(long, default_value_t = 3600.0)]
    timeout: f64,
    /// Concurrent evaluator processes
    #[arg(long, default_value_t = 1)]
    workers: usize,
    /// Extra request metadata, KEY=VALUE (VALUE parsed as JSON when possible)
    #[arg(long = "metadata", value_name = "KEY=VALUE")]
    metadata: Vec<String>,
    /// Surrogate runtime model
    #[arg(long, value_enum, default_value = "linear")]
    runtime_model: RuntimeModelArg,
    #[command(flatten)]
    arch: ArchArgs,
    #[command(flatten)]
    weights: WeightArgs,
    /// Evaluator command for process mode
    #[arg(last = true)]
    command: Vec<String>,
}

#[derive(Args)]
struct ReportArgs {
    #[arg(long)]
    ledger: PathBuf,
    /// Surface to print
    #[arg(long, default_value = "netscore")]
    metric: Metric,
    /// Print the ranking table instead of a surface
    #[arg(long)]
    ranking: bool,
    /// Print report caveats instead of a surface
    #[arg(long)]
    notes: bool,
    /// Write every surface, the ranking and the notes into this directory
    #[arg(long)]
    out_dir: Option<PathBuf>,
}

#[derive(Args)]
struct BestArgs {
    #[arg(long)]
    ledger: PathBuf,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Score(args) => commands::score(&args),
        Command::Count(args) => commands::count(&args),
        Command::Explore(args) => commands::explore(&args),
        Command::Report(args) => commands::report(&args),
        Command::Best(args) => commands::best(&args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(
    name = "lanemerge",
    version,
    about = "Cooperative on-ramp merge planning"
)]
pub struct Cli {
    /// TOML run configuration.
    #[arg(long, global = true, env = "LANEMERGE_CONFIG")]
    pub config: Option<PathBuf>,
    /// Seed for splits, bootstrap samples and synthetic data [default: 42].
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Detect lane changes in trajectory files and cut 70-sample windows.
    Extract(ExtractArgs),
    /// Label every sample of every window and write the feature dataset.
    Label(LabelArgs),
    /// Fit a model bundle, or with `--algorithm all` the comparison table.
    Train(TrainArgs),
    /// Score a model bundle on the test split of a dataset.
    Evaluate(EvaluateArgs),
    /// Train and validation accuracy over a hyperparameter range.
    Sweep(SweepArgs),
    /// Run the orchestrator over TCP.
    Serve(ServeArgs),
    /// Stream a scenario trace to an orchestrator and report latency.
    Replay(ReplayArgs),
    /// Generate synthetic inputs.
    Synth(SynthArgs),
}

#[derive(Debug, Args)]
pub struct ExtractArgs {
    /// NGSIM trajectory file, whitespace- or comma-separated (repeatable).
    #[arg(long, required = true)]
    pub input: Vec<PathBuf>,
    /// Window file (JSON lines).
    #[arg(long, required_unless_present = "dry_run")]
    pub output: Option<PathBuf>,
    /// Drop manoeuvres that return to the original lane inside the window.
    #[arg(long)]
    pub skip_aborted: bool,
    #[arg(long)]
    pub dry_run: bool,
}

#[derive(Debug, Args)]
pub struct LabelArgs {
    /// Window file written by `extract`.
    #[arg(long)]
    pub input: PathBuf,
    /// Dataset CSV.
    #[arg(long, required_unless_present = "dry_run")]
    pub output: Option<PathBuf>,
    #[arg(long)]
    pub dry_run: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum TargetArg {
    Merge,
    Acceleration,
    Heading,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SweepParamArg {
    MaxDepth,
    Estimators,
    Neighbors,
}

#[derive(Debug, Args, Clone)]
pub struct ModelFlags {
    #[arg(long)]
    pub max_depth: Option<usize>,
    #[arg(long)]
    pub estimators: Option<usize>,
    #[arg(long)]
    pub k: Option<usize>,
    /// Acceleration tolerance, m/s².
    #[arg(long)]
    pub tolerance: Option<f64>,
    /// Heading tolerance, degrees.
    #[arg(long)]
    pub heading_tolerance: Option<f64>,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// Dataset CSV written by `label` or `synth dataset`.
    #[arg(long)]
    pub input: PathBuf,
    /// Model file, or the table CSV with `--algorithm all`.
    #[arg(long, required_unless_present = "dry_run")]
    pub output: Option<PathBuf>,
    /// Merge classifier, or `all` for the comparison table.
    #[arg(long, default_value = "random-forest")]
    pub algorithm: String,
    #[command(flatten)]
    pub model: ModelFlags,
    #[arg(long)]
    pub dry_run: bool,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub model: PathBuf,
    /// Metrics CSV.
    #[arg(long)]
    pub output: Option<PathBuf>,
    #[arg(long)]
    pub tolerance: Option<f64>,
    #[arg(long)]
    pub heading_tolerance: Option<f64>,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[arg(long)]
    pub input: PathBuf,
    /// Sweep CSV.
    #[arg(long, required_unless_present = "dry_run")]
    pub output: Option<PathBuf>,
    #[arg(long, default_value = "decision-tree")]
    pub algorithm: String,
    #[arg(long, value_enum, default_value = "merge")]
    pub target: TargetArg,
    #[arg(long, value_enum, default_value = "max-depth")]
    pub param: SweepParamArg,
    #[arg(long, default_value_t = 1)]
    pub from: usize,
    #[arg(long, default_value_t = 30)]
    pub to: usize,
    #[command(flatten)]
    pub model: ModelFlags,
    #[arg(long)]
    pub dry_run: bool,
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    /// Model file to serve.
    #[arg(long)]
    pub model: Option<PathBuf>,
    /// host:port to listen on.
    #[arg(long)]
    pub listen: Option<String>,
}

#[derive(Debug, Args)]
pub struct ReplayArgs {
    /// Scenario trace file.
    #[arg(long)]
    pub input: PathBuf,
    /// Orchestrator address, host:port.
    #[arg(long, default_value = "127.0.0.1:7878")]
    pub endpoint: String,
    /// 1 replays in real time; 0 sends as fast as possible.
    #[arg(long, default_value_t = 1.0)]
    pub speed_factor: f64,
    /// Per-recommendation latency CSV.
    #[arg(long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[command(subcommand)]
    pub kind: SynthKind,
}

#[derive(Debug, Subcommand)]
pub enum SynthKind {
    /// A three-vehicle merge scenario trace for `replay`.
    Trace {
        #[arg(long)]
        output: PathBuf,
        /// Trace length, seconds.
        #[arg(long, default_value_t = 7.0)]
        duration: f64,
        /// Initial bumper gap in the target lane, metres.
        #[arg(long, default_value_t = 40.0)]
        gap: f64,
    },
    /// NGSIM-format trajectories with one merge per episode.
    Ngsim {
        #[arg(long)]
        output: PathBuf,
        #[arg(long, default_value_t = 50)]
        episodes: usize,
    },
    /// A labelled dataset CSV drawn from synthetic merge situations.
    Dataset {
        #[arg(long)]
        output: PathBuf,
        #[arg(long, default_value_t = 10_000)]
        samples: usize,
    },
}

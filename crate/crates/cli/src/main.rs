mod commands;
mod config;
mod theory;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

/// Test-time graph structure transformation driven by a homophily predictor.
#[derive(Debug, Parser)]
#[command(name = "graphost", version)]
pub struct Cli {
    /// JSON configuration file; flags override its values.
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,

    /// Seed list, for example `--seed 0,1,2`.
    #[arg(long, global = true, value_delimiter = ',', value_name = "N[,N...]")]
    pub seed: Option<Vec<u64>>,

    /// Output directory.
    #[arg(long, global = true, value_name = "DIR")]
    pub out: Option<PathBuf>,

    /// Use a fixed timestamp in report names and contents, `--pin-timestamp[=STAMP]`
    /// (default "pinned").
    #[arg(
        long,
        global = true,
        num_args = 0..=1,
        require_equals = true,
        default_missing_value = "pinned",
        value_name = "STAMP"
    )]
    pub pin_timestamp: Option<String>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Sample CSBM train, validation and test graphs.
    Generate(GenerateArgs),
    /// Train the classifier, the homophily predictor, or both.
    Train(TrainArgs),
    /// Reweight and filter a test graph with a trained predictor.
    Transform(TransformArgs),
    /// Compare the classifier on the original and the transformed test graph.
    Evaluate(EvaluateArgs),
    /// Ablation arms: base, w/o-weight, w/o-filter and full.
    Ablate(ExperimentArgs),
    /// Accuracy over a grid of filtering ratios.
    SweepDelta(SweepArgs),
    /// The transform under injected structural noise.
    NoiseRobustness(NoiseArgs),
    /// The transform against dropping the same number of random edges.
    RandomDrop(ExperimentArgs),
    /// Numerical checks of the CSBM analysis.
    TheoryValidate(TheoryArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Split {
    Train,
    Val,
    Test,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum FormatArg {
    Json,
    EdgeList,
}

#[derive(Debug, Args)]
pub struct GenerateArgs {
    #[arg(long, value_delimiter = ',', default_value = "train,val,test")]
    pub splits: Vec<Split>,
    #[arg(long, value_enum, default_value = "json")]
    pub format: FormatArg,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Target {
    Classifier,
    Predictor,
    Both,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// Labeled training graph.
    #[arg(long, value_name = "PATH")]
    pub train: PathBuf,
    /// Labeled validation graph for early stopping.
    #[arg(long, value_name = "PATH")]
    pub val: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "both")]
    pub target: Target,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModeArg {
    Homophilic,
    Heterophilic,
    Auto,
}

#[derive(Debug, Args, Default)]
pub struct TransformFlags {
    #[arg(long, value_enum)]
    pub mode: Option<ModeArg>,
    /// Filtering ratio in [0, 1).
    #[arg(long)]
    pub delta: Option<f64>,
    /// Keep unit edge weights.
    #[arg(long)]
    pub no_weight: bool,
    /// Remove no edges.
    #[arg(long)]
    pub no_filter: bool,
    /// Remove every edge whose harm score is at least delta.
    #[arg(long)]
    pub threshold_semantics: bool,
}

#[derive(Debug, Args)]
pub struct TransformArgs {
    #[arg(long, value_name = "PATH")]
    pub test: PathBuf,
    #[arg(long, value_name = "PATH")]
    pub predictor: PathBuf,
    #[command(flatten)]
    pub flags: TransformFlags,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    #[arg(long, value_name = "PATH")]
    pub classifier: PathBuf,
    #[arg(long, value_name = "PATH")]
    pub predictor: PathBuf,
    /// Labeled test graph.
    #[arg(long, value_name = "PATH")]
    pub test: PathBuf,
    #[command(flatten)]
    pub flags: TransformFlags,
}

/// Trained artifacts, or nothing to regenerate CSBM graphs and retrain per
/// seed from the configured scenario.
#[derive(Debug, Args)]
pub struct ExperimentArgs {
    #[arg(long, value_name = "PATH", requires_all = ["predictor", "test"])]
    pub classifier: Option<PathBuf>,
    #[arg(long, value_name = "PATH", requires_all = ["classifier", "test"])]
    pub predictor: Option<PathBuf>,
    #[arg(long, value_name = "PATH", requires_all = ["classifier", "predictor"])]
    pub test: Option<PathBuf>,
    #[command(flatten)]
    pub flags: TransformFlags,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[command(flatten)]
    pub common: ExperimentArgs,
    /// Filtering ratios to evaluate.
    #[arg(long, value_delimiter = ',')]
    pub grid: Option<Vec<f64>>,
}

#[derive(Debug, Args)]
pub struct NoiseArgs {
    #[command(flatten)]
    pub common: ExperimentArgs,
    /// Structural noise ratios.
    #[arg(long, value_delimiter = ',')]
    pub levels: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Suite {
    Lemma,
    Separation,
    Theorem,
    Constraint,
    ClosedForm,
    Multiclass,
}

#[derive(Debug, Args)]
pub struct TheoryArgs {
    #[arg(
        long,
        value_enum,
        value_delimiter = ',',
        default_value = "lemma,separation,theorem,constraint,closed-form,multiclass"
    )]
    pub suite: Vec<Suite>,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("GRAPHOST_LOG", "warn")).init();
    let cli = Cli::parse();
    match commands::run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

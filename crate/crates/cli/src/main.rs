mod commands;
mod manifest;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

/// Phase-field failure simulation, damage-pattern labeling and failure
/// classification.
#[derive(Parser, Debug)]
#[command(name = "pfl", version)]
struct Cli {
    /// Base seed; every random stream is derived from it.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run one loading case and write sensor series and the load curve.
    Simulate(SimulateArgs),
    /// Label time steps from series and load curves.
    Label(LabelArgs),
    /// Train a classifier on one split and evaluate it on the test rows.
    TrainEval(TrainEvalArgs),
    /// Monte Carlo accuracy statistics over splits, seeds and noise.
    Uq(UqArgs),
    /// Collect plot-ready tables from earlier outputs.
    Report(ReportArgs),
}

#[derive(Args, Debug)]
pub struct SimulateArgs {
    /// Built-in case 1 to 6.
    #[arg(long, value_parser = clap::value_parser!(u8).range(1..=6), required_unless_present = "config")]
    case: Option<u8>,
    /// Run configuration JSON (see `config.json` in any output directory).
    #[arg(long, conflicts_with = "case")]
    config: Option<PathBuf>,
    /// Mesh in the plain-text mesh format instead of the generated specimen.
    #[arg(long)]
    mesh: Option<PathBuf>,
    /// Element size: `desk`, `production` or a length in metres.
    #[arg(long)]
    resolution: Option<String>,
    #[arg(long)]
    dt: Option<f64>,
    #[arg(long)]
    pull_rate: Option<f64>,
    /// Keep loading after the damage saturates, until the force drop.
    #[arg(long)]
    continue_after_failure: bool,
    /// Also write the final fields in the mesh text format.
    #[arg(long)]
    snapshot: bool,
    #[arg(long, default_value = "out")]
    out: PathBuf,
}

#[derive(Args, Debug)]
pub struct LabelArgs {
    /// Sensor series, one per case, in label order.
    #[arg(long, required = true, num_args = 1..)]
    series: Vec<PathBuf>,
    /// Load curve for each series.
    #[arg(long, required = true, num_args = 1..)]
    curve: Vec<PathBuf>,
    /// Case id for each series; read from the neighbouring `run.json` if
    /// omitted.
    #[arg(long, num_args = 1..)]
    case: Vec<u8>,
    /// bin1, bin2, bin3:85|90|95, multi3, multi4 or location9.
    #[arg(long)]
    scheme: String,
    /// Base scheme of location9 labels.
    #[arg(long, default_value = "multi4")]
    base: String,
    #[arg(long, default_value = "out")]
    out: PathBuf,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
pub enum ModelKind {
    Knn,
    Ann,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
pub enum TaskKind {
    Presence,
    Location,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
pub enum MetricKind {
    Cosine,
    Euclidean,
}

#[derive(Args, Debug)]
pub struct DataArgs {
    /// Sensor series in the row order of the labels file.
    #[arg(long, required = true, num_args = 1..)]
    series: Vec<PathBuf>,
    /// Labels written by `pfl label`.
    #[arg(long)]
    labels: PathBuf,
    /// Checked against the labels; inferred from them if omitted.
    #[arg(long, value_enum)]
    task: Option<TaskKind>,
    /// Data combination 1 to 5 (train+val 65% to 85%).
    #[arg(long, value_parser = clap::value_parser!(u8).range(1..=5), default_value_t = 2)]
    comb: u8,
    #[arg(long, default_value_t = 2)]
    k: usize,
    #[arg(long, value_enum, default_value_t = MetricKind::Cosine)]
    metric: MetricKind,
    #[arg(long, default_value_t = 0.5)]
    learning_rate: f64,
    #[arg(long, default_value_t = 2000)]
    epochs: usize,
    #[arg(long, default_value_t = 50)]
    patience: usize,
    #[arg(long, default_value = "out")]
    out: PathBuf,
}

#[derive(Args, Debug)]
pub struct TrainEvalArgs {
    #[arg(long, value_enum)]
    model: ModelKind,
    #[command(flatten)]
    data: DataArgs,
}

#[derive(Args, Debug)]
pub struct UqArgs {
    #[arg(long, default_value_t = 1000)]
    runs: usize,
    /// Noise standard deviations on φ, comma separated.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true, default_values_t = [0.01, 0.02, 0.05, 0.10, 0.20])]
    noise_std: Vec<f64>,
    /// Algorithms to run; both by default.
    #[arg(long, value_enum, value_delimiter = ',')]
    model: Vec<ModelKind>,
    #[command(flatten)]
    data: DataArgs,
}

#[derive(Args, Debug)]
pub struct ReportArgs {
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long)]
    out: PathBuf,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let argv: Vec<String> = std::env::args().skip(1).collect();
    let res = match &cli.command {
        Command::Simulate(a) => commands::simulate(a, &argv),
        Command::Label(a) => commands::label(a, &argv),
        Command::TrainEval(a) => commands::train_eval(a, cli.seed, &argv),
        Command::Uq(a) => commands::uq(a, cli.seed, &argv),
        Command::Report(a) => commands::report(a, &argv),
    };
    match res {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("pfl: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

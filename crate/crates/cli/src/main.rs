//! `boxmon`: build, evaluate, query and benchmark box-abstraction monitors.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use boxmon_core::Error;

use config::FileConfig;

pub const EXIT_USAGE: u8 = 1;
pub const EXIT_DATA: u8 = 2;
pub const EXIT_INVARIANT: u8 = 3;
pub const EXIT_EMPTY_CLASS: u8 = 4;

#[derive(Debug, Parser)]
#[command(
    name = "boxmon",
    version,
    about = "Box-abstraction OoD monitors for object detectors"
)]
#[command(
    after_help = "Exit codes: 0 success, 1 usage, 2 data or format error, \
3 internal invariant violation, 4 empty class"
)]
struct Cli {
    /// TOML file with one table per subcommand; flags override it.
    #[arg(long, global = true, env = "BOXMON_CONFIG", value_name = "PATH")]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Build per-class monitors from a feature dump.
    Build(BuildArgs),
    /// Compute FPR at a target TPR for a monitor on ID and OoD dumps.
    Eval(EvalArgs),
    /// Stream verdicts: one JSON record per stdin line, one verdict per stdout line.
    Check(CheckArgs),
    /// Write a synthetic feature dump.
    Synth(SynthArgs),
    /// Time distance queries against a random monitor.
    Bench(BenchArgs),
}

#[derive(Debug, Args)]
pub struct BuildArgs {
    /// Feature dump (BAMF, or CSV when the name ends in .csv).
    #[arg(long, value_name = "PATH")]
    pub features: Option<PathBuf>,
    /// Monitor file to write.
    #[arg(long, value_name = "PATH")]
    pub out: Option<PathBuf>,
    /// Targeted points per cluster [default: 100].
    #[arg(long)]
    pub density: Option<f64>,
    /// Maximum boxes per class [default: 10000].
    #[arg(long)]
    pub cap: Option<usize>,
    /// Share of build vectors each class's boxes must cover [default: 0.95].
    #[arg(long)]
    pub target_tpr: Option<f64>,
    /// k-means seed [default: 0].
    #[arg(long)]
    pub seed: Option<u64>,
    /// Ignore records scoring below this [default: 0].
    #[arg(long, conflicts_with = "auto_threshold")]
    pub score_threshold: Option<f64>,
    /// Pick the score threshold that maximizes micro F1 (ID-labelled records are true positives).
    #[arg(long)]
    pub auto_threshold: bool,
    /// Ground-truth object count for --auto-threshold [default: number of ID records].
    #[arg(long)]
    pub ground_truth_count: Option<usize>,
    /// Lloyd iteration limit [default: 100].
    #[arg(long)]
    pub max_iterations: Option<usize>,
    /// Stop once no centroid moves further than this [default: 1e-6].
    #[arg(long)]
    pub shift_tolerance: Option<f64>,
    /// Layer tag given to CSV input [default: csv].
    #[arg(long)]
    pub layer_tag: Option<String>,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long, value_name = "PATH")]
    pub monitor: Option<PathBuf>,
    /// In-distribution dump.
    #[arg(long, value_name = "PATH")]
    pub id: Option<PathBuf>,
    /// Out-of-distribution dump.
    #[arg(long, value_name = "PATH")]
    pub ood: Option<PathBuf>,
    /// [default: 0.95]
    #[arg(long)]
    pub target_tpr: Option<f64>,
    /// JSON report to write.
    #[arg(long, value_name = "PATH")]
    pub report: Option<PathBuf>,
    /// Also score a baseline (only "gaussian").
    #[arg(long)]
    pub baseline: Option<String>,
    /// Dump the baseline is fitted on [default: the --id dump].
    #[arg(long, value_name = "PATH")]
    pub baseline_train: Option<PathBuf>,
    /// Covariance regularization of the Gaussian baseline [default: 1e-6].
    #[arg(long)]
    pub lambda: Option<f64>,
    /// Ignore records scoring below this [default: the monitor's build threshold].
    #[arg(long)]
    pub score_threshold: Option<f64>,
}

#[derive(Debug, Args)]
pub struct CheckArgs {
    #[arg(long, value_name = "PATH")]
    pub monitor: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    /// gauss-mix, moons, ring-ood or uniform-ood [default: gauss-mix].
    #[arg(long)]
    pub preset: Option<String>,
    /// Number of records [default: 300].
    #[arg(long)]
    pub n: Option<usize>,
    /// [default: 2]
    #[arg(long)]
    pub dim: Option<usize>,
    /// Mixture components [default: 3].
    #[arg(long)]
    pub components: Option<usize>,
    /// Per-coordinate standard deviation [default: 1].
    #[arg(long)]
    pub spread: Option<f64>,
    /// Distance between neighbouring means, in spreads [default: 10].
    #[arg(long)]
    pub separation: Option<f64>,
    /// Class keys the components are dealt into [default: 1].
    #[arg(long)]
    pub classes: Option<usize>,
    /// OoD exclusion radius around every mean, in spreads [default: 4].
    #[arg(long)]
    pub exclusion: Option<f64>,
    /// OoD ring thickness, in spreads [default: 2].
    #[arg(long)]
    pub ring_width: Option<f64>,
    /// Extra room around the means for uniform OoD, in spreads [default: 0].
    #[arg(long)]
    pub margin: Option<f64>,
    /// [default: 0]
    #[arg(long)]
    pub seed: Option<u64>,
    /// [default: synthetic]
    #[arg(long)]
    pub layer_tag: Option<String>,
    /// BAMF file to write.
    #[arg(long, value_name = "PATH")]
    pub bamf: Option<PathBuf>,
    /// CSV file to write.
    #[arg(long, value_name = "PATH")]
    pub csv: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    /// [default: 7000]
    #[arg(long)]
    pub boxes: Option<usize>,
    /// [default: 1024]
    #[arg(long)]
    pub dim: Option<usize>,
    /// [default: 1000]
    #[arg(long)]
    pub queries: Option<usize>,
    /// Share of queries placed inside a box [default: 0.5].
    #[arg(long)]
    pub inside_fraction: Option<f64>,
    /// [default: 0]
    #[arg(long)]
    pub seed: Option<u64>,
    /// Worker threads [default: 1].
    #[arg(long)]
    pub threads: Option<usize>,
    /// JSON report to write.
    #[arg(long, value_name = "PATH")]
    pub report: Option<PathBuf>,
}

/// Anything that ends a command early.
#[derive(Debug)]
pub enum Failure {
    Usage(String),
    Core(Error),
    /// Already reported; carries only the exit code.
    Silent(u8),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Core(e)
    }
}

impl Failure {
    pub fn code(&self) -> u8 {
        match self {
            Failure::Usage(_) => EXIT_USAGE,
            Failure::Silent(c) => *c,
            Failure::Core(e) => core_exit_code(e),
        }
    }
}

pub fn core_exit_code(e: &Error) -> u8 {
    match e {
        Error::InvalidParameter(_) => EXIT_USAGE,
        Error::EmptyClass(_) | Error::EmptyInput(_) => EXIT_EMPTY_CLASS,
        Error::Invariant(_) | Error::TooManyClusters { .. } => EXIT_INVARIANT,
        Error::InvalidInterval { .. }
        | Error::DimensionMismatch { .. }
        | Error::NegativeBuffer { .. }
        | Error::SingularCovariance { .. }
        | Error::Format(_)
        | Error::Schema(_)
        | Error::Io(_) => EXIT_DATA,
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(EXIT_USAGE)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    let cfg = match &cli.config {
        Some(path) => match FileConfig::load(path) {
            Ok(c) => c,
            Err(msg) => {
                eprintln!("error: {msg}");
                return ExitCode::from(EXIT_USAGE);
            }
        },
        None => FileConfig::default(),
    };
    let result = match cli.command {
        Command::Build(a) => commands::build(a, cfg.build),
        Command::Eval(a) => commands::eval(a, cfg.eval),
        Command::Check(a) => commands::check(a, cfg.check),
        Command::Synth(a) => commands::synth(a, cfg.synth),
        Command::Bench(a) => commands::bench(a, cfg.bench),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            match &f {
                Failure::Usage(msg) => eprintln!("error: {msg}"),
                Failure::Core(e) => eprintln!("error: {e}"),
                Failure::Silent(_) => {}
            }
            ExitCode::from(f.code())
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use clap::CommandFactory;

    #[test]
    fn cli_definition_is_consistent() {
        Cli::command().debug_assert();
    }

    #[test]
    fn exit_codes_by_error_kind() {
        assert_eq!(core_exit_code(&Error::Format("x".into())), EXIT_DATA);
        assert_eq!(
            core_exit_code(&Error::Invariant("x".into())),
            EXIT_INVARIANT
        );
        assert_eq!(
            core_exit_code(&Error::EmptyClass("x".into())),
            EXIT_EMPTY_CLASS
        );
        assert_eq!(
            core_exit_code(&Error::InvalidParameter("x".into())),
            EXIT_USAGE
        );
    }
}

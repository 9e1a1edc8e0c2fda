//! The `vbd` command-line tool: VBD synthesis, cross-concatenation,
//! autoencoder training, VBD anomaly detection and cross-validated
//! experiments. Every artifact it writes records the tool version and the
//! fully resolved configuration, and reruns with the same inputs produce
//! byte-identical files.

mod commands;
pub mod config;
mod error;

use std::ffi::OsString;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

pub use error::{CliError, CliResult};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Parser)]
#[command(
    name = "vbd",
    version,
    about = "Virtual big data synthesis, cross-concatenation and VBD anomaly detection"
)]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Args)]
pub struct GlobalArgs {
    /// Input CSV file.
    #[arg(long, global = true)]
    pub input: Option<PathBuf>,
    /// Output file, or output directory for config-driven commands.
    #[arg(long, global = true)]
    pub output: Option<PathBuf>,
    /// Top-level seed; overrides the config file.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// JSON run configuration.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Worker threads for fold and probe parallelism.
    #[arg(long, global = true)]
    pub jobs: Option<usize>,
    /// Format of written data (synth, project, train-ae report) and of the
    /// printed summary.
    #[arg(long, global = true, value_enum)]
    pub format: Option<Format>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Algorithm {
    Small,
    Large,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ClassFilter {
    All,
    Positive,
    Negative,
}

/// How to read a CSV given with `--input`.
#[derive(Debug, Clone, Args)]
pub struct InputArgs {
    /// Label column (name or 0-based index); omit when every column is a
    /// feature.
    #[arg(long)]
    pub label_column: Option<String>,
    /// Label value treated as the positive class.
    #[arg(long, default_value = "positive")]
    pub positive_label: String,
    /// Keep only rows of one class (requires --label-column).
    #[arg(long, value_enum, default_value_t = ClassFilter::All)]
    pub class: ClassFilter,
    /// The file has no header row.
    #[arg(long)]
    pub no_header: bool,
    /// Min-max scale features to [0, 1] before use.
    #[arg(long)]
    pub normalize: bool,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Build a virtual big dataset by concatenating instances.
    Synth {
        #[command(flatten)]
        input: InputArgs,
        #[arg(long, value_enum, default_value_t = Algorithm::Small)]
        algorithm: Algorithm,
        /// Instances per VBD vector (large algorithm).
        #[arg(long, default_value_t = 2)]
        c: usize,
        /// Number of VBD vectors (large algorithm).
        #[arg(long)]
        u: Option<usize>,
    },
    /// Cross-concatenate the two classes of a labeled CSV.
    Project {
        #[command(flatten)]
        input: InputArgs,
        /// Keep at most this many minority/majority pairs.
        #[arg(long)]
        max_pairs: Option<usize>,
    },
    /// Train a dense autoencoder and save it as JSON.
    TrainAe {
        #[command(flatten)]
        input: InputArgs,
        /// Comma-separated layer widths, e.g. 9,6,4,3,4,6,9.
        #[arg(long, conflicts_with = "preset")]
        architecture: Option<String>,
        /// Published layer plan by dataset name (wbc, pima, haberman, ...).
        #[arg(long)]
        preset: Option<String>,
        /// Train on the pairwise VBD of the input.
        #[arg(long)]
        vbd: bool,
        #[arg(long, default_value_t = 100)]
        epochs: usize,
        #[arg(long, default_value_t = 0.05)]
        learning_rate: f64,
        #[arg(long, default_value_t = 32)]
        batch_size: usize,
        #[arg(long, default_value_t = 0.2)]
        validation_fraction: f64,
        /// Where to write the per-epoch loss report.
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Run VBD anomaly detection and the single-threshold baseline.
    Anomaly {
        #[arg(long)]
        u: Option<usize>,
        #[arg(long)]
        w: Option<usize>,
        #[arg(long)]
        tau: Option<f64>,
    },
    /// Cross-validate one balancing method with one classifier.
    Experiment,
    /// Measure metric variance across balancing-method seeds.
    Stability {
        #[arg(long)]
        repeats: Option<usize>,
    },
}

/// Execute a parsed command line.
pub fn run(cli: Cli) -> CliResult<()> {
    let jobs = cli.global.jobs;
    let work = move || commands::dispatch(&cli);
    match jobs {
        Some(0) => Err(CliError::field("jobs", "must be at least 1")),
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| CliError::Runtime(e.to_string()))?
            .install(work),
        None => work(),
    }
}

/// Parse `args` (program name first), run, and report errors on stderr.
pub fn main_with_args<I, T>(args: I) -> ExitCode
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(e.exit_code() as u8);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

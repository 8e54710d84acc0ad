mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use binfv::bmm::EmConfig;
use binfv::normalize::{NormScheme, DEFAULT_ALPHA};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Core(#[from] binfv::Error),
    #[error("numeric check failed: {0}")]
    Numeric(String),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        use binfv::Error as E;
        match self {
            CliError::Usage(_) => 2,
            CliError::Numeric(_) => 5,
            CliError::Core(
                E::Io(_)
                | E::BadMagic { .. }
                | E::UnsupportedVersion(_)
                | E::Truncated { .. }
                | E::TrailingData(_)
                | E::NonzeroPadding(_)
                | E::Parse(_),
            ) => 4,
            CliError::Core(_) => 3,
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Core(e.into())
    }
}

pub type CliResult<T = ()> = Result<T, CliError>;

/// Bernoulli-mixture Fisher encoding of binary local descriptors, with retrieval tooling.
#[derive(Debug, Parser)]
#[command(name = "binfv", version)]
struct Cli {
    /// Cap on worker threads (default: all cores). Outputs do not depend on it.
    #[arg(long, global = true)]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Fit a Bernoulli mixture with EM.
    Train(TrainArgs),
    /// Encode feature files as Fisher vectors or bag-of-words histograms.
    Encode(EncodeArgs),
    /// Train a k-majority codebook for the bag-of-binary-words baseline.
    Codebook(CodebookArgs),
    /// Merge vector files into one index file.
    Index(IndexArgs),
    /// Rank indexed images for each query vector.
    Query(QueryArgs),
    /// Mean average precision of a manifest's queries.
    Eval(EvalArgs),
    /// Time exact against approximate encoding.
    Bench(BenchArgs),
    /// Numeric self-checks of a model.
    Verify(VerifyArgs),
    /// Write a seeded synthetic benchmark.
    Synth(SynthArgs),
    /// Convert between hex-lines text and feature files.
    Convert(ConvertArgs),
}

#[derive(Debug, Args)]
pub struct EmArgs {
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = EmConfig::default().max_iters)]
    pub max_iters: usize,
    #[arg(long, default_value_t = EmConfig::default().rel_tol)]
    pub rel_tol: f64,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// Training feature files, concatenated.
    #[arg(long, required = true, num_args = 1..)]
    pub features: Vec<PathBuf>,
    #[arg(long, short = 'n', default_value_t = 32)]
    pub components: usize,
    #[command(flatten)]
    pub em: EmArgs,
    #[arg(long, short)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct EncodeArgs {
    #[arg(long, conflicts_with = "codebook", required_unless_present = "codebook")]
    pub model: Option<PathBuf>,
    /// Encode bag-of-words histograms with this codebook instead.
    #[arg(long)]
    pub codebook: Option<PathBuf>,
    /// Feature files; each file's stem becomes its id.
    #[arg(long, num_args = 1.., required_unless_present = "manifest")]
    pub features: Vec<PathBuf>,
    /// Encode every image in a manifest under its manifest id.
    #[arg(long, conflicts_with = "features")]
    pub manifest: Option<PathBuf>,
    /// none, l2, power, power-l2 or intra. Fisher vectors only.
    #[arg(long)]
    pub norm: Option<NormScheme>,
    #[arg(long, default_value_t = DEFAULT_ALPHA)]
    pub alpha: f64,
    /// Hamming hard assignment in place of posteriors.
    #[arg(long)]
    pub approx: bool,
    /// Use only the first D' bits of every descriptor.
    #[arg(long)]
    pub bits: Option<usize>,
    #[arg(long, short)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct CodebookArgs {
    #[arg(long, required = true, num_args = 1..)]
    pub features: Vec<PathBuf>,
    #[arg(long, short, default_value_t = binfv::bovw::DEFAULT_CODEBOOK_SIZE)]
    pub k: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 100)]
    pub max_iters: usize,
    #[arg(long, short)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct IndexArgs {
    #[arg(long, required = true, num_args = 1..)]
    pub vectors: Vec<PathBuf>,
    #[arg(long, short)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct QueryArgs {
    /// Vector files forming the database.
    #[arg(long, required = true, num_args = 1..)]
    pub index: Vec<PathBuf>,
    /// Vector file holding the queries.
    #[arg(long)]
    pub queries: PathBuf,
    /// Only run the query with this id.
    #[arg(long)]
    pub id: Option<String>,
    #[arg(long, default_value_t = 10)]
    pub top: usize,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub manifest: PathBuf,
    /// Vector files covering every image in the manifest.
    #[arg(long, required = true, num_args = 1..)]
    pub vectors: Vec<PathBuf>,
    /// Also write tab-separated per-query records here.
    #[arg(long)]
    pub records: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    /// Model to time; a random one of the given shape otherwise.
    #[arg(long)]
    pub model: Option<PathBuf>,
    #[arg(long, short = 'n', default_value_t = 512)]
    pub components: usize,
    #[arg(long, default_value_t = 256)]
    pub dims: usize,
    /// Descriptors per encoded set.
    #[arg(long, short = 't', default_value_t = 900)]
    pub count: usize,
    #[arg(long, default_value_t = 20)]
    pub reps: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    /// Model to check; a random one of the given shape otherwise.
    #[arg(long)]
    pub model: Option<PathBuf>,
    #[arg(long, short = 'n', default_value_t = 3)]
    pub components: usize,
    #[arg(long, default_value_t = 8)]
    pub dims: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Descriptors sampled for the gradient check and the peakedness histogram.
    #[arg(long, short = 't', default_value_t = 500)]
    pub count: usize,
    #[arg(long, default_value_t = 10)]
    pub bins: usize,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(long, short)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 8)]
    pub classes: usize,
    #[arg(long, default_value_t = 12)]
    pub refs: usize,
    #[arg(long, default_value_t = 4)]
    pub queries: usize,
    /// Descriptors per image.
    #[arg(long, short = 't', default_value_t = 200)]
    pub count: usize,
    #[arg(long, default_value_t = 64)]
    pub dims: usize,
    #[arg(long, default_value_t = 0.05)]
    pub flip_rate: f64,
    #[arg(long, default_value_t = 0)]
    pub distractors: usize,
    #[arg(long, default_value_t = binfv::eval::SynthConfig::default().seed)]
    pub seed: u64,
    /// Size of the separate training set written to training.bfvf.
    #[arg(long, default_value_t = 20_000)]
    pub training_descriptors: usize,
    #[arg(long, default_value_t = 32)]
    pub background_classes: usize,
}

#[derive(Debug, Args)]
pub struct ConvertArgs {
    #[arg(long = "in", short)]
    pub input: PathBuf,
    #[arg(long, short)]
    pub out: PathBuf,
    /// Descriptor length for hex input; inferred from the first line otherwise.
    #[arg(long)]
    pub dims: Option<usize>,
    /// Write hex lines from a feature file instead.
    #[arg(long)]
    pub to_hex: bool,
}

fn run(cli: Cli) -> CliResult {
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(CliError::Usage("--threads must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Usage(e.to_string()))?;
    }
    eprintln!("config: threads={:?} {:?}", cli.threads, cli.command);
    match cli.command {
        Command::Train(a) => commands::train(a),
        Command::Encode(a) => commands::encode(a),
        Command::Codebook(a) => commands::codebook(a),
        Command::Index(a) => commands::index(a),
        Command::Query(a) => commands::query(a),
        Command::Eval(a) => commands::eval(a),
        Command::Bench(a) => commands::bench(a),
        Command::Verify(a) => commands::verify(a),
        Command::Synth(a) => commands::synth(a),
        Command::Convert(a) => commands::convert(a),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

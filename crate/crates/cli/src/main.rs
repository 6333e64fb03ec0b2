//! pairtok — train, apply, align with, and evaluate subword tokenizers
//! whose token probabilities are conditioned on a parallel source sentence.
//!
//! Exit codes: 0 success; 2 parallel-data or model-type contract
//! violations (mismatched line counts, wrong model kind for a mode);
//! 3 unwritable output; 1 any other error. Diagnostics go to standard
//! error only.

mod commands;
mod config;

use std::fmt;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Parser)]
#[command(name = "pairtok", version, about = "Source-conditioned subword tokenization toolkit")]
struct Cli {
    /// Record deterministic reduction in trained models. Reductions run
    /// in a fixed order regardless, so outputs are reproducible either way.
    #[arg(long, global = true)]
    deterministic: bool,
    /// Size of the worker thread pool (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train a tokenizer on a parallel corpus.
    Train(TrainArgs),
    /// Segment text with a trained model, one line per input line.
    Tokenize(TokenizeArgs),
    /// Join token lines back into plain text.
    Detokenize(DetokenizeArgs),
    /// Compute intrinsic quality metrics against a baseline tokenizer.
    Eval(EvalArgs),
    /// Emit token-level alignment links for a parallel corpus.
    Align(AlignArgs),
    /// Dump nonzero conditional probabilities as TSV.
    ExportProbs(ExportProbsArgs),
    /// Summarize a model file.
    Inspect(InspectArgs),
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ModelTypeArg {
    Paired,
    Unigram,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum VariantArg {
    Expected,
    #[value(name = "hard_em")]
    HardEm,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum TokenizeMode {
    /// Condition on the parallel source line (requires --source).
    Paired,
    /// Source-independent decoding of a paired model.
    Marginal,
    /// Plain unigram decoding of a unigram model.
    Unigram,
}

#[derive(Args)]
struct CorpusArgs {
    /// Source-side line file, parallel to --target.
    #[arg(long)]
    source: Option<PathBuf>,
    /// Target-side line file.
    #[arg(long)]
    target: Option<PathBuf>,
    /// Single source<TAB>target file instead of --source/--target.
    #[arg(long, conflicts_with_all = ["source", "target"])]
    tsv: Option<PathBuf>,
}

#[derive(Args)]
struct TrainArgs {
    #[command(flatten)]
    corpus: CorpusArgs,
    /// Kind of tokenizer to train.
    #[arg(long, value_enum, default_value_t = ModelTypeArg::Paired)]
    model_type: ModelTypeArg,
    /// Existing source tokenizer (a unigram model file).
    #[arg(long)]
    source_model: Option<PathBuf>,
    /// Train the source tokenizer from the source side first.
    #[arg(long, conflicts_with = "source_model")]
    train_source: bool,
    /// Where to save the tokenizer trained by --train-source.
    #[arg(long)]
    save_source_model: Option<PathBuf>,
    /// Target vocabulary size, single characters included.
    #[arg(long)]
    vocab_size: Option<usize>,
    /// Vocabulary size for --train-source (default: --vocab-size).
    #[arg(long)]
    source_vocab_size: Option<usize>,
    /// Longest token, in characters.
    #[arg(long)]
    max_piece_len: Option<usize>,
    /// Minimum number of count steps.
    #[arg(long)]
    iterations: Option<usize>,
    /// Count steps between pruning rounds.
    #[arg(long)]
    sub_iterations: Option<usize>,
    /// Fraction of prunable tokens kept per pruning round.
    #[arg(long)]
    shrink_factor: Option<f64>,
    /// Count re-estimation style for paired training.
    #[arg(long, value_enum)]
    variant: Option<VariantArg>,
    /// Divide expected counts by the sentence marginal.
    #[arg(long)]
    normalize_posterior: bool,
    /// Restrict conditional denominators to substrings of the target word.
    #[arg(long)]
    restrict_denominator: bool,
    /// Word-level Pharaoh alignment file (skips the built-in aligner).
    #[arg(long)]
    alignments: Option<PathBuf>,
    /// EM iterations for the built-in word aligner.
    #[arg(long)]
    align_iterations: Option<usize>,
    /// Flat JSON config file; command-line flags take precedence.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output model path.
    #[arg(long, short)]
    output: PathBuf,
}

#[derive(Args)]
struct TokenizeArgs {
    /// Trained model file.
    #[arg(long)]
    model: PathBuf,
    #[arg(long, value_enum)]
    mode: TokenizeMode,
    /// Text to segment, one sentence per line.
    #[arg(long)]
    input: PathBuf,
    /// Parallel source lines (paired mode only).
    #[arg(long)]
    source: Option<PathBuf>,
    /// Output path (default: standard output).
    #[arg(long, short)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct DetokenizeArgs {
    /// Token lines (space-separated tokens).
    #[arg(long)]
    input: PathBuf,
    #[arg(long, short)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct EvalArgs {
    /// Model under evaluation.
    #[arg(long)]
    model: PathBuf,
    /// Reference tokenizer for the ratio metrics.
    #[arg(long)]
    baseline: PathBuf,
    #[command(flatten)]
    corpus: CorpusArgs,
    /// Token-level Pharaoh links for the alignment quality metrics.
    #[arg(long)]
    alignments: Option<PathBuf>,
    /// Rényi entropy order.
    #[arg(long)]
    renyi_alpha: Option<f64>,
    /// Flat JSON config file; command-line flags take precedence.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, short)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct AlignArgs {
    /// Trained paired model.
    #[arg(long)]
    model: PathBuf,
    #[command(flatten)]
    corpus: CorpusArgs,
    #[arg(long, short)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct ExportProbsArgs {
    /// Trained paired model.
    #[arg(long)]
    model: PathBuf,
    #[arg(long, short)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct InspectArgs {
    /// Model file of either kind.
    #[arg(long)]
    model: PathBuf,
    #[arg(long, short)]
    output: Option<PathBuf>,
}

/// Errors carry the exit code of the failure class.
#[derive(Debug)]
enum CliError {
    /// Exit 2: the inputs violate a data or model-type contract.
    Contract(String),
    /// Exit 3: the requested output cannot be written.
    Output(String),
    /// Exit 1: anything else.
    Other(anyhow::Error),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Contract(_) => 2,
            CliError::Output(_) => 3,
            CliError::Other(_) => 1,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Contract(msg) | CliError::Output(msg) => f.write_str(msg),
            CliError::Other(err) => write!(f, "{err:#}"),
        }
    }
}

impl From<anyhow::Error> for CliError {
    fn from(err: anyhow::Error) -> Self {
        CliError::Other(err)
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    if let Some(threads) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
            .map_err(|e| CliError::Other(anyhow::anyhow!("cannot size the thread pool: {e}")))?;
    }
    match cli.command {
        Command::Train(args) => commands::train(args, cli.deterministic),
        Command::Tokenize(args) => commands::tokenize(args),
        Command::Detokenize(args) => commands::detokenize(args),
        Command::Eval(args) => commands::eval(args),
        Command::Align(args) => commands::align(args),
        Command::ExportProbs(args) => commands::export_probs(args),
        Command::Inspect(args) => commands::inspect(args),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(err.exit_code())
        }
    }
}

//! `misinfo`: batch command line for the misinformation detection pipeline.
//!
//! Exit codes: 0 success, 2 data error, 64 usage error, 70 internal error.

mod commands;
mod pipeline;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use misinfo_core::arabic_text::StemmerKind;
use misinfo_core::{Error, FeatureKind, ModelKind, RunConfig};

pub const EXIT_DATA: u8 = 2;
pub const EXIT_USAGE: u8 = 64;
pub const EXIT_INTERNAL: u8 = 70;

/// Errors raised by the command layer itself.
#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Data(String),
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Usage(m) | CliError::Data(m) => f.write_str(m),
        }
    }
}

impl std::error::Error for CliError {}

#[derive(Parser)]
#[command(name = "misinfo", version, about = "Arabic misinformation detection pipeline")]
struct Cli {
    /// Run configuration (TOML); command-line flags override its values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Seed for every random choice of the run.
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone, Default)]
pub struct InputArgs {
    /// Labeled corpus (JSONL, or TSV with a .tsv extension).
    #[arg(long)]
    pub corpus: Option<PathBuf>,
    /// Tokens produced by `preprocess`; skips preprocessing when given.
    #[arg(long)]
    pub tokens: Option<PathBuf>,
    /// Stop-word list, one word per line.
    #[arg(long)]
    pub stoplist: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub stemmer: Option<StemmerArg>,
}

#[derive(Clone, Copy, ValueEnum)]
pub enum StemmerArg {
    Light,
    None,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModelArg {
    Nb,
    Sgd,
    Svm,
    Rf,
    Gbt,
    Cnn,
}

impl ModelArg {
    pub fn classical(self) -> Option<ModelKind> {
        Some(match self {
            ModelArg::Nb => ModelKind::Nb,
            ModelArg::Sgd => ModelKind::Sgd,
            ModelArg::Svm => ModelKind::Svm,
            ModelArg::Rf => ModelKind::Rf,
            ModelArg::Gbt => ModelKind::Gbt,
            ModelArg::Cnn => return None,
        })
    }
}

#[derive(Clone, Copy, ValueEnum)]
pub enum FeatureArg {
    TfidfUni,
    TfidfNgram,
    Cbow,
    Fasttext,
}

impl From<FeatureArg> for FeatureKind {
    fn from(f: FeatureArg) -> Self {
        match f {
            FeatureArg::TfidfUni => FeatureKind::TfidfUni,
            FeatureArg::TfidfNgram => FeatureKind::TfidfNgram,
            FeatureArg::Cbow => FeatureKind::Cbow,
            FeatureArg::Fasttext => FeatureKind::Fasttext,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
pub enum EmbedModeArg {
    Cbow,
    Fasttext,
}

#[derive(Clone, Copy, ValueEnum)]
pub enum EmbedInitArg {
    Random,
    Cbow,
    Fasttext,
}

#[derive(Clone, Copy, ValueEnum)]
pub enum LossArg {
    Ce,
    Auc,
}

#[derive(Subcommand)]
pub enum Command {
    /// Clean, normalize, tokenize, remove stop words and stem a corpus.
    Preprocess {
        #[command(flatten)]
        input: InputArgs,
        /// Output tokens file (JSONL with id and tokens).
        #[arg(long)]
        out: PathBuf,
    },
    /// Train CBOW or subword word vectors.
    EmbedTrain {
        #[command(flatten)]
        input: InputArgs,
        #[arg(long, value_enum, default_value = "cbow")]
        mode: EmbedModeArg,
        #[arg(long)]
        dim: Option<usize>,
        #[arg(long)]
        window: Option<usize>,
        #[arg(long)]
        epochs: Option<usize>,
        #[arg(long)]
        min_count: Option<usize>,
        #[arg(long)]
        negatives: Option<usize>,
        /// Output vectors file (text format).
        #[arg(long)]
        out: PathBuf,
    },
    /// Fit a representation on the whole corpus and write libsvm-style rows.
    Featurize {
        #[command(flatten)]
        input: InputArgs,
        #[arg(long, value_enum)]
        features: Option<FeatureArg>,
        /// Pretrained vectors for cbow/fasttext features.
        #[arg(long)]
        embeddings: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Split, featurize, train and evaluate on the held-out part.
    Train {
        #[command(flatten)]
        input: InputArgs,
        #[arg(long, value_enum)]
        model: Option<ModelArg>,
        #[arg(long, value_enum)]
        features: Option<FeatureArg>,
        /// JSON object of hyperparameter overrides.
        #[arg(long)]
        params: Option<PathBuf>,
        #[arg(long)]
        embeddings: Option<PathBuf>,
        /// CNN embedding initialization.
        #[arg(long, value_enum)]
        embed_init: Option<EmbedInitArg>,
        /// CNN training loss.
        #[arg(long, value_enum)]
        loss: Option<LossArg>,
        /// CNN epochs.
        #[arg(long)]
        epochs: Option<usize>,
        #[arg(long)]
        out_dir: PathBuf,
    },
    /// Cross-validated grid search on the training part, then test evaluation.
    GridSearch {
        #[command(flatten)]
        input: InputArgs,
        #[arg(long, value_enum)]
        model: Option<ModelArg>,
        #[arg(long, value_enum)]
        features: Option<FeatureArg>,
        /// JSON object mapping parameter names to lists of values.
        #[arg(long)]
        grid: PathBuf,
        #[arg(long)]
        embeddings: Option<PathBuf>,
        #[arg(long, default_value_t = 5)]
        folds: usize,
        #[arg(long)]
        out_dir: PathBuf,
    },
    /// Score a corpus with a trained run directory.
    Evaluate {
        /// Output directory of `train` or `grid-search`.
        #[arg(long)]
        run: PathBuf,
        #[command(flatten)]
        input: InputArgs,
        #[arg(long)]
        out_dir: PathBuf,
    },
    /// Print a JSON summary of a corpus.
    Stats {
        #[command(flatten)]
        input: InputArgs,
    },
    /// Collect the metrics of several runs into one CSV table.
    Report {
        #[arg(required = true)]
        runs: Vec<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

/// Loads the config file (or defaults) and applies the shared overrides.
pub fn resolve_config(config: Option<&PathBuf>, seed: Option<u64>, input: &InputArgs) -> anyhow::Result<RunConfig> {
    let mut cfg = match config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if let Some(s) = seed {
        cfg.seed = s;
    }
    if let Some(c) = &input.corpus {
        cfg.paths.corpus = Some(c.clone());
    }
    if let Some(s) = &input.stoplist {
        cfg.paths.stoplist = Some(s.clone());
    }
    if let Some(s) = input.stemmer {
        cfg.preprocess.stemmer = match s {
            StemmerArg::Light => StemmerKind::Light,
            StemmerArg::None => StemmerKind::None,
        };
    }
    Ok(cfg)
}

fn exit_code(err: &anyhow::Error) -> u8 {
    for cause in err.chain() {
        if let Some(e) = cause.downcast_ref::<CliError>() {
            return match e {
                CliError::Usage(_) => EXIT_USAGE,
                CliError::Data(_) => EXIT_DATA,
            };
        }
        if let Some(e) = cause.downcast_ref::<Error>() {
            return match e {
                Error::Config(_) => EXIT_USAGE,
                Error::Io { .. }
                | Error::Parse { .. }
                | Error::Validation(_)
                | Error::DimensionMismatch { .. }
                | Error::AucUndefined
                | Error::Json(_) => EXIT_DATA,
                Error::Numerical(_) | Error::NotConverged(_) => EXIT_INTERNAL,
            };
        }
        if cause.downcast_ref::<serde_json::Error>().is_some() || cause.downcast_ref::<std::io::Error>().is_some() {
            return EXIT_DATA;
        }
    }
    EXIT_INTERNAL
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(EXIT_USAGE) } else { ExitCode::SUCCESS };
        }
    };
    match commands::run(cli.command, cli.config.as_ref(), cli.seed) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}

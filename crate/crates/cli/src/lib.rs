//! The `fsmt` command line: label, curate, classify, score and run the toy
//! formality-control model.
//!
//! Exit codes are 0 on success, 1 on domain errors (with a JSON object
//! `{"error": ..., "message": ...}` on stderr) and 2 on usage errors.

mod commands;
mod config;
mod manifest;
mod report;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

pub use manifest::{FileDigest, RunManifest};
pub use report::{corpus_stats, render_report, CorpusStats, ScoreSummary};

#[derive(Debug, Parser)]
#[command(name = "fsmt", version, about = "Formality-sensitive MT toolkit")]
pub struct Cli {
    /// TOML file with a `seed`, a `workers` default and one table per
    /// subcommand. Flags override it.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Where to write the run manifest. Defaults to the primary output path
    /// with `.manifest.json` appended.
    #[arg(long, global = true)]
    pub manifest: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Label targets with a rule file and write the records back with a
    /// `formality` field.
    Label(LabelArgs),
    /// Label, deduplicate and cap a bitext into training triplets.
    Curate(CurateArgs),
    /// Train the character n-gram formality classifier.
    TrainClassifier(TrainClassifierArgs),
    /// Score targets with a trained classifier.
    Predict(PredictArgs),
    /// Formality accuracy, BLEU and TER of hypotheses against annotated
    /// references.
    Score(ScoreArgs),
    /// Mean TER (no shifts) of hypotheses against references.
    Ter(PairArgs),
    /// Corpus BLEU of hypotheses against references.
    Bleu(BleuArgs),
    /// Generate the synthetic contrastive toy language.
    ToyGen(ToyGenArgs),
    /// Train the toy style-vector model.
    ToyTrain(ToyTrainArgs),
    /// Decode held-out toy pairs at both levels and score them.
    ToyEval(ToyEvalArgs),
    /// Markdown summary of manifests, score reports and corpora.
    Report(ReportArgs),
}

#[derive(Debug, Args)]
pub struct LabelArgs {
    #[arg(long)]
    pub lang: Option<String>,
    /// Rule file; the built-in rules for `--lang` otherwise.
    #[arg(long)]
    pub rules: Option<PathBuf>,
    /// JSONL bitext, or TSV `source<TAB>target` with a `.tsv` extension.
    #[arg(long = "in")]
    pub input: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub workers: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum LabelerArg {
    Rules,
    Classifier,
    External,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum CapModeArg {
    First,
    Reservoir,
}

#[derive(Debug, Args)]
pub struct CurateArgs {
    #[arg(long = "in")]
    pub input: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Languages to keep; repeat or comma-separate.
    #[arg(long, value_delimiter = ',')]
    pub lang: Vec<String>,
    #[arg(long, value_enum)]
    pub labeler: Option<LabelerArg>,
    /// Rule files used instead of the built-in ones.
    #[arg(long)]
    pub rules: Vec<PathBuf>,
    /// Classifier model for `--labeler classifier`.
    #[arg(long)]
    pub model: Option<PathBuf>,
    /// JSONL `{id, p_formal}` for `--labeler external`.
    #[arg(long)]
    pub scores: Option<PathBuf>,
    #[arg(long)]
    pub cap: Option<usize>,
    #[arg(long, value_enum)]
    pub cap_mode: Option<CapModeArg>,
    #[arg(long)]
    pub formal_threshold: Option<f64>,
    #[arg(long)]
    pub informal_threshold: Option<f64>,
    #[arg(long)]
    pub no_dedup: bool,
    #[arg(long)]
    pub workers: Option<usize>,
    /// Curation report; printed to stdout otherwise.
    #[arg(long)]
    pub report: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct TrainClassifierArgs {
    /// JSONL bitext whose records carry a `formality` label.
    #[arg(long = "in")]
    pub input: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub lang: Option<String>,
    #[arg(long)]
    pub dev: Option<PathBuf>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub hash_bits: Option<u32>,
    #[arg(long)]
    pub learning_rate: Option<f64>,
}

#[derive(Debug, Args)]
pub struct PredictArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long = "in")]
    pub input: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub lang: Option<String>,
    #[arg(long)]
    pub formal_threshold: Option<f64>,
    #[arg(long)]
    pub informal_threshold: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum TargetArg {
    Formal,
    Informal,
}

#[derive(Debug, Args)]
pub struct ScoreArgs {
    /// One hypothesis per line.
    #[arg(long)]
    pub hyp: PathBuf,
    /// One `[F]...[/F]`-annotated formal reference per line.
    #[arg(long)]
    pub formal_ref: PathBuf,
    #[arg(long)]
    pub informal_ref: PathBuf,
    #[arg(long, value_enum)]
    pub target: TargetArg,
    /// Target language; selects the scoring tokenizer.
    #[arg(long)]
    pub lang: Option<String>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct PairArgs {
    #[arg(long)]
    pub hyp: PathBuf,
    #[arg(long = "ref")]
    pub reference: PathBuf,
    #[arg(long)]
    pub lang: Option<String>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct BleuArgs {
    #[command(flatten)]
    pub pair: PairArgs,
    /// `13a` or `none`; overrides the choice made by `--lang`.
    #[arg(long)]
    pub tokenize: Option<String>,
}

#[derive(Debug, Args)]
pub struct ToyGenArgs {
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long)]
    pub neutral_fraction: Option<f64>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum PairingArg {
    Paired,
    Unpaired,
}

#[derive(Debug, Args)]
pub struct ToyTrainArgs {
    /// Paired JSONL as written by `toy-gen`.
    #[arg(long = "in")]
    pub input: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Per-epoch metrics JSONL; printed to stdout otherwise.
    #[arg(long)]
    pub metrics: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub pairing: Option<PairingArg>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    #[arg(long)]
    pub learning_rate: Option<f64>,
    #[arg(long)]
    pub mask_prob: Option<f64>,
    /// Paired JSONL of gold data; enables the second training stage.
    #[arg(long)]
    pub gold: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ToyEvalArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long = "in")]
    pub input: PathBuf,
    /// Receives hypotheses, annotated references and `eval.json`.
    #[arg(long)]
    pub out_dir: PathBuf,
    #[arg(long)]
    pub max_len: Option<usize>,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    #[arg(long = "run")]
    pub runs: Vec<PathBuf>,
    #[arg(long = "score")]
    pub scores: Vec<PathBuf>,
    /// Paired JSONL corpora to describe.
    #[arg(long = "corpus")]
    pub corpora: Vec<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{path}: {message}")]
    Io { path: PathBuf, message: String },
    #[error("{path}: {message}")]
    Parse { path: PathBuf, message: String },
    #[error("{message}")]
    Domain { name: &'static str, message: String },
}

impl CliError {
    pub fn name(&self) -> &'static str {
        match self {
            CliError::Usage(_) => "Usage",
            CliError::Io { .. } => "Io",
            CliError::Parse { .. } => "ParseError",
            CliError::Domain { name, .. } => name,
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            _ => 1,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::json!({ "error": self.name(), "message": self.to_string() }).to_string()
    }
}

macro_rules! domain_error {
    ($($t:ty),*) => {$(
        impl From<$t> for CliError {
            fn from(e: $t) -> Self {
                CliError::Domain { name: e.name(), message: e.to_string() }
            }
        }
    )*};
}

domain_error!(
    fsmt_core::metrics::MetricsError,
    fsmt_core::rules::RulesError,
    fsmt_core::classifier::ClassifierError,
    fsmt_core::curation::CurationError,
    fsmt_core::intervention::InterventionError
);

fn init_logging() {
    let env = env_logger::Env::new().filter_or("FSMT_LOG", "warn");
    let _ = env_logger::Builder::from_env(env).format_timestamp(None).try_init();
}

/// Runs one command line and returns the process exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    init_logging();
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    match commands::dispatch(cli) {
        Ok(()) => 0,
        Err(e) => {
            log::debug!("{e:?}");
            eprintln!("{}", e.to_json());
            e.exit_code()
        }
    }
}

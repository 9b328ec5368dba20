use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(name = "ccvec", version, about = "Learn and use distributed representations of code changes")]
pub struct Cli {
    /// Where to write the resolved run configuration. Defaults to
    /// `<out>.config.json`, or `ccvec-<command>.config.json` without an output.
    #[arg(long, global = true)]
    pub sidecar: Option<PathBuf>,

    /// Only log warnings and errors.
    #[arg(long, short, global = true)]
    pub quiet: bool,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Convert line-aligned diff/message files into a JSONL corpus.
    Ingest(IngestArgs),
    /// Build code and message vocabularies from a corpus.
    Vocab(VocabArgs),
    /// Train a model and write a checkpoint.
    Train(TrainArgs),
    /// Extract code-change vectors.
    Embed(EmbedArgs),
    /// Retrieve a log message for every query patch.
    Retrieve(RetrieveArgs),
    /// Corpus BLEU-4 of retrieved or generated messages.
    EvalBleu(EvalBleuArgs),
    /// Classification metrics for scores, or for a linear probe on features.
    EvalCls(EvalClsArgs),
    /// Compare analytic gradients with finite differences on a small model.
    GradCheck(GradCheckArgs),
}

#[derive(Debug, Args)]
pub struct IngestArgs {
    /// One unified diff per line, newlines replaced by the marker.
    #[arg(long)]
    pub diff: PathBuf,
    /// One log message per line.
    #[arg(long)]
    pub msg: PathBuf,
    #[arg(long, default_value = ccvec_core::corpus::DEFAULT_NEWLINE_MARKER)]
    pub newline_marker: String,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args, serde::Serialize)]
pub struct VocabSettings {
    #[arg(long, default_value_t = 1)]
    pub code_min_count: usize,
    #[arg(long, default_value_t = 1)]
    pub msg_min_count: usize,
    #[arg(long, default_value_t = 10_000)]
    pub msg_max_size: usize,
}

#[derive(Debug, Args)]
pub struct VocabArgs {
    #[arg(long)]
    pub corpus: PathBuf,
    #[command(flatten)]
    pub settings: VocabSettings,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Ablation {
    /// Concatenate e_r and e_a, no comparison functions.
    All,
}

/// Overrides for every training and model setting; unset flags keep the
/// value from `--config` or the default.
#[derive(Debug, Clone, Default, Args)]
pub struct ConfigOverrides {
    /// JSON training configuration, or a sidecar written by an earlier run.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub learning_rate: Option<f64>,
    #[arg(long)]
    pub adam_beta1: Option<f64>,
    #[arg(long)]
    pub adam_beta2: Option<f64>,
    #[arg(long)]
    pub adam_eps: Option<f64>,
    /// L2 coefficient.
    #[arg(long)]
    pub lambda: Option<f64>,
    #[arg(long)]
    pub dropout_rate: Option<f64>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Global gradient-norm clip.
    #[arg(long, conflicts_with = "no_clip")]
    pub clip_norm: Option<f64>,
    #[arg(long)]
    pub no_clip: bool,
    /// Max files per patch (F).
    #[arg(long)]
    pub files: Option<usize>,
    /// Max hunks per file (H).
    #[arg(long)]
    pub hunks: Option<usize>,
    /// Max lines per hunk (L).
    #[arg(long)]
    pub lines: Option<usize>,
    /// Max tokens per line (W).
    #[arg(long)]
    pub words: Option<usize>,
    #[arg(long)]
    pub embed_dim: Option<usize>,
    #[arg(long)]
    pub gru_hidden: Option<usize>,
    #[arg(long)]
    pub ntn_slices: Option<usize>,
    #[arg(long)]
    pub hidden_dim: Option<usize>,
    /// Comparison functions to turn off: any of nt,nn,sim,sub,mul.
    #[arg(long, value_delimiter = ',')]
    pub disable: Vec<String>,
    /// `all` drops every comparison function and concatenates e_r and e_a.
    #[arg(long, value_enum, conflicts_with = "disable")]
    pub ablation: Option<Ablation>,
    #[arg(long)]
    pub unshare_sides: bool,
    #[arg(long)]
    pub mask_padding: bool,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[arg(long)]
    pub corpus: PathBuf,
    /// Additional corpora trained on together with `--corpus`, e.g. the
    /// evaluation split when vectors are only used as features downstream.
    #[arg(long)]
    pub extra_corpus: Vec<PathBuf>,
    /// Prebuilt vocabularies from `ccvec vocab`; built from the training
    /// patches otherwise.
    #[arg(long)]
    pub vocab: Option<PathBuf>,
    #[command(flatten)]
    pub vocab_settings: VocabSettings,
    #[command(flatten)]
    pub overrides: ConfigOverrides,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, serde::Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Jsonl,
    Csv,
}

#[derive(Debug, Args)]
pub struct EmbedArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub corpus: PathBuf,
    #[arg(long, value_enum, default_value = "jsonl")]
    pub format: Format,
    /// Also emit per-file vectors (JSONL only).
    #[arg(long)]
    pub per_file: bool,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, serde::Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    /// Nearest neighbours by learned vectors.
    Loggen,
    /// Nearest neighbours by bags of code tokens.
    Nngen,
}

#[derive(Debug, Args)]
pub struct RetrieveArgs {
    /// Required for `--method loggen`.
    #[arg(long)]
    pub model: Option<PathBuf>,
    /// Corpus whose messages are reused.
    #[arg(long)]
    pub index: PathBuf,
    #[arg(long)]
    pub query: PathBuf,
    #[arg(long, default_value_t = 5)]
    pub k: usize,
    /// Take the nearest neighbour without BLEU re-ranking.
    #[arg(long)]
    pub no_bleu_stage: bool,
    #[arg(long, value_enum, default_value = "loggen")]
    pub method: Method,
    /// Results file; stdout when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EvalBleuArgs {
    /// Retrieval results (JSONL) to score against `--reference`.
    #[arg(long, requires = "reference", conflicts_with_all = ["hyp", "ref_file"])]
    pub results: Option<PathBuf>,
    /// Corpus holding the true messages, matched on patch id.
    #[arg(long)]
    pub reference: Option<PathBuf>,
    /// Candidate messages, one per line.
    #[arg(long, requires = "ref_file")]
    pub hyp: Option<PathBuf>,
    /// Reference messages, one per line.
    #[arg(long = "ref", id = "ref_file")]
    pub ref_file: Option<PathBuf>,
    /// Write the report here as well as to stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EvalClsArgs {
    /// CSV with `label` and `score` columns.
    #[arg(long, conflicts_with_all = ["features", "labels"])]
    pub scores: Option<PathBuf>,
    /// Exported JSONL features for a linear probe.
    #[arg(long, requires = "labels")]
    pub features: Option<PathBuf>,
    /// CSV with `id` and `label` columns for `--features`.
    #[arg(long)]
    pub labels: Option<PathBuf>,
    /// Leading share of labelled rows used to fit the probe; the rest is scored.
    #[arg(long, default_value_t = 0.8)]
    pub train_fraction: f64,
    #[arg(long, default_value_t = 0.5)]
    pub threshold: f64,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct GradCheckArgs {
    /// Corpus to draw the batch from; a synthetic corpus otherwise.
    #[arg(long)]
    pub corpus: Option<PathBuf>,
    /// Patches in the checked batch.
    #[arg(long, default_value_t = 3)]
    pub patches: usize,
    #[arg(long, default_value_t = 1e-3)]
    pub tolerance: f64,
    /// Uniform noise added to every parameter before checking.
    #[arg(long, default_value_t = 0.1)]
    pub jitter: f64,
    /// Model settings; the defaults describe a toy model
    /// (F=2, H=2, L=2, W=4, d=8, g=4, z=4, hidden=8).
    #[command(flatten)]
    pub overrides: ConfigOverrides,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

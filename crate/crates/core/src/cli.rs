//! The `rlid` command line.
//!
//! ```text
//! rlid generate   corpus + translations + tables  -> dataset.tsv
//! rlid split      dataset.tsv                      -> train.tsv, validation.tsv
//! rlid vocab      train.tsv                        -> vocab.json
//! rlid train      train.tsv, validation.tsv, vocab -> model.ckpt
//! rlid eval       model.ckpt + labeled TSV         -> metrics
//! rlid predict    model.ckpt + --text or stdin     -> "label probability" lines
//! rlid inspect    model.ckpt                       -> config and tensor manifest
//! ```
//!
//! Settings come from built-in defaults, then an optional TOML file given
//! with `--config`, then flags. Exit codes: 0 success, 1 usage, 2 data or
//! file error, 3 numeric failure.

use std::collections::{BTreeMap, HashMap};
use std::ffi::OsString;
use std::fmt::Display;
use std::fs;
use std::io::{self, BufRead, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Duration;

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{
    filter_sentences, generate_dataset, load_corpus, read_dataset, split_dataset, write_dataset, Charset, CorpusError,
    CorpusFormat, DatasetSplit, FilterRules, LabelSet, OnProviderError, ENGLISH,
};
use crate::eval::{self, Classifier, EvalError, LanguageClassifier};
use crate::model::{init_parameters, ModelConfig, ModelError};
use crate::provider::{ProviderConfig, ProviderKind};
use crate::seed;
use crate::tokenizer::{build_vocab, Vocabulary};
use crate::train::{load_checkpoint, save_checkpoint, train_with_progress, Checkpoint, TrainConfig, TrainError};
use crate::translit::load_table;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Data(String),
    #[error("{0}")]
    Numeric(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Data(_) => 2,
            CliError::Numeric(_) => 3,
        }
    }
}

fn data_err(e: impl Display) -> CliError {
    CliError::Data(e.to_string())
}

impl From<CorpusError> for CliError {
    fn from(e: CorpusError) -> Self {
        match e {
            CorpusError::Ratio(_) | CorpusError::Rules(_) | CorpusError::Labels(_) | CorpusError::UnknownFormat(_) => {
                CliError::Usage(e.to_string())
            }
            _ => data_err(e),
        }
    }
}

impl From<ModelError> for CliError {
    fn from(e: ModelError) -> Self {
        match e {
            ModelError::InvalidConfig(_) => CliError::Usage(e.to_string()),
            _ => data_err(e),
        }
    }
}

impl From<TrainError> for CliError {
    fn from(e: TrainError) -> Self {
        match e {
            _ if e.is_numeric() => CliError::Numeric(e.to_string()),
            TrainError::InvalidConfig(_) => CliError::Usage(e.to_string()),
            TrainError::Model(m) => m.into(),
            _ => data_err(e),
        }
    }
}

impl From<EvalError> for CliError {
    fn from(e: EvalError) -> Self {
        match e {
            EvalError::Model(m) => m.into(),
            _ => data_err(e),
        }
    }
}

// ---------------------------------------------------------------- config

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CorpusSection {
    pub path: PathBuf,
    /// `plain-lines` or `tsv-column`.
    pub format: String,
    pub column: usize,
    pub min_chars: usize,
    pub max_chars: usize,
    /// `romanized` or `any`.
    pub charset: String,
    pub dedup: bool,
}

impl Default for CorpusSection {
    fn default() -> Self {
        let rules = FilterRules::default();
        CorpusSection {
            path: crate::data_dir().join("corpus/sms_messages.txt"),
            format: "plain-lines".into(),
            column: 0,
            min_chars: rules.min_chars,
            max_chars: rules.max_chars,
            charset: "romanized".into(),
            dedup: rules.dedup,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProviderSection {
    /// `fixture` or `http`.
    pub kind: String,
    pub fixtures: PathBuf,
    pub endpoint: Option<String>,
    pub api_key_env: Option<String>,
    pub cache_dir: Option<PathBuf>,
    pub timeout_secs: u64,
    pub max_retries: u32,
    /// `abort` or `skip`.
    pub on_error: String,
}

impl Default for ProviderSection {
    fn default() -> Self {
        ProviderSection {
            kind: "fixture".into(),
            fixtures: crate::data_dir().join("fixtures/translations.tsv"),
            endpoint: None,
            api_key_env: None,
            cache_dir: None,
            timeout_secs: 30,
            max_retries: 3,
            on_error: "abort".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PathsSection {
    pub dataset: PathBuf,
    pub train: PathBuf,
    pub validation: PathBuf,
    pub vocab: PathBuf,
    pub checkpoint: PathBuf,
    pub history: Option<PathBuf>,
}

impl Default for PathsSection {
    fn default() -> Self {
        PathsSection {
            dataset: "dataset.tsv".into(),
            train: "train.tsv".into(),
            validation: "validation.tsv".into(),
            vocab: "vocab.json".into(),
            checkpoint: "model.ckpt".into(),
            history: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelSection {
    pub hidden_dim: usize,
    pub n_layers: usize,
    pub n_heads: usize,
    pub ff_dim: usize,
    pub max_len: usize,
    pub dropout_rate: f64,
}

impl Default for ModelSection {
    fn default() -> Self {
        let d = ModelConfig::desk_scale(5, 2);
        ModelSection {
            hidden_dim: d.hidden_dim,
            n_layers: d.n_layers,
            n_heads: d.n_heads,
            ff_dim: d.ff_dim,
            max_len: d.max_len,
            dropout_rate: d.dropout_rate,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainSection {
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub weight_decay: f64,
}

impl Default for TrainSection {
    fn default() -> Self {
        let t = TrainConfig::default();
        TrainSection {
            learning_rate: t.learning_rate,
            epochs: t.epochs,
            batch_size: t.batch_size,
            beta1: t.beta1,
            beta2: t.beta2,
            epsilon: t.epsilon,
            weight_decay: t.weight_decay,
        }
    }
}

/// Everything a run needs, merged from defaults, the config file and flags.
///
/// The single `seed` is fanned out per stage with [`seed::derive`]: `"split"`
/// for the shuffle, `"init"` for parameter initialization and `"train"` for
/// batch order and dropout.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    pub labels: Vec<String>,
    pub split_ratio: f64,
    pub vocab_max_size: usize,
    pub corpus: CorpusSection,
    pub provider: ProviderSection,
    /// Transliteration table per non-English label.
    pub tables: BTreeMap<String, PathBuf>,
    pub paths: PathsSection,
    pub model: ModelSection,
    pub train: TrainSection,
}

impl Default for RunConfig {
    fn default() -> Self {
        let tables = crate::tables_dir();
        RunConfig {
            seed: 42,
            labels: LabelSet::default().names(),
            split_ratio: 0.8,
            vocab_max_size: 128,
            corpus: CorpusSection::default(),
            provider: ProviderSection::default(),
            tables: BTreeMap::from([
                ("hindi".to_string(), tables.join("devanagari.tsv")),
                ("russian".to_string(), tables.join("cyrillic.tsv")),
            ]),
            paths: PathsSection::default(),
            model: ModelSection::default(),
            train: TrainSection::default(),
        }
    }
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| CliError::Usage(format!("config: {e}")))
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = fs::read_to_string(path).map_err(|e| data_err(format!("{}: {e}", path.display())))?;
        Self::from_toml(&text).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn label_set(&self) -> Result<LabelSet, CliError> {
        Ok(LabelSet::new(&self.labels)?)
    }

    pub fn filter_rules(&self) -> Result<FilterRules, CliError> {
        let charset = match self.corpus.charset.as_str() {
            "romanized" => Charset::Romanized,
            "any" => Charset::Any,
            other => {
                return Err(CliError::Usage(format!(
                    "unknown charset {other:?} (expected romanized or any)"
                )))
            }
        };
        let rules = FilterRules {
            min_chars: self.corpus.min_chars,
            max_chars: self.corpus.max_chars,
            charset,
            dedup: self.corpus.dedup,
        };
        rules.validate()?;
        Ok(rules)
    }

    pub fn corpus_format(&self) -> Result<CorpusFormat, CliError> {
        Ok(CorpusFormat::from_tag(&self.corpus.format, self.corpus.column)?)
    }

    pub fn on_provider_error(&self) -> Result<OnProviderError, CliError> {
        match self.provider.on_error.as_str() {
            "abort" => Ok(OnProviderError::Abort),
            "skip" => Ok(OnProviderError::Skip),
            other => Err(CliError::Usage(format!(
                "unknown on_error policy {other:?} (expected abort or skip)"
            ))),
        }
    }

    pub fn provider_config(&self) -> Result<ProviderConfig, CliError> {
        let p = &self.provider;
        let mut config = match p.kind.as_str() {
            "fixture" => ProviderConfig::fixture(&p.fixtures),
            "http" => ProviderConfig::http(
                p.endpoint
                    .clone()
                    .ok_or_else(|| CliError::Usage("the http provider needs an endpoint".into()))?,
            ),
            other => {
                return Err(CliError::Usage(format!(
                    "unknown provider {other:?} (expected fixture or http)"
                )))
            }
        };
        config.api_key_env = p.api_key_env.clone();
        config.cache_dir = p.cache_dir.clone();
        config.timeout = Duration::from_secs(p.timeout_secs);
        config.max_retries = p.max_retries;
        Ok(config)
    }

    pub fn model_config(&self, vocab_size: usize, n_classes: usize) -> Result<ModelConfig, CliError> {
        let m = &self.model;
        let config = ModelConfig {
            vocab_size,
            hidden_dim: m.hidden_dim,
            n_layers: m.n_layers,
            n_heads: m.n_heads,
            ff_dim: m.ff_dim,
            max_len: m.max_len,
            n_classes,
            dropout_rate: m.dropout_rate,
        };
        config.validate()?;
        Ok(config)
    }

    pub fn train_config(&self) -> Result<TrainConfig, CliError> {
        let t = &self.train;
        let config = TrainConfig {
            learning_rate: t.learning_rate,
            epochs: t.epochs,
            batch_size: t.batch_size,
            seed: seed::derive(self.seed, "train"),
            beta1: t.beta1,
            beta2: t.beta2,
            epsilon: t.epsilon,
            weight_decay: t.weight_decay,
        };
        config.validate()?;
        Ok(config)
    }
}

// ----------------------------------------------------------------- flags

#[derive(Debug, Parser)]
#[command(name = "rlid", version, about = "Language identification for romanized text")]
pub struct Cli {
    /// TOML file with run settings; flags override it.
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,
    /// Run seed, fanned out to the split, init and train stages [default: 42].
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Translate and transliterate the corpus into a labeled dataset.
    Generate(GenerateArgs),
    /// Shuffle a dataset into train and validation files.
    Split(SplitArgs),
    /// Build the character vocabulary from a training file.
    Vocab(VocabArgs),
    /// Train the transformer and write a checkpoint.
    Train(TrainArgs),
    /// Score a checkpoint on a labeled file.
    Eval(EvalArgs),
    /// Print "label probability" for each input line.
    Predict(PredictArgs),
    /// Show a checkpoint's config, labels and tensor manifest.
    Inspect(InspectArgs),
}

#[derive(Debug, Args)]
pub struct GenerateArgs {
    #[arg(long)]
    pub corpus: Option<PathBuf>,
    /// plain-lines or tsv-column.
    #[arg(long)]
    pub corpus_format: Option<String>,
    /// Text column for tsv-column corpora (0-based).
    #[arg(long)]
    pub corpus_column: Option<usize>,
    /// Comma-separated class names, English first if present.
    #[arg(long, value_delimiter = ',')]
    pub labels: Option<Vec<String>>,
    /// Transliteration table for a label, as LABEL=PATH. Repeatable.
    #[arg(long = "table", value_name = "LABEL=PATH")]
    pub tables: Vec<String>,
    /// fixture or http.
    #[arg(long)]
    pub provider: Option<String>,
    #[arg(long)]
    pub fixtures: Option<PathBuf>,
    #[arg(long)]
    pub endpoint: Option<String>,
    /// Environment variable that holds the API key.
    #[arg(long)]
    pub api_key_env: Option<String>,
    #[arg(long)]
    pub cache_dir: Option<PathBuf>,
    /// abort or skip.
    #[arg(long)]
    pub on_provider_error: Option<String>,
    #[arg(long, short)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SplitArgs {
    #[arg(long)]
    pub dataset: Option<PathBuf>,
    /// Fraction of records that go to training.
    #[arg(long)]
    pub ratio: Option<f64>,
    #[arg(long)]
    pub train_out: Option<PathBuf>,
    #[arg(long)]
    pub validation_out: Option<PathBuf>,
    #[arg(long, value_delimiter = ',')]
    pub labels: Option<Vec<String>>,
}

#[derive(Debug, Args)]
pub struct VocabArgs {
    #[arg(long)]
    pub train: Option<PathBuf>,
    #[arg(long)]
    pub max_size: Option<usize>,
    #[arg(long, short)]
    pub out: Option<PathBuf>,
    #[arg(long, value_delimiter = ',')]
    pub labels: Option<Vec<String>>,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[arg(long)]
    pub train: Option<PathBuf>,
    #[arg(long)]
    pub validation: Option<PathBuf>,
    /// Skip per-epoch validation.
    #[arg(long, conflicts_with = "validation")]
    pub no_validation: bool,
    #[arg(long)]
    pub vocab: Option<PathBuf>,
    #[arg(long, short)]
    pub out: Option<PathBuf>,
    /// Also write the epoch history as JSON.
    #[arg(long)]
    pub history: Option<PathBuf>,
    #[arg(long, value_delimiter = ',')]
    pub labels: Option<Vec<String>>,
    #[arg(long)]
    pub lr: Option<f64>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    #[arg(long)]
    pub weight_decay: Option<f64>,
    #[arg(long)]
    pub hidden_dim: Option<usize>,
    #[arg(long)]
    pub layers: Option<usize>,
    #[arg(long)]
    pub heads: Option<usize>,
    #[arg(long)]
    pub ff_dim: Option<usize>,
    #[arg(long)]
    pub max_len: Option<usize>,
    #[arg(long)]
    pub dropout: Option<f64>,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub checkpoint: Option<PathBuf>,
    /// Labeled TSV to score [default: the validation file].
    #[arg(long)]
    pub data: Option<PathBuf>,
    /// Write the metrics as JSON.
    #[arg(long)]
    pub report: Option<PathBuf>,
    /// Fit the n-gram baseline on this labeled file and compare.
    #[arg(long, value_name = "TRAIN_TSV")]
    pub baseline: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct PredictArgs {
    #[arg(long)]
    pub checkpoint: Option<PathBuf>,
    /// Text to classify; without it, every stdin line is classified.
    #[arg(long)]
    pub text: Vec<String>,
}

#[derive(Debug, Args)]
pub struct InspectArgs {
    #[arg(long)]
    pub checkpoint: Option<PathBuf>,
}

// -------------------------------------------------------------- commands

/// Parse `args` (including the program name), run, and map the outcome to
/// an exit code.
pub fn main_with_args<I, T>(args: I) -> ExitCode
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    let stdout = io::stdout();
    match run(cli, &mut stdout.lock()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

pub fn main() -> ExitCode {
    main_with_args(std::env::args_os())
}

pub fn run(cli: Cli, out: &mut dyn Write) -> Result<(), CliError> {
    let mut config = match &cli.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    if let Some(seed) = cli.seed {
        config.seed = seed;
    }
    match cli.command {
        Command::Generate(a) => cmd_generate(config, a, out),
        Command::Split(a) => cmd_split(config, a, out),
        Command::Vocab(a) => cmd_vocab(config, a, out),
        Command::Train(a) => cmd_train(config, a, out),
        Command::Eval(a) => cmd_eval(config, a, out),
        Command::Predict(a) => cmd_predict(config, a, out),
        Command::Inspect(a) => cmd_inspect(config, a, out),
    }
}

fn set<T>(slot: &mut T, flag: Option<T>) {
    if let Some(v) = flag {
        *slot = v;
    }
}

fn require_file(path: &Path, what: &str) -> Result<(), CliError> {
    if path.is_file() {
        Ok(())
    } else {
        Err(CliError::Data(format!("{what} {} does not exist", path.display())))
    }
}

fn write_out(out: &mut dyn Write, args: std::fmt::Arguments) -> Result<(), CliError> {
    out.write_fmt(args)
        .map_err(|e| data_err(format!("writing output: {e}")))
}

macro_rules! say {
    ($out:expr, $($arg:tt)*) => {
        write_out($out, format_args!("{}\n", format_args!($($arg)*)))
    };
}

pub fn cmd_generate(mut config: RunConfig, a: GenerateArgs, out: &mut dyn Write) -> Result<(), CliError> {
    set(&mut config.corpus.path, a.corpus);
    set(&mut config.corpus.format, a.corpus_format);
    set(&mut config.corpus.column, a.corpus_column);
    set(&mut config.labels, a.labels);
    set(&mut config.provider.kind, a.provider);
    set(&mut config.provider.fixtures, a.fixtures);
    if a.endpoint.is_some() {
        config.provider.endpoint = a.endpoint;
    }
    if a.api_key_env.is_some() {
        config.provider.api_key_env = a.api_key_env;
    }
    if a.cache_dir.is_some() {
        config.provider.cache_dir = a.cache_dir;
    }
    set(&mut config.provider.on_error, a.on_provider_error);
    set(&mut config.paths.dataset, a.out);
    for spec in &a.tables {
        let (label, path) = spec
            .split_once('=')
            .ok_or_else(|| CliError::Usage(format!("--table expects LABEL=PATH, got {spec:?}")))?;
        config.tables.insert(label.to_string(), PathBuf::from(path));
    }

    let labels = config.label_set()?;
    let rules = config.filter_rules()?;
    let format = config.corpus_format()?;
    let on_error = config.on_provider_error()?;
    let provider_config = config.provider_config()?;
    let mut tables = HashMap::new();
    for label in &labels {
        if label.name == ENGLISH {
            continue;
        }
        let path = config.tables.get(&label.name).ok_or_else(|| {
            CliError::Usage(format!(
                "no transliteration table for label {:?}; pass --table {}=PATH",
                label.name, label.name
            ))
        })?;
        require_file(path, &format!("transliteration table for {}", label.name))?;
        tables.insert(label.name.clone(), load_table(path).map_err(data_err)?);
    }
    require_file(&config.corpus.path, "corpus")?;
    if provider_config.kind == ProviderKind::Fixture {
        require_file(&config.provider.fixtures, "fixture file")?;
    }

    let raw = load_corpus(&config.corpus.path, format)?;
    let sources = filter_sentences(&raw, &rules)?;
    let provider = provider_config.build().map_err(|e| match e {
        crate::provider::ProviderError::Config(_) => CliError::Usage(e.to_string()),
        _ => data_err(e),
    })?;
    let dataset = generate_dataset(&sources, &labels, provider.as_ref(), &tables, on_error)?;
    write_dataset(&dataset.pairs, &config.paths.dataset)?;

    say!(
        out,
        "{} corpus lines, {} kept after filtering",
        raw.len(),
        sources.len()
    )?;
    say!(
        out,
        "wrote {} records to {}",
        dataset.pairs.len(),
        config.paths.dataset.display()
    )?;
    let counts = dataset.counts_by_label();
    for label in &labels {
        say!(
            out,
            "  {:<10} {}",
            label.name,
            counts.get(&label.name).copied().unwrap_or(0)
        )?;
    }
    let drops = dataset.drops_by_reason();
    if drops.is_empty() {
        say!(out, "dropped: 0")?;
    } else {
        say!(out, "dropped: {}", dataset.dropped.len())?;
        for (reason, n) in drops {
            say!(out, "  {reason:<22} {n}")?;
        }
    }
    Ok(())
}

pub fn cmd_split(mut config: RunConfig, a: SplitArgs, out: &mut dyn Write) -> Result<(), CliError> {
    set(&mut config.paths.dataset, a.dataset);
    set(&mut config.split_ratio, a.ratio);
    set(&mut config.paths.train, a.train_out);
    set(&mut config.paths.validation, a.validation_out);
    set(&mut config.labels, a.labels);
    let labels = config.label_set()?;
    require_file(&config.paths.dataset, "dataset")?;
    let pairs = read_dataset(&config.paths.dataset, &labels)?;
    let split = split_dataset(&pairs, config.split_ratio, seed::derive(config.seed, "split"))?;
    write_dataset(&split.train, &config.paths.train)?;
    write_dataset(&split.validation, &config.paths.validation)?;
    say!(
        out,
        "train: {} records -> {}",
        split.train.len(),
        config.paths.train.display()
    )?;
    say!(
        out,
        "validation: {} records -> {}",
        split.validation.len(),
        config.paths.validation.display()
    )
}

pub fn cmd_vocab(mut config: RunConfig, a: VocabArgs, out: &mut dyn Write) -> Result<(), CliError> {
    set(&mut config.paths.train, a.train);
    set(&mut config.vocab_max_size, a.max_size);
    set(&mut config.paths.vocab, a.out);
    set(&mut config.labels, a.labels);
    let labels = config.label_set()?;
    require_file(&config.paths.train, "training file")?;
    let train = read_dataset(&config.paths.train, &labels)?;
    let vocab = build_vocab(&train, config.vocab_max_size).map_err(|e| match e {
        crate::tokenizer::TokenizerError::MaxSizeTooSmall(_) => CliError::Usage(e.to_string()),
        _ => data_err(e),
    })?;
    vocab.save(&config.paths.vocab).map_err(data_err)?;
    say!(
        out,
        "vocabulary: {} tokens -> {}",
        vocab.len(),
        config.paths.vocab.display()
    )
}

pub fn cmd_train(mut config: RunConfig, a: TrainArgs, out: &mut dyn Write) -> Result<(), CliError> {
    set(&mut config.paths.train, a.train);
    set(&mut config.paths.validation, a.validation);
    set(&mut config.paths.vocab, a.vocab);
    set(&mut config.paths.checkpoint, a.out);
    if a.history.is_some() {
        config.paths.history = a.history;
    }
    set(&mut config.labels, a.labels);
    set(&mut config.train.learning_rate, a.lr);
    set(&mut config.train.epochs, a.epochs);
    set(&mut config.train.batch_size, a.batch_size);
    set(&mut config.train.weight_decay, a.weight_decay);
    set(&mut config.model.hidden_dim, a.hidden_dim);
    set(&mut config.model.n_layers, a.layers);
    set(&mut config.model.n_heads, a.heads);
    set(&mut config.model.ff_dim, a.ff_dim);
    set(&mut config.model.max_len, a.max_len);
    set(&mut config.model.dropout_rate, a.dropout);

    let labels = config.label_set()?;
    let train_config = config.train_config()?;
    require_file(&config.paths.train, "training file")?;
    require_file(&config.paths.vocab, "vocabulary")?;
    let vocab = Vocabulary::load(&config.paths.vocab).map_err(data_err)?;
    let model_config = config.model_config(vocab.len(), labels.len())?;
    let train = read_dataset(&config.paths.train, &labels)?;
    let validation = if a.no_validation {
        Vec::new()
    } else {
        require_file(&config.paths.validation, "validation file")?;
        read_dataset(&config.paths.validation, &labels)?
    };
    let split = DatasetSplit {
        train,
        validation,
        seed: config.seed,
        ratio: config.split_ratio,
    };

    let params = init_parameters(&model_config, seed::derive(config.seed, "init"))?;
    let total = train_config.epochs;
    let mut write_error = None;
    let (params, history) = train_with_progress(params, &model_config, &train_config, &split, &vocab, |r| {
        let acc = r
            .validation_accuracy
            .map_or_else(|| "-".to_string(), |a| format!("{a:.4}"));
        if let Err(e) = say!(
            out,
            "epoch {}/{}  loss {:.4}  validation accuracy {}  steps {}",
            r.epoch,
            total,
            r.mean_loss,
            acc,
            r.steps
        ) {
            write_error.get_or_insert(e);
        }
    })?;
    if let Some(e) = write_error {
        return Err(e);
    }

    let checkpoint = Checkpoint {
        config: model_config,
        vocab,
        labels: labels.names(),
        params,
    };
    save_checkpoint(&checkpoint, &config.paths.checkpoint).map_err(data_err)?;
    say!(out, "saved checkpoint to {}", config.paths.checkpoint.display())?;
    if let Some(path) = &config.paths.history {
        let json = serde_json::to_string_pretty(&history).expect("history serializes");
        fs::write(path, json + "\n").map_err(|e| data_err(format!("{}: {e}", path.display())))?;
    }
    Ok(())
}

fn open_classifier(path: &Path) -> Result<Classifier, CliError> {
    require_file(path, "checkpoint")?;
    let checkpoint = load_checkpoint(path).map_err(|e| data_err(format!("{}: {e}", path.display())))?;
    Ok(Classifier::from_checkpoint(checkpoint)?)
}

pub fn cmd_eval(mut config: RunConfig, a: EvalArgs, out: &mut dyn Write) -> Result<(), CliError> {
    set(&mut config.paths.checkpoint, a.checkpoint);
    let data_path = a.data.unwrap_or(config.paths.validation);
    let classifier = open_classifier(&config.paths.checkpoint)?;
    require_file(&data_path, "evaluation file")?;
    let data = read_dataset(&data_path, &classifier.labels)?;
    let (metrics, predicted) = eval::evaluate_with_predictions(&classifier, &data)?;
    write_out(out, format_args!("{metrics}"))?;
    if let Some(path) = &a.report {
        fs::write(path, metrics.to_json()).map_err(|e| data_err(format!("{}: {e}", path.display())))?;
    }
    if let Some(path) = &a.baseline {
        require_file(path, "baseline training file")?;
        let train = read_dataset(path, &classifier.labels)?;
        let ngram = eval::ngram_train(&train, &classifier.labels, eval::DEFAULT_NGRAM_RANGE)?;
        let (base, base_pred) = eval::evaluate_with_predictions(&ngram, &data)?;
        let agree = predicted.iter().zip(&base_pred).filter(|(a, b)| a == b).count();
        say!(out, "")?;
        say!(out, "n-gram baseline accuracy: {:.4}", base.accuracy)?;
        say!(out, "agreement with baseline: {:.4}", agree as f64 / data.len() as f64)?;
    }
    Ok(())
}

pub fn cmd_predict(mut config: RunConfig, a: PredictArgs, out: &mut dyn Write) -> Result<(), CliError> {
    set(&mut config.paths.checkpoint, a.checkpoint);
    let classifier = open_classifier(&config.paths.checkpoint)?;
    let texts = if a.text.is_empty() {
        io::stdin()
            .lock()
            .lines()
            .collect::<Result<Vec<_>, _>>()
            .map_err(|e| data_err(format!("reading stdin: {e}")))?
    } else {
        a.text
    };
    let refs: Vec<&str> = texts.iter().map(String::as_str).collect();
    for p in classifier.predict_batch(&refs)? {
        say!(out, "{} {:.4}", p.label.name, p.confidence())?;
    }
    Ok(())
}

pub fn cmd_inspect(mut config: RunConfig, a: InspectArgs, out: &mut dyn Write) -> Result<(), CliError> {
    set(&mut config.paths.checkpoint, a.checkpoint);
    let path = &config.paths.checkpoint;
    require_file(path, "checkpoint")?;
    let ck = load_checkpoint(path).map_err(|e| data_err(format!("{}: {e}", path.display())))?;
    let c = &ck.config;
    say!(out, "checkpoint: {}", path.display())?;
    say!(
        out,
        "config: vocab_size={} hidden_dim={} n_layers={} n_heads={} ff_dim={} max_len={} n_classes={} dropout_rate={}",
        c.vocab_size,
        c.hidden_dim,
        c.n_layers,
        c.n_heads,
        c.ff_dim,
        c.max_len,
        c.n_classes,
        c.dropout_rate
    )?;
    say!(out, "labels: {}", ck.labels.join(", "))?;
    say!(out, "vocabulary: {} tokens", ck.vocab.len())?;
    let manifest = ck.manifest();
    let name_w = manifest.iter().map(|e| e.name.len()).max().unwrap_or(4);
    say!(
        out,
        "{:<name_w$}  {:<10}  {:>8}  {:>8}",
        "tensor",
        "shape",
        "offset",
        "bytes"
    )?;
    for e in &manifest {
        let shape = e.shape.iter().map(usize::to_string).collect::<Vec<_>>().join("x");
        say!(
            out,
            "{:<name_w$}  {:<10}  {:>8}  {:>8}",
            e.name,
            shape,
            e.offset,
            e.length
        )?;
    }
    say!(
        out,
        "{} tensors, {} parameters",
        manifest.len(),
        ck.params.num_scalars()
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_config_round_trips_through_toml() {
        let c = RunConfig::default();
        assert_eq!(RunConfig::from_toml(&c.to_toml()).unwrap(), c);
        assert_eq!(RunConfig::from_toml("").unwrap(), c);
    }

    #[test]
    fn shipped_config_matches_defaults() {
        let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs/desk.toml");
        assert_eq!(RunConfig::load(&path).unwrap(), RunConfig::default());
    }

    #[test]
    fn partial_toml_keeps_other_defaults() {
        let c = RunConfig::from_toml("seed = 7\n[train]\nepochs = 2\n[model]\nhidden_dim = 32\n").unwrap();
        assert_eq!(c.seed, 7);
        assert_eq!(c.train.epochs, 2);
        assert_eq!(c.train.batch_size, 4);
        assert_eq!(c.model.hidden_dim, 32);
        assert_eq!(c.model.n_layers, 2);
    }

    #[test]
    fn unknown_keys_are_usage_errors() {
        let e = RunConfig::from_toml("[train]\nepoch = 2\n").unwrap_err();
        assert_eq!(e.exit_code(), 1);
    }

    #[test]
    fn seeds_fan_out_per_stage() {
        let c = RunConfig::default();
        let t = c.train_config().unwrap();
        assert_eq!(t.seed, seed::derive(42, "train"));
        assert_ne!(t.seed, seed::derive(42, "init"));
        assert_eq!(t.learning_rate, 5e-5);
        assert_eq!((t.epochs, t.batch_size), (5, 4));
    }

    #[test]
    fn invalid_model_dims_are_usage_errors() {
        let mut c = RunConfig::default();
        c.model.n_heads = 3;
        assert_eq!(c.model_config(40, 3).unwrap_err().exit_code(), 1);
    }

    #[test]
    fn flags_override_config() {
        let cli = Cli::try_parse_from(["rlid", "--seed", "9", "train", "--epochs", "1", "--lr", "0.001"]).unwrap();
        assert_eq!(cli.seed, Some(9));
        match cli.command {
            Command::Train(a) => {
                assert_eq!(a.epochs, Some(1));
                assert_eq!(a.lr, Some(0.001));
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn error_classes_map_to_exit_codes() {
        assert_eq!(CliError::from(CorpusError::Ratio(2.0)).exit_code(), 1);
        assert_eq!(CliError::from(CorpusError::EmptyDataset).exit_code(), 2);
        let numeric = TrainError::NonFiniteLoss { epoch: 1, step: 3 };
        assert_eq!(CliError::from(numeric).exit_code(), 3);
        assert_eq!(CliError::from(TrainError::InvalidConfig("x".into())).exit_code(), 1);
    }
}

//! Corpus ingestion, filtration, dataset generation and splitting.
//!
//! Dataset generation follows the translate-then-romanize pipeline: every
//! filtered English source yields one record per language label. The
//! `english` label keeps the normalized source; every other label goes
//! through a [`TranslationProvider`] and the label's
//! [`TransliterationTable`].

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt;
use std::fs;
use std::io::Write;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;
use unicode_normalization::UnicodeNormalization;

use crate::provider::{ProviderError, TranslationProvider, TranslationRequest};
use crate::tokenizer::normalize;
use crate::translit::{validate_latin, TranslitError, TransliterationTable};

/// Name of the label whose text is the untranslated source.
pub const ENGLISH: &str = "english";

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: invalid UTF-8 at byte offset {offset}")]
    Utf8 { path: String, offset: usize },
    #[error("unknown corpus format {0:?} (expected plain-lines or tsv-column)")]
    UnknownFormat(String),
    #[error("{path} line {line}: {message}")]
    Record { path: String, line: usize, message: String },
    #[error("unknown label {0:?}")]
    UnknownLabel(String),
    #[error("invalid label set: {0}")]
    Labels(String),
    #[error("invalid filter rules: {0}")]
    Rules(String),
    #[error("no transliteration table for label {0:?}")]
    MissingTable(String),
    #[error("translating source {index} into {label}: {source}")]
    Provider {
        index: usize,
        label: String,
        #[source]
        source: ProviderError,
    },
    #[error("transliterating source {index} for {label}: {source}")]
    Translit {
        index: usize,
        label: String,
        #[source]
        source: TranslitError,
    },
    #[error("split ratio {0} must lie strictly between 0 and 1")]
    Ratio(f64),
    #[error("cannot split an empty dataset")]
    EmptyDataset,
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> CorpusError + '_ {
    move |source| CorpusError::Io {
        path: path.display().to_string(),
        source,
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct LanguageLabel {
    pub id: usize,
    pub name: String,
}

impl fmt::Display for LanguageLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name)
    }
}

/// The class set: ids are contiguous from 0, names unique lowercase ASCII.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabelSet {
    labels: Vec<LanguageLabel>,
}

impl LabelSet {
    pub fn new<S: AsRef<str>>(names: impl IntoIterator<Item = S>) -> Result<Self, CorpusError> {
        let mut labels: Vec<LanguageLabel> = Vec::new();
        for (id, name) in names.into_iter().enumerate() {
            let name = name.as_ref().trim();
            if name.is_empty() || !name.bytes().all(|b| b.is_ascii_lowercase() || b == b'_' || b == b'-') {
                return Err(CorpusError::Labels(format!("label {name:?} is not lowercase ASCII")));
            }
            if labels.iter().any(|l| l.name == name) {
                return Err(CorpusError::Labels(format!("duplicate label {name:?}")));
            }
            labels.push(LanguageLabel {
                id,
                name: name.to_string(),
            });
        }
        if labels.is_empty() {
            return Err(CorpusError::Labels("no labels".into()));
        }
        Ok(LabelSet { labels })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn get(&self, id: usize) -> Option<&LanguageLabel> {
        self.labels.get(id)
    }

    pub fn by_name(&self, name: &str) -> Option<&LanguageLabel> {
        self.labels.iter().find(|l| l.name == name)
    }

    pub fn iter(&self) -> std::slice::Iter<'_, LanguageLabel> {
        self.labels.iter()
    }

    pub fn names(&self) -> Vec<String> {
        self.labels.iter().map(|l| l.name.clone()).collect()
    }
}

impl Default for LabelSet {
    /// `english`, `hindi`, `russian`.
    fn default() -> Self {
        LabelSet::new([ENGLISH, "hindi", "russian"]).expect("default labels are valid")
    }
}

impl<'a> IntoIterator for &'a LabelSet {
    type Item = &'a LanguageLabel;
    type IntoIter = std::slice::Iter<'a, LanguageLabel>;

    fn into_iter(self) -> Self::IntoIter {
        self.labels.iter()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RawSentence {
    pub text: String,
    pub source_index: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct LabeledSentence {
    pub text: String,
    pub label: LanguageLabel,
}

impl LabeledSentence {
    pub fn new(text: impl Into<String>, label: &LanguageLabel) -> Self {
        LabeledSentence {
            text: text.into(),
            label: label.clone(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CorpusFormat {
    PlainLines,
    /// One record per line, text taken from the given 0-based column.
    TsvColumn(usize),
}

impl CorpusFormat {
    /// Parse a format tag: `plain-lines` or `tsv-column` (with its column).
    pub fn from_tag(tag: &str, column: usize) -> Result<Self, CorpusError> {
        match tag {
            "plain-lines" | "plain" => Ok(CorpusFormat::PlainLines),
            "tsv-column" | "tsv" => Ok(CorpusFormat::TsvColumn(column)),
            other => Err(CorpusError::UnknownFormat(other.to_string())),
        }
    }
}

/// Read a corpus file, one [`RawSentence`] per line in file order. In
/// plain-lines mode tabs are replaced by spaces so records stay TSV-safe.
pub fn load_corpus(path: impl AsRef<Path>, format: CorpusFormat) -> Result<Vec<RawSentence>, CorpusError> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(io_err(path))?;
    let text = std::str::from_utf8(&bytes).map_err(|e| CorpusError::Utf8 {
        path: path.display().to_string(),
        offset: e.valid_up_to(),
    })?;
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.strip_suffix('\r').unwrap_or(line);
        let record = match format {
            CorpusFormat::PlainLines => line.replace('\t', " "),
            CorpusFormat::TsvColumn(column) => match line.split('\t').nth(column) {
                Some(field) => field.to_string(),
                None => {
                    return Err(CorpusError::Record {
                        path: path.display().to_string(),
                        line: i + 1,
                        message: format!("no column {column}"),
                    })
                }
            },
        };
        out.push(RawSentence {
            text: record,
            source_index: i,
        });
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Charset {
    Any,
    /// Lowercased text must pass [`validate_latin`].
    Romanized,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FilterRules {
    pub min_chars: usize,
    pub max_chars: usize,
    pub charset: Charset,
    pub dedup: bool,
}

impl Default for FilterRules {
    fn default() -> Self {
        FilterRules {
            min_chars: 3,
            max_chars: 200,
            charset: Charset::Romanized,
            dedup: true,
        }
    }
}

impl FilterRules {
    /// Rules that keep everything non-empty.
    pub fn permissive() -> Self {
        FilterRules {
            min_chars: 1,
            max_chars: usize::MAX,
            charset: Charset::Any,
            dedup: false,
        }
    }

    pub fn validate(&self) -> Result<(), CorpusError> {
        if self.min_chars < 1 {
            return Err(CorpusError::Rules("min_chars must be at least 1".into()));
        }
        if self.min_chars > self.max_chars {
            return Err(CorpusError::Rules(format!(
                "min_chars {} > max_chars {}",
                self.min_chars, self.max_chars
            )));
        }
        Ok(())
    }
}

fn collapse_whitespace(text: &str) -> String {
    text.split_whitespace().collect::<Vec<_>>().join(" ")
}

/// Normalize whitespace and keep the sentences that satisfy `rules`, in
/// input order. With `dedup`, the first occurrence of a case-insensitive
/// duplicate wins.
pub fn filter_sentences(sentences: &[RawSentence], rules: &FilterRules) -> Result<Vec<RawSentence>, CorpusError> {
    rules.validate()?;
    let mut seen = HashSet::new();
    let mut out = Vec::new();
    for s in sentences {
        let text = collapse_whitespace(&s.text);
        let len = text.chars().count();
        if len < rules.min_chars || len > rules.max_chars {
            continue;
        }
        if rules.charset == Charset::Romanized && !validate_latin(&text.to_lowercase()) {
            continue;
        }
        if rules.dedup && !seen.insert(text.to_lowercase()) {
            continue;
        }
        out.push(RawSentence {
            text,
            source_index: s.source_index,
        });
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum OnProviderError {
    #[default]
    Abort,
    Skip,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum DropReason {
    ProviderFailure,
    EmptyTransliteration,
    InvalidCharacters,
}

impl fmt::Display for DropReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            DropReason::ProviderFailure => "provider-failure",
            DropReason::EmptyTransliteration => "empty-transliteration",
            DropReason::InvalidCharacters => "invalid-characters",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DroppedRecord {
    pub source_index: usize,
    pub label: String,
    pub reason: DropReason,
}

#[derive(Debug, Clone, Default)]
pub struct GeneratedDataset {
    pub pairs: Vec<LabeledSentence>,
    pub dropped: Vec<DroppedRecord>,
}

impl GeneratedDataset {
    pub fn counts_by_label(&self) -> BTreeMap<String, usize> {
        let mut counts = BTreeMap::new();
        for p in &self.pairs {
            *counts.entry(p.label.name.clone()).or_default() += 1;
        }
        counts
    }

    pub fn drops_by_reason(&self) -> BTreeMap<DropReason, usize> {
        let mut counts = BTreeMap::new();
        for d in &self.dropped {
            *counts.entry(d.reason).or_default() += 1;
        }
        counts
    }
}

/// Produce one labeled record per (source, label), grouped by source index
/// then label id.
pub fn generate_dataset(
    sources: &[RawSentence],
    labels: &LabelSet,
    provider: &dyn TranslationProvider,
    tables: &HashMap<String, TransliterationTable>,
    on_error: OnProviderError,
) -> Result<GeneratedDataset, CorpusError> {
    for label in labels {
        if label.name != ENGLISH && !tables.contains_key(&label.name) {
            return Err(CorpusError::MissingTable(label.name.clone()));
        }
    }
    let mut sorted: Vec<&RawSentence> = sources.iter().collect();
    sorted.sort_by_key(|s| s.source_index);

    let mut out = GeneratedDataset::default();
    for source in sorted {
        for label in labels {
            let drop = |reason| DroppedRecord {
                source_index: source.source_index,
                label: label.name.clone(),
                reason,
            };
            let text = if label.name == ENGLISH {
                normalize(&source.text)
            } else {
                let request = TranslationRequest::new(source.text.clone(), label.clone());
                let native = match provider.translate(&request) {
                    Ok(native) => native,
                    Err(_) if on_error == OnProviderError::Skip => {
                        out.dropped.push(drop(DropReason::ProviderFailure));
                        continue;
                    }
                    Err(source_err) => {
                        return Err(CorpusError::Provider {
                            index: source.source_index,
                            label: label.name.clone(),
                            source: source_err,
                        })
                    }
                };
                let native: String = native.nfc().flat_map(char::to_lowercase).collect();
                let roman = tables[&label.name]
                    .transliterate(&native)
                    .map_err(|e| CorpusError::Translit {
                        index: source.source_index,
                        label: label.name.clone(),
                        source: e,
                    })?;
                normalize(&roman)
            };
            if text.is_empty() {
                out.dropped.push(drop(DropReason::EmptyTransliteration));
            } else if !validate_latin(&text) {
                out.dropped.push(drop(DropReason::InvalidCharacters));
            } else {
                out.pairs.push(LabeledSentence::new(text, label));
            }
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct DatasetSplit {
    pub train: Vec<LabeledSentence>,
    pub validation: Vec<LabeledSentence>,
    pub seed: u64,
    pub ratio: f64,
}

/// Seeded uniform shuffle, then the first `round(ratio · N)` records train.
pub fn split_dataset(pairs: &[LabeledSentence], ratio: f64, seed: u64) -> Result<DatasetSplit, CorpusError> {
    if !(ratio > 0.0 && ratio < 1.0) {
        return Err(CorpusError::Ratio(ratio));
    }
    if pairs.is_empty() {
        return Err(CorpusError::EmptyDataset);
    }
    let mut order: Vec<usize> = (0..pairs.len()).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let n_train = (ratio * pairs.len() as f64).round() as usize;
    let (train, validation) = order.split_at(n_train);
    Ok(DatasetSplit {
        train: train.iter().map(|&i| pairs[i].clone()).collect(),
        validation: validation.iter().map(|&i| pairs[i].clone()).collect(),
        seed,
        ratio,
    })
}

/// Write `text<TAB>label` lines, LF-terminated, no header.
pub fn write_dataset(pairs: &[LabeledSentence], path: impl AsRef<Path>) -> Result<(), CorpusError> {
    let path = path.as_ref();
    let mut buf = Vec::new();
    for p in pairs {
        writeln!(buf, "{}\t{}", p.text, p.label.name).expect("write to memory");
    }
    fs::write(path, buf).map_err(io_err(path))
}

pub fn read_dataset(path: impl AsRef<Path>, labels: &LabelSet) -> Result<Vec<LabeledSentence>, CorpusError> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    let record_err = |line: usize, message: String| CorpusError::Record {
        path: path.display().to_string(),
        line,
        message,
    };
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let Some((sentence, name)) = line.rsplit_once('\t') else {
            return Err(record_err(i + 1, "missing tab between text and label".into()));
        };
        let label = labels
            .by_name(name)
            .ok_or_else(|| record_err(i + 1, format!("unknown label {name:?}")))?;
        out.push(LabeledSentence::new(sentence, label));
    }
    Ok(out)
}

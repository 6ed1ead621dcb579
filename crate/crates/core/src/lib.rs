//! # rlid
//!
//! Language identification for text that was written in the Latin alphabet
//! but originates from another language: romanized Hindi and Russian chat
//! messages versus native English.
//!
//! The crate covers the whole pipeline:
//!
//! ```text
//! English SMS corpus ──filter──► sources
//!        │
//!        ├─ english ──────────────────────────────► "ok see you"      english
//!        ├─ translate(hindi)   ─► "आप कैसे हो" ─► translit ─► "ap kaise ho" hindi
//!        └─ translate(russian) ─► "Как дела?"   ─► translit ─► "kak dela?"   russian
//!
//! labeled pairs ─► split 80/20 ─► char vocabulary ─► transformer encoder ─► AdamW
//!                                                              │
//!                                         metrics, confusion matrix, n-gram baseline
//! ```
//!
//! | module        | what it owns                                                  |
//! |---------------|---------------------------------------------------------------|
//! | [`corpus`]    | corpus ingestion, filtering, dataset generation, splits, TSV  |
//! | [`translit`]  | rule-table romanization of Devanagari and Cyrillic            |
//! | [`provider`]  | translation providers (fixture, HTTP) and the disk cache      |
//! | [`tokenizer`] | character vocabulary, encode/decode with attention masks      |
//! | [`model`]     | BERT-style encoder, forward pass and exact backward pass      |
//! | [`train`]     | AdamW, the training loop and the checkpoint format            |
//! | [`eval`]      | prediction, metrics and the character n-gram baseline         |
//! | [`cli`]       | the `rlid` command line                                       |
//!
//! Runnable walkthroughs of each stage live in `examples/`.

pub mod cli;
pub mod corpus;
pub mod eval;
pub mod model;
pub mod provider;
pub mod seed;
pub mod tokenizer;
pub mod train;
pub mod translit;

pub use corpus::{DatasetSplit, LabelSet, LabeledSentence, LanguageLabel, RawSentence};
pub use eval::{Classifier, LanguageClassifier, Metrics, NgramModel, Prediction};
pub use model::{ModelConfig, ModelParameters};
pub use tokenizer::{TokenSequence, Vocabulary};
pub use train::{Checkpoint, TrainConfig, TrainHistory};
pub use translit::{validate_latin, TransliterationTable};

/// Directory holding the shipped transliteration tables.
pub fn tables_dir() -> std::path::PathBuf {
    std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("tables")
}

/// Directory holding the bundled corpus and fixture translations.
pub fn data_dir() -> std::path::PathBuf {
    std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("data")
}

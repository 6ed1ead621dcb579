#![allow(dead_code)]

use std::collections::HashMap;
use std::path::Path;
use std::process::{Command, Output};

use rlid::corpus::{filter_sentences, generate_dataset, load_corpus, CorpusFormat, FilterRules, OnProviderError};
use rlid::provider::ProviderConfig;
use rlid::translit::{load_table, TransliterationTable};
use rlid::{LabelSet, LabeledSentence};

pub fn devanagari() -> TransliterationTable {
    load_table(rlid::tables_dir().join("devanagari.tsv")).unwrap()
}

pub fn cyrillic() -> TransliterationTable {
    load_table(rlid::tables_dir().join("cyrillic.tsv")).unwrap()
}

/// The 3,000 labeled pairs generated from the bundled corpus and fixtures.
pub fn bundled_pairs() -> Vec<LabeledSentence> {
    let raw = load_corpus(
        rlid::data_dir().join("corpus/sms_messages.txt"),
        CorpusFormat::PlainLines,
    )
    .unwrap();
    let sources = filter_sentences(&raw, &FilterRules::default()).unwrap();
    let provider = ProviderConfig::fixture(rlid::data_dir().join("fixtures/translations.tsv"))
        .build()
        .unwrap();
    let tables = HashMap::from([("hindi".to_string(), devanagari()), ("russian".to_string(), cyrillic())]);
    generate_dataset(
        &sources,
        &LabelSet::default(),
        provider.as_ref(),
        &tables,
        OnProviderError::Abort,
    )
    .unwrap()
    .pairs
}

/// Run the `rlid` binary in `dir`.
pub fn rlid(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_rlid"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("spawn rlid")
}

pub fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

pub fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

/// generate, split, vocab and train with default flags; panics on failure.
pub fn full_pipeline(dir: &Path) -> String {
    let mut log = String::new();
    for args in [&["generate"][..], &["split"], &["vocab"], &["train"]] {
        let o = rlid(dir, args);
        assert!(o.status.success(), "rlid {args:?} failed: {}", stderr(&o));
        log.push_str(&stdout(&o));
    }
    log
}

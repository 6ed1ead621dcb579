//! Build the labeled dataset from the bundled corpus and fixture
//! translations, then split it 80/20.
//!
//!     cargo run --example generate_dataset -- [OUT_DIR]

use std::collections::HashMap;
use std::path::PathBuf;

use rlid::corpus::{
    filter_sentences, generate_dataset, load_corpus, split_dataset, write_dataset, CorpusFormat, FilterRules,
    OnProviderError,
};
use rlid::provider::ProviderConfig;
use rlid::translit::load_table;
use rlid::LabelSet;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let out_dir = std::env::args()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(|| std::env::temp_dir().join("rlid-example"));
    std::fs::create_dir_all(&out_dir)?;

    let raw = load_corpus(
        rlid::data_dir().join("corpus/sms_messages.txt"),
        CorpusFormat::PlainLines,
    )?;
    let sources = filter_sentences(&raw, &FilterRules::default())?;
    println!("{} corpus lines, {} after filtering", raw.len(), sources.len());

    let labels = LabelSet::default();
    let provider = ProviderConfig::fixture(rlid::data_dir().join("fixtures/translations.tsv")).build()?;
    let tables = HashMap::from([
        (
            "hindi".to_string(),
            load_table(rlid::tables_dir().join("devanagari.tsv"))?,
        ),
        (
            "russian".to_string(),
            load_table(rlid::tables_dir().join("cyrillic.tsv"))?,
        ),
    ]);
    let dataset = generate_dataset(&sources, &labels, provider.as_ref(), &tables, OnProviderError::Abort)?;
    println!(
        "{} labeled pairs, {} dropped",
        dataset.pairs.len(),
        dataset.dropped.len()
    );
    for (label, n) in dataset.counts_by_label() {
        println!("  {label:<8} {n}");
    }

    // one source sentence in all three languages
    for pair in &dataset.pairs[..3] {
        println!("  {:<8} {}", pair.label.name, pair.text);
    }

    let split = split_dataset(&dataset.pairs, 0.8, rlid::seed::derive(42, "split"))?;
    write_dataset(&dataset.pairs, out_dir.join("dataset.tsv"))?;
    write_dataset(&split.train, out_dir.join("train.tsv"))?;
    write_dataset(&split.validation, out_dir.join("validation.tsv"))?;
    println!(
        "train {} / validation {} written to {}",
        split.train.len(),
        split.validation.len(),
        out_dir.display()
    );
    Ok(())
}

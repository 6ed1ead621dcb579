//! Character 1-3-gram naive Bayes on the bundled dataset.
//!
//!     cargo run --release --example ngram_baseline

use std::collections::HashMap;

use rlid::corpus::{
    filter_sentences, generate_dataset, load_corpus, split_dataset, CorpusFormat, FilterRules, OnProviderError,
};
use rlid::eval::{char_ngrams, evaluate, ngram_predict, ngram_train, DEFAULT_NGRAM_RANGE};
use rlid::provider::ProviderConfig;
use rlid::translit::load_table;
use rlid::LabelSet;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let labels = LabelSet::default();
    let raw = load_corpus(
        rlid::data_dir().join("corpus/sms_messages.txt"),
        CorpusFormat::PlainLines,
    )?;
    let sources = filter_sentences(&raw, &FilterRules::default())?;
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
    let split = split_dataset(&dataset.pairs, 0.8, rlid::seed::derive(42, "split"))?;

    println!("grams of \"kak\": {:?}", char_ngrams("kak", DEFAULT_NGRAM_RANGE));
    let model = ngram_train(&split.train, &labels, DEFAULT_NGRAM_RANGE)?;
    println!("{} distinct grams", model.vocabulary_size());
    for (label, gram) in [("hindi", " ho "), ("russian", "kak"), ("english", "the")] {
        let c = labels.by_name(label).map(|l| l.id).unwrap_or(0);
        println!("  count({label}, {gram:?}) = {}", model.count(c, gram));
    }

    print!("\n{}", evaluate(&model, &split.validation)?);
    println!();
    for text in ["ap kaise ho", "kak dela", "see you soon", ""] {
        let p = ngram_predict(&model, text);
        let probs: Vec<String> = p.probabilities.iter().map(|v| format!("{v:.3}")).collect();
        println!("{text:<14} {:<8} [{}]", p.label.name, probs.join(", "));
    }
    Ok(())
}

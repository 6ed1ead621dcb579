//! The whole experiment: generate 3,000 pairs, split 80/20, train the
//! desk-scale encoder for 5 epochs (lr 5e-5, batch 4), evaluate and save.
//!
//!     cargo run --release --example train_classifier -- [OUT_DIR] [EPOCHS]

use std::collections::HashMap;
use std::path::PathBuf;
use std::time::Instant;

use rlid::corpus::{
    filter_sentences, generate_dataset, load_corpus, split_dataset, CorpusFormat, FilterRules, OnProviderError,
};
use rlid::eval::evaluate;
use rlid::model::init_parameters;
use rlid::provider::ProviderConfig;
use rlid::seed::derive;
use rlid::tokenizer::build_vocab;
use rlid::train::{save_checkpoint, train_with_progress};
use rlid::translit::load_table;
use rlid::{Checkpoint, Classifier, LabelSet, LanguageClassifier, ModelConfig, TrainConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut args = std::env::args().skip(1);
    let out_dir = args
        .next()
        .map(PathBuf::from)
        .unwrap_or_else(|| std::env::temp_dir().join("rlid-example"));
    let epochs: usize = args.next().map(|e| e.parse()).transpose()?.unwrap_or(5);
    std::fs::create_dir_all(&out_dir)?;
    let seed = 42;

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
    let split = split_dataset(&dataset.pairs, 0.8, derive(seed, "split"))?;
    let vocab = build_vocab(&split.train, 128)?;
    println!(
        "{} pairs: {} train, {} validation; {} tokens",
        dataset.pairs.len(),
        split.train.len(),
        split.validation.len(),
        vocab.len()
    );

    let config = ModelConfig::desk_scale(vocab.len(), labels.len());
    let params = init_parameters(&config, derive(seed, "init"))?;
    println!("{} parameters", params.num_scalars());
    let train_config = TrainConfig {
        epochs,
        seed: derive(seed, "train"),
        ..TrainConfig::default()
    };

    let start = Instant::now();
    let (params, history) = train_with_progress(params, &config, &train_config, &split, &vocab, |r| {
        println!(
            "epoch {}  loss {:.4}  validation accuracy {:.4}  ({:.0}s)",
            r.epoch,
            r.mean_loss,
            r.validation_accuracy.unwrap_or(f64::NAN),
            start.elapsed().as_secs_f64()
        );
    })?;
    println!("{} optimizer steps", history.total_steps());

    let classifier = Classifier::new(params, config, vocab, labels)?;
    let metrics = evaluate(&classifier, &split.validation)?;
    println!("\n{metrics}");
    for text in ["ap kaise ho", "kak dela", "see you tomorrow"] {
        let p = classifier.predict(text)?;
        println!("{text:<18} {} {:.4}", p.label.name, p.confidence());
    }

    let path = out_dir.join("model.ckpt");
    let checkpoint = Checkpoint {
        config: classifier.config.clone(),
        vocab: classifier.vocab.clone(),
        labels: classifier.labels.names(),
        params: classifier.params,
    };
    save_checkpoint(&checkpoint, &path)?;
    println!("saved {}", path.display());
    Ok(())
}

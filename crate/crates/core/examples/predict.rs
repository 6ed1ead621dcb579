//! Classify text with a saved checkpoint.
//!
//!     cargo run --release --example predict -- "ap kaise ho" "kak dela"

use rlid::train::load_checkpoint;
use rlid::{Classifier, LanguageClassifier};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let path = std::env::var_os("RLID_CHECKPOINT")
        .map(Into::into)
        .unwrap_or_else(|| std::env::temp_dir().join("rlid-example/model.ckpt"));
    if !path.is_file() {
        eprintln!(
            "no checkpoint at {}; run the train_classifier example first",
            path.display()
        );
        std::process::exit(2);
    }
    let classifier = Classifier::from_checkpoint(load_checkpoint(&path)?)?;

    let mut texts: Vec<String> = std::env::args().skip(1).collect();
    if texts.is_empty() {
        texts = [
            "ap kaise ho",
            "kak dela",
            "main ghar ja raha hun",
            "ya doma",
            "call me later",
        ]
        .map(String::from)
        .to_vec();
    }
    let refs: Vec<&str> = texts.iter().map(String::as_str).collect();
    for (text, p) in texts.iter().zip(classifier.predict_batch(&refs)?) {
        let dist: Vec<String> = classifier
            .labels
            .iter()
            .map(|l| format!("{}={:.3}", l.name, p.probabilities[l.id]))
            .collect();
        println!("{text:<24} {:<8} {}", p.label.name, dist.join(" "));
    }
    Ok(())
}

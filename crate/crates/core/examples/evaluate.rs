//! Score a checkpoint on a labeled TSV and write the JSON report.
//!
//!     cargo run --release --example train_classifier
//!     cargo run --release --example evaluate -- [CHECKPOINT] [DATA_TSV]

use std::path::PathBuf;

use rlid::corpus::read_dataset;
use rlid::eval::{evaluate, Metrics};
use rlid::train::load_checkpoint;
use rlid::Classifier;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let dir = std::env::temp_dir().join("rlid-example");
    let mut args = std::env::args().skip(1);
    let ckpt = args.next().map(PathBuf::from).unwrap_or_else(|| dir.join("model.ckpt"));
    let data = args
        .next()
        .map(PathBuf::from)
        .unwrap_or_else(|| dir.join("validation.tsv"));
    if !ckpt.is_file() || !data.is_file() {
        eprintln!("run the generate_dataset and train_classifier examples first, or pass CHECKPOINT DATA_TSV");
        std::process::exit(2);
    }

    let classifier = Classifier::from_checkpoint(load_checkpoint(&ckpt)?)?;
    let validation = read_dataset(&data, &classifier.labels)?;
    let metrics = evaluate(&classifier, &validation)?;
    print!("{metrics}");
    println!("macro F1: {:.4}", metrics.macro_f1());

    let report = dir.join("metrics.json");
    std::fs::write(&report, metrics.to_json())?;
    println!("report: {}", report.display());

    // the report parses back into the same numbers
    let value: serde_json::Value = serde_json::from_str(&metrics.to_json())?;
    let back: Metrics = serde_json::from_value(value)?;
    assert_eq!(back.confusion, metrics.confusion);
    Ok(())
}

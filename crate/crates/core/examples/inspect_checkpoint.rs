//! Read a checkpoint's header and manifest without running the model.
//!
//!     cargo run --example inspect_checkpoint -- [CHECKPOINT]

use std::path::PathBuf;

use rlid::train::{load_checkpoint, CHECKPOINT_MAGIC, CHECKPOINT_VERSION};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let path = std::env::args()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(|| std::env::temp_dir().join("rlid-example/model.ckpt"));
    if !path.is_file() {
        eprintln!(
            "no checkpoint at {}; run the train_classifier example first",
            path.display()
        );
        std::process::exit(2);
    }
    let bytes = std::fs::read(&path)?;
    let header_len = u32::from_le_bytes(bytes[12..16].try_into()?);
    println!(
        "{}: {} bytes, magic {:?}, version {}, header {} bytes",
        path.display(),
        bytes.len(),
        String::from_utf8_lossy(CHECKPOINT_MAGIC),
        CHECKPOINT_VERSION,
        header_len
    );

    let ck = load_checkpoint(&path)?;
    println!("{:?}", ck.config);
    println!("labels {:?}", ck.labels);
    for e in ck.manifest() {
        println!(
            "  {:<34} {:<10} @{:<8} {} bytes",
            e.name,
            format!("{:?}", e.shape),
            e.offset,
            e.length
        );
    }
    let norms: Vec<(String, f64)> = ck
        .params
        .tensors()
        .iter()
        .filter(|t| t.name.starts_with("classifier"))
        .map(|t| {
            (
                t.name.clone(),
                t.data.iter().map(|&v| (v as f64).powi(2)).sum::<f64>().sqrt(),
            )
        })
        .collect();
    println!("classifier norms {norms:?}");
    Ok(())
}

//! Romanize native-script text with the shipped rule tables.
//!
//!     cargo run --example transliterate -- "आप कैसे हो" "Как дела?"

use rlid::translit::{load_table, transliterate, PassThrough};
use rlid::validate_latin;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let devanagari = load_table(rlid::tables_dir().join("devanagari.tsv"))?;
    let cyrillic = load_table(rlid::tables_dir().join("cyrillic.tsv"))?;
    println!(
        "devanagari: {} rules, longest source {} chars",
        devanagari.len(),
        devanagari.max_source_chars()
    );
    println!("cyrillic:   {} rules", cyrillic.len());

    let mut inputs: Vec<String> = std::env::args().skip(1).collect();
    if inputs.is_empty() {
        inputs = ["नमस्ते", "आप कैसे हो", "मैं घर पर हूँ", "привет", "Как дела?", "Щука и ёж"]
            .map(String::from)
            .to_vec();
    }
    for text in &inputs {
        let table = if text.chars().any(|c| ('\u{0900}'..='\u{097F}').contains(&c)) {
            &devanagari
        } else {
            &cyrillic
        };
        // the tables are written for lowercase input, as the dataset pipeline produces
        let roman = transliterate(&text.to_lowercase(), table)?;
        println!("{text:<20} -> {roman:<20} latin={}", validate_latin(&roman));
    }

    // longest match wins: "क्ष" is one rule, not "क" + virama + "ष"
    let chars: Vec<char> = "क्षमा".chars().collect();
    if let Some((rule, used)) = devanagari.longest_match(&chars) {
        println!(
            "longest match at the start of \"क्षमा\": {:?} -> {:?} ({used} chars)",
            rule.source, rule.target
        );
    }

    // characters the table does not cover
    for policy in [PassThrough::Keep, PassThrough::Drop, PassThrough::Error] {
        let table = cyrillic.clone().with_pass_through(policy);
        match transliterate("дом ☂ 42", &table) {
            Ok(s) => println!("{policy:?}: {s:?}"),
            Err(e) => println!("{policy:?}: {e}"),
        }
    }
    Ok(())
}

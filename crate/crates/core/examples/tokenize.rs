//! Character vocabulary, encoding with attention masks, and decoding.
//!
//!     cargo run --example tokenize -- "Kak  DELA?"

use rlid::tokenizer::{build_vocab_from_texts, decode, encode, normalize, SPECIAL_TOKENS};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let corpus = [
        "ap kaise ho",
        "kak dela?",
        "see you soon",
        "main ghar par hun",
        "privet",
    ];
    let vocab = build_vocab_from_texts(corpus, 64)?;
    println!("{} tokens ({} special):", vocab.len(), SPECIAL_TOKENS.len());
    println!("  {:?}", vocab.tokens());

    let text = std::env::args().nth(1).unwrap_or_else(|| "Kak  DELA? ✓".to_string());
    let seq = encode(&text, &vocab, 16);
    println!("input      {text:?}");
    println!("normalized {:?}", normalize(&text));
    println!("ids        {:?}", seq.ids);
    println!("mask       {:?}", seq.mask);
    println!("length     {} of {}", seq.true_length, seq.max_len());
    seq.check(vocab.len())?;

    let back = decode(&seq, &vocab)?;
    println!("decoded    {:?} (lossy: {})", back.text, back.lossy);

    // long inputs keep [CLS] and [SEP] and lose their tail
    let long = encode(&"ha".repeat(20), &vocab, 8);
    println!("truncated  {:?} -> {:?}", long.ids, decode(&long, &vocab)?.text);

    let reloaded = rlid::Vocabulary::from_json(&vocab.to_json())?;
    println!("json round trip equal: {}", reloaded == vocab);
    Ok(())
}

use proptest::prelude::*;

use rlid::corpus::LabelSet;
use rlid::eval::{evaluate, ngram_train, Metrics};
use rlid::tokenizer::{build_vocab_from_texts, decode, encode, normalize};
use rlid::translit::{compile_table, transliterate, PassThrough, Script, TransliterationRule};
use rlid::{validate_latin, LabeledSentence};

mod common;

const ALPHABET: &str = "abcdefghijklmnopqrstuvwxyz0123456789 .,!?'-";

fn alphabet_vocab() -> rlid::Vocabulary {
    build_vocab_from_texts([ALPHABET], 100).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(10_000))]

    #[test]
    fn decode_inverts_encode(text in "[a-zA-Z0-9 .,!?'\\-\t\n]{0,40}") {
        let vocab = alphabet_vocab();
        let seq = encode(&text, &vocab, 64);
        let back = decode(&seq, &vocab).unwrap();
        prop_assert!(!back.lossy);
        prop_assert_eq!(back.text, normalize(&text));
    }

    #[test]
    fn transliteration_is_deterministic(text in "[\u{0900}-\u{097F}\u{0400}-\u{04FF} ]{0,30}") {
        for table in [common::devanagari(), common::cyrillic()] {
            let a = transliterate(&text, &table).unwrap();
            let b = transliterate(&text, &table).unwrap();
            prop_assert_eq!(a, b);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(512))]

    #[test]
    fn token_sequences_are_well_formed(text in "\\PC{0,80}", max_len in 3usize..70) {
        let vocab = build_vocab_from_texts(["kak dela", "ap kaise ho"], 20).unwrap();
        let seq = encode(&text, &vocab, max_len);
        prop_assert_eq!(seq.max_len(), max_len);
        prop_assert!(seq.check(vocab.len()).is_ok(), "{:?}", seq.check(vocab.len()));
        let chars = normalize(&text).chars().count();
        prop_assert_eq!(seq.true_length, chars.min(max_len - 2) + 2);
    }

    #[test]
    fn drop_policy_output_is_latin(text in "\\PC{0,40}") {
        for table in [common::devanagari(), common::cyrillic()] {
            let out = transliterate(&text.to_lowercase(), &table.with_pass_through(PassThrough::Drop)).unwrap();
            prop_assert!(validate_latin(&out), "{:?} -> {:?}", text, out);
        }
    }

    #[test]
    fn longest_match_agrees_with_brute_force(
        sources in prop::collection::btree_set("[abc]{1,4}", 1..10),
        text in "[abcd ]{0,24}",
    ) {
        let rules: Vec<_> = sources
            .iter()
            .enumerate()
            .map(|(i, s)| TransliterationRule::standalone(s.clone(), format!("-{i}-")))
            .collect();
        let table = compile_table(rules.clone(), Script::Other, PassThrough::Keep).unwrap();
        prop_assert_eq!(transliterate(&text, &table).unwrap(), brute_force(&text, &rules));
    }

    #[test]
    fn confusion_identities(pairs in prop::collection::vec((0usize..3, 0usize..3), 1..200)) {
        let names = LabelSet::default().names();
        let m = Metrics::from_pairs(names, pairs.iter().copied());
        prop_assert_eq!(m.total as usize, pairs.len());
        let trace: u64 = (0..3).map(|i| m.confusion[i][i]).sum();
        prop_assert!((m.accuracy - trace as f64 / m.total as f64).abs() < 1e-12);
        let weighted: f64 = m.per_class.iter().map(|c| c.recall * c.support as f64).sum::<f64>() / m.total as f64;
        prop_assert!((weighted - m.accuracy).abs() < 1e-9);
    }

    #[test]
    fn evaluate_ignores_order(seed in any::<u64>()) {
        use rand::seq::SliceRandom;
        use rand::SeedableRng;
        let labels = LabelSet::default();
        let data: Vec<LabeledSentence> = [
            ("see you soon", "english"), ("ap kaise ho", "hindi"), ("kak dela", "russian"),
            ("call me", "english"), ("main ghar hun", "hindi"), ("ya doma", "russian"),
            ("kya hal hai", "hindi"), ("privet", "russian"), ("good night", "english"),
        ]
        .iter()
        .map(|(t, l)| LabeledSentence::new(*t, labels.by_name(l).unwrap()))
        .collect();
        let model = ngram_train(&data[..6], &labels, 1..=3).unwrap();
        let mut shuffled = data.clone();
        shuffled.shuffle(&mut rand_chacha::ChaCha8Rng::seed_from_u64(seed));
        prop_assert_eq!(evaluate(&model, &data).unwrap(), evaluate(&model, &shuffled).unwrap());
    }
}

/// Scan left to right, trying every rule at every position.
fn brute_force(text: &str, rules: &[TransliterationRule]) -> String {
    let chars: Vec<char> = text.chars().collect();
    let mut out = String::new();
    let mut i = 0;
    while i < chars.len() {
        if chars[i].is_whitespace() {
            out.push(' ');
            i += 1;
            continue;
        }
        let rest: String = chars[i..].iter().collect();
        let best = rules
            .iter()
            .filter(|r| rest.starts_with(&r.source))
            .max_by_key(|r| r.source.chars().count());
        match best {
            Some(r) => {
                out.push_str(&r.target);
                i += r.source.chars().count();
            }
            None => {
                out.push(chars[i]);
                i += 1;
            }
        }
    }
    out
}

#[test]
fn fixed_transliterations() {
    assert_eq!(transliterate("привет", &common::cyrillic()).unwrap(), "privet");
    assert_eq!(transliterate("नमस्ते", &common::devanagari()).unwrap(), "namaste");
    assert_eq!(transliterate("आप कैसे हो", &common::devanagari()).unwrap(), "ap kaise ho");
}

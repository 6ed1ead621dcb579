//! Character-level vocabulary and BERT-style input framing.
//!
//! Every sentence becomes `[CLS] c1 c2 … cn [SEP] [PAD] …` with an attention
//! mask of ones over the framed part. Ids 0-3 are reserved for the special
//! tokens; characters follow in descending frequency, ties broken by code
//! point.

use std::collections::HashMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;
use unicode_normalization::UnicodeNormalization;

use crate::corpus::LabeledSentence;

pub const PAD_ID: u32 = 0;
pub const UNK_ID: u32 = 1;
pub const CLS_ID: u32 = 2;
pub const SEP_ID: u32 = 3;
pub const SPECIAL_TOKENS: [&str; 4] = ["[PAD]", "[UNK]", "[CLS]", "[SEP]"];
pub const DEFAULT_MAX_LEN: usize = 64;

/// Stand-in for an unknown character in decoded text.
pub const UNK_PLACEHOLDER: char = '\u{FFFD}';

const VOCAB_FORMAT: &str = "rlid-vocab";

#[derive(Debug, Error)]
pub enum TokenizerError {
    #[error("vocabulary needs room for the 4 special tokens and one character, max_size {0} < 5")]
    MaxSizeTooSmall(usize),
    #[error("cannot build a vocabulary from an empty corpus")]
    EmptyCorpus,
    #[error("token id {id} out of range for vocabulary of size {size}")]
    IdOutOfRange { id: u32, size: usize },
    #[error("vocabulary file: {0}")]
    Format(String),
    #[error("vocabulary file: {0}")]
    Io(#[from] std::io::Error),
}

/// NFC, lowercase, collapse whitespace runs to one space, trim.
pub fn normalize(text: &str) -> String {
    let lowered: String = text.nfc().flat_map(char::to_lowercase).collect();
    lowered.split_whitespace().collect::<Vec<_>>().join(" ")
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocabulary {
    id_to_token: Vec<String>,
    char_to_id: HashMap<char, u32>,
}

#[derive(Serialize, Deserialize)]
struct VocabFile {
    format: String,
    version: u32,
    specials: Specials,
    tokens: Vec<String>,
}

#[derive(Serialize, Deserialize)]
struct Specials {
    pad: u32,
    unk: u32,
    cls: u32,
    sep: u32,
}

impl Vocabulary {
    /// Build from single-character tokens listed in id order after the specials.
    pub fn from_chars(chars: impl IntoIterator<Item = char>) -> Self {
        let mut id_to_token: Vec<String> = SPECIAL_TOKENS.iter().map(|s| s.to_string()).collect();
        let mut char_to_id = HashMap::new();
        for c in chars {
            if char_to_id.contains_key(&c) {
                continue;
            }
            char_to_id.insert(c, id_to_token.len() as u32);
            id_to_token.push(c.to_string());
        }
        Vocabulary {
            id_to_token,
            char_to_id,
        }
    }

    pub fn len(&self) -> usize {
        self.id_to_token.len()
    }

    pub fn is_empty(&self) -> bool {
        self.id_to_token.is_empty()
    }

    pub fn id_of(&self, c: char) -> Option<u32> {
        self.char_to_id.get(&c).copied()
    }

    pub fn token(&self, id: u32) -> Option<&str> {
        self.id_to_token.get(id as usize).map(String::as_str)
    }

    pub fn tokens(&self) -> &[String] {
        &self.id_to_token
    }

    /// The character tokens, in id order.
    pub fn chars(&self) -> impl Iterator<Item = char> + '_ {
        self.id_to_token[SPECIAL_TOKENS.len()..]
            .iter()
            .filter_map(|t| t.chars().next())
    }

    pub fn is_special(id: u32) -> bool {
        id <= SEP_ID
    }

    pub fn to_json(&self) -> String {
        let file = VocabFile {
            format: VOCAB_FORMAT.to_string(),
            version: 1,
            specials: Specials {
                pad: PAD_ID,
                unk: UNK_ID,
                cls: CLS_ID,
                sep: SEP_ID,
            },
            tokens: self.id_to_token.clone(),
        };
        let mut text = serde_json::to_string_pretty(&file).expect("vocabulary serializes");
        text.push('\n');
        text
    }

    pub fn from_json(text: &str) -> Result<Self, TokenizerError> {
        let file: VocabFile = serde_json::from_str(text).map_err(|e| TokenizerError::Format(e.to_string()))?;
        if file.format != VOCAB_FORMAT || file.version != 1 {
            return Err(TokenizerError::Format(format!(
                "unsupported format {:?} version {}",
                file.format, file.version
            )));
        }
        let s = &file.specials;
        if (s.pad, s.unk, s.cls, s.sep) != (PAD_ID, UNK_ID, CLS_ID, SEP_ID) {
            return Err(TokenizerError::Format("special token ids must be 0..=3".into()));
        }
        Self::from_tokens(&file.tokens)
    }

    /// Rebuild from the full id-ordered token list, specials included.
    pub fn from_tokens(tokens: &[String]) -> Result<Self, TokenizerError> {
        if tokens.len() < SPECIAL_TOKENS.len() || tokens[..4] != SPECIAL_TOKENS {
            return Err(TokenizerError::Format(
                "token list must start with the special tokens".into(),
            ));
        }
        let mut chars = Vec::new();
        for (i, token) in tokens[4..].iter().enumerate() {
            let mut it = token.chars();
            match (it.next(), it.next()) {
                (Some(c), None) if !chars.contains(&c) => chars.push(c),
                _ => {
                    return Err(TokenizerError::Format(format!(
                        "token {} ({token:?}) is not a unique single character",
                        i + 4
                    )))
                }
            }
        }
        Ok(Vocabulary::from_chars(chars))
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), TokenizerError> {
        fs::write(path, self.to_json())?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, TokenizerError> {
        Self::from_json(&fs::read_to_string(path)?)
    }
}

/// Character vocabulary over the normalized corpus, truncated to `max_size`
/// entries including the four specials.
pub fn build_vocab(corpus: &[LabeledSentence], max_size: usize) -> Result<Vocabulary, TokenizerError> {
    build_vocab_from_texts(corpus.iter().map(|s| s.text.as_str()), max_size)
}

pub fn build_vocab_from_texts<'a>(
    texts: impl IntoIterator<Item = &'a str>,
    max_size: usize,
) -> Result<Vocabulary, TokenizerError> {
    if max_size < SPECIAL_TOKENS.len() + 1 {
        return Err(TokenizerError::MaxSizeTooSmall(max_size));
    }
    let mut counts: HashMap<char, u64> = HashMap::new();
    let mut any = false;
    for text in texts {
        any = true;
        for c in normalize(text).chars() {
            *counts.entry(c).or_default() += 1;
        }
    }
    if !any {
        return Err(TokenizerError::EmptyCorpus);
    }
    let mut ranked: Vec<(char, u64)> = counts.into_iter().collect();
    ranked.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(&b.0)));
    ranked.truncate(max_size - SPECIAL_TOKENS.len());
    Ok(Vocabulary::from_chars(ranked.into_iter().map(|(c, _)| c)))
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TokenSequence {
    pub ids: Vec<u32>,
    pub mask: Vec<u8>,
    pub true_length: usize,
}

impl TokenSequence {
    pub fn max_len(&self) -> usize {
        self.ids.len()
    }

    /// The framed, unpadded part: `[CLS] … [SEP]`.
    pub fn active_ids(&self) -> &[u32] {
        &self.ids[..self.true_length]
    }

    /// Extend the padding to `max_len` positions. Shorter targets are ignored.
    pub fn repad(&self, max_len: usize) -> TokenSequence {
        let mut out = self.clone();
        if max_len > out.ids.len() {
            out.ids.resize(max_len, PAD_ID);
            out.mask.resize(max_len, 0);
        }
        out
    }

    /// Check every framing invariant against a vocabulary of `vocab_size`.
    pub fn check(&self, vocab_size: usize) -> Result<(), String> {
        let n = self.ids.len();
        if self.mask.len() != n {
            return Err(format!("mask length {} != ids length {n}", self.mask.len()));
        }
        if self.true_length < 2 || self.true_length > n {
            return Err(format!("true_length {} outside 2..={n}", self.true_length));
        }
        if let Some(id) = self.ids.iter().find(|&&id| id as usize >= vocab_size) {
            return Err(format!("id {id} >= vocab size {vocab_size}"));
        }
        if self.ids[0] != CLS_ID {
            return Err("sequence does not start with [CLS]".into());
        }
        if self.ids[self.true_length - 1] != SEP_ID {
            return Err("[SEP] not at true_length - 1".into());
        }
        for i in 0..n {
            let live = i < self.true_length;
            if self.mask[i] != live as u8 {
                return Err(format!(
                    "mask[{i}] = {} but position is {}",
                    self.mask[i],
                    if live { "live" } else { "padding" }
                ));
            }
            if !live && self.ids[i] != PAD_ID {
                return Err(format!("padding position {i} holds id {}", self.ids[i]));
            }
            if live && i > 0 && i < self.true_length - 1 && matches!(self.ids[i], PAD_ID | CLS_ID | SEP_ID) {
                return Err(format!("content position {i} holds a framing token"));
            }
        }
        Ok(())
    }
}

/// Normalize, map characters to ids, frame with `[CLS]`/`[SEP]`, truncate
/// the characters to fit and pad to `max_len`.
///
/// Panics if `max_len < 3`.
pub fn encode(text: &str, vocab: &Vocabulary, max_len: usize) -> TokenSequence {
    assert!(
        max_len >= 3,
        "max_len must leave room for [CLS], one character and [SEP]"
    );
    let mut ids = Vec::with_capacity(max_len);
    ids.push(CLS_ID);
    ids.extend(
        normalize(text)
            .chars()
            .take(max_len - 2)
            .map(|c| vocab.id_of(c).unwrap_or(UNK_ID)),
    );
    ids.push(SEP_ID);
    let true_length = ids.len();
    ids.resize(max_len, PAD_ID);
    let mut mask = vec![1u8; true_length];
    mask.resize(max_len, 0);
    TokenSequence { ids, mask, true_length }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Decoded {
    pub text: String,
    /// At least one position held `[UNK]`.
    pub lossy: bool,
}

/// Concatenate the non-special tokens within the true length. Unknown
/// characters come back as [`UNK_PLACEHOLDER`].
pub fn decode(seq: &TokenSequence, vocab: &Vocabulary) -> Result<Decoded, TokenizerError> {
    let mut text = String::new();
    let mut lossy = false;
    for &id in &seq.ids[..seq.true_length.min(seq.ids.len())] {
        let token = vocab
            .token(id)
            .ok_or(TokenizerError::IdOutOfRange { id, size: vocab.len() })?;
        match id {
            UNK_ID => {
                lossy = true;
                text.push(UNK_PLACEHOLDER);
            }
            PAD_ID | CLS_ID | SEP_ID => {}
            _ => text.push_str(token),
        }
    }
    Ok(Decoded { text, lossy })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn latin_vocab() -> Vocabulary {
        Vocabulary::from_chars("abcdefghijklmnopqrstuvwxyz '-.,!?0123456789".chars())
    }

    #[test]
    fn tied_chars_are_ordered_by_code_point() {
        let v = build_vocab_from_texts(["ab", "ba"], 100).unwrap();
        assert_eq!(v.tokens(), ["[PAD]", "[UNK]", "[CLS]", "[SEP]", "a", "b"]);
        assert_eq!(v, build_vocab_from_texts(["ab", "ba"], 100).unwrap());
    }

    #[test]
    fn too_small_max_size() {
        assert!(matches!(
            build_vocab_from_texts(["a"], 4),
            Err(TokenizerError::MaxSizeTooSmall(4))
        ));
        assert!(matches!(
            build_vocab_from_texts([], 10),
            Err(TokenizerError::EmptyCorpus)
        ));
    }

    #[test]
    fn truncation_keeps_most_frequent() {
        // char k (for k in 0..100) appears k + 1 times
        let text: String = (0..100u32)
            .flat_map(|k| std::iter::repeat_n(char::from_u32(0x4E00 + k).unwrap(), k as usize + 1))
            .collect();
        let v = build_vocab_from_texts([text.as_str()], 20).unwrap();
        assert_eq!(v.len(), 20);
        let kept: Vec<char> = v.chars().collect();
        let expected: Vec<char> = (84..100u32)
            .rev()
            .map(|k| char::from_u32(0x4E00 + k).unwrap())
            .collect();
        assert_eq!(kept, expected);
    }

    #[test]
    fn frames_the_motivating_example() {
        let v = latin_vocab();
        let seq = encode("ap kaise ho", &v, 16);
        assert_eq!(seq.true_length, 13);
        assert_eq!(seq.mask, [vec![1u8; 13], vec![0u8; 3]].concat());
        assert_eq!(seq.ids[0], CLS_ID);
        assert_eq!(seq.ids[12], SEP_ID);
        seq.check(v.len()).unwrap();
        assert_eq!(
            decode(&seq, &v).unwrap(),
            Decoded {
                text: "ap kaise ho".into(),
                lossy: false
            }
        );
    }

    #[test]
    fn empty_and_long_inputs() {
        let v = latin_vocab();
        let seq = encode("", &v, 8);
        assert_eq!(seq.true_length, 2);
        assert_eq!(seq.ids, [CLS_ID, SEP_ID, 0, 0, 0, 0, 0, 0]);
        assert_eq!(decode(&seq, &v).unwrap().text, "");

        let long = "a".repeat(100);
        let seq = encode(&long, &v, 16);
        assert_eq!(seq.true_length, 16);
        assert_eq!(decode(&seq, &v).unwrap().text, "a".repeat(14));
    }

    #[test]
    fn oov_is_flagged_on_decode() {
        let v = latin_vocab();
        let seq = encode("ПРИВЕТ", &v, 16);
        assert!(seq.ids[1..7].iter().all(|&id| id == UNK_ID));
        let d = decode(&seq, &v).unwrap();
        assert!(d.lossy);
        assert_eq!(d.text, UNK_PLACEHOLDER.to_string().repeat(6));
    }

    #[test]
    fn decode_rejects_bad_ids() {
        let v = latin_vocab();
        let mut seq = encode("ab", &v, 8);
        seq.ids[1] = 999;
        assert!(matches!(
            decode(&seq, &v),
            Err(TokenizerError::IdOutOfRange { id: 999, .. })
        ));
    }

    #[test]
    fn normalization() {
        assert_eq!(normalize("  Ap\tKAISE \n ho "), "ap kaise ho");
        // e + combining acute composes under NFC
        assert_eq!(normalize("e\u{0301}"), "\u{00E9}");
    }

    #[test]
    fn vocab_file_round_trips_bit_exact() {
        let v = build_vocab_from_texts(["ap kaise ho", "kak dela?"], 64).unwrap();
        let text = v.to_json();
        let back = Vocabulary::from_json(&text).unwrap();
        assert_eq!(back, v);
        assert_eq!(back.to_json(), text);
        assert!(Vocabulary::from_json(&text.replace("[CLS]", "[XXX]")).is_err());
    }

    #[test]
    fn repad_only_touches_padding() {
        let v = latin_vocab();
        let short = encode("kak dela", &v, 16);
        let long = encode("kak dela", &v, 40);
        assert_eq!(short.repad(40), long);
    }
}

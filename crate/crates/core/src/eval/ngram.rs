//! Multinomial naive Bayes over character n-grams.

use std::collections::{BTreeMap, BTreeSet};
use std::ops::RangeInclusive;

use super::{EvalError, LanguageClassifier, Prediction};
use crate::corpus::{LabelSet, LabeledSentence};
use crate::tokenizer::normalize;

pub const DEFAULT_NGRAM_RANGE: RangeInclusive<usize> = 1..=3;

/// Character n-grams of the normalized text, padded with one space on each
/// side so word edges are visible. Empty text has none.
pub fn char_ngrams(text: &str, range: RangeInclusive<usize>) -> Vec<String> {
    let norm = normalize(text);
    if norm.is_empty() {
        return Vec::new();
    }
    let chars: Vec<char> = format!(" {norm} ").chars().collect();
    let mut out = Vec::new();
    for n in range {
        if n == 0 || n > chars.len() {
            continue;
        }
        out.extend(chars.windows(n).map(|w| w.iter().collect::<String>()));
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct NgramModel {
    labels: LabelSet,
    range: RangeInclusive<usize>,
    log_priors: Vec<f64>,
    counts: Vec<BTreeMap<String, u64>>,
    totals: Vec<u64>,
    vocabulary: BTreeSet<String>,
}

/// Fit with add-one smoothing. Every class needs at least one example.
pub fn ngram_train(
    data: &[LabeledSentence],
    labels: &LabelSet,
    range: RangeInclusive<usize>,
) -> Result<NgramModel, EvalError> {
    if range.is_empty() || *range.start() == 0 {
        return Err(EvalError::Config(format!(
            "n-gram range {range:?} must be non-empty and start at 1 or more"
        )));
    }
    let k = labels.len();
    let mut docs = vec![0u64; k];
    let mut counts = vec![BTreeMap::new(); k];
    let mut vocabulary = BTreeSet::new();
    for s in data {
        let c = super::class_of(&s.label, labels)?;
        docs[c] += 1;
        for g in char_ngrams(&s.text, range.clone()) {
            *counts[c].entry(g.clone()).or_insert(0) += 1;
            vocabulary.insert(g);
        }
    }
    if let Some(c) = docs.iter().position(|&d| d == 0) {
        return Err(EvalError::EmptyClass(labels.get(c).expect("class id").name.clone()));
    }
    let n: u64 = docs.iter().sum();
    let log_priors = docs.iter().map(|&d| (d as f64 / n as f64).ln()).collect();
    let totals = counts.iter().map(|m| m.values().sum()).collect();
    Ok(NgramModel {
        labels: labels.clone(),
        range,
        log_priors,
        counts,
        totals,
        vocabulary,
    })
}

impl NgramModel {
    pub fn range(&self) -> RangeInclusive<usize> {
        self.range.clone()
    }

    pub fn log_priors(&self) -> &[f64] {
        &self.log_priors
    }

    /// Distinct n-grams seen in training.
    pub fn vocabulary_size(&self) -> usize {
        self.vocabulary.len()
    }

    pub fn count(&self, class: usize, gram: &str) -> u64 {
        self.counts[class].get(gram).copied().unwrap_or(0)
    }

    /// `log((count + 1) / (total + |V|))`; unseen grams get the floor
    /// `log(1 / (total + |V|))`.
    pub fn log_likelihood(&self, class: usize, gram: &str) -> f64 {
        let denom = (self.totals[class] + self.vocabulary.len() as u64) as f64;
        ((self.count(class, gram) + 1) as f64 / denom).ln()
    }

    /// Unnormalized log posterior per class.
    pub fn scores(&self, text: &str) -> Vec<f64> {
        let grams = char_ngrams(text, self.range.clone());
        (0..self.labels.len())
            .map(|c| self.log_priors[c] + grams.iter().map(|g| self.log_likelihood(c, g)).sum::<f64>())
            .collect()
    }
}

/// Argmax of log-prior plus summed log-likelihoods, normalized in log space.
pub fn ngram_predict(model: &NgramModel, text: &str) -> Prediction {
    Prediction::from_scores(&model.labels, &model.scores(text))
}

impl LanguageClassifier for NgramModel {
    fn labels(&self) -> &LabelSet {
        &self.labels
    }

    fn predict(&self, text: &str) -> Result<Prediction, EvalError> {
        Ok(ngram_predict(self, text))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn data(pairs: &[(&str, &str)], labels: &LabelSet) -> Vec<LabeledSentence> {
        pairs
            .iter()
            .map(|(t, l)| LabeledSentence::new(*t, labels.by_name(l).unwrap()))
            .collect()
    }

    #[test]
    fn ngrams_include_edges() {
        assert_eq!(char_ngrams("Ab", 1..=2), vec![" ", "a", "b", " ", " a", "ab", "b "]);
        assert!(char_ngrams("   ", 1..=3).is_empty());
        assert_eq!(char_ngrams("a", 3..=3), vec![" a "]);
    }

    #[test]
    fn exclusive_gram_tips_the_balance() {
        let labels = LabelSet::new(["a", "b"]).unwrap();
        let train = data(&[("zz xy", "a"), ("xy", "b")], &labels);
        let m = ngram_train(&train, &labels, 2..=2).unwrap();
        assert!(m.count(0, "zz") > 0 && m.count(1, "zz") == 0);
        let s = m.scores("zz");
        assert!(s[0] > s[1]);
        assert_eq!(ngram_predict(&m, "zz").label.name, "a");
    }

    #[test]
    fn single_class_always_wins() {
        let labels = LabelSet::new(["only"]).unwrap();
        let m = ngram_train(&data(&[("hello", "only")], &labels), &labels, 1..=3).unwrap();
        for t in ["", "xyz", "hello"] {
            let p = ngram_predict(&m, t);
            assert_eq!(p.label.name, "only");
            assert_eq!(p.probabilities, vec![1.0]);
        }
    }

    #[test]
    fn permutation_gives_identical_tables() {
        let labels = LabelSet::default();
        let pairs = [
            ("see you", "english"),
            ("ap kaise ho", "hindi"),
            ("kak dela", "russian"),
            ("call me", "english"),
        ];
        let a = ngram_train(&data(&pairs, &labels), &labels, 1..=3).unwrap();
        let mut rev = pairs;
        rev.reverse();
        let b = ngram_train(&data(&rev, &labels), &labels, 1..=3).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn empty_text_uses_priors() {
        let labels = LabelSet::default();
        let pairs = [("a b", "english"), ("c", "hindi"), ("d", "hindi"), ("e", "russian")];
        let m = ngram_train(&data(&pairs, &labels), &labels, 1..=3).unwrap();
        let p = ngram_predict(&m, "");
        assert_eq!(p.label.name, "hindi");
        assert!((p.probabilities[1] - 0.5).abs() < 1e-12);
        assert!((p.probabilities.iter().sum::<f64>() - 1.0).abs() < 1e-6);
    }

    #[test]
    fn dominant_pattern_is_recognized() {
        let labels = LabelSet::default();
        let pairs = [
            ("kak dela", "russian"),
            ("privet kak ty", "russian"),
            ("ya doma", "russian"),
            ("ap kaise ho", "hindi"),
            ("main theek hun", "hindi"),
            ("kya hal hai", "hindi"),
            ("how are you", "english"),
            ("see you there", "english"),
            ("what are you doing", "english"),
        ];
        let m = ngram_train(&data(&pairs, &labels), &labels, 1..=3).unwrap();
        assert_eq!(ngram_predict(&m, "kak ty").label.name, "russian");
        assert_eq!(ngram_predict(&m, "kaise hai").label.name, "hindi");
        assert_eq!(ngram_predict(&m, "are you there").label.name, "english");
    }

    #[test]
    fn empty_class_is_an_error() {
        let labels = LabelSet::default();
        let train = data(&[("x", "english"), ("y", "hindi")], &labels);
        assert!(matches!(ngram_train(&train, &labels, 1..=3), Err(EvalError::EmptyClass(ref c)) if c == "russian"));
    }

    #[test]
    fn smoothed_likelihoods_are_normalized() {
        let labels = LabelSet::new(["a", "b"]).unwrap();
        let m = ngram_train(&data(&[("abc", "a"), ("cd", "b")], &labels), &labels, 1..=2).unwrap();
        for c in 0..2 {
            let mass: f64 = m.vocabulary.iter().map(|g| m.log_likelihood(c, g).exp()).sum();
            assert!((mass - 1.0).abs() < 1e-12);
        }
    }
}

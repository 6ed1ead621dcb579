//! Inference, metrics and the n-gram baseline.

use thiserror::Error;

use crate::corpus::{CorpusError, LabelSet, LabeledSentence, LanguageLabel};
use crate::model::{self, ModelConfig, ModelError, ModelParameters};
use crate::tokenizer::{encode, Vocabulary};
use crate::train::Checkpoint;

mod metrics;
mod ngram;

pub use metrics::{ClassMetrics, Metrics, METRICS_FORMAT};
pub use ngram::{char_ngrams, ngram_predict, ngram_train, NgramModel, DEFAULT_NGRAM_RANGE};

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("nothing to evaluate")]
    EmptyData,
    #[error("label {label:?} is not one of the model's classes ({known})")]
    UnknownLabel { label: String, known: String },
    #[error("class {0:?} has no training examples")]
    EmptyClass(String),
    #[error("{0}")]
    Config(String),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Labels(#[from] CorpusError),
}

/// Class id of `label` within `labels`, matched by name and id.
pub(crate) fn class_of(label: &LanguageLabel, labels: &LabelSet) -> Result<usize, EvalError> {
    match labels.get(label.id) {
        Some(l) if l.name == label.name => Ok(label.id),
        _ => Err(EvalError::UnknownLabel {
            label: label.name.clone(),
            known: labels.names().join(", "),
        }),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Prediction {
    pub label: LanguageLabel,
    /// Indexed by class id; sums to 1.
    pub probabilities: Vec<f64>,
}

impl Prediction {
    /// Softmax over unnormalized log scores; ties go to the lowest class id.
    pub fn from_scores(labels: &LabelSet, scores: &[f64]) -> Self {
        let probabilities = model::softmax(scores);
        let best = model::argmax(scores);
        Prediction {
            label: labels.get(best).expect("one score per class").clone(),
            probabilities,
        }
    }

    pub fn confidence(&self) -> f64 {
        self.probabilities[self.label.id]
    }
}

/// Anything that maps text to a label distribution.
pub trait LanguageClassifier {
    fn labels(&self) -> &LabelSet;

    fn predict(&self, text: &str) -> Result<Prediction, EvalError>;

    fn predict_batch(&self, texts: &[&str]) -> Result<Vec<Prediction>, EvalError> {
        texts.iter().map(|t| self.predict(t)).collect()
    }
}

/// The transformer with its vocabulary and class names.
#[derive(Debug, Clone)]
pub struct Classifier {
    pub params: ModelParameters,
    pub config: ModelConfig,
    pub vocab: Vocabulary,
    pub labels: LabelSet,
}

const PREDICT_BATCH: usize = 64;

impl Classifier {
    pub fn new(
        params: ModelParameters,
        config: ModelConfig,
        vocab: Vocabulary,
        labels: LabelSet,
    ) -> Result<Self, EvalError> {
        config.validate()?;
        params.check(&config)?;
        if vocab.len() != config.vocab_size {
            return Err(EvalError::Config(format!(
                "vocabulary has {} tokens but the model expects {}",
                vocab.len(),
                config.vocab_size
            )));
        }
        if labels.len() != config.n_classes {
            return Err(EvalError::Config(format!(
                "{} labels for a model with {} classes",
                labels.len(),
                config.n_classes
            )));
        }
        Ok(Classifier {
            params,
            config,
            vocab,
            labels,
        })
    }

    pub fn from_checkpoint(checkpoint: Checkpoint) -> Result<Self, EvalError> {
        let labels = LabelSet::new(&checkpoint.labels)?;
        Self::new(checkpoint.params, checkpoint.config, checkpoint.vocab, labels)
    }
}

impl LanguageClassifier for Classifier {
    fn labels(&self) -> &LabelSet {
        &self.labels
    }

    fn predict(&self, text: &str) -> Result<Prediction, EvalError> {
        Ok(self.predict_batch(&[text])?.remove(0))
    }

    fn predict_batch(&self, texts: &[&str]) -> Result<Vec<Prediction>, EvalError> {
        let mut out = Vec::with_capacity(texts.len());
        for chunk in texts.chunks(PREDICT_BATCH) {
            let batch: Vec<_> = chunk
                .iter()
                .map(|t| encode(t, &self.vocab, self.config.max_len))
                .collect();
            for row in model::logits(&self.params, &self.config, &batch)? {
                let scores: Vec<f64> = row.iter().map(|&v| v as f64).collect();
                out.push(Prediction::from_scores(&self.labels, &scores));
            }
        }
        Ok(out)
    }
}

/// Encode, run the encoder, softmax and argmax.
pub fn predict(
    params: &ModelParameters,
    config: &ModelConfig,
    vocab: &Vocabulary,
    labels: &LabelSet,
    text: &str,
) -> Result<Prediction, EvalError> {
    let batch = [encode(text, vocab, config.max_len)];
    let row = model::logits(params, config, &batch)?.remove(0);
    if labels.len() != row.len() {
        return Err(EvalError::Config(format!(
            "{} labels for {} logits",
            labels.len(),
            row.len()
        )));
    }
    let scores: Vec<f64> = row.iter().map(|&v| v as f64).collect();
    Ok(Prediction::from_scores(labels, &scores))
}

/// One prediction per example, tallied into [`Metrics`].
pub fn evaluate(classifier: &dyn LanguageClassifier, data: &[LabeledSentence]) -> Result<Metrics, EvalError> {
    Ok(evaluate_with_predictions(classifier, data)?.0)
}

/// [`evaluate`], also returning the predicted class ids in data order.
pub fn evaluate_with_predictions(
    classifier: &dyn LanguageClassifier,
    data: &[LabeledSentence],
) -> Result<(Metrics, Vec<usize>), EvalError> {
    if data.is_empty() {
        return Err(EvalError::EmptyData);
    }
    let labels = classifier.labels();
    let truth = data
        .iter()
        .map(|s| class_of(&s.label, labels))
        .collect::<Result<Vec<_>, _>>()?;
    let texts: Vec<&str> = data.iter().map(|s| s.text.as_str()).collect();
    let predicted: Vec<usize> = classifier
        .predict_batch(&texts)?
        .into_iter()
        .map(|p| p.label.id)
        .collect();
    let metrics = Metrics::from_pairs(labels.names(), truth.into_iter().zip(predicted.iter().copied()));
    Ok((metrics, predicted))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::init_parameters;
    use crate::tokenizer::build_vocab_from_texts;

    /// Looks the answer up in a fixed table.
    struct Oracle(LabelSet, Vec<LabeledSentence>);

    impl LanguageClassifier for Oracle {
        fn labels(&self) -> &LabelSet {
            &self.0
        }

        fn predict(&self, text: &str) -> Result<Prediction, EvalError> {
            let s = self.1.iter().find(|s| s.text == text).unwrap();
            let mut probabilities = vec![0.0; self.0.len()];
            probabilities[s.label.id] = 1.0;
            Ok(Prediction {
                label: s.label.clone(),
                probabilities,
            })
        }
    }

    fn sample_data() -> (LabelSet, Vec<LabeledSentence>) {
        let labels = LabelSet::default();
        let data = (0..30)
            .map(|i| LabeledSentence::new(format!("s{i}"), labels.get(i % 3).unwrap()))
            .collect();
        (labels, data)
    }

    #[test]
    fn oracle_gives_identity_confusion() {
        let (labels, data) = sample_data();
        let m = evaluate(&Oracle(labels, data.clone()), &data).unwrap();
        assert_eq!(m.confusion, vec![vec![10, 0, 0], vec![0, 10, 0], vec![0, 0, 10]]);
        assert_eq!(m.accuracy, 1.0);
        assert!(m.per_class.iter().all(|c| c.f1 == 1.0));
    }

    #[test]
    fn evaluation_errors() {
        let (labels, data) = sample_data();
        let oracle = Oracle(labels, data);
        assert!(matches!(evaluate(&oracle, &[]), Err(EvalError::EmptyData)));
        let alien = LanguageLabel {
            id: 5,
            name: "chinese".into(),
        };
        assert!(matches!(
            evaluate(&oracle, &[LabeledSentence::new("s1", &alien)]),
            Err(EvalError::UnknownLabel { .. })
        ));
    }

    #[test]
    fn single_class_model_is_certain() {
        let vocab = build_vocab_from_texts(["abc"], 10).unwrap();
        let config = ModelConfig {
            hidden_dim: 8,
            ff_dim: 8,
            max_len: 8,
            ..ModelConfig::desk_scale(vocab.len(), 1)
        };
        let labels = LabelSet::new(["hindi"]).unwrap();
        let params = init_parameters(&config, 0).unwrap();
        for text in ["", "abc", "zzzz"] {
            let p = predict(&params, &config, &vocab, &labels, text).unwrap();
            assert_eq!(p.label.name, "hindi");
            assert_eq!(p.probabilities, vec![1.0]);
        }
    }

    #[test]
    fn classifier_batches_match_single_predictions() {
        let vocab = build_vocab_from_texts(["ap kaise ho", "kak dela"], 40).unwrap();
        let config = ModelConfig {
            hidden_dim: 8,
            ff_dim: 8,
            max_len: 16,
            ..ModelConfig::desk_scale(vocab.len(), 3)
        };
        let c = Classifier::new(init_parameters(&config, 4).unwrap(), config, vocab, LabelSet::default()).unwrap();
        let texts = ["ap kaise ho", "kak dela", "hello"];
        let batch = c.predict_batch(&texts).unwrap();
        for (t, p) in texts.iter().zip(&batch) {
            let single = predict(&c.params, &c.config, &c.vocab, &c.labels, t).unwrap();
            assert_eq!(*p, single);
            assert!((p.probabilities.iter().sum::<f64>() - 1.0).abs() < 1e-6);
        }
    }
}

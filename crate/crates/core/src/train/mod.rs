//! Supervised training: AdamW, the epoch loop and checkpoints.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{DatasetSplit, LabeledSentence};
use crate::model::{self, Mode, ModelConfig, ModelError, ModelParameters, Scalar};
use crate::tokenizer::{encode, TokenSequence, Vocabulary};

mod checkpoint;

pub use checkpoint::{
    load_checkpoint, save_checkpoint, Checkpoint, CheckpointError, CHECKPOINT_MAGIC, CHECKPOINT_VERSION,
};

#[derive(Debug, Error)]
pub enum TrainError {
    #[error("invalid training config: {0}")]
    InvalidConfig(String),
    #[error("parameter/gradient shape mismatch: {0}")]
    Shape(String),
    #[error("non-finite gradient in {parameter} at step {step}")]
    NonFiniteGradient { parameter: String, step: u64 },
    #[error("non-finite loss at epoch {epoch}, step {step}")]
    NonFiniteLoss { epoch: usize, step: u64 },
    #[error("the training split is empty")]
    EmptyTrainingSet,
    #[error("vocabulary has {vocab} tokens but the model expects {config}")]
    VocabMismatch { vocab: usize, config: usize },
    #[error("label {label} (id {id}) is outside the model's {n_classes} classes")]
    UnknownLabel { label: String, id: usize, n_classes: usize },
    #[error(transparent)]
    Model(#[from] ModelError),
}

impl TrainError {
    /// Whether the failure is numeric (a NaN or infinity surfaced).
    pub fn is_numeric(&self) -> bool {
        matches!(
            self,
            TrainError::NonFiniteGradient { .. } | TrainError::NonFiniteLoss { .. }
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub weight_decay: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: 5e-5,
            epochs: 5,
            batch_size: 4,
            seed: 42,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            weight_decay: 0.01,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), TrainError> {
        let fail = |m: String| Err(TrainError::InvalidConfig(m));
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return fail(format!("learning_rate {} must be positive", self.learning_rate));
        }
        if self.epochs == 0 {
            return fail("epochs must be at least 1".into());
        }
        if self.batch_size == 0 {
            return fail("batch_size must be at least 1".into());
        }
        for (name, b) in [("beta1", self.beta1), ("beta2", self.beta2)] {
            if !(0.0..1.0).contains(&b) {
                return fail(format!("{name} {b} outside [0, 1)"));
            }
        }
        if self.epsilon.is_nan() || self.epsilon <= 0.0 {
            return fail(format!("epsilon {} must be positive", self.epsilon));
        }
        if !(self.weight_decay >= 0.0 && self.weight_decay.is_finite()) {
            return fail(format!("weight_decay {} must be non-negative", self.weight_decay));
        }
        Ok(())
    }
}

/// Adam moments and step count.
#[derive(Debug, Clone, PartialEq)]
pub struct OptimizerState<T = f32> {
    pub step: u64,
    pub m: ModelParameters<T>,
    pub v: ModelParameters<T>,
}

impl<T: Scalar> OptimizerState<T> {
    pub fn new(params: &ModelParameters<T>) -> Self {
        OptimizerState {
            step: 0,
            m: params.zeros_like(),
            v: params.zeros_like(),
        }
    }
}

/// One AdamW update in place. Decoupled weight decay applies to 2-D
/// tensors only.
///
/// Nothing is modified when an error is returned.
pub fn adamw_step<T: Scalar>(
    params: &mut ModelParameters<T>,
    grads: &ModelParameters<T>,
    state: &mut OptimizerState<T>,
    config: &TrainConfig,
) -> Result<(), TrainError> {
    if !params.congruent_with(grads) || !params.congruent_with(&state.m) || !params.congruent_with(&state.v) {
        return Err(TrainError::Shape(
            "parameters, gradients and moments must share names and shapes".into(),
        ));
    }
    let step = state.step + 1;
    if let Some(name) = grads.first_non_finite() {
        return Err(TrainError::NonFiniteGradient {
            parameter: name.to_string(),
            step,
        });
    }
    state.step = step;
    let b1 = T::lit(config.beta1);
    let b2 = T::lit(config.beta2);
    let one = T::one();
    let correct1 = T::lit(1.0 - config.beta1.powf(step as f64));
    let correct2 = T::lit(1.0 - config.beta2.powf(step as f64));
    let lr = T::lit(config.learning_rate);
    let eps = T::lit(config.epsilon);
    for (((p, g), m), v) in params
        .tensors_mut()
        .iter_mut()
        .zip(grads.tensors())
        .zip(state.m.tensors_mut())
        .zip(state.v.tensors_mut())
    {
        let decay = if p.is_matrix() {
            T::lit(config.weight_decay)
        } else {
            T::zero()
        };
        for i in 0..p.data.len() {
            let gi = g.data[i];
            m.data[i] = b1 * m.data[i] + (one - b1) * gi;
            v.data[i] = b2 * v.data[i] + (one - b2) * gi * gi;
            let m_hat = m.data[i] / correct1;
            let v_hat = v.data[i] / correct2;
            let theta = p.data[i];
            p.data[i] = theta - lr * (m_hat / (v_hat.sqrt() + eps) + decay * theta);
        }
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    /// 1-based.
    pub epoch: usize,
    pub mean_loss: f64,
    /// `None` when the validation split is empty.
    pub validation_accuracy: Option<f64>,
    /// Optimizer steps taken so far.
    pub steps: u64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainHistory {
    pub records: Vec<EpochRecord>,
}

impl TrainHistory {
    pub fn last(&self) -> Option<&EpochRecord> {
        self.records.last()
    }

    pub fn total_steps(&self) -> u64 {
        self.last().map_or(0, |r| r.steps)
    }
}

/// Optimizer steps in one epoch over `examples` items.
pub fn steps_per_epoch(examples: usize, batch_size: usize) -> usize {
    examples.div_ceil(batch_size)
}

fn encode_all(
    data: &[LabeledSentence],
    vocab: &Vocabulary,
    config: &ModelConfig,
) -> Result<(Vec<TokenSequence>, Vec<usize>), TrainError> {
    let mut seqs = Vec::with_capacity(data.len());
    let mut labels = Vec::with_capacity(data.len());
    for s in data {
        if s.label.id >= config.n_classes {
            return Err(TrainError::UnknownLabel {
                label: s.label.name.clone(),
                id: s.label.id,
                n_classes: config.n_classes,
            });
        }
        seqs.push(encode(&s.text, vocab, config.max_len));
        labels.push(s.label.id);
    }
    Ok((seqs, labels))
}

const EVAL_BATCH: usize = 64;

/// Fraction of `seqs` whose argmax logit equals the label.
pub fn accuracy(
    params: &ModelParameters,
    config: &ModelConfig,
    seqs: &[TokenSequence],
    labels: &[usize],
) -> Result<f64, ModelError> {
    let mut correct = 0;
    for (chunk, ys) in seqs.chunks(EVAL_BATCH).zip(labels.chunks(EVAL_BATCH)) {
        let logits = model::logits(params, config, chunk)?;
        correct += logits
            .iter()
            .zip(ys)
            .filter(|(row, &y)| model::argmax(row) == y)
            .count();
    }
    Ok(correct as f64 / seqs.len() as f64)
}

/// [`train_with_progress`] without a callback.
pub fn train(
    params: ModelParameters,
    config: &ModelConfig,
    train_config: &TrainConfig,
    dataset: &DatasetSplit,
    vocab: &Vocabulary,
) -> Result<(ModelParameters, TrainHistory), TrainError> {
    train_with_progress(params, config, train_config, dataset, vocab, |_| {})
}

/// Train for `train_config.epochs` epochs, calling `on_epoch` after each.
///
/// Epoch `e` (0-based) shuffles with a ChaCha8 stream seeded by
/// `seed ^ e`; step `s` draws its dropout masks from a seed derived from
/// `seed` and `s`. The result depends only on the inputs.
pub fn train_with_progress(
    mut params: ModelParameters,
    config: &ModelConfig,
    train_config: &TrainConfig,
    dataset: &DatasetSplit,
    vocab: &Vocabulary,
    mut on_epoch: impl FnMut(&EpochRecord),
) -> Result<(ModelParameters, TrainHistory), TrainError> {
    train_config.validate()?;
    config.validate()?;
    params.check(config)?;
    if vocab.len() != config.vocab_size {
        return Err(TrainError::VocabMismatch {
            vocab: vocab.len(),
            config: config.vocab_size,
        });
    }
    if dataset.train.is_empty() {
        return Err(TrainError::EmptyTrainingSet);
    }
    let (train_seqs, train_labels) = encode_all(&dataset.train, vocab, config)?;
    let (val_seqs, val_labels) = encode_all(&dataset.validation, vocab, config)?;
    let dropout_base = crate::seed::derive(train_config.seed, "dropout");

    let mut state = OptimizerState::new(&params);
    let mut history = TrainHistory::default();
    let mut order: Vec<usize> = (0..train_seqs.len()).collect();
    for epoch in 0..train_config.epochs {
        order.sort_unstable();
        order.shuffle(&mut ChaCha8Rng::seed_from_u64(train_config.seed ^ epoch as u64));
        let mut loss_sum = 0.0f64;
        for batch_idx in order.chunks(train_config.batch_size) {
            let batch: Vec<TokenSequence> = batch_idx.iter().map(|&i| train_seqs[i].clone()).collect();
            let labels: Vec<usize> = batch_idx.iter().map(|&i| train_labels[i]).collect();
            let mode = Mode::Train {
                dropout_seed: dropout_base.wrapping_add(state.step),
            };
            let (_, cache) = model::forward(&params, config, &batch, mode)?;
            let (loss, grads) = model::backward(&params, config, &batch, &labels, &cache)?;
            if !loss.is_finite() {
                return Err(TrainError::NonFiniteLoss {
                    epoch: epoch + 1,
                    step: state.step + 1,
                });
            }
            loss_sum += loss as f64 * batch.len() as f64;
            adamw_step(&mut params, &grads, &mut state, train_config)?;
        }
        let validation_accuracy = if val_seqs.is_empty() {
            None
        } else {
            Some(accuracy(&params, config, &val_seqs, &val_labels)?)
        };
        let record = EpochRecord {
            epoch: epoch + 1,
            mean_loss: loss_sum / train_seqs.len() as f64,
            validation_accuracy,
            steps: state.step,
        };
        on_epoch(&record);
        history.records.push(record);
    }
    Ok((params, history))
}

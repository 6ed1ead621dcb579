//! A small BERT-style encoder with a classification head.
//!
//! ```text
//! ids ─► token emb + position emb ─► dropout
//!     ─► n_layers × [ self-attention ─► dropout ─► +residual ─► LayerNorm
//!                     ─► W_up ─► GELU ─► W_down ─► dropout ─► +residual ─► LayerNorm ]
//!     ─► hidden state at [CLS] ─► dropout ─► classifier ─► logits
//! ```
//!
//! Everything is generic over [`Scalar`] so the same code runs in `f32` for
//! training and in `f64` for finite-difference checks.

use serde::{Deserialize, Serialize};
use thiserror::Error;

mod encoder;
pub mod ops;
mod params;

pub use encoder::{backward, forward, logits, ActivationCache, ExampleCache, Mode};
pub use ops::Scalar;
pub use params::{init_parameters, Gradients, ModelParameters, Tensor, INIT_STD, PER_LAYER};

pub const LAYER_NORM_EPS: f64 = 1e-12;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("invalid model config: {0}")]
    InvalidConfig(String),
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("example {example}: token id {id} at position {position} is outside the vocabulary of {vocab_size}")]
    IdOutOfRange {
        example: usize,
        position: usize,
        id: u32,
        vocab_size: usize,
    },
    #[error("example {example}: label {label} is outside 0..{n_classes}")]
    LabelOutOfRange {
        example: usize,
        label: usize,
        n_classes: usize,
    },
    #[error("example {example}: {message}")]
    Mask { example: usize, message: String },
    #[error("activation cache: {0}")]
    Cache(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub vocab_size: usize,
    pub hidden_dim: usize,
    pub n_layers: usize,
    pub n_heads: usize,
    pub ff_dim: usize,
    pub max_len: usize,
    pub n_classes: usize,
    pub dropout_rate: f64,
}

impl ModelConfig {
    /// Two layers, two heads, width 64, feed-forward 128, 64 positions,
    /// dropout 0.1.
    pub fn desk_scale(vocab_size: usize, n_classes: usize) -> Self {
        ModelConfig {
            vocab_size,
            hidden_dim: 64,
            n_layers: 2,
            n_heads: 2,
            ff_dim: 128,
            max_len: crate::tokenizer::DEFAULT_MAX_LEN,
            n_classes,
            dropout_rate: 0.1,
        }
    }

    pub fn head_dim(&self) -> usize {
        self.hidden_dim / self.n_heads
    }

    /// A single class is allowed: such a model always predicts that class.
    pub fn validate(&self) -> Result<(), ModelError> {
        let fail = |m: String| Err(ModelError::InvalidConfig(m));
        if self.vocab_size < 5 {
            return fail(format!("vocab_size {} < 5", self.vocab_size));
        }
        if self.hidden_dim == 0 || self.n_heads == 0 || !self.hidden_dim.is_multiple_of(self.n_heads) {
            return fail(format!(
                "hidden_dim {} must be a positive multiple of n_heads {}",
                self.hidden_dim, self.n_heads
            ));
        }
        if self.n_layers == 0 {
            return fail("n_layers must be at least 1".into());
        }
        if self.ff_dim == 0 {
            return fail("ff_dim must be positive".into());
        }
        if self.max_len < 3 {
            return fail(format!("max_len {} < 3", self.max_len));
        }
        if self.n_classes == 0 {
            return fail("n_classes must be at least 1".into());
        }
        if !(0.0..1.0).contains(&self.dropout_rate) {
            return fail(format!("dropout_rate {} outside [0, 1)", self.dropout_rate));
        }
        Ok(())
    }
}

/// Softmax of one logits row.
pub fn softmax<T: Scalar>(row: &[T]) -> Vec<T> {
    ops::softmax(row)
}

/// Index of the largest value; ties go to the lowest index.
pub fn argmax<T: Scalar>(row: &[T]) -> usize {
    let mut best = 0;
    for (i, &v) in row.iter().enumerate().skip(1) {
        if v > row[best] {
            best = i;
        }
    }
    best
}

/// Mean cross-entropy of a batch of logits rows against class indices.
pub fn cross_entropy<T: Scalar>(logits: &[Vec<T>], labels: &[usize]) -> Result<T, ModelError> {
    if logits.len() != labels.len() {
        return Err(ModelError::Shape(format!(
            "{} logits rows but {} labels",
            logits.len(),
            labels.len()
        )));
    }
    if logits.is_empty() {
        return Err(ModelError::Shape("empty batch".into()));
    }
    for (example, (row, &label)) in logits.iter().zip(labels).enumerate() {
        if label >= row.len() {
            return Err(ModelError::LabelOutOfRange {
                example,
                label,
                n_classes: row.len(),
            });
        }
    }
    Ok(ops::cross_entropy(logits, labels))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_validation() {
        let good = ModelConfig::desk_scale(40, 3);
        good.validate().unwrap();
        assert_eq!(good.head_dim(), 32);
        for bad in [
            ModelConfig {
                n_heads: 3,
                ..good.clone()
            },
            ModelConfig {
                vocab_size: 4,
                ..good.clone()
            },
            ModelConfig {
                n_classes: 0,
                ..good.clone()
            },
            ModelConfig {
                dropout_rate: 1.0,
                ..good.clone()
            },
            ModelConfig {
                max_len: 2,
                ..good.clone()
            },
            ModelConfig {
                n_layers: 0,
                ..good.clone()
            },
        ] {
            assert!(bad.validate().is_err(), "{bad:?}");
        }
    }

    #[test]
    fn cross_entropy_rejects_bad_labels() {
        let logits = vec![vec![0.0f32; 3]];
        assert!(matches!(
            cross_entropy(&logits, &[3]),
            Err(ModelError::LabelOutOfRange { label: 3, .. })
        ));
        assert!((cross_entropy(&logits, &[0]).unwrap() - 3f32.ln()).abs() < 1e-6);
    }

    #[test]
    fn cross_entropy_random_batch_matches_scalar_recomputation() {
        let logits: Vec<Vec<f64>> = vec![
            vec![0.3, -1.2, 2.0],
            vec![1.5, 0.1, -0.4],
            vec![-2.0, -2.5, 0.7],
            vec![0.0, 3.1, 1.1],
        ];
        let labels = [2, 0, 1, 1];
        let mut want = 0.0;
        for (row, &y) in logits.iter().zip(&labels) {
            let z: f64 = row.iter().map(|v| v.exp()).sum();
            want += -(row[y].exp() / z).ln();
        }
        want /= 4.0;
        assert!((cross_entropy(&logits, &labels).unwrap() - want).abs() < 1e-6);
    }

    #[test]
    fn argmax_breaks_ties_low() {
        assert_eq!(argmax(&[0.2f32, 0.5, 0.5]), 1);
        assert_eq!(argmax(&[1.0f64, 1.0]), 0);
        assert_eq!(argmax(&[-3.0f32]), 0);
    }

    #[test]
    fn softmax_is_shift_invariant() {
        let x = [0.4f64, -1.3, 2.2, 0.0];
        let a = softmax(&x);
        let b = softmax(&x.map(|v| v + 17.5));
        for (p, q) in a.iter().zip(&b) {
            assert!((p - q).abs() < 1e-7);
        }
        assert!((a.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }
}

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::ops::{cast, Scalar};
use super::{ModelConfig, ModelError};

/// A named, shaped, flat array.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor<T = f32> {
    pub name: String,
    pub shape: Vec<usize>,
    pub data: Vec<T>,
}

impl<T: Scalar> Tensor<T> {
    pub fn new(name: impl Into<String>, shape: Vec<usize>, data: Vec<T>) -> Self {
        let t = Tensor {
            name: name.into(),
            shape,
            data,
        };
        assert_eq!(
            t.data.len(),
            t.shape.iter().product::<usize>(),
            "tensor {} data/shape mismatch",
            t.name
        );
        t
    }

    pub fn zeros(name: impl Into<String>, shape: Vec<usize>) -> Self {
        let len = shape.iter().product();
        Tensor::new(name, shape, vec![T::zero(); len])
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    /// Weight matrices (and embedding tables) take weight decay; biases and
    /// layer-norm parameters do not.
    pub fn is_matrix(&self) -> bool {
        self.shape.len() == 2
    }
}

/// Position of each tensor in [`ModelParameters`]. Every encoder layer owns
/// [`PER_LAYER`] consecutive tensors.
pub(crate) mod slot {
    pub const TOKEN_EMBEDDING: usize = 0;
    pub const POSITION_EMBEDDING: usize = 1;
    pub const FIRST_LAYER: usize = 2;

    pub const QUERY_W: usize = 0;
    pub const QUERY_B: usize = 1;
    pub const KEY_W: usize = 2;
    pub const KEY_B: usize = 3;
    pub const VALUE_W: usize = 4;
    pub const VALUE_B: usize = 5;
    pub const OUTPUT_W: usize = 6;
    pub const OUTPUT_B: usize = 7;
    pub const NORM1_SCALE: usize = 8;
    pub const NORM1_SHIFT: usize = 9;
    pub const FF_UP_W: usize = 10;
    pub const FF_UP_B: usize = 11;
    pub const FF_DOWN_W: usize = 12;
    pub const FF_DOWN_B: usize = 13;
    pub const NORM2_SCALE: usize = 14;
    pub const NORM2_SHIFT: usize = 15;
    pub const PER_LAYER: usize = 16;

    pub fn layer(layer: usize, offset: usize) -> usize {
        FIRST_LAYER + layer * PER_LAYER + offset
    }

    pub fn classifier_w(n_layers: usize) -> usize {
        FIRST_LAYER + n_layers * PER_LAYER
    }

    pub fn classifier_b(n_layers: usize) -> usize {
        classifier_w(n_layers) + 1
    }
}

pub use slot::PER_LAYER;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Init {
    Normal,
    Zeros,
    Ones,
}

/// Names, shapes and initializers of every tensor, in storage order.
fn layout(config: &ModelConfig) -> Vec<(String, Vec<usize>, Init)> {
    let h = config.hidden_dim;
    let f = config.ff_dim;
    let mut out = vec![
        ("embeddings.token".to_string(), vec![config.vocab_size, h], Init::Normal),
        ("embeddings.position".to_string(), vec![config.max_len, h], Init::Normal),
    ];
    for l in 0..config.n_layers {
        let p = |s: &str| format!("layer.{l}.{s}");
        out.extend([
            (p("attention.query.weight"), vec![h, h], Init::Normal),
            (p("attention.query.bias"), vec![h], Init::Zeros),
            (p("attention.key.weight"), vec![h, h], Init::Normal),
            (p("attention.key.bias"), vec![h], Init::Zeros),
            (p("attention.value.weight"), vec![h, h], Init::Normal),
            (p("attention.value.bias"), vec![h], Init::Zeros),
            (p("attention.output.weight"), vec![h, h], Init::Normal),
            (p("attention.output.bias"), vec![h], Init::Zeros),
            (p("attention_norm.scale"), vec![h], Init::Ones),
            (p("attention_norm.shift"), vec![h], Init::Zeros),
            (p("ffn.up.weight"), vec![h, f], Init::Normal),
            (p("ffn.up.bias"), vec![f], Init::Zeros),
            (p("ffn.down.weight"), vec![f, h], Init::Normal),
            (p("ffn.down.bias"), vec![h], Init::Zeros),
            (p("ffn_norm.scale"), vec![h], Init::Ones),
            (p("ffn_norm.shift"), vec![h], Init::Zeros),
        ]);
    }
    out.push(("classifier.weight".to_string(), vec![h, config.n_classes], Init::Normal));
    out.push(("classifier.bias".to_string(), vec![config.n_classes], Init::Zeros));
    out
}

/// All model weights, in a fixed order determined by the config.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParameters<T = f32> {
    tensors: Vec<Tensor<T>>,
}

/// Gradients share names, shapes and order with the parameters.
pub type Gradients<T = f32> = ModelParameters<T>;

pub const INIT_STD: f64 = 0.02;

/// Truncated-normal(0, 0.02) weights cut at ±2σ, zero biases, unit
/// layer-norm scales. Deterministic per seed.
pub fn init_parameters(config: &ModelConfig, seed: u64) -> Result<ModelParameters<f32>, ModelError> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let normal = Normal::new(0.0f64, INIT_STD).expect("valid std");
    let mut sample = || loop {
        let v = normal.sample(&mut rng);
        if v.abs() <= 2.0 * INIT_STD {
            return v as f32;
        }
    };
    let tensors = layout(config)
        .into_iter()
        .map(|(name, shape, init)| {
            let len: usize = shape.iter().product();
            let data = match init {
                Init::Normal => (0..len).map(|_| sample()).collect(),
                Init::Zeros => vec![0.0; len],
                Init::Ones => vec![1.0; len],
            };
            Tensor::new(name, shape, data)
        })
        .collect();
    Ok(ModelParameters { tensors })
}

impl<T: Scalar> ModelParameters<T> {
    /// Assemble from tensors. The caller is responsible for matching a
    /// config's layout when the result is used with the encoder; see
    /// [`ModelParameters::check`].
    pub fn from_tensors(tensors: Vec<Tensor<T>>) -> Self {
        ModelParameters { tensors }
    }

    pub fn zeros(config: &ModelConfig) -> Self {
        ModelParameters {
            tensors: layout(config)
                .into_iter()
                .map(|(name, shape, _)| Tensor::zeros(name, shape))
                .collect(),
        }
    }

    pub fn zeros_like(&self) -> Self {
        ModelParameters {
            tensors: self
                .tensors
                .iter()
                .map(|t| Tensor::zeros(t.name.clone(), t.shape.clone()))
                .collect(),
        }
    }

    pub fn tensors(&self) -> &[Tensor<T>] {
        &self.tensors
    }

    pub fn tensors_mut(&mut self) -> &mut [Tensor<T>] {
        &mut self.tensors
    }

    pub fn into_tensors(self) -> Vec<Tensor<T>> {
        self.tensors
    }

    pub fn get(&self, name: &str) -> Option<&Tensor<T>> {
        self.tensors.iter().find(|t| t.name == name)
    }

    pub(crate) fn data(&self, index: usize) -> &[T] {
        &self.tensors[index].data
    }

    /// Two distinct tensors, mutably. Requires `a < b`.
    pub(crate) fn pair_mut(&mut self, a: usize, b: usize) -> (&mut [T], &mut [T]) {
        assert!(a < b);
        let (lo, hi) = self.tensors.split_at_mut(b);
        (&mut lo[a].data, &mut hi[0].data)
    }

    /// Element-wise `self += other`; shapes must be congruent.
    pub fn add_assign(&mut self, other: &ModelParameters<T>) {
        assert!(self.congruent_with(other), "incongruent parameter sets");
        for (t, o) in self.tensors.iter_mut().zip(&other.tensors) {
            for (v, &w) in t.data.iter_mut().zip(&o.data) {
                *v += w;
            }
        }
    }

    /// Total number of scalars.
    pub fn num_scalars(&self) -> usize {
        self.tensors.iter().map(Tensor::len).sum()
    }

    pub fn is_finite(&self) -> bool {
        self.tensors.iter().all(|t| t.data.iter().all(|v| v.is_finite()))
    }

    /// Name of the first tensor holding a NaN or infinity.
    pub fn first_non_finite(&self) -> Option<&str> {
        self.tensors
            .iter()
            .find(|t| t.data.iter().any(|v| !v.is_finite()))
            .map(|t| t.name.as_str())
    }

    /// Same names and shapes, in the same order.
    pub fn congruent_with<U: Scalar>(&self, other: &ModelParameters<U>) -> bool {
        self.tensors.len() == other.tensors.len()
            && self
                .tensors
                .iter()
                .zip(&other.tensors)
                .all(|(a, b)| a.name == b.name && a.shape == b.shape)
    }

    /// Verify names and shapes against the layout the config declares.
    pub fn check(&self, config: &ModelConfig) -> Result<(), ModelError> {
        let expected = layout(config);
        if expected.len() != self.tensors.len() {
            return Err(ModelError::Shape(format!(
                "expected {} tensors, found {}",
                expected.len(),
                self.tensors.len()
            )));
        }
        for ((name, shape, _), t) in expected.iter().zip(&self.tensors) {
            if *name != t.name || *shape != t.shape || t.data.len() != shape.iter().product::<usize>() {
                return Err(ModelError::Shape(format!(
                    "tensor {} with shape {:?} where {name} {shape:?} was expected",
                    t.name, t.shape
                )));
            }
        }
        Ok(())
    }

    pub fn cast<U: Scalar>(&self) -> ModelParameters<U> {
        ModelParameters {
            tensors: self
                .tensors
                .iter()
                .map(|t| Tensor {
                    name: t.name.clone(),
                    shape: t.shape.clone(),
                    data: t.data.iter().map(|&v| cast(v)).collect(),
                })
                .collect(),
        }
    }

    /// Visit every scalar as (tensor index, offset).
    pub fn coordinates(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.tensors
            .iter()
            .enumerate()
            .flat_map(|(t, tensor)| (0..tensor.len()).map(move |i| (t, i)))
    }
}

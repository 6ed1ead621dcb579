//! Compare the analytic backward pass with central finite differences on a
//! tiny model, in 64-bit floats.
//!
//!     cargo run --release --example gradient_check

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rlid::model::{backward, cross_entropy, forward, init_parameters, Mode, ModelParameters};
use rlid::tokenizer::{build_vocab_from_texts, encode};
use rlid::ModelConfig;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let texts = ["kak dela", "ap kaise ho"];
    let vocab = build_vocab_from_texts(texts, 12)?;
    let config = ModelConfig {
        vocab_size: vocab.len(),
        hidden_dim: 8,
        n_layers: 1,
        n_heads: 2,
        ff_dim: 16,
        max_len: 8,
        n_classes: 3,
        dropout_rate: 0.0,
    };
    // move away from the init scale, where layer norm inputs are tiny and the
    // loss is too curved for a step of 1e-3
    let mut params: ModelParameters<f64> = init_parameters(&config, 3)?.cast();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for t in params.tensors_mut() {
        for v in &mut t.data {
            *v += rng.random_range(-0.5..0.5);
        }
    }
    let batch: Vec<_> = texts.iter().map(|t| encode(t, &vocab, config.max_len)).collect();
    let labels = [2, 1];
    let mode = Mode::Train { dropout_seed: 0 };

    let (_, cache) = forward(&params, &config, &batch, mode)?;
    let (loss, grads) = backward(&params, &config, &batch, &labels, &cache)?;
    println!("loss {loss:.6}, {} coordinates", params.num_scalars());

    let h = 1e-3;
    let mut worst = (0.0f64, String::new());
    let coords: Vec<_> = params.coordinates().collect();
    for (t, i) in coords {
        let orig = params.tensors()[t].data[i];
        let mut loss_at = |v: f64| -> Result<f64, Box<dyn std::error::Error>> {
            params.tensors_mut()[t].data[i] = v;
            let (logits, _) = forward(&params, &config, &batch, mode)?;
            Ok(cross_entropy(&logits, &labels)?)
        };
        let fd = (loss_at(orig + h)? - loss_at(orig - h)?) / (2.0 * h);
        params.tensors_mut()[t].data[i] = orig;
        let g = grads.tensors()[t].data[i];
        let rel = (g - fd).abs() / g.abs().max(fd.abs()).max(1e-8);
        if rel > worst.0 {
            worst = (
                rel,
                format!("{}[{i}]: analytic {g:.3e}, numeric {fd:.3e}", grads.tensors()[t].name),
            );
        }
    }
    println!("worst relative error {:.2e} at {}", worst.0, worst.1);
    Ok(())
}

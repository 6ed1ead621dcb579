use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::ops::{
    gelu, gelu_derivative, layer_norm, layer_norm_backward, linear, linear_backward, softmax_in_place, NormCache,
    Scalar,
};
use super::params::slot;
use super::{cross_entropy, Gradients, ModelConfig, ModelError, ModelParameters, LAYER_NORM_EPS};
use crate::tokenizer::TokenSequence;

/// Inference or training. Training draws dropout masks from a ChaCha8
/// stream per example, seeded by `dropout_seed`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Infer,
    Train { dropout_seed: u64 },
}

#[derive(Debug, Clone)]
struct LayerCache<T> {
    input: Vec<T>,
    rows: usize,
    q: Vec<T>,
    k: Vec<T>,
    v: Vec<T>,
    probs: Vec<T>,
    ctx: Vec<T>,
    attn_mask: Option<Vec<T>>,
    norm1: NormCache<T>,
    a1: Vec<T>,
    ff_pre: Vec<T>,
    ff_act: Vec<T>,
    ff_mask: Option<Vec<T>>,
    norm2: NormCache<T>,
}

/// Activations of one example.
///
/// Only unmasked positions take part in the computation, which is the same
/// as giving masked keys a score of −∞. The last layer only needs the
/// `[CLS]` row, so it computes a single query.
#[derive(Debug, Clone)]
pub struct ExampleCache<T> {
    positions: Vec<usize>,
    ids: Vec<u32>,
    emb_mask: Option<Vec<T>>,
    layers: Vec<LayerCache<T>>,
    pooled: Vec<T>,
    pool_mask: Option<Vec<T>>,
    logits: Vec<T>,
}

impl<T: Scalar> ExampleCache<T> {
    /// Sequence positions that were attended to, in order.
    pub fn positions(&self) -> &[usize] {
        &self.positions
    }

    /// Attention probabilities of `layer` as `[heads × queries × keys]`,
    /// where keys range over [`ExampleCache::positions`].
    pub fn attention(&self, layer: usize) -> (&[T], [usize; 3]) {
        let lc = &self.layers[layer];
        let keys = self.positions.len();
        let heads = lc.probs.len() / (lc.rows * keys);
        (&lc.probs, [heads, lc.rows, keys])
    }

    pub fn logits(&self) -> &[T] {
        &self.logits
    }
}

#[derive(Debug, Clone)]
pub struct ActivationCache<T> {
    mode: Mode,
    batch: Vec<Vec<u32>>,
    examples: Vec<ExampleCache<T>>,
}

impl<T: Scalar> ActivationCache<T> {
    pub fn mode(&self) -> Mode {
        self.mode
    }

    pub fn examples(&self) -> &[ExampleCache<T>] {
        &self.examples
    }
}

/// Run `f` over `items`, spread across available cores. Results keep item
/// order, so reductions over them stay deterministic.
fn par_map<I: Sync, O: Send>(items: &[I], f: impl Fn(usize, &I) -> O + Sync) -> Vec<O> {
    let threads = std::thread::available_parallelism()
        .map_or(1, |n| n.get())
        .min(items.len());
    if threads <= 1 {
        return items.iter().enumerate().map(|(i, x)| f(i, x)).collect();
    }
    let chunk = items.len().div_ceil(threads);
    let f = &f;
    std::thread::scope(|s| {
        let handles: Vec<_> = items
            .chunks(chunk)
            .enumerate()
            .map(|(c, part)| {
                s.spawn(move || {
                    part.iter()
                        .enumerate()
                        .map(|(i, x)| f(c * chunk + i, x))
                        .collect::<Vec<_>>()
                })
            })
            .collect();
        handles
            .into_iter()
            .flat_map(|h| h.join().expect("worker panicked"))
            .collect()
    })
}

fn dropout_mask<T: Scalar>(rng: &mut Option<ChaCha8Rng>, len: usize, rate: f64) -> Option<Vec<T>> {
    let rng = rng.as_mut()?;
    let keep = T::lit(1.0 / (1.0 - rate));
    Some(
        (0..len)
            .map(|_| if rng.random::<f64>() < rate { T::zero() } else { keep })
            .collect(),
    )
}

fn apply_mask<T: Scalar>(x: &mut [T], mask: &Option<Vec<T>>) {
    if let Some(mask) = mask {
        for (v, &m) in x.iter_mut().zip(mask) {
            *v *= m;
        }
    }
}

fn add_into<T: Scalar>(dst: &mut [T], src: &[T]) {
    for (d, &s) in dst.iter_mut().zip(src) {
        *d += s;
    }
}

fn check_batch<T: Scalar>(
    params: &ModelParameters<T>,
    config: &ModelConfig,
    batch: &[TokenSequence],
) -> Result<(), ModelError> {
    config.validate()?;
    params.check(config)?;
    for (example, seq) in batch.iter().enumerate() {
        if seq.ids.len() != config.max_len || seq.mask.len() != config.max_len {
            return Err(ModelError::Shape(format!(
                "example {example} has {} ids and {} mask entries, expected {}",
                seq.ids.len(),
                seq.mask.len(),
                config.max_len
            )));
        }
        if let Some((position, &id)) = seq
            .ids
            .iter()
            .enumerate()
            .find(|(_, &id)| id as usize >= config.vocab_size)
        {
            return Err(ModelError::IdOutOfRange {
                example,
                position,
                id,
                vocab_size: config.vocab_size,
            });
        }
        if seq.mask[0] == 0 {
            return Err(ModelError::Mask {
                example,
                message: "the [CLS] position is masked".into(),
            });
        }
    }
    Ok(())
}

fn forward_example<T: Scalar>(
    params: &ModelParameters<T>,
    config: &ModelConfig,
    seq: &TokenSequence,
    index: usize,
    mode: Mode,
) -> ExampleCache<T> {
    let h = config.hidden_dim;
    let f = config.ff_dim;
    let heads = config.n_heads;
    let dh = config.head_dim();
    let eps = T::lit(LAYER_NORM_EPS);
    let scale = T::one() / T::from_usize(dh).expect("head dim").sqrt();
    let mut rng = match mode {
        Mode::Train { dropout_seed } if config.dropout_rate > 0.0 => {
            let mut rng = ChaCha8Rng::seed_from_u64(dropout_seed);
            rng.set_stream(index as u64);
            Some(rng)
        }
        _ => None,
    };
    let rate = config.dropout_rate;

    let positions: Vec<usize> = (0..seq.mask.len()).filter(|&p| seq.mask[p] != 0).collect();
    let ids: Vec<u32> = positions.iter().map(|&p| seq.ids[p]).collect();
    let n = positions.len();

    let tok = params.data(slot::TOKEN_EMBEDDING);
    let pos = params.data(slot::POSITION_EMBEDDING);
    let mut x = vec![T::zero(); n * h];
    for (row, (&p, &id)) in positions.iter().zip(&ids).enumerate() {
        let id = id as usize;
        for c in 0..h {
            x[row * h + c] = tok[id * h + c] + pos[p * h + c];
        }
    }
    let emb_mask = dropout_mask(&mut rng, n * h, rate);
    apply_mask(&mut x, &emb_mask);

    let mut layers = Vec::with_capacity(config.n_layers);
    for l in 0..config.n_layers {
        let w = |o: usize| params.data(slot::layer(l, o));
        let m = if l + 1 == config.n_layers { 1 } else { n };

        let q = linear(&x[..m * h], m, h, w(slot::QUERY_W), h, Some(w(slot::QUERY_B)));
        let k = linear(&x, n, h, w(slot::KEY_W), h, Some(w(slot::KEY_B)));
        let v = linear(&x, n, h, w(slot::VALUE_W), h, Some(w(slot::VALUE_B)));
        let mut probs = vec![T::zero(); heads * m * n];
        let mut ctx = vec![T::zero(); m * h];
        for hd in 0..heads {
            let off = hd * dh;
            for i in 0..m {
                let qi = &q[i * h + off..i * h + off + dh];
                let row = &mut probs[(hd * m + i) * n..(hd * m + i + 1) * n];
                for (j, s) in row.iter_mut().enumerate() {
                    *s = super::ops::dot(qi, &k[j * h + off..j * h + off + dh]) * scale;
                }
                softmax_in_place(row);
                let out = &mut ctx[i * h + off..i * h + off + dh];
                for (j, &p) in row.iter().enumerate() {
                    for (o, &vv) in out.iter_mut().zip(&v[j * h + off..j * h + off + dh]) {
                        *o += p * vv;
                    }
                }
            }
        }
        let mut attn = linear(&ctx, m, h, w(slot::OUTPUT_W), h, Some(w(slot::OUTPUT_B)));
        let attn_mask = dropout_mask(&mut rng, m * h, rate);
        apply_mask(&mut attn, &attn_mask);
        add_into(&mut attn, &x[..m * h]);
        let (a1, norm1) = layer_norm(&attn, m, h, w(slot::NORM1_SCALE), w(slot::NORM1_SHIFT), eps);

        let ff_pre = linear(&a1, m, h, w(slot::FF_UP_W), f, Some(w(slot::FF_UP_B)));
        let ff_act: Vec<T> = ff_pre.iter().map(|&z| gelu(z)).collect();
        let mut ff_out = linear(&ff_act, m, f, w(slot::FF_DOWN_W), h, Some(w(slot::FF_DOWN_B)));
        let ff_mask = dropout_mask(&mut rng, m * h, rate);
        apply_mask(&mut ff_out, &ff_mask);
        add_into(&mut ff_out, &a1);
        let (out, norm2) = layer_norm(&ff_out, m, h, w(slot::NORM2_SCALE), w(slot::NORM2_SHIFT), eps);

        let input = std::mem::replace(&mut x, out);
        layers.push(LayerCache {
            input,
            rows: m,
            q,
            k,
            v,
            probs,
            ctx,
            attn_mask,
            norm1,
            a1,
            ff_pre,
            ff_act,
            ff_mask,
            norm2,
        });
    }

    let mut pooled = x[..h].to_vec();
    let pool_mask = dropout_mask(&mut rng, h, rate);
    apply_mask(&mut pooled, &pool_mask);
    let logits = linear(
        &pooled,
        1,
        h,
        params.data(slot::classifier_w(config.n_layers)),
        config.n_classes,
        Some(params.data(slot::classifier_b(config.n_layers))),
    );
    ExampleCache {
        positions,
        ids,
        emb_mask,
        layers,
        pooled,
        pool_mask,
        logits,
    }
}

/// Logits `[batch × n_classes]` plus the activations backward needs.
pub fn forward<T: Scalar>(
    params: &ModelParameters<T>,
    config: &ModelConfig,
    batch: &[TokenSequence],
    mode: Mode,
) -> Result<(Vec<Vec<T>>, ActivationCache<T>), ModelError> {
    check_batch(params, config, batch)?;
    let examples = par_map(batch, |i, seq| forward_example(params, config, seq, i, mode));
    let logits = examples.iter().map(|e| e.logits.clone()).collect();
    let cache = ActivationCache {
        mode,
        batch: batch.iter().map(|s| s.ids.clone()).collect(),
        examples,
    };
    Ok((logits, cache))
}

/// Inference-mode logits without keeping the cache.
pub fn logits<T: Scalar>(
    params: &ModelParameters<T>,
    config: &ModelConfig,
    batch: &[TokenSequence],
) -> Result<Vec<Vec<T>>, ModelError> {
    forward(params, config, batch, Mode::Infer).map(|(logits, _)| logits)
}

fn backward_example<T: Scalar>(
    params: &ModelParameters<T>,
    config: &ModelConfig,
    cache: &ExampleCache<T>,
    label: usize,
    inv_batch: T,
) -> Gradients<T> {
    let h = config.hidden_dim;
    let f = config.ff_dim;
    let c = config.n_classes;
    let heads = config.n_heads;
    let dh = config.head_dim();
    let scale = T::one() / T::from_usize(dh).expect("head dim").sqrt();
    let n = cache.positions.len();
    let mut grads = params.zeros_like();

    let mut d_logits = super::ops::softmax(&cache.logits);
    d_logits[label] = d_logits[label] - T::one();
    for d in d_logits.iter_mut() {
        *d *= inv_batch;
    }
    let cw = slot::classifier_w(config.n_layers);
    let (dw, db) = grads.pair_mut(cw, cw + 1);
    let mut d_x = linear_backward(&cache.pooled, 1, h, params.data(cw), c, &d_logits, dw, Some(db));
    apply_mask(&mut d_x, &cache.pool_mask);

    for l in (0..config.n_layers).rev() {
        let lc = &cache.layers[l];
        let m = lc.rows;
        let idx = |o: usize| slot::layer(l, o);
        let w = |o: usize| params.data(idx(o));

        let (ds, db) = grads.pair_mut(idx(slot::NORM2_SCALE), idx(slot::NORM2_SHIFT));
        let d_z2 = layer_norm_backward(&d_x, &lc.norm2, h, w(slot::NORM2_SCALE), ds, db);

        let mut d_a1 = d_z2.clone();
        let mut d_ff_out = d_z2;
        apply_mask(&mut d_ff_out, &lc.ff_mask);
        let (dw, db) = grads.pair_mut(idx(slot::FF_DOWN_W), idx(slot::FF_DOWN_B));
        let mut d_ff = linear_backward(&lc.ff_act, m, f, w(slot::FF_DOWN_W), h, &d_ff_out, dw, Some(db));
        for (d, &z) in d_ff.iter_mut().zip(&lc.ff_pre) {
            *d *= gelu_derivative(z);
        }
        let (dw, db) = grads.pair_mut(idx(slot::FF_UP_W), idx(slot::FF_UP_B));
        let d = linear_backward(&lc.a1, m, h, w(slot::FF_UP_W), f, &d_ff, dw, Some(db));
        add_into(&mut d_a1, &d);

        let (ds, db) = grads.pair_mut(idx(slot::NORM1_SCALE), idx(slot::NORM1_SHIFT));
        let d_z1 = layer_norm_backward(&d_a1, &lc.norm1, h, w(slot::NORM1_SCALE), ds, db);

        let mut d_in = vec![T::zero(); n * h];
        add_into(&mut d_in[..m * h], &d_z1);
        let mut d_attn = d_z1;
        apply_mask(&mut d_attn, &lc.attn_mask);
        let (dw, db) = grads.pair_mut(idx(slot::OUTPUT_W), idx(slot::OUTPUT_B));
        let d_ctx = linear_backward(&lc.ctx, m, h, w(slot::OUTPUT_W), h, &d_attn, dw, Some(db));

        let mut dq = vec![T::zero(); m * h];
        let mut dk = vec![T::zero(); n * h];
        let mut dv = vec![T::zero(); n * h];
        let mut d_p = vec![T::zero(); n];
        for hd in 0..heads {
            let off = hd * dh;
            for i in 0..m {
                let p = &lc.probs[(hd * m + i) * n..(hd * m + i + 1) * n];
                let g = &d_ctx[i * h + off..i * h + off + dh];
                let mut weighted = T::zero();
                for j in 0..n {
                    let vj = &lc.v[j * h + off..j * h + off + dh];
                    d_p[j] = super::ops::dot(g, vj);
                    weighted += p[j] * d_p[j];
                    for (d, &gv) in dv[j * h + off..j * h + off + dh].iter_mut().zip(g) {
                        *d += p[j] * gv;
                    }
                }
                for j in 0..n {
                    let ds = p[j] * (d_p[j] - weighted) * scale;
                    for d in 0..dh {
                        dq[i * h + off + d] += ds * lc.k[j * h + off + d];
                        dk[j * h + off + d] += ds * lc.q[i * h + off + d];
                    }
                }
            }
        }
        let (dw, db) = grads.pair_mut(idx(slot::QUERY_W), idx(slot::QUERY_B));
        let d = linear_backward(&lc.input[..m * h], m, h, w(slot::QUERY_W), h, &dq, dw, Some(db));
        add_into(&mut d_in[..m * h], &d);
        let (dw, db) = grads.pair_mut(idx(slot::KEY_W), idx(slot::KEY_B));
        let d = linear_backward(&lc.input, n, h, w(slot::KEY_W), h, &dk, dw, Some(db));
        add_into(&mut d_in, &d);
        let (dw, db) = grads.pair_mut(idx(slot::VALUE_W), idx(slot::VALUE_B));
        let d = linear_backward(&lc.input, n, h, w(slot::VALUE_W), h, &dv, dw, Some(db));
        add_into(&mut d_in, &d);
        d_x = d_in;
    }

    apply_mask(&mut d_x, &cache.emb_mask);
    let (d_tok, d_pos) = grads.pair_mut(slot::TOKEN_EMBEDDING, slot::POSITION_EMBEDDING);
    for (row, (&p, &id)) in cache.positions.iter().zip(&cache.ids).enumerate() {
        let g = &d_x[row * h..(row + 1) * h];
        add_into(&mut d_tok[id as usize * h..(id as usize + 1) * h], g);
        add_into(&mut d_pos[p * h..(p + 1) * h], g);
    }
    grads
}

/// Mean cross-entropy and its exact gradient for every parameter, reusing
/// the dropout masks recorded by a training-mode [`forward`].
pub fn backward<T: Scalar>(
    params: &ModelParameters<T>,
    config: &ModelConfig,
    batch: &[TokenSequence],
    labels: &[usize],
    cache: &ActivationCache<T>,
) -> Result<(T, Gradients<T>), ModelError> {
    if !matches!(cache.mode, Mode::Train { .. }) {
        return Err(ModelError::Cache("forward ran in inference mode".into()));
    }
    if cache.examples.len() != batch.len() || cache.batch.iter().zip(batch).any(|(ids, seq)| *ids != seq.ids) {
        return Err(ModelError::Cache("cache was recorded for a different batch".into()));
    }
    params.check(config)?;
    let logits: Vec<Vec<T>> = cache.examples.iter().map(|e| e.logits.clone()).collect();
    let loss = cross_entropy(&logits, labels)?;
    let inv_batch = T::one() / T::from_usize(batch.len()).expect("batch size");
    let per_example = par_map(&cache.examples, |i, e| {
        backward_example(params, config, e, labels[i], inv_batch)
    });
    let mut grads = params.zeros_like();
    for g in &per_example {
        grads.add_assign(g);
    }
    Ok((loss, grads))
}

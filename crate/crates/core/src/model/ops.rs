//! Dense kernels on row-major slices. Weight matrices are stored
//! `[in × out]`, so a linear layer is `y = x · W + b`.

use std::fmt::Debug;
use std::iter::Sum;
use std::ops::{AddAssign, MulAssign};

use num_traits::{Float, FromPrimitive};

/// Floating-point element type of parameters and activations.
pub trait Scalar:
    Float + FromPrimitive + AddAssign + MulAssign + Sum + Debug + Default + Send + Sync + 'static
{
    fn lit(v: f64) -> Self {
        Self::from_f64(v).expect("literal fits")
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}

/// `out[r] = a[r] · w + bias` for `rows` rows of width `inner`.
pub fn linear<T: Scalar>(a: &[T], rows: usize, inner: usize, w: &[T], cols: usize, bias: Option<&[T]>) -> Vec<T> {
    debug_assert_eq!(a.len(), rows * inner);
    debug_assert_eq!(w.len(), inner * cols);
    let mut out = vec![T::zero(); rows * cols];
    for r in 0..rows {
        let row = &mut out[r * cols..(r + 1) * cols];
        if let Some(b) = bias {
            row.copy_from_slice(b);
        }
        for i in 0..inner {
            let x = a[r * inner + i];
            let w_row = &w[i * cols..(i + 1) * cols];
            for (o, &wv) in row.iter_mut().zip(w_row) {
                *o += x * wv;
            }
        }
    }
    out
}

/// Backward of [`linear`]: accumulates `dw += aᵀ·d_out`, `db += Σ d_out`
/// and returns `d_out · wᵀ`.
#[allow(clippy::too_many_arguments)]
pub fn linear_backward<T: Scalar>(
    a: &[T],
    rows: usize,
    inner: usize,
    w: &[T],
    cols: usize,
    d_out: &[T],
    dw: &mut [T],
    db: Option<&mut [T]>,
) -> Vec<T> {
    let mut d_a = vec![T::zero(); rows * inner];
    for r in 0..rows {
        let g = &d_out[r * cols..(r + 1) * cols];
        for i in 0..inner {
            let w_row = &w[i * cols..(i + 1) * cols];
            d_a[r * inner + i] = dot(g, w_row);
            let x = a[r * inner + i];
            for (dwv, &gv) in dw[i * cols..(i + 1) * cols].iter_mut().zip(g) {
                *dwv += x * gv;
            }
        }
    }
    if let Some(db) = db {
        for r in 0..rows {
            for (d, &gv) in db.iter_mut().zip(&d_out[r * cols..(r + 1) * cols]) {
                *d += gv;
            }
        }
    }
    d_a
}

pub fn dot<T: Scalar>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).fold(T::zero(), |acc, (&x, &y)| acc + x * y)
}

/// Numerically stable softmax (max subtraction).
pub fn softmax<T: Scalar>(logits: &[T]) -> Vec<T> {
    let mut out = logits.to_vec();
    softmax_in_place(&mut out);
    out
}

pub fn softmax_in_place<T: Scalar>(row: &mut [T]) {
    let max = row.iter().copied().fold(T::neg_infinity(), T::max);
    let mut sum = T::zero();
    for v in row.iter_mut() {
        *v = (*v - max).exp();
        sum += *v;
    }
    for v in row.iter_mut() {
        *v = *v / sum;
    }
}

fn log_sum_exp<T: Scalar>(row: &[T]) -> T {
    let max = row.iter().copied().fold(T::neg_infinity(), T::max);
    max + row.iter().map(|&v| (v - max).exp()).sum::<T>().ln()
}

/// Mean over the batch of `-log softmax(logits)[label]`.
///
/// Panics if a label is out of range; callers validate labels first.
pub fn cross_entropy<T: Scalar>(logits: &[Vec<T>], labels: &[usize]) -> T {
    assert_eq!(logits.len(), labels.len());
    let total = logits
        .iter()
        .zip(labels)
        .map(|(row, &y)| log_sum_exp(row) - row[y])
        .sum::<T>();
    total / T::from_usize(logits.len()).expect("batch size")
}

const GELU_A: f64 = 0.044_715;
// sqrt(2 / pi)
const GELU_C: f64 = 0.797_884_560_802_865_4;

/// GELU, tanh approximation: `0.5·x·(1 + tanh(√(2/π)·(x + 0.044715·x³)))`.
pub fn gelu<T: Scalar>(x: T) -> T {
    let half = T::lit(0.5);
    let inner = T::lit(GELU_C) * (x + T::lit(GELU_A) * x * x * x);
    half * x * (T::one() + inner.tanh())
}

pub fn gelu_derivative<T: Scalar>(x: T) -> T {
    let half = T::lit(0.5);
    let c = T::lit(GELU_C);
    let a = T::lit(GELU_A);
    let t = (c * (x + a * x * x * x)).tanh();
    half * (T::one() + t) + half * x * (T::one() - t * t) * c * (T::one() + T::lit(3.0) * a * x * x)
}

/// Normalized rows and reciprocal standard deviations kept for backward.
#[derive(Debug, Clone)]
pub struct NormCache<T> {
    pub xhat: Vec<T>,
    pub inv_std: Vec<T>,
}

/// Row-wise layer norm with learned scale and shift.
pub fn layer_norm<T: Scalar>(
    x: &[T],
    rows: usize,
    width: usize,
    scale: &[T],
    shift: &[T],
    eps: T,
) -> (Vec<T>, NormCache<T>) {
    let w = T::from_usize(width).expect("width");
    let mut out = vec![T::zero(); rows * width];
    let mut xhat = vec![T::zero(); rows * width];
    let mut inv_std = vec![T::zero(); rows];
    for r in 0..rows {
        let row = &x[r * width..(r + 1) * width];
        let mean = row.iter().copied().sum::<T>() / w;
        let var = row.iter().map(|&v| (v - mean) * (v - mean)).sum::<T>() / w;
        let inv = T::one() / (var + eps).sqrt();
        inv_std[r] = inv;
        for c in 0..width {
            let h = (row[c] - mean) * inv;
            xhat[r * width + c] = h;
            out[r * width + c] = h * scale[c] + shift[c];
        }
    }
    (out, NormCache { xhat, inv_std })
}

/// Backward of [`layer_norm`]; accumulates scale/shift gradients and
/// returns the input gradient.
pub fn layer_norm_backward<T: Scalar>(
    d_out: &[T],
    cache: &NormCache<T>,
    width: usize,
    scale: &[T],
    d_scale: &mut [T],
    d_shift: &mut [T],
) -> Vec<T> {
    let rows = cache.inv_std.len();
    let w = T::from_usize(width).expect("width");
    let mut d_x = vec![T::zero(); rows * width];
    let mut d_xhat = vec![T::zero(); width];
    for r in 0..rows {
        let g = &d_out[r * width..(r + 1) * width];
        let xh = &cache.xhat[r * width..(r + 1) * width];
        let mut sum = T::zero();
        let mut sum_xh = T::zero();
        for c in 0..width {
            d_scale[c] += g[c] * xh[c];
            d_shift[c] += g[c];
            d_xhat[c] = g[c] * scale[c];
            sum += d_xhat[c];
            sum_xh += d_xhat[c] * xh[c];
        }
        let k = cache.inv_std[r] / w;
        for c in 0..width {
            d_x[r * width + c] = k * (w * d_xhat[c] - sum - xh[c] * sum_xh);
        }
    }
    d_x
}

/// Convert between scalar types.
pub fn cast<T: Scalar, U: Scalar>(v: T) -> U {
    U::from_f64(v.to_f64().expect("finite")).expect("representable")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn softmax_cases() {
        let p = softmax(&[0.0f64, 0.0, 0.0]);
        assert!(p.iter().all(|&v| (v - 1.0 / 3.0).abs() < 1e-12));
        let p = softmax(&[1000.0f32, 0.0, -1000.0]);
        assert!(p.iter().all(|v| v.is_finite()));
        assert!((p[0] - 1.0).abs() < 1e-6 && p[1] < 1e-30 && p[2] == 0.0);
    }

    #[test]
    fn cross_entropy_closed_forms() {
        let uniform = cross_entropy(&[vec![0.0f64; 3]], &[1]);
        assert!((uniform - 3f64.ln()).abs() < 1e-12);
        let saturated = cross_entropy(&[vec![30.0f64, 0.0, 0.0]], &[0]);
        assert!((0.0..1e-9).contains(&saturated));
    }

    #[test]
    fn gelu_matches_reference_values() {
        // tanh-approximation values, computed with mpmath at 30 digits
        let cases = [
            (-3.0, -0.003_637_392_081_773_018_8),
            (-1.0, -0.158_808_009_391_723_3),
            (0.0, 0.0),
            (0.5, 0.345_714_009_825_143_9),
            (2.0, 1.954_597_694_087_775),
        ];
        for (x, want) in cases {
            assert!((gelu(x) - want).abs() < 1e-12, "gelu({x})");
        }
    }

    #[test]
    fn gelu_derivative_matches_central_difference() {
        for i in -40..=40 {
            let x = i as f64 / 10.0;
            let h = 1e-5;
            let fd = (gelu(x + h) - gelu(x - h)) / (2.0 * h);
            assert!((gelu_derivative(x) - fd).abs() < 1e-8, "x = {x}");
        }
    }

    #[test]
    fn linear_and_backward_agree_with_hand_values() {
        // [1 2] · [[1 0 2] [0 1 3]] + [1 1 1] = [2 3 9]
        let a = [1.0f64, 2.0];
        let w = [1.0, 0.0, 2.0, 0.0, 1.0, 3.0];
        let y = linear(&a, 1, 2, &w, 3, Some(&[1.0, 1.0, 1.0]));
        assert_eq!(y, [2.0, 3.0, 9.0]);
        let mut dw = [0.0; 6];
        let mut db = [0.0; 3];
        let da = linear_backward(&a, 1, 2, &w, 3, &[1.0, 1.0, 1.0], &mut dw, Some(&mut db));
        assert_eq!(da, [3.0, 4.0]);
        assert_eq!(dw, [1.0, 1.0, 1.0, 2.0, 2.0, 2.0]);
        assert_eq!(db, [1.0, 1.0, 1.0]);
    }
}

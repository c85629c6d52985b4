//! Layer primitives over row-major slices.
//!
//! Activations are `channels × time` matrices. Convolutions are causal: the
//! input is implicitly left-padded with `dilation · (k − 1)` zeros so every
//! layer preserves the time dimension.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    #[default]
    Asinh,
    Identity,
}

impl Activation {
    #[inline]
    pub fn apply<F: Scalar>(self, x: F) -> F {
        match self {
            Activation::Asinh => x.asinh_fast(),
            Activation::Identity => x,
        }
    }

    #[inline]
    pub fn derivative<F: Scalar>(self, x: F) -> F {
        match self {
            Activation::Asinh => (F::one() + x * x).sqrt().recip(),
            Activation::Identity => F::one(),
        }
    }
}

/// Dot product with independent partial sums so the loop vectorises.
#[inline]
pub(crate) fn dot<F: Scalar>(a: &[F], b: &[F]) -> F {
    const LANES: usize = 8;
    let n = a.len().min(b.len());
    let mut acc = [F::zero(); LANES];
    let split = n - n % LANES;
    for (ca, cb) in a[..split].chunks_exact(LANES).zip(b[..split].chunks_exact(LANES)) {
        for l in 0..LANES {
            acc[l] += ca[l] * cb[l];
        }
    }
    let mut tail = F::zero();
    for i in split..n {
        tail += a[i] * b[i];
    }
    acc.iter().copied().fold(tail, |s, v| s + v)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Downsample {
    /// Average over non-overlapping windows of the receptive-field size.
    #[default]
    Mean,
    /// Keep the last sample of every window.
    Stride,
}

/// Time shift applied to tap `j` of a kernel of size `k` at `dilation`.
#[inline]
fn tap_shift(k: usize, j: usize, dilation: usize) -> usize {
    dilation * (k - 1 - j)
}

/// `y[o,t] = b[o] + Σ_{i,j} w[o,i,j] · x̃[i, t − d·(k−1) + d·j]`.
///
/// `x` is `c_in × t`, `weight` is `c_out × c_in × k`, `bias` is `c_out` or
/// empty (no bias). Writes `c_out × t` into `y`.
#[allow(clippy::too_many_arguments)]
pub fn conv1d_forward<F: Scalar>(
    x: &[F],
    c_in: usize,
    t: usize,
    weight: &[F],
    bias: &[F],
    c_out: usize,
    k: usize,
    dilation: usize,
    y: &mut [F],
) {
    debug_assert_eq!(x.len(), c_in * t);
    debug_assert_eq!(weight.len(), c_out * c_in * k);
    debug_assert_eq!(y.len(), c_out * t);
    for o in 0..c_out {
        let yo = &mut y[o * t..(o + 1) * t];
        let b = if bias.is_empty() { F::zero() } else { bias[o] };
        yo.iter_mut().for_each(|v| *v = b);
        for i in 0..c_in {
            let xi = &x[i * t..(i + 1) * t];
            for j in 0..k {
                let w = weight[(o * c_in + i) * k + j];
                let s = tap_shift(k, j, dilation);
                if s >= t || w == F::zero() {
                    continue;
                }
                for (yv, &xv) in yo[s..].iter_mut().zip(&xi[..t - s]) {
                    *yv += w * xv;
                }
            }
        }
    }
}

/// Accumulate weight/bias gradients and, for input rows in `dx_rows`, the
/// input gradient of [`conv1d_forward`].
#[allow(clippy::too_many_arguments)]
pub fn conv1d_backward<F: Scalar>(
    x: &[F],
    c_in: usize,
    t: usize,
    weight: &[F],
    c_out: usize,
    k: usize,
    dilation: usize,
    dy: &[F],
    dweight: &mut [F],
    dbias: &mut [F],
    dx: Option<(&mut [F], std::ops::Range<usize>)>,
) {
    for o in 0..c_out {
        let dyo = &dy[o * t..(o + 1) * t];
        if !dbias.is_empty() {
            dbias[o] += dyo.iter().fold(F::zero(), |a, &v| a + v);
        }
        for i in 0..c_in {
            let xi = &x[i * t..(i + 1) * t];
            for j in 0..k {
                let s = tap_shift(k, j, dilation);
                if s >= t {
                    continue;
                }
                dweight[(o * c_in + i) * k + j] += dot(&dyo[s..], &xi[..t - s]);
            }
        }
    }
    if let Some((dx, rows)) = dx {
        for i in rows {
            let dxi = &mut dx[i * t..(i + 1) * t];
            for o in 0..c_out {
                let dyo = &dy[o * t..(o + 1) * t];
                for j in 0..k {
                    let s = tap_shift(k, j, dilation);
                    if s >= t {
                        continue;
                    }
                    let w = weight[(o * c_in + i) * k + j];
                    for (d, &g) in dxi[..t - s].iter_mut().zip(&dyo[s..]) {
                        *d += w * g;
                    }
                }
            }
        }
    }
}

/// Pool `h × t` down to `h × (t / factor)`.
pub fn temporal_downsample<F: Scalar>(
    x: &[F],
    h: usize,
    t: usize,
    factor: usize,
    kind: Downsample,
) -> Result<Vec<F>> {
    if factor == 0 || !t.is_multiple_of(factor) {
        return Err(Error::Shape(format!(
            "downsampling factor {factor} does not divide {t} samples"
        )));
    }
    let nb = t / factor;
    let mut out = vec![F::zero(); h * nb];
    let scale = F::from_f64(1.0 / factor as f64);
    for c in 0..h {
        for b in 0..nb {
            let win = &x[c * t + b * factor..c * t + (b + 1) * factor];
            out[c * nb + b] = match kind {
                Downsample::Mean => win.iter().fold(F::zero(), |a, &v| a + v) * scale,
                Downsample::Stride => win[factor - 1],
            };
        }
    }
    Ok(out)
}

pub fn temporal_downsample_backward<F: Scalar>(
    dout: &[F],
    h: usize,
    t: usize,
    factor: usize,
    kind: Downsample,
) -> Vec<F> {
    let nb = t / factor;
    let mut dx = vec![F::zero(); h * t];
    let scale = F::from_f64(1.0 / factor as f64);
    for c in 0..h {
        for b in 0..nb {
            let g = dout[c * nb + b];
            let win = &mut dx[c * t + b * factor..c * t + (b + 1) * factor];
            match kind {
                Downsample::Mean => win.iter_mut().for_each(|v| *v = g * scale),
                Downsample::Stride => win[factor - 1] = g,
            }
        }
    }
    dx
}

/// Inverted-dropout mask: each entry is 0 with probability `p`, otherwise
/// `1 / (1 − p)`.
pub fn dropout_mask<F: Scalar>(len: usize, p: f64, rng: &mut impl Rng) -> Result<Vec<F>> {
    if !(0.0..1.0).contains(&p) {
        return Err(Error::InvalidArgument(format!("dropout rate {p} outside [0, 1)")));
    }
    let keep = F::from_f64(1.0 / (1.0 - p));
    // compare raw 32-bit draws against p scaled to the u32 range
    let threshold = (p * 4294967296.0).round() as u64;
    Ok((0..len)
        .map(|_| if (rng.next_u32() as u64) < threshold { F::zero() } else { keep })
        .collect())
}

/// Apply dropout in place. Eval mode (`rng == None`) and `p == 0` are the identity.
pub fn dropout<F: Scalar, R: Rng>(x: &mut [F], p: f64, rng: Option<&mut R>) -> Result<()> {
    if !(0.0..1.0).contains(&p) {
        return Err(Error::InvalidArgument(format!("dropout rate {p} outside [0, 1)")));
    }
    if let (Some(rng), true) = (rng, p > 0.0) {
        let mask = dropout_mask::<F>(x.len(), p, rng)?;
        x.iter_mut().zip(mask).for_each(|(v, m)| *v *= m);
    }
    Ok(())
}

/// `y = W x + b` with `W` row-major `out × in`.
pub fn dense_forward<F: Scalar>(x: &[F], weight: &[F], bias: &[F], n_out: usize, y: &mut [F]) {
    let n_in = x.len();
    for o in 0..n_out {
        let row = &weight[o * n_in..(o + 1) * n_in];
        let b = if bias.is_empty() { F::zero() } else { bias[o] };
        y[o] = b + dot(row, x);
    }
}

pub fn dense_backward<F: Scalar>(
    x: &[F],
    weight: &[F],
    dy: &[F],
    dweight: &mut [F],
    dbias: &mut [F],
    dx: Option<&mut [F]>,
) {
    let n_in = x.len();
    for (o, &g) in dy.iter().enumerate() {
        if !dbias.is_empty() {
            dbias[o] += g;
        }
        if g == F::zero() {
            continue;
        }
        for (dw, &v) in dweight[o * n_in..(o + 1) * n_in].iter_mut().zip(x) {
            *dw += g * v;
        }
    }
    if let Some(dx) = dx {
        for (o, &g) in dy.iter().enumerate() {
            if g == F::zero() {
                continue;
            }
            for (d, &w) in dx.iter_mut().zip(&weight[o * n_in..(o + 1) * n_in]) {
                *d += g * w;
            }
        }
    }
}

/// Stack embedding `e` under trial rows `y` (`c × t`) as constant rows.
pub fn concat_embedding<F: Scalar>(y: &[F], c: usize, t: usize, e: &[F]) -> Result<Vec<F>> {
    if y.len() != c * t {
        return Err(Error::Shape(format!("trial has {} values, expected {c}×{t}", y.len())));
    }
    let mut x = Vec::with_capacity((c + e.len()) * t);
    x.extend_from_slice(y);
    for &v in e {
        x.extend(std::iter::repeat_n(v, t));
    }
    Ok(x)
}

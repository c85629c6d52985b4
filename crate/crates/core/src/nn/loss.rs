use crate::error::{Error, Result};
use crate::nn::Scalar;

/// Numerically stable softmax.
pub fn softmax<F: Scalar>(logits: &[F]) -> Vec<F> {
    let max = logits.iter().copied().fold(F::neg_infinity(), F::max);
    let exp: Vec<F> = logits.iter().map(|&z| (z - max).exp()).collect();
    let sum: F = exp.iter().copied().sum();
    exp.into_iter().map(|e| e / sum).collect()
}

/// Mean cross-entropy over a batch of logit rows, and its gradient with
/// respect to every logit: `(softmax − onehot) / batch`.
pub fn cross_entropy<F: Scalar>(logits: &[Vec<F>], labels: &[usize]) -> Result<(F, Vec<Vec<F>>)> {
    if logits.len() != labels.len() || logits.is_empty() {
        return Err(Error::Shape(format!(
            "{} logit rows for {} labels",
            logits.len(),
            labels.len()
        )));
    }
    let scale = F::from_f64(1.0 / logits.len() as f64);
    let mut loss = F::zero();
    let mut grads = Vec::with_capacity(logits.len());
    for (z, &y) in logits.iter().zip(labels) {
        if y >= z.len() {
            return Err(Error::InvalidArgument(format!(
                "label {y} outside [0, {})",
                z.len()
            )));
        }
        let max = z.iter().copied().fold(F::neg_infinity(), F::max);
        let lse = max + z.iter().map(|&v| (v - max).exp()).sum::<F>().ln();
        loss += (lse - z[y]) * scale;
        let mut g = softmax(z);
        g[y] -= F::one();
        g.iter_mut().for_each(|v| *v *= scale);
        grads.push(g);
    }
    Ok((loss, grads))
}

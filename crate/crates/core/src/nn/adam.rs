use serde::{Deserialize, Serialize};

use crate::nn::{GradientSet, Scalar};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl AdamConfig {
    pub fn with_lr(lr: f64) -> Self {
        Self {
            lr,
            ..Self::default()
        }
    }
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            lr: 1e-4,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// First and second moment estimates plus the step counter.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState<F> {
    pub m: Vec<Vec<F>>,
    pub v: Vec<Vec<F>>,
    pub t: u64,
}

impl<F: Scalar> AdamState<F> {
    pub fn new(shapes: &[Vec<F>]) -> Self {
        let zeros: Vec<Vec<F>> = shapes.iter().map(|p| vec![F::zero(); p.len()]).collect();
        Self {
            m: zeros.clone(),
            v: zeros,
            t: 0,
        }
    }
}

/// One bias-corrected Adam update; increments `state.t` before use.
pub fn adam_step<F: Scalar>(
    params: &mut [Vec<F>],
    grads: &GradientSet<F>,
    state: &mut AdamState<F>,
    cfg: &AdamConfig,
) {
    state.t += 1;
    let t = state.t as i32;
    let (b1, b2) = (cfg.beta1, cfg.beta2);
    let c1 = 1.0 / (1.0 - b1.powi(t));
    let c2 = 1.0 / (1.0 - b2.powi(t));
    let (b1f, b2f) = (F::from_f64(b1), F::from_f64(b2));
    let (ib1, ib2) = (F::from_f64(1.0 - b1), F::from_f64(1.0 - b2));
    let (c1f, c2f) = (F::from_f64(c1), F::from_f64(c2));
    let (lr, eps) = (F::from_f64(cfg.lr), F::from_f64(cfg.eps));
    for (((p, g), m), v) in params
        .iter_mut()
        .zip(&grads.grads)
        .zip(state.m.iter_mut())
        .zip(state.v.iter_mut())
    {
        for (((pi, &gi), mi), vi) in p.iter_mut().zip(g).zip(m.iter_mut()).zip(v.iter_mut()) {
            *mi = b1f * *mi + ib1 * gi;
            *vi = b2f * *vi + ib2 * gi * gi;
            let mhat = *mi * c1f;
            let vhat = *vi * c2f;
            *pi -= lr * mhat / (vhat.sqrt() + eps);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn first_step_by_hand() {
        let mut p = vec![vec![0.0f64]];
        let g = GradientSet { grads: vec![vec![1.0]] };
        let mut st = AdamState::new(&p);
        adam_step(&mut p, &g, &mut st, &AdamConfig::with_lr(1e-4));
        // m̂ = v̂ = 1 → Δ = −lr / (1 + ε)
        assert!((p[0][0] + 1e-4).abs() < 1e-12);
        assert_eq!(st.t, 1);
    }

    #[test]
    fn zero_gradient_is_noop() {
        let mut p = vec![vec![0.5f32, -1.0], vec![2.0]];
        let orig = p.clone();
        let g = GradientSet {
            grads: vec![vec![0.0, 0.0], vec![0.0]],
        };
        let mut st = AdamState::new(&p);
        for _ in 0..3 {
            adam_step(&mut p, &g, &mut st, &AdamConfig::default());
        }
        assert_eq!(p, orig);
    }
}

use groupdecode::nn::{Activation, Downsample, ModelConfig, WavenetClassifier};
use groupdecode::seeding;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::Verdict;

fn random_input(rng: &mut impl Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.random_range(-2.0..2.0)).collect()
}

/// Analytic gradients against central differences on random tiny models.
pub fn gradients() -> Verdict {
    let mut worst = 0.0f64;
    let mut checked = 0usize;
    let n_configs = 24;
    for case in 0..n_configs {
        let mut rng = seeding::stream(case, &[0xA1]);
        let layers = rng.random_range(1..=3);
        let rf = 1usize << layers;
        let e = rng.random_range(0..=3);
        let cfg = ModelConfig {
            n_input_channels: rng.random_range(1..=3),
            n_classes: rng.random_range(2..=4),
            n_timesteps: rf * rng.random_range(1..=3),
            n_conv_layers: layers,
            hidden_channels: rng.random_range(1..=3),
            fc_hidden: rng.random_range(1..=4),
            dropout: 0.0,
            embedding_size: e,
            n_subjects: if e > 0 { 2 } else { 1 },
            activation: if rng.random() { Activation::Asinh } else { Activation::Identity },
            downsample: if rng.random() { Downsample::Mean } else { Downsample::Stride },
            bias: rng.random(),
            ..ModelConfig::default()
        };
        let model = WavenetClassifier::<f32>::new(cfg.clone(), &mut rng).unwrap().cast::<f64>();
        let n_in = cfg.n_input_channels * cfg.n_timesteps;
        let xs: Vec<Vec<f64>> = (0..3).map(|_| random_input(&mut rng, n_in)).collect();
        let labels: Vec<usize> = (0..3).map(|_| rng.random_range(0..cfg.n_classes)).collect();
        let subjects: Vec<usize> = (0..3).map(|_| rng.random_range(0..cfg.n_subjects)).collect();
        let batch: Vec<(&[f64], usize, usize)> =
            (0..3).map(|i| (xs[i].as_slice(), subjects[i], labels[i])).collect();
        let (_, grads) = model.loss_and_grad::<ChaCha8Rng>(&batch, None).unwrap();
        let h = 1e-6;
        for (p, tensor) in model.params().iter().enumerate() {
            for i in 0..tensor.len() {
                let mut plus = model.clone();
                plus.params_mut()[p][i] += h;
                let mut minus = model.clone();
                minus.params_mut()[p][i] -= h;
                let lp = plus.loss_and_grad::<ChaCha8Rng>(&batch, None).unwrap().0;
                let lm = minus.loss_and_grad::<ChaCha8Rng>(&batch, None).unwrap().0;
                let numeric = (lp - lm) / (2.0 * h);
                let analytic = grads.grads[p][i];
                let scale = numeric.abs().max(analytic.abs()).max(1e-6);
                worst = worst.max((numeric - analytic).abs() / scale);
                checked += 1;
            }
        }
    }
    Verdict::new(
        worst < 1e-4,
        format!("{n_configs} configs, {checked} coordinates, max relative error {worst:.2e} (< 1e-4)"),
    )
}

/// Receptive field, pooled length and the span a single input sample
/// influences in the last conv layer.
pub fn architecture() -> Verdict {
    let cfg = ModelConfig {
        n_input_channels: 4,
        n_classes: 3,
        n_timesteps: 256,
        n_conv_layers: 6,
        hidden_channels: 3,
        fc_hidden: 4,
        embedding_size: 0,
        n_subjects: 1,
        ..ModelConfig::default()
    };
    let rf = cfg.receptive_field();
    let pooled = cfg.pooled_len();
    let mut notes = vec![format!("RF {rf}, {pooled} pooled samples per channel")];
    let mut pass = rf == 64 && pooled == 4 && cfg.flat_len() == 3 * 4;
    for layers in [3usize, 6] {
        let cfg = ModelConfig {
            n_conv_layers: layers,
            ..cfg.clone()
        };
        let span = 1usize << layers;
        let model = WavenetClassifier::<f32>::new(cfg.clone(), &mut seeding::stream(layers as u64, &[0xA2])).unwrap();
        let mut rng = seeding::stream(layers as u64, &[0xA3]);
        let t = cfg.n_timesteps;
        let x: Vec<f32> = (0..cfg.n_input_channels * t).map(|_| rng.random_range(-1.0..1.0)).collect();
        let base = model.layer_output(&x, layers - 1).unwrap();
        let mut local = true;
        for t0 in [0usize, 37, 100, 255] {
            let mut y = x.clone();
            y[2 * t + t0] += 1.0;
            let out = model.layer_output(&y, layers - 1).unwrap();
            let changed: Vec<usize> = (0..t)
                .filter(|&tt| (0..cfg.hidden_channels).any(|h| out[h * t + tt] != base[h * t + tt]))
                .collect();
            let inside = changed.iter().all(|&tt| tt >= t0 && tt < t0 + span);
            local &= inside && changed.contains(&t0);
        }
        notes.push(format!("L={layers} locality {}", if local { "ok" } else { "violated" }));
        pass &= local;
    }
    Verdict::new(pass, notes.join(", "))
}

/// Bias-free identity-activation models are linear in their input
/// (checked on the f32 production path).
pub fn linearity() -> Verdict {
    let mut worst = 0.0f64;
    for case in 0..10u64 {
        let mut rng = seeding::stream(case, &[0xA4]);
        let cfg = ModelConfig {
            n_input_channels: 5,
            n_classes: 4,
            n_timesteps: 64,
            n_conv_layers: 3,
            hidden_channels: 6,
            fc_hidden: 8,
            embedding_size: 0,
            n_subjects: 1,
            activation: Activation::Identity,
            bias: false,
            ..ModelConfig::default()
        };
        let model = WavenetClassifier::<f32>::new(cfg, &mut rng).unwrap();
        let x: Vec<f32> = (0..5 * 64).map(|_| rng.random_range(-2.0..2.0)).collect();
        let y: Vec<f32> = (0..5 * 64).map(|_| rng.random_range(-2.0..2.0)).collect();
        let a: f32 = rng.random_range(-3.0..3.0);
        let f = |v: &[f32]| -> Vec<f64> { model.logits(v, 0).unwrap().into_iter().map(f64::from).collect() };
        let (fx, fy) = (f(&x), f(&y));
        let ax: Vec<f32> = x.iter().map(|v| a * v).collect();
        let sum: Vec<f32> = x.iter().zip(&y).map(|(p, q)| p + q).collect();
        let (fax, fsum) = (f(&ax), f(&sum));
        let scale = fx.iter().chain(&fy).map(|v| v.abs()).fold(1e-12, f64::max);
        for k in 0..fx.len() {
            worst = worst.max((fax[k] - a as f64 * fx[k]).abs() / scale);
            worst = worst.max((fsum[k] - fx[k] - fy[k]).abs() / scale);
        }
    }
    Verdict::new(worst < 1e-5, format!("max relative deviation {worst:.2e} (< 1e-5)"))
}

use std::collections::BTreeSet;

use groupdecode::interpret::{
    band_bins, kernel_fir, permute_row_spectrum, spatial_pfi, spectral_pfi, temporal_pfi, CiMethod, EvalSet,
    FirConfig, Grouping, KernelRef, Permutation, PfiAxis, PfiConfig, PfiResult, SpectralPlans,
};
use groupdecode::nn::{Activation, ModelConfig, WavenetClassifier};
use groupdecode::seeding;
use groupdecode::stats::pearson_r;
use rand::Rng;

use crate::fixtures;
use crate::Verdict;

/// Intervals at the 95% family-wise level over `m` simultaneous checks.
fn family_intervals(r: &PfiResult, m: usize) -> Vec<(f64, f64)> {
    r.intervals(1.0 - 0.05 / m.max(1) as f64, CiMethod::StudentT)
}

fn pfi_config() -> PfiConfig {
    PfiConfig {
        n_repeats: 10,
        seed: 17,
        time_stride: 4,
        ..PfiConfig::default()
    }
}

pub fn temporal() -> Verdict {
    let f = fixtures::pfi_model();
    let set = EvalSet::validation(&f.prepared, &f.split, &f.subjects, |s| s).unwrap();
    let cfg = pfi_config();
    let r = temporal_pfi(&f.model, &set, &cfg).unwrap();
    let PfiAxis::Time { times_s } = &r.axis else { unreachable!() };
    let (w0, w1) = f.spec.info_window;
    let centre = (w0 + w1) / 2.0;
    let peak = times_s[r.argmax()];
    let outside: Vec<usize> = (0..times_s.len())
        .filter(|&i| times_s[i] < w0 - cfg.window_s || times_s[i] > w1 + cfg.window_s)
        .collect();
    let ci = family_intervals(&r, outside.len());
    let bad: Vec<f64> = outside
        .iter()
        .filter(|&&i| !(ci[i].0 <= 0.0 && 0.0 <= ci[i].1))
        .map(|&i| times_s[i])
        .collect();
    let peak_ok = (peak - centre).abs() <= 0.04 + 1e-9;
    let mean = r.mean();
    let worst = outside.iter().map(|&i| mean[i]).fold(0.0, f64::max);
    Verdict::new(
        peak_ok && bad.is_empty(),
        format!(
            "baseline {:.3}, peak {:.0} ms ({:.3}; window centre {:.0} ms, tolerance 40 ms), largest loss outside {:.4}, {}/{} points outside the window have 0 in their CI{}",
            r.baseline,
            peak * 1e3,
            mean[r.argmax()],
            centre * 1e3,
            worst,
            outside.len() - bad.len(),
            outside.len(),
            if bad.is_empty() {
                String::new()
            } else {
                format!(", failing between {:.3} and {:.3} s", bad[0], bad[bad.len() - 1])
            }
        ),
    )
}

pub fn spatial() -> Verdict {
    let f = fixtures::pfi_model();
    let set = EvalSet::validation(&f.prepared, &f.split, &f.subjects, |s| s).unwrap();
    let r = spatial_pfi(&f.model, &set, &pfi_config(), &Grouping::Single).unwrap();
    let layout = &f.prepared.layout;
    let mut allowed = BTreeSet::new();
    for &ch in &f.spec.info_channels {
        allowed.extend(layout.neighbourhood_indices(ch, 5).unwrap());
    }
    let mean = r.mean();
    let mut order: Vec<usize> = (0..mean.len()).collect();
    order.sort_by(|&a, &b| mean[b].total_cmp(&mean[a]));
    let top: Vec<usize> = order[..5].to_vec();
    let top_ok = top.iter().all(|c| allowed.contains(c));
    let others: Vec<usize> = (0..mean.len()).filter(|c| !allowed.contains(c)).collect();
    let ci = family_intervals(&r, others.len());
    let bad: Vec<usize> = others.iter().copied().filter(|&c| !(ci[c].0 <= 0.0 && 0.0 <= ci[c].1)).collect();
    let worst = others.iter().map(|&c| mean[c]).fold(0.0, f64::max);
    Verdict::new(
        top_ok && bad.is_empty(),
        format!(
            "top-5 {:?} (max loss {:.3}) within info channels and neighbourhoods: {top_ok}; largest loss elsewhere {worst:.4}, {}/{} other channels have 0 in their CI{}",
            top,
            mean[top[0]],
            others.len() - bad.len(),
            others.len(),
            if bad.is_empty() { String::new() } else { format!(", failing {bad:?}") }
        ),
    )
}

pub fn spectral() -> Verdict {
    // identity permutation of every bin reproduces the row
    let n = 256;
    let plans = SpectralPlans::new(n);
    let bins = band_bins(n, 250.0, 0.0, 125.0);
    let ident: Vec<usize> = (0..bins.len()).collect();
    let mut rng = seeding::stream(0, &[0xB1]);
    let mut worst = 0.0f32;
    for _ in 0..50 {
        let row: Vec<f32> = (0..n).map(|_| rng.random_range(-3.0..3.0)).collect();
        let mut out = row.clone();
        permute_row_spectrum(&mut out, &bins, &ident, &plans);
        worst = worst.max(row.iter().zip(&out).map(|(a, b)| (a - b).abs()).fold(0.0, f32::max));
    }

    let f = fixtures::spectral_model();
    let set = EvalSet::validation(&f.prepared, &f.split, &f.subjects, |s| s).unwrap();
    let identity = PfiConfig {
        permutation: Permutation::Identity,
        n_repeats: 2,
        ..pfi_config()
    };
    let zero = spectral_pfi(&f.model, &set, &identity).unwrap().values.iter().flatten().all(|v| *v == 0.0);
    let r = spectral_pfi(&f.model, &set, &pfi_config()).unwrap();
    let PfiAxis::Bands { bands } = &r.axis else { unreachable!() };
    let best = bands[r.argmax()];
    let alpha = f.spec.alpha_hz;
    let hit = best.0 <= alpha && alpha < best.1;
    Verdict::new(
        worst < 1e-5 && zero && hit,
        format!(
            "round-trip error {worst:.1e} (< 1e-5), identity PFI exactly 0: {zero}, max-loss band [{}, {}) Hz contains {alpha} Hz: {hit}",
            best.0, best.1
        ),
    )
}

/// Single-layer linear model whose kernel 0 applies `taps` (oldest first)
/// at dilation 1 to input channel 0.
fn tap_model(taps: [f32; 2]) -> WavenetClassifier<f32> {
    let cfg = ModelConfig {
        n_input_channels: 2,
        n_classes: 2,
        n_timesteps: 512,
        n_conv_layers: 1,
        hidden_channels: 1,
        fc_hidden: 2,
        embedding_size: 0,
        n_subjects: 1,
        activation: Activation::Identity,
        ..ModelConfig::default()
    };
    let mut m = WavenetClassifier::<f32>::zeros(cfg).unwrap();
    m.params_mut()[0][..2].copy_from_slice(&taps);
    m
}

pub fn fir() -> Verdict {
    let cfg = FirConfig {
        n_noise_trials: 100,
        ..FirConfig::default()
    };
    let (a, b) = (0.8f32, -0.45f32);
    let psd = kernel_fir(&tap_model([a, b]), KernelRef { layer: 0, kernel: 0 }, &cfg).unwrap();
    // |H(w)|² of y[t] = a·x[t−1] + b·x[t]
    let oracle: Vec<f64> = psd
        .freqs
        .iter()
        .map(|f| {
            let w = 2.0 * std::f64::consts::PI * f / cfg.sfreq;
            let (a, b) = (a as f64, b as f64);
            a * a + b * b + 2.0 * a * b * w.cos()
        })
        .collect();
    // one-sided densities halve the DC and Nyquist bins
    let n = psd.power.len() - 1;
    let r = pearson_r(&psd.power[1..n], &oracle[1..n]).unwrap().r;

    let flat = kernel_fir(&tap_model([0.0, 1.0]), KernelRef { layer: 0, kernel: 0 }, &cfg).unwrap();
    // per-segment mean removal also depresses the first bin
    let inner = &flat.power[2..n];
    let mean = inner.iter().sum::<f64>() / inner.len() as f64;
    let spread = inner.iter().map(|p| (p / mean - 1.0).abs()).fold(0.0, f64::max);
    Verdict::new(
        r > 0.99 && spread < 0.15,
        format!("2-tap PSD vs closed form r = {r:.4} (> 0.99); kernel [1] max deviation from flat {:.1}%", spread * 100.0),
    )
}

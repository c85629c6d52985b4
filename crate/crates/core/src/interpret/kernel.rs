use rand_distr::{Distribution, StandardNormal};
use rustfft::num_complex::Complex;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::interpret::perturb::Feature;
use crate::interpret::pfi::{band_features, channel_groups, run_features, temporal_features, EvalSet, Grouping};
use crate::interpret::{Metric, PfiAxis, PfiConfig, PfiResult};
use crate::nn::WavenetClassifier;
use crate::seeding;

/// One output channel of one convolution layer.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct KernelRef {
    pub layer: usize,
    pub kernel: usize,
}

impl KernelRef {
    pub fn validate(&self, model: &WavenetClassifier<f32>) -> Result<()> {
        let cfg = model.config();
        if self.layer >= cfg.n_conv_layers || self.kernel >= cfg.hidden_channels {
            return Err(Error::InvalidArgument(format!(
                "kernel ({}, {}) outside a model with {} layers of {} kernels",
                self.layer, self.kernel, cfg.n_conv_layers, cfg.hidden_channels
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KernelAxis {
    Time,
    Space(Grouping),
    Frequency,
}

fn kernel_output(model: &WavenetClassifier<f32>, k: KernelRef, data: &[f32], row: usize) -> Result<Vec<f32>> {
    let t = model.config().n_timesteps;
    let out = model.layer_output(&model.input_for(data, row)?, k.layer)?;
    Ok(out[k.kernel * t..(k.kernel + 1) * t].to_vec())
}

/// `|o'(t) − o(t)|` for every output position of the kernel.
pub fn kernel_deviation(
    model: &WavenetClassifier<f32>,
    kernel: KernelRef,
    original: &[f32],
    perturbed: &[f32],
    row: usize,
) -> Result<Vec<f64>> {
    kernel.validate(model)?;
    let a = kernel_output(model, kernel, original, row)?;
    let b = kernel_output(model, kernel, perturbed, row)?;
    Ok(a.iter().zip(&b).map(|(x, y)| (y - x).abs() as f64).collect())
}

/// Mean absolute change of the kernel's output map under the same input
/// perturbations as the model-level analyses.
pub fn kernel_pfi(
    model: &WavenetClassifier<f32>,
    kernel: KernelRef,
    set: &EvalSet,
    cfg: &PfiConfig,
    axis: &KernelAxis,
) -> Result<PfiResult> {
    kernel.validate(model)?;
    set_check(model, set, cfg)?;
    let (features, axis): (Vec<Feature>, PfiAxis) = match axis {
        KernelAxis::Time => {
            let (f, times_s) = temporal_features(set, cfg);
            (f, PfiAxis::Time { times_s })
        }
        KernelAxis::Space(grouping) => {
            let (groups, labels, positions) = channel_groups(set.layout, set.n_channels, grouping, cfg.neighbourhood_k)?;
            let f = groups
                .iter()
                .map(|g| Feature::TimeInRows {
                    rows: g.clone(),
                    lo: 0,
                    hi: set.n_times,
                })
                .collect();
            (
                f,
                PfiAxis::Channels {
                    labels,
                    positions,
                    groups,
                },
            )
        }
        KernelAxis::Frequency => {
            let rows: Vec<usize> = (0..set.n_channels).collect();
            let (f, bands) = band_features(set, cfg, &rows);
            (f, PfiAxis::Bands { bands })
        }
    };
    let reference: Vec<Vec<f32>> = set
        .examples
        .iter()
        .map(|ex| kernel_output(model, kernel, ex.data, ex.row))
        .collect::<Result<_>>()?;
    let values = run_features(set, &features, cfg, |i, data| {
        let out = kernel_output(model, kernel, data, set.examples[i].row)?;
        let dev: f64 = out.iter().zip(&reference[i]).map(|(a, b)| (a - b).abs() as f64).sum();
        Ok(dev / out.len() as f64)
    })?;
    Ok(PfiResult {
        metric: Metric::OutputDeviation,
        axis,
        baseline: 0.0,
        values,
    })
}

fn set_check(model: &WavenetClassifier<f32>, set: &EvalSet, cfg: &PfiConfig) -> Result<()> {
    let m = model.config();
    if m.n_input_channels != set.n_channels || m.n_timesteps != set.n_times {
        return Err(Error::Shape(format!(
            "model expects {}×{} trials, evaluation set has {}×{}",
            m.n_input_channels, m.n_timesteps, set.n_channels, set.n_times
        )));
    }
    if set.examples.is_empty() {
        return Err(Error::InvalidArgument("empty evaluation set".into()));
    }
    cfg.validate(set.n_channels, set.n_times, set.sfreq)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FirConfig {
    pub n_noise_trials: usize,
    /// Welch segment length in samples (clipped to the trial length).
    pub segment_len: usize,
    pub sfreq: f64,
    /// Embedding row used for the noise trials.
    pub subject_row: usize,
    pub seed: u64,
}

impl Default for FirConfig {
    fn default() -> Self {
        Self {
            n_noise_trials: 100,
            segment_len: 64,
            sfreq: 250.0,
            subject_row: 0,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Psd {
    pub freqs: Vec<f64>,
    pub power: Vec<f64>,
}

/// One-sided Welch estimate with a periodic Hann window, 50% overlap and
/// per-segment mean removal; power density in units²/Hz.
pub fn welch_psd(x: &[f64], fs: f64, nperseg: usize) -> Result<Psd> {
    if nperseg < 2 || nperseg > x.len() {
        return Err(Error::InvalidArgument(format!(
            "segment length {nperseg} must lie in [2, {}]",
            x.len()
        )));
    }
    let window: Vec<f64> = (0..nperseg)
        .map(|i| 0.5 - 0.5 * (2.0 * std::f64::consts::PI * i as f64 / nperseg as f64).cos())
        .collect();
    let wss: f64 = window.iter().map(|w| w * w).sum();
    let fft = FftPlanner::new().plan_fft_forward(nperseg);
    let step = nperseg / 2;
    let n_bins = nperseg / 2 + 1;
    let mut power = vec![0.0; n_bins];
    let mut n_seg = 0;
    let mut buf = vec![Complex::new(0.0, 0.0); nperseg];
    let mut start = 0;
    while start + nperseg <= x.len() {
        let seg = &x[start..start + nperseg];
        let mu = seg.iter().sum::<f64>() / nperseg as f64;
        for ((b, &v), &w) in buf.iter_mut().zip(seg).zip(&window) {
            *b = Complex::new((v - mu) * w, 0.0);
        }
        fft.process(&mut buf);
        for (p, z) in power.iter_mut().zip(&buf) {
            *p += z.norm_sqr();
        }
        n_seg += 1;
        start += step;
    }
    let scale = 1.0 / (fs * wss * n_seg as f64);
    for (k, p) in power.iter_mut().enumerate() {
        *p *= scale;
        let edge = k == 0 || (nperseg.is_multiple_of(2) && k == n_bins - 1);
        if !edge {
            *p *= 2.0;
        }
    }
    let freqs = (0..n_bins).map(|k| k as f64 * fs / nperseg as f64).collect();
    Ok(Psd { freqs, power })
}

/// Frequency response of a kernel estimated from unit white-noise inputs:
/// Welch PSDs of its output averaged over noise trials, scaled to max 1.
pub fn kernel_fir(model: &WavenetClassifier<f32>, kernel: KernelRef, cfg: &FirConfig) -> Result<Psd> {
    kernel.validate(model)?;
    if cfg.n_noise_trials < 1 {
        return Err(Error::InvalidArgument("kernel FIR needs at least one noise trial".into()));
    }
    let m = model.config();
    let (c, t) = (m.n_input_channels, m.n_timesteps);
    let nperseg = cfg.segment_len.min(t);
    let mut rng = seeding::stream(cfg.seed, &[0x46_49_52]);
    let mut mean: Option<Psd> = None;
    for _ in 0..cfg.n_noise_trials {
        let noise: Vec<f32> = (0..c * t)
            .map(|_| {
                let v: f64 = StandardNormal.sample(&mut rng);
                v as f32
            })
            .collect();
        let out: Vec<f64> = kernel_output(model, kernel, &noise, cfg.subject_row)?
            .into_iter()
            .map(f64::from)
            .collect();
        let psd = welch_psd(&out, cfg.sfreq, nperseg)?;
        match mean.as_mut() {
            None => mean = Some(psd),
            Some(acc) => acc.power.iter_mut().zip(&psd.power).for_each(|(a, p)| *a += p),
        }
    }
    let mut psd = mean.expect("at least one trial");
    let max = psd.power.iter().cloned().fold(0.0, f64::max);
    if max > 0.0 {
        psd.power.iter_mut().for_each(|p| *p /= max);
    }
    Ok(psd)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    #[test]
    fn welch_of_sine_peaks_at_its_frequency() {
        let fs = 100.0;
        let x: Vec<f64> = (0..512).map(|i| (2.0 * std::f64::consts::PI * 12.5 * i as f64 / fs).sin()).collect();
        let p = welch_psd(&x, fs, 64).unwrap();
        let k = crate::nn::argmax(&p.power);
        assert!((p.freqs[k] - 12.5).abs() < 1e-9);
    }

    #[test]
    fn welch_white_noise_level() {
        // unit-variance white noise has one-sided density 2/fs
        let mut rng = seeding::stream(3, &[]);
        let x: Vec<f64> = (0..40_000).map(|_| rng.sample(StandardNormal)).collect();
        let p = welch_psd(&x, 10.0, 64).unwrap();
        let inner = &p.power[1..p.power.len() - 1];
        let avg = inner.iter().sum::<f64>() / inner.len() as f64;
        assert!((avg - 0.2).abs() < 0.01, "{avg}");
    }

    #[test]
    fn welch_parseval() {
        // integrating the density recovers the variance of a zero-mean signal
        let mut rng = seeding::stream(4, &[]);
        let x: Vec<f64> = (0..20_000).map(|_| 3.0 * rng.sample::<f64, _>(StandardNormal)).collect();
        let p = welch_psd(&x, 1.0, 128).unwrap();
        let df = p.freqs[1];
        let total: f64 = p.power.iter().sum::<f64>() * df;
        assert!((total - 9.0).abs() < 0.5, "{total}");
    }

    #[test]
    fn bad_segment() {
        assert!(welch_psd(&[0.0; 10], 1.0, 11).is_err());
        assert!(welch_psd(&[0.0; 10], 1.0, 1).is_err());
    }
}

//! Synthetic multi-subject epochs with planted class and subject structure.
//!
//! Every class owns a template: a sum of Hann-windowed bursts at the alpha
//! frequency, confined to `info_window` in time and to `info_channels` in
//! space, with class-specific channel weights. A trial of subject `s` and
//! class `c` is `M_s · (template_c + noise)`, where the noise is a 1/f
//! background plus an alpha oscillation with random phase, and `M_s` is an
//! orthonormal sensor mixing built from Givens rotations between
//! neighbouring channels.

use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::StandardNormal;
use rustfft::num_complex::Complex;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::dataio::{ChannelLayout, EpochedDataset, Trial};
use crate::error::{Error, Result};
use crate::seeding;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SyntheticSpec {
    pub n_subjects: usize,
    pub n_classes: usize,
    pub trials_per_class: usize,
    pub n_channels: usize,
    pub n_timesteps: usize,
    pub sfreq: f64,
    /// Pre-stimulus baseline in seconds.
    pub t_offset: f64,
    /// Rotation angle (radians) of every Givens rotation in a subject's mixing.
    pub subject_mixing_angle: f64,
    /// Start and end (s, relative to stimulus) of the planted class information.
    pub info_window: (f64, f64),
    /// Channel indices carrying the class templates.
    pub info_channels: Vec<usize>,
    pub alpha_hz: f64,
    /// Slope of the background power spectrum, `P(f) ∝ f^-noise_exponent`.
    pub noise_exponent: f64,
    /// Standard deviation of the 1/f background.
    pub noise_amplitude: f64,
    /// RMS of the random-phase alpha oscillation relative to `noise_amplitude`.
    pub alpha_ratio: f64,
    /// Per-channel RMS weight of the class templates.
    pub template_amplitude: f64,
    /// Bursts per template (alternating cosine and sine carriers).
    pub n_components: usize,
    pub seed: u64,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        Self::desk()
    }
}

impl SyntheticSpec {
    /// Desk-scale default: 5 subjects, 8 classes, 30 trials per class,
    /// 32 channels, 256 samples at 250 Hz.
    pub fn desk() -> Self {
        let n_channels = 32;
        let layout = ChannelLayout::rings(n_channels);
        Self {
            n_subjects: 5,
            n_classes: 8,
            trials_per_class: 30,
            n_channels,
            n_timesteps: 256,
            sfreq: 250.0,
            t_offset: 0.1,
            subject_mixing_angle: 0.8,
            info_window: (0.1, 0.2),
            info_channels: default_info_channels(&layout, 6),
            alpha_hz: 10.0,
            noise_exponent: 1.0,
            noise_amplitude: 1.0,
            alpha_ratio: 0.5,
            template_amplitude: 1.0,
            n_components: 2,
            seed: 0,
        }
    }

    pub fn layout(&self) -> ChannelLayout {
        ChannelLayout::rings(self.n_channels)
    }

    /// Sample range `[start, end)` of the planted information window.
    pub fn info_samples(&self) -> (usize, usize) {
        let s0 = ((self.t_offset + self.info_window.0) * self.sfreq).round() as usize;
        let s1 = ((self.t_offset + self.info_window.1) * self.sfreq).round() as usize;
        (s0, s1)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidSpec(m));
        if self.n_subjects == 0 || self.n_classes == 0 || self.trials_per_class == 0 {
            return bad("subjects, classes and trials per class must be positive".into());
        }
        if self.n_channels == 0 || self.n_timesteps < 2 {
            return bad(format!(
                "need at least one channel and two samples, got {}×{}",
                self.n_channels, self.n_timesteps
            ));
        }
        if !(self.sfreq.is_finite() && self.sfreq > 0.0) {
            return bad(format!("sampling rate {}", self.sfreq));
        }
        if !(self.t_offset >= 0.0) {
            return bad(format!("negative baseline {}", self.t_offset));
        }
        if !(0.0..=std::f64::consts::FRAC_PI_2).contains(&self.subject_mixing_angle) {
            return bad(format!(
                "mixing angle {} outside [0, π/2]",
                self.subject_mixing_angle
            ));
        }
        let (w0, w1) = self.info_window;
        let epoch_end = self.n_timesteps as f64 / self.sfreq - self.t_offset;
        if !(w0 < w1 && w0 >= -self.t_offset && w1 <= epoch_end + 1e-9) {
            return bad(format!(
                "info window ({w0}, {w1}) not inside epoch [{}, {epoch_end}]",
                -self.t_offset
            ));
        }
        let (s0, s1) = self.info_samples();
        if s1 <= s0 {
            return bad("info window shorter than one sample".into());
        }
        if self.info_channels.is_empty() {
            return bad("no informative channels".into());
        }
        if let Some(&c) = self.info_channels.iter().find(|&&c| c >= self.n_channels) {
            return bad(format!("info channel {c} not among {} channels", self.n_channels));
        }
        if !(self.alpha_hz > 0.0 && self.alpha_hz < self.sfreq / 2.0) {
            return bad(format!("alpha frequency {} outside (0, Nyquist)", self.alpha_hz));
        }
        if self.noise_amplitude < 0.0 || self.alpha_ratio < 0.0 || self.template_amplitude < 0.0 {
            return bad("amplitudes must be non-negative".into());
        }
        if self.n_components == 0 {
            return bad("templates need at least one component".into());
        }
        Ok(())
    }

    /// Class templates, each `n_channels × n_timesteps` row-major.
    pub fn templates(&self) -> Result<Vec<Vec<f32>>> {
        self.validate()?;
        let (c, t) = (self.n_channels, self.n_timesteps);
        let (s0, s1) = self.info_samples();
        let n = s1 - s0;
        let center = (s0 + s1 - 1) as f64 / 2.0;
        let hann: Vec<f64> = (0..n)
            .map(|i| {
                let x = std::f64::consts::PI * (i + 1) as f64 / (n + 1) as f64;
                x.sin().powi(2)
            })
            .collect();
        let mut rng = seeding::stream(self.seed, &[0]);
        let n_info = self.info_channels.len();
        let mut out = Vec::with_capacity(self.n_classes);
        for _class in 0..self.n_classes {
            let mut tpl = vec![0.0f64; c * t];
            for k in 0..self.n_components {
                let mut w: Vec<f64> = (0..n_info).map(|_| rng.sample(StandardNormal)).collect();
                let norm = w.iter().map(|v| v * v).sum::<f64>().sqrt().max(1e-12);
                let scale = self.template_amplitude * (n_info as f64).sqrt() / norm;
                w.iter_mut().for_each(|v| *v *= scale);
                let phase = k as f64 * std::f64::consts::FRAC_PI_2;
                for (i, &ch) in self.info_channels.iter().enumerate() {
                    for (j, h) in hann.iter().enumerate() {
                        let ts = (s0 + j) as f64;
                        let carrier = (2.0 * std::f64::consts::PI * self.alpha_hz * (ts - center)
                            / self.sfreq
                            + phase)
                            .cos();
                        tpl[ch * t + s0 + j] += w[i] * h * carrier;
                    }
                }
            }
            out.push(tpl.into_iter().map(|v| v as f32).collect());
        }
        Ok(out)
    }

    /// Givens rotations `(i, j, angle)` making up subject `s`'s mixing.
    ///
    /// Channels are visited in random order and paired with their nearest
    /// still-unpaired neighbour among the three closest channels; each pair is
    /// rotated by `±subject_mixing_angle` with a random sign.
    pub fn mixing_rotations(&self, subject: usize) -> Result<Vec<(usize, usize, f64)>> {
        self.validate()?;
        if self.subject_mixing_angle == 0.0 {
            return Ok(Vec::new());
        }
        let layout = self.layout();
        let mut rng = seeding::stream(self.seed, &[1, subject as u64]);
        let mut order: Vec<usize> = (0..self.n_channels).collect();
        order.shuffle(&mut rng);
        let mut paired = vec![false; self.n_channels];
        let mut rotations = Vec::new();
        let k = self.n_channels.min(4);
        for &ch in &order {
            if paired[ch] {
                continue;
            }
            let nb = layout.neighbourhood_indices(ch, k)?;
            if let Some(&partner) = nb[1..].iter().find(|&&p| !paired[p]) {
                paired[ch] = true;
                paired[partner] = true;
                let sign = if rng.random::<bool>() { 1.0 } else { -1.0 };
                rotations.push((ch, partner, sign * self.subject_mixing_angle));
            }
        }
        Ok(rotations)
    }

    /// Dense mixing matrix of subject `s` (`n_channels²`, row-major).
    pub fn mixing_matrix(&self, subject: usize) -> Result<Vec<f64>> {
        let c = self.n_channels;
        let mut m = vec![0.0; c * c];
        for i in 0..c {
            m[i * c + i] = 1.0;
        }
        for (i, j, a) in self.mixing_rotations(subject)? {
            let (cs, sn) = (a.cos(), a.sin());
            for col in 0..c {
                let (xi, xj) = (m[i * c + col], m[j * c + col]);
                m[i * c + col] = cs * xi - sn * xj;
                m[j * c + col] = sn * xi + cs * xj;
            }
        }
        Ok(m)
    }
}

/// The `n` channels closest to the back of the head (negative y), which stand
/// in for occipital sensors.
pub fn default_info_channels(layout: &ChannelLayout, n: usize) -> Vec<usize> {
    let mut ch = layout.closest_to([0.0, -0.9], n);
    ch.sort_unstable();
    ch
}

/// Unit-variance background with power spectrum ∝ f^-exponent.
fn colored_noise(
    rng: &mut impl Rng,
    n: usize,
    exponent: f64,
    fft: &dyn rustfft::Fft<f64>,
) -> Vec<f64> {
    let mut spec = vec![Complex::new(0.0, 0.0); n];
    let mut power = 0.0;
    for k in 1..=n / 2 {
        let amp = (k as f64).powf(-exponent / 2.0);
        let re: f64 = rng.sample(StandardNormal);
        if 2 * k == n {
            spec[k] = Complex::new(re * amp, 0.0);
            power += amp * amp;
        } else {
            let im: f64 = rng.sample(StandardNormal);
            spec[k] = Complex::new(re * amp, im * amp);
            spec[n - k] = spec[k].conj();
            power += 4.0 * amp * amp;
        }
    }
    fft.process(&mut spec);
    // unnormalized inverse transform: E[x_t²] = Σ_k E|X_k|²
    let std = power.max(1e-300).sqrt();
    spec.iter().map(|z| z.re / std).collect()
}

pub fn generate_synthetic(spec: &SyntheticSpec) -> Result<EpochedDataset> {
    spec.validate()?;
    let layout = spec.layout();
    let templates = spec.templates()?;
    let (c, t) = (spec.n_channels, spec.n_timesteps);
    let mut planner = FftPlanner::<f64>::new();
    let ifft = planner.plan_fft_inverse(t);
    let alpha_rms = spec.alpha_ratio * spec.noise_amplitude;
    let omega = 2.0 * std::f64::consts::PI * spec.alpha_hz / spec.sfreq;

    let mut all = Vec::with_capacity(spec.n_subjects);
    for s in 0..spec.n_subjects {
        let rotations = spec.mixing_rotations(s)?;
        let mut by_class = Vec::with_capacity(spec.n_classes);
        for (class, tpl) in templates.iter().enumerate() {
            let mut trials = Vec::with_capacity(spec.trials_per_class);
            for i in 0..spec.trials_per_class {
                let mut rng = seeding::stream(spec.seed, &[2, s as u64, class as u64, i as u64]);
                let mut x: Vec<f64> = tpl.iter().map(|&v| v as f64).collect();
                if spec.noise_amplitude > 0.0 {
                    for ch in 0..c {
                        let bg = colored_noise(&mut rng, t, spec.noise_exponent, ifft.as_ref());
                        let phase = rng.random::<f64>() * 2.0 * std::f64::consts::PI;
                        let row = &mut x[ch * t..(ch + 1) * t];
                        for (tt, v) in row.iter_mut().enumerate() {
                            *v += spec.noise_amplitude * bg[tt]
                                + alpha_rms
                                    * std::f64::consts::SQRT_2
                                    * (omega * tt as f64 + phase).sin();
                        }
                    }
                }
                for &(a, b, angle) in &rotations {
                    let (cs, sn) = (angle.cos(), angle.sin());
                    for tt in 0..t {
                        let (xa, xb) = (x[a * t + tt], x[b * t + tt]);
                        x[a * t + tt] = cs * xa - sn * xb;
                        x[b * t + tt] = sn * xa + cs * xb;
                    }
                }
                trials.push(Trial::new(c, t, x.into_iter().map(|v| v as f32).collect())?);
            }
            by_class.push(trials);
        }
        all.push(by_class);
    }
    let subjects = (0..spec.n_subjects).map(|s| format!("{:02}", s + 1)).collect();
    EpochedDataset::new(subjects, spec.n_classes, spec.sfreq, spec.t_offset, layout, all)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> SyntheticSpec {
        let layout = ChannelLayout::rings(8);
        SyntheticSpec {
            n_subjects: 3,
            n_classes: 2,
            trials_per_class: 4,
            n_channels: 8,
            n_timesteps: 64,
            info_window: (0.0, 0.05),
            info_channels: default_info_channels(&layout, 3),
            ..SyntheticSpec::desk()
        }
    }

    #[test]
    fn noiseless_identity_mixing_reproduces_templates() {
        let spec = SyntheticSpec {
            subject_mixing_angle: 0.0,
            noise_amplitude: 0.0,
            ..small()
        };
        let ds = generate_synthetic(&spec).unwrap();
        let tpl = spec.templates().unwrap();
        for s in 0..spec.n_subjects {
            for (k, t) in tpl.iter().enumerate() {
                for tr in ds.trials(s, k) {
                    assert_eq!(tr.data(), t.as_slice());
                }
            }
        }
    }

    #[test]
    fn same_seed_same_bytes() {
        let spec = SyntheticSpec { seed: 7, ..small() };
        assert_eq!(generate_synthetic(&spec).unwrap(), generate_synthetic(&spec).unwrap());
        let other = SyntheticSpec { seed: 8, ..small() };
        assert_ne!(generate_synthetic(&spec).unwrap(), generate_synthetic(&other).unwrap());
    }

    #[test]
    fn templates_vanish_outside_info_window() {
        let spec = SyntheticSpec {
            info_window: (0.1, 0.2),
            sfreq: 250.0,
            t_offset: 0.1,
            ..SyntheticSpec::desk()
        };
        // baseline of 25 samples shifts the 25..50 post-stimulus samples to 50..75
        assert_eq!(spec.info_samples(), (50, 75));
        let t = spec.n_timesteps;
        for tpl in spec.templates().unwrap() {
            for ch in 0..spec.n_channels {
                for tt in 0..t {
                    let v = tpl[ch * t + tt];
                    let inside = (50..75).contains(&tt) && spec.info_channels.contains(&ch);
                    if !inside {
                        assert_eq!(v, 0.0, "ch {ch} t {tt}");
                    }
                }
            }
            assert!(tpl.iter().any(|&v| v != 0.0));
        }
    }

    #[test]
    fn mixing_is_orthonormal() {
        let spec = SyntheticSpec::desk();
        let c = spec.n_channels;
        let m = spec.mixing_matrix(2).unwrap();
        for i in 0..c {
            for j in 0..c {
                let dot: f64 = (0..c).map(|k| m[i * c + k] * m[j * c + k]).sum();
                let want = if i == j { 1.0 } else { 0.0 };
                assert!((dot - want).abs() < 1e-12);
            }
        }
        assert!(!spec.mixing_rotations(2).unwrap().is_empty());
    }

    #[test]
    fn mixing_pairs_are_spatial_neighbours() {
        let spec = SyntheticSpec::desk();
        let layout = spec.layout();
        for (i, j, _) in spec.mixing_rotations(0).unwrap() {
            assert!(layout.neighbourhood_indices(i, 4).unwrap().contains(&j));
        }
    }

    #[test]
    fn background_noise_is_unit_variance() {
        let mut planner = FftPlanner::<f64>::new();
        let fft = planner.plan_fft_inverse(256);
        let mut rng = seeding::stream(1, &[]);
        let mut acc = 0.0;
        let reps = 400;
        for _ in 0..reps {
            let x = colored_noise(&mut rng, 256, 1.0, fft.as_ref());
            acc += x.iter().map(|v| v * v).sum::<f64>() / 256.0;
        }
        let var = acc / reps as f64;
        assert!((var - 1.0).abs() < 0.1, "variance {var}");
    }

    #[test]
    fn invalid_specs_rejected() {
        let mut s = small();
        s.subject_mixing_angle = 2.0;
        assert!(matches!(generate_synthetic(&s), Err(Error::InvalidSpec(_))));
        let mut s = small();
        s.info_channels = vec![99];
        assert!(generate_synthetic(&s).is_err());
        let mut s = small();
        s.info_window = (0.2, 0.1);
        assert!(generate_synthetic(&s).is_err());
        let mut s = small();
        s.n_timesteps = 0;
        assert!(generate_synthetic(&s).is_err());
    }
}

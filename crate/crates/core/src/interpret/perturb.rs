//! Input perturbations used by every permutation analysis. Each touches only
//! its declared slice of the trial; all other entries stay bit-identical.

use std::sync::Arc;

use rand::seq::SliceRandom;
use rand::Rng;
use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};

/// One permutable slice of a `C × T` trial.
#[derive(Debug, Clone, PartialEq)]
pub enum Feature {
    /// Permute the channel order inside samples `lo..hi`.
    ChannelsInWindow { lo: usize, hi: usize },
    /// Permute the samples `lo..hi` of `rows`, jointly across the rows.
    TimeInRows { rows: Vec<usize>, lo: usize, hi: usize },
    /// Permute the Fourier coefficients at `bins` of every row in `rows`
    /// (each row independently).
    BinsInRows { rows: Vec<usize>, bins: Vec<usize> },
}

/// How permutations are drawn.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Permutation {
    #[default]
    Random,
    /// Leave every slice in place; a sanity baseline that must give zero
    /// importance.
    Identity,
}

fn draw(n: usize, policy: Permutation, rng: &mut impl Rng) -> Vec<usize> {
    let mut p: Vec<usize> = (0..n).collect();
    if policy == Permutation::Random {
        p.shuffle(rng);
    }
    p
}

fn is_identity(p: &[usize]) -> bool {
    p.iter().enumerate().all(|(i, &v)| i == v)
}

/// Forward/inverse FFT plans for one trial length.
#[derive(Clone)]
pub struct SpectralPlans {
    n: usize,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl SpectralPlans {
    pub fn new(n: usize) -> Self {
        let mut planner = FftPlanner::new();
        Self {
            n,
            forward: planner.plan_fft_forward(n),
            inverse: planner.plan_fft_inverse(n),
        }
    }
}

/// Bins strictly between DC and Nyquist whose frequency lies in `[lo, hi)`.
pub fn band_bins(n: usize, sfreq: f64, lo: f64, hi: f64) -> Vec<usize> {
    let last = (n - 1) / 2;
    (1..=last)
        .filter(|&k| {
            let f = k as f64 * sfreq / n as f64;
            f >= lo && f < hi
        })
        .collect()
}

/// Reorder the coefficients at `bins` of one real row by `perm` and mirror
/// them onto the negative frequencies so the result stays real.
pub fn permute_row_spectrum(row: &mut [f32], bins: &[usize], perm: &[usize], plans: &SpectralPlans) {
    let spec = permuted_signal(row, bins, perm, plans);
    for (v, z) in row.iter_mut().zip(&spec) {
        *v = z.re as f32;
    }
}

/// Complex inverse transform of the permuted spectrum (imaginary parts are
/// round-off only).
fn permuted_signal(row: &[f32], bins: &[usize], perm: &[usize], plans: &SpectralPlans) -> Vec<Complex<f64>> {
    let n = row.len();
    debug_assert_eq!(n, plans.n);
    let mut spec: Vec<Complex<f64>> = row.iter().map(|&v| Complex::new(v as f64, 0.0)).collect();
    plans.forward.process(&mut spec);
    let old: Vec<Complex<f64>> = bins.iter().map(|&k| spec[k]).collect();
    for (j, &k) in bins.iter().enumerate() {
        spec[k] = old[perm[j]];
        spec[n - k] = old[perm[j]].conj();
    }
    plans.inverse.process(&mut spec);
    let scale = 1.0 / n as f64;
    spec.iter_mut().for_each(|z| *z *= scale);
    spec
}

impl Feature {
    pub fn validate(&self, c: usize, t: usize) -> Result<()> {
        let ok = match self {
            Feature::ChannelsInWindow { lo, hi } => lo < hi && *hi <= t,
            Feature::TimeInRows { rows, lo, hi } => lo < hi && *hi <= t && rows.iter().all(|&r| r < c),
            Feature::BinsInRows { rows, bins } => {
                rows.iter().all(|&r| r < c) && bins.iter().all(|&k| k >= 1 && 2 * k < t)
            }
        };
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidArgument(format!("feature {self:?} does not fit a {c}×{t} trial")))
        }
    }

    /// Apply the perturbation in place to `data` (`c × t`, row-major).
    pub fn apply(
        &self,
        data: &mut [f32],
        c: usize,
        t: usize,
        policy: Permutation,
        rng: &mut impl Rng,
        plans: Option<&SpectralPlans>,
    ) {
        match self {
            Feature::ChannelsInWindow { lo, hi } => {
                let perm = draw(c, policy, rng);
                if is_identity(&perm) {
                    return;
                }
                let w = hi - lo;
                let old: Vec<f32> = (0..c).flat_map(|ch| data[ch * t + lo..ch * t + hi].to_vec()).collect();
                for (ch, &src) in perm.iter().enumerate() {
                    data[ch * t + lo..ch * t + hi].copy_from_slice(&old[src * w..(src + 1) * w]);
                }
            }
            Feature::TimeInRows { rows, lo, hi } => {
                let perm = draw(hi - lo, policy, rng);
                if is_identity(&perm) {
                    return;
                }
                for &r in rows {
                    let seg = &mut data[r * t + lo..r * t + hi];
                    let old = seg.to_vec();
                    for (dst, &src) in seg.iter_mut().zip(&perm) {
                        *dst = old[src];
                    }
                }
            }
            Feature::BinsInRows { rows, bins } => {
                let plans = plans.expect("spectral features need FFT plans");
                for &r in rows {
                    let perm = draw(bins.len(), policy, rng);
                    if is_identity(&perm) {
                        continue;
                    }
                    permute_row_spectrum(&mut data[r * t..(r + 1) * t], bins, &perm, plans);
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seeding;

    fn ramp(c: usize, t: usize) -> Vec<f32> {
        (0..c * t).map(|i| ((i * 7919) % 101) as f32 / 10.0 - 5.0).collect()
    }

    #[test]
    fn channel_window_touches_only_window() {
        let (c, t) = (5, 20);
        let x = ramp(c, t);
        let mut y = x.clone();
        let f = Feature::ChannelsInWindow { lo: 6, hi: 11 };
        f.apply(&mut y, c, t, Permutation::Random, &mut seeding::stream(1, &[]), None);
        for ch in 0..c {
            for tt in 0..t {
                if !(6..11).contains(&tt) {
                    assert_eq!(x[ch * t + tt].to_bits(), y[ch * t + tt].to_bits());
                }
            }
        }
        // columns inside the window are permutations of the originals
        for tt in 6..11 {
            let mut a: Vec<f32> = (0..c).map(|ch| x[ch * t + tt]).collect();
            let mut b: Vec<f32> = (0..c).map(|ch| y[ch * t + tt]).collect();
            a.sort_by(f32::total_cmp);
            b.sort_by(f32::total_cmp);
            assert_eq!(a, b);
        }
        assert_ne!(x, y);
    }

    #[test]
    fn time_shuffle_on_constant_row_is_noop() {
        let (c, t) = (3, 16);
        let mut x = ramp(c, t);
        x[t..2 * t].iter_mut().for_each(|v| *v = 2.5);
        let mut y = x.clone();
        let f = Feature::TimeInRows { rows: vec![1], lo: 0, hi: t };
        f.apply(&mut y, c, t, Permutation::Random, &mut seeding::stream(2, &[]), None);
        assert_eq!(x, y);
    }

    #[test]
    fn identity_policy_changes_nothing() {
        let (c, t) = (4, 32);
        let x = ramp(c, t);
        let plans = SpectralPlans::new(t);
        for f in [
            Feature::ChannelsInWindow { lo: 0, hi: t },
            Feature::TimeInRows { rows: vec![0, 2], lo: 3, hi: 9 },
            Feature::BinsInRows { rows: vec![0, 1, 2, 3], bins: (1..16).collect() },
        ] {
            let mut y = x.clone();
            f.apply(&mut y, c, t, Permutation::Identity, &mut seeding::stream(0, &[]), Some(&plans));
            assert_eq!(x, y);
        }
    }

    #[test]
    fn fft_round_trip_with_identity_bins() {
        let t = 256;
        let x = ramp(1, t);
        let mut y = x.clone();
        let bins: Vec<usize> = (1..128).collect();
        let id: Vec<usize> = (0..bins.len()).collect();
        permute_row_spectrum(&mut y, &bins, &id, &SpectralPlans::new(t));
        let err = x.iter().zip(&y).map(|(a, b)| (a - b).abs()).fold(0.0f32, f32::max);
        assert!(err < 1e-5, "{err}");
    }

    #[test]
    fn spectral_shuffle_stays_real_and_keeps_power() {
        let t = 128;
        let x: Vec<f32> = (0..t).map(|i| (i as f32 * 0.3).sin() + (i as f32 * 1.1).cos() * 0.5).collect();
        let mut y = x.clone();
        let bins = band_bins(t, 250.0, 5.0, 40.0);
        let mut perm: Vec<usize> = (0..bins.len()).collect();
        perm.reverse();
        permute_row_spectrum(&mut y, &bins, &perm, &SpectralPlans::new(t));
        let px: f64 = x.iter().map(|&v| (v as f64).powi(2)).sum();
        let py: f64 = y.iter().map(|&v| (v as f64).powi(2)).sum();
        assert!((px - py).abs() / px < 1e-5);
        let z = permuted_signal(&x, &bins, &perm, &SpectralPlans::new(t));
        assert!(z.iter().all(|c| c.im.abs() < 1e-9));
        assert_ne!(x, y);
    }

    #[test]
    fn band_bins_exclude_dc_and_nyquist() {
        let b = band_bins(256, 250.0, 0.0, 2.5);
        assert_eq!(b, vec![1, 2]);
        assert!(!band_bins(256, 250.0, 120.0, 126.0).contains(&128));
        let ten = band_bins(256, 250.0, 7.5, 12.5);
        assert!(ten.contains(&10));
    }
}

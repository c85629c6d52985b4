//! Permutation feature importance over time, channels and frequency bands,
//! at model level and for single convolution kernels; kernel frequency
//! responses; embedding diagnostics.

mod embedding;
mod kernel;
mod output;
mod perturb;
mod pfi;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::stats;

pub use embedding::{embedding_diagnostics, EmbeddingDiagnostics};
pub use kernel::{kernel_deviation, kernel_fir, kernel_pfi, welch_psd, FirConfig, KernelAxis, KernelRef, Psd};
pub use output::{line_plot_svg, sensor_map_svg, write_pfi_csv, write_psd_csv};
pub use perturb::{band_bins, permute_row_spectrum, Feature, Permutation, SpectralPlans};
pub use pfi::{
    spatial_pfi, spatiospectral_pfi, spatiotemporal_pfi, spectral_bands, spectral_pfi,
    temporal_pfi, time_windows, EvalSet, Grouping,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PfiConfig {
    /// Temporal window length in seconds.
    pub window_s: f64,
    /// Channels per spatial neighbourhood (the channel plus its nearest).
    pub neighbourhood_k: usize,
    /// Width of the spectral bands in Hz.
    pub band_hz: f64,
    pub n_repeats: usize,
    pub seed: u64,
    /// Step between evaluated window centres, in samples.
    pub time_stride: usize,
    pub permutation: Permutation,
    /// Upper bound on model evaluations (features × repeats × trials).
    pub max_evaluations: u64,
    pub jobs: usize,
}

impl Default for PfiConfig {
    fn default() -> Self {
        Self {
            window_s: 0.1,
            neighbourhood_k: 4,
            band_hz: 5.0,
            n_repeats: 10,
            seed: 0,
            time_stride: 1,
            permutation: Permutation::Random,
            max_evaluations: 5_000_000,
            jobs: 1,
        }
    }
}

impl PfiConfig {
    /// Window length in samples.
    pub fn window_samples(&self, sfreq: f64) -> usize {
        (self.window_s * sfreq).round() as usize
    }

    pub fn validate(&self, n_channels: usize, n_times: usize, sfreq: f64) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidArgument(format!("pfi config: {m}")));
        let w = self.window_samples(sfreq);
        if w < 1 {
            return bad(format!("window of {} s is shorter than one sample", self.window_s));
        }
        if w > n_times {
            return bad(format!("window of {w} samples is larger than the {n_times}-sample epoch"));
        }
        if self.neighbourhood_k < 1 || self.neighbourhood_k > n_channels {
            return bad(format!("neighbourhood size {} outside [1, {n_channels}]", self.neighbourhood_k));
        }
        if !(self.band_hz > 0.0) || self.band_hz > sfreq / 2.0 {
            return bad(format!("band width {} Hz outside (0, Nyquist]", self.band_hz));
        }
        if self.n_repeats < 1 || self.time_stride < 1 {
            return bad("repeats and time stride must be at least 1".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PfiAxis {
    Time { times_s: Vec<f64> },
    Channels { labels: Vec<String>, positions: Vec<[f64; 2]>, groups: Vec<Vec<usize>> },
    Bands { bands: Vec<(f64, f64)> },
    /// Row-major `channel × time` grid.
    ChannelTime { labels: Vec<String>, times_s: Vec<f64> },
    /// Row-major `channel × band` grid.
    ChannelBand { labels: Vec<String>, bands: Vec<(f64, f64)> },
}

impl PfiAxis {
    pub fn len(&self) -> usize {
        match self {
            PfiAxis::Time { times_s } => times_s.len(),
            PfiAxis::Channels { labels, .. } => labels.len(),
            PfiAxis::Bands { bands } => bands.len(),
            PfiAxis::ChannelTime { labels, times_s } => labels.len() * times_s.len(),
            PfiAxis::ChannelBand { labels, bands } => labels.len() * bands.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Interval estimator for repeat-wise PFI values.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum CiMethod {
    #[default]
    StudentT,
    /// Percentile bootstrap.
    Bootstrap { n_boot: usize, seed: u64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    /// Baseline accuracy minus accuracy on permuted inputs.
    AccuracyLoss,
    /// Mean absolute change of a kernel's output.
    OutputDeviation,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PfiResult {
    pub metric: Metric,
    pub axis: PfiAxis,
    /// Unperturbed accuracy (0 for output deviations).
    pub baseline: f64,
    /// `[axis point][repeat]`.
    pub values: Vec<Vec<f64>>,
}

impl PfiResult {
    pub fn mean(&self) -> Vec<f64> {
        self.values.iter().map(|v| stats::mean(v)).collect()
    }

    /// Student-t interval over repeats for every axis point (zero width
    /// with a single repeat).
    pub fn ci(&self, level: f64) -> Vec<(f64, f64)> {
        self.intervals(level, CiMethod::StudentT)
    }

    pub fn intervals(&self, level: f64, method: CiMethod) -> Vec<(f64, f64)> {
        self.values
            .iter()
            .enumerate()
            .map(|(i, v)| {
                let m = stats::mean(v);
                if v.len() < 2 {
                    return (m, m);
                }
                let ci = match method {
                    CiMethod::StudentT => stats::confidence_interval(v, level),
                    CiMethod::Bootstrap { n_boot, seed } => {
                        stats::bootstrap_ci(v, level, n_boot, seed.wrapping_add(i as u64))
                    }
                };
                ci.unwrap_or((m, m))
            })
            .collect()
    }

    /// Means z-scored across the axis; all zeros when the means are constant.
    pub fn standardized(&self) -> Vec<f64> {
        let m = self.mean();
        if m.len() < 2 {
            return vec![0.0; m.len()];
        }
        let mu = stats::mean(&m);
        let sd = stats::sample_std(&m);
        if sd == 0.0 {
            return vec![0.0; m.len()];
        }
        m.iter().map(|v| (v - mu) / sd).collect()
    }

    pub fn argmax(&self) -> usize {
        crate::nn::argmax(&self.mean())
    }
}

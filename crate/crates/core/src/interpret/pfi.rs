use serde::{Deserialize, Serialize};

use crate::dataio::{ChannelLayout, EpochedDataset};
use crate::error::{Error, Result};
use crate::experiments::{parallel_map, Example};
use crate::interpret::perturb::{band_bins, Feature, SpectralPlans};
use crate::interpret::{Metric, PfiAxis, PfiConfig, PfiResult};
use crate::nn::{argmax, WavenetClassifier};
use crate::preprocess::FoldSplit;
use crate::seeding;

/// Trials to evaluate plus the recording metadata the axes need.
#[derive(Debug, Clone)]
pub struct EvalSet<'a> {
    pub examples: Vec<Example<'a>>,
    pub n_channels: usize,
    pub n_times: usize,
    pub sfreq: f64,
    pub t_offset: f64,
    pub layout: &'a ChannelLayout,
}

impl<'a> EvalSet<'a> {
    /// Validation trials of `subjects`; `row` maps a dataset subject to the
    /// model's embedding row.
    pub fn validation(
        ds: &'a EpochedDataset,
        fold: &FoldSplit,
        subjects: &[usize],
        row: impl Fn(usize) -> usize,
    ) -> Result<Self> {
        fold.check_against(ds)?;
        let mut examples = Vec::new();
        for &s in subjects {
            if s >= ds.n_subjects() {
                return Err(Error::InvalidArgument(format!("subject index {s} out of range")));
            }
            for (label, idx) in fold.val[s].iter().enumerate() {
                for &i in idx {
                    examples.push(Example {
                        data: ds.trial(s, label, i).data(),
                        row: row(s),
                        label,
                    });
                }
            }
        }
        Ok(Self {
            examples,
            n_channels: ds.n_channels(),
            n_times: ds.n_timesteps(),
            sfreq: ds.sfreq,
            t_offset: ds.t_offset,
            layout: &ds.layout,
        })
    }

    /// Keep every `step`-th trial.
    pub fn thinned(mut self, step: usize) -> Self {
        let step = step.max(1);
        self.examples = self.examples.into_iter().step_by(step).collect();
        self
    }

    fn check(&self, cfg: &PfiConfig) -> Result<()> {
        if self.examples.is_empty() {
            return Err(Error::InvalidArgument("empty evaluation set".into()));
        }
        let len = self.n_channels * self.n_times;
        if self.examples.iter().any(|e| e.data.len() != len) {
            return Err(Error::Shape(format!("evaluation trial is not {}×{}", self.n_channels, self.n_times)));
        }
        cfg.validate(self.n_channels, self.n_times, self.sfreq)
    }
}

/// How channels are grouped for spatial PFI.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Grouping {
    Single,
    /// Each channel with its `neighbourhood_k − 1` nearest neighbours.
    Neighbourhood,
    /// Declared groups of co-located channels, shuffled together.
    Colocated(Vec<Vec<usize>>),
}

impl std::str::FromStr for Grouping {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "single" => Ok(Grouping::Single),
            "neighbourhood" | "neighborhood" => Ok(Grouping::Neighbourhood),
            other => Err(Error::InvalidArgument(format!(
                "unknown grouping '{other}' (expected single or neighbourhood; colocated groups come from a file)"
            ))),
        }
    }
}

/// `(centre, lo, hi)` for window centres `0, stride, …`; each window spans
/// `w` samples around its centre, truncated at the epoch edges.
pub fn time_windows(n_times: usize, w: usize, stride: usize) -> Vec<(usize, usize, usize)> {
    (0..n_times)
        .step_by(stride.max(1))
        .map(|c| {
            let lo = c as isize - (w / 2) as isize;
            let hi = lo + w as isize;
            (c, lo.max(0) as usize, (hi.min(n_times as isize)) as usize)
        })
        .collect()
}

/// Bands `[c − bw/2, c + bw/2)` centred on multiples of `band_hz` up to
/// Nyquist; the first band starts at 0.
pub fn spectral_bands(sfreq: f64, band_hz: f64) -> Vec<(f64, f64)> {
    let nyq = sfreq / 2.0;
    let mut out = Vec::new();
    let mut i = 0usize;
    loop {
        let c = i as f64 * band_hz;
        let lo = (c - band_hz / 2.0).max(0.0);
        if lo >= nyq {
            break;
        }
        out.push((lo, (c + band_hz / 2.0).min(nyq)));
        i += 1;
    }
    out
}

pub(crate) fn group_label(layout: &ChannelLayout, group: &[usize]) -> String {
    group.iter().map(|&c| layout.ids()[c].as_str()).collect::<Vec<_>>().join("+")
}

fn group_position(layout: &ChannelLayout, group: &[usize]) -> [f64; 2] {
    let n = group.len() as f64;
    let mut p = [0.0, 0.0];
    for &c in group {
        p[0] += layout.positions()[c][0] / n;
        p[1] += layout.positions()[c][1] / n;
    }
    p
}

/// Channel groups for `grouping`, with labels and positions; a
/// neighbourhood is labelled by its centre channel.
pub(crate) fn channel_groups(
    layout: &ChannelLayout,
    n_channels: usize,
    grouping: &Grouping,
    k: usize,
) -> Result<(Vec<Vec<usize>>, Vec<String>, Vec<[f64; 2]>)> {
    let (groups, labels): (Vec<Vec<usize>>, Vec<String>) = match grouping {
        Grouping::Single => (0..n_channels).map(|c| (vec![c], layout.ids()[c].clone())).unzip(),
        Grouping::Neighbourhood => (0..n_channels)
            .map(|c| Ok((layout.neighbourhood_indices(c, k)?, layout.ids()[c].clone())))
            .collect::<Result<Vec<_>>>()?
            .into_iter()
            .unzip(),
        Grouping::Colocated(groups) => {
            if groups.is_empty() || groups.iter().any(|g| g.is_empty() || g.iter().any(|&c| c >= n_channels)) {
                return Err(Error::InvalidArgument("co-located groups must be non-empty channel indices".into()));
            }
            (groups.clone(), groups.iter().map(|g| group_label(layout, g)).collect())
        }
    };
    let positions = groups.iter().map(|g| group_position(layout, g)).collect();
    Ok((groups, labels, positions))
}

pub(crate) fn temporal_features(set: &EvalSet, cfg: &PfiConfig) -> (Vec<Feature>, Vec<f64>) {
    let w = cfg.window_samples(set.sfreq);
    time_windows(set.n_times, w, cfg.time_stride)
        .into_iter()
        .map(|(c, lo, hi)| (Feature::ChannelsInWindow { lo, hi }, c as f64 / set.sfreq - set.t_offset))
        .unzip()
}

pub(crate) fn band_features(set: &EvalSet, cfg: &PfiConfig, rows: &[usize]) -> (Vec<Feature>, Vec<(f64, f64)>) {
    spectral_bands(set.sfreq, cfg.band_hz)
        .into_iter()
        .map(|(lo, hi)| {
            let bins = band_bins(set.n_times, set.sfreq, lo, hi);
            (Feature::BinsInRows { rows: rows.to_vec(), bins }, (lo, hi))
        })
        .unzip()
}

/// Per-feature, per-repeat mean of `score` over the evaluation trials. Each
/// (feature, repeat, trial) draws its permutation from its own RNG stream.
pub(crate) fn run_features<S>(set: &EvalSet, features: &[Feature], cfg: &PfiConfig, score: S) -> Result<Vec<Vec<f64>>>
where
    S: Fn(usize, &[f32]) -> Result<f64> + Sync,
{
    let (c, t) = (set.n_channels, set.n_times);
    for f in features {
        f.validate(c, t)?;
    }
    let required = features.len() as u64 * cfg.n_repeats as u64 * set.examples.len() as u64;
    if required > cfg.max_evaluations {
        return Err(Error::Budget {
            required,
            budget: cfg.max_evaluations,
        });
    }
    let plans = features
        .iter()
        .any(|f| matches!(f, Feature::BinsInRows { .. }))
        .then(|| SpectralPlans::new(t));
    let items: Vec<usize> = (0..features.len()).collect();
    parallel_map(items, cfg.jobs, |fi| {
        let mut buf = vec![0.0f32; c * t];
        (0..cfg.n_repeats)
            .map(|r| {
                let mut total = 0.0;
                for (i, ex) in set.examples.iter().enumerate() {
                    buf.copy_from_slice(ex.data);
                    let mut rng = seeding::stream(cfg.seed, &[fi as u64, r as u64, i as u64]);
                    features[fi].apply(&mut buf, c, t, cfg.permutation, &mut rng, plans.as_ref());
                    total += score(i, &buf)?;
                }
                Ok(total / set.examples.len() as f64)
            })
            .collect()
    })
}

fn correct(model: &WavenetClassifier<f32>, ex: &Example, data: &[f32]) -> Result<f64> {
    Ok((argmax(&model.logits(data, ex.row)?) == ex.label) as u8 as f64)
}

fn check_model(model: &WavenetClassifier<f32>, set: &EvalSet) -> Result<()> {
    let cfg = model.config();
    if cfg.n_input_channels != set.n_channels || cfg.n_timesteps != set.n_times {
        return Err(Error::Shape(format!(
            "model expects {}×{} trials, evaluation set has {}×{}",
            cfg.n_input_channels, cfg.n_timesteps, set.n_channels, set.n_times
        )));
    }
    Ok(())
}

fn accuracy_loss(
    model: &WavenetClassifier<f32>,
    set: &EvalSet,
    features: &[Feature],
    cfg: &PfiConfig,
    axis: PfiAxis,
) -> Result<PfiResult> {
    set.check(cfg)?;
    check_model(model, set)?;
    let hits: Vec<f64> = set
        .examples
        .iter()
        .map(|ex| correct(model, ex, ex.data))
        .collect::<Result<_>>()?;
    let baseline = hits.iter().sum::<f64>() / hits.len() as f64;
    let acc = run_features(set, features, cfg, |i, data| correct(model, &set.examples[i], data))?;
    Ok(PfiResult {
        metric: Metric::AccuracyLoss,
        axis,
        baseline,
        values: acc
            .into_iter()
            .map(|reps| reps.into_iter().map(|a| baseline - a).collect())
            .collect(),
    })
}

/// Accuracy loss when the channel order is shuffled inside a window around
/// each time point.
pub fn temporal_pfi(model: &WavenetClassifier<f32>, set: &EvalSet, cfg: &PfiConfig) -> Result<PfiResult> {
    set.check(cfg)?;
    let (features, times_s) = temporal_features(set, cfg);
    accuracy_loss(model, set, &features, cfg, PfiAxis::Time { times_s })
}

/// Accuracy loss when the time samples of each channel group are shuffled.
pub fn spatial_pfi(
    model: &WavenetClassifier<f32>,
    set: &EvalSet,
    cfg: &PfiConfig,
    grouping: &Grouping,
) -> Result<PfiResult> {
    set.check(cfg)?;
    let (groups, labels, positions) = channel_groups(set.layout, set.n_channels, grouping, cfg.neighbourhood_k)?;
    let features: Vec<Feature> = groups
        .iter()
        .map(|g| Feature::TimeInRows {
            rows: g.clone(),
            lo: 0,
            hi: set.n_times,
        })
        .collect();
    accuracy_loss(
        model,
        set,
        &features,
        cfg,
        PfiAxis::Channels {
            labels,
            positions,
            groups,
        },
    )
}

/// Channel neighbourhood × time window grid: time samples are shuffled
/// inside one window of one neighbourhood.
pub fn spatiotemporal_pfi(model: &WavenetClassifier<f32>, set: &EvalSet, cfg: &PfiConfig) -> Result<PfiResult> {
    set.check(cfg)?;
    let (groups, labels, _) = channel_groups(set.layout, set.n_channels, &Grouping::Neighbourhood, cfg.neighbourhood_k)?;
    let w = cfg.window_samples(set.sfreq);
    let windows = time_windows(set.n_times, w, cfg.time_stride);
    let features: Vec<Feature> = groups
        .iter()
        .flat_map(|g| {
            windows.iter().map(|&(_, lo, hi)| Feature::TimeInRows {
                rows: g.clone(),
                lo,
                hi,
            })
        })
        .collect();
    let times_s = windows.iter().map(|&(c, ..)| c as f64 / set.sfreq - set.t_offset).collect();
    accuracy_loss(model, set, &features, cfg, PfiAxis::ChannelTime { labels, times_s })
}

/// Accuracy loss when the Fourier coefficients inside each band are shuffled
/// on every channel.
pub fn spectral_pfi(model: &WavenetClassifier<f32>, set: &EvalSet, cfg: &PfiConfig) -> Result<PfiResult> {
    set.check(cfg)?;
    let rows: Vec<usize> = (0..set.n_channels).collect();
    let (features, bands) = band_features(set, cfg, &rows);
    accuracy_loss(model, set, &features, cfg, PfiAxis::Bands { bands })
}

/// Channel neighbourhood × band grid.
pub fn spatiospectral_pfi(model: &WavenetClassifier<f32>, set: &EvalSet, cfg: &PfiConfig) -> Result<PfiResult> {
    set.check(cfg)?;
    let (groups, labels, _) = channel_groups(set.layout, set.n_channels, &Grouping::Neighbourhood, cfg.neighbourhood_k)?;
    let bands = spectral_bands(set.sfreq, cfg.band_hz);
    let features: Vec<Feature> = groups
        .iter()
        .flat_map(|g| band_features(set, cfg, g).0)
        .collect();
    accuracy_loss(model, set, &features, cfg, PfiAxis::ChannelBand { labels, bands })
}

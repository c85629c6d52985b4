use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::dataio::{EpochedDataset, Trial};
use crate::error::{Error, Result};
use crate::preprocess::FoldSplit;

/// Eigenvalues below this fraction of the largest are treated as zero.
const RANK_TOLERANCE: f64 = 1e-10;

/// Full-rank PCA whitening: `y = W (x - mean)` with `W = Λ^{-1/2} Uᵀ`.
///
/// Rows of `matrix` are the principal axes (descending variance), each scaled
/// by the inverse square root of its eigenvalue; all components are kept.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WhiteningTransform {
    pub n_channels: usize,
    pub mean: Vec<f64>,
    /// `n_channels × n_channels`, row-major.
    pub matrix: Vec<f64>,
}

/// Population channel covariance of `trials` (pooled over time), row-major.
pub fn channel_covariance(trials: &[&Trial], mean: &[f64]) -> Vec<f64> {
    let c = mean.len();
    let mut cov = vec![0.0; c * c];
    let mut count = 0usize;
    let mut centered = vec![0.0; c];
    for tr in trials {
        for t in 0..tr.n_times() {
            for ch in 0..c {
                centered[ch] = tr.get(ch, t) as f64 - mean[ch];
            }
            for i in 0..c {
                let xi = centered[i];
                for j in i..c {
                    cov[i * c + j] += xi * centered[j];
                }
            }
        }
        count += tr.n_times();
    }
    for i in 0..c {
        for j in i..c {
            let v = cov[i * c + j] / count as f64;
            cov[i * c + j] = v;
            cov[j * c + i] = v;
        }
    }
    cov
}

pub fn fit_whitening(trials: &[&Trial]) -> Result<WhiteningTransform> {
    let first = trials
        .first()
        .ok_or_else(|| Error::TooFewSamples("no trials to fit whitening".into()))?;
    let c = first.n_channels();
    let n_samples: usize = trials.iter().map(|t| t.n_times()).sum();
    if n_samples < c + 1 {
        return Err(Error::TooFewSamples(format!(
            "{n_samples} pooled samples for {c} channels"
        )));
    }
    let mut mean = vec![0.0; c];
    for tr in trials {
        for (ch, m) in mean.iter_mut().enumerate() {
            *m += tr.row(ch).iter().map(|&v| v as f64).sum::<f64>();
        }
    }
    mean.iter_mut().for_each(|m| *m /= n_samples as f64);
    let cov = channel_covariance(trials, &mean);
    let eig = SymmetricEigen::new(DMatrix::from_row_slice(c, c, &cov));
    let mut order: Vec<usize> = (0..c).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let largest = eig.eigenvalues[order[0]];
    let smallest = eig.eigenvalues[order[c - 1]];
    if !(largest > 0.0) || smallest <= RANK_TOLERANCE * largest {
        return Err(Error::RankDeficient {
            subject: String::new(),
            min_eigenvalue: smallest,
        });
    }
    let mut matrix = vec![0.0; c * c];
    for (row, &k) in order.iter().enumerate() {
        let scale = eig.eigenvalues[k].sqrt().recip();
        for ch in 0..c {
            matrix[row * c + ch] = eig.eigenvectors[(ch, k)] * scale;
        }
    }
    Ok(WhiteningTransform {
        n_channels: c,
        mean,
        matrix,
    })
}

impl WhiteningTransform {
    pub fn apply(&self, trial: &Trial) -> Result<Trial> {
        let c = self.n_channels;
        if trial.n_channels() != c {
            return Err(Error::Shape(format!(
                "whitening fitted on {c} channels, trial has {}",
                trial.n_channels()
            )));
        }
        let t = trial.n_times();
        let mut out = vec![0.0f32; c * t];
        let mut centered = vec![0.0; c];
        for tt in 0..t {
            for ch in 0..c {
                centered[ch] = trial.get(ch, tt) as f64 - self.mean[ch];
            }
            for row in 0..c {
                let w = &self.matrix[row * c..(row + 1) * c];
                out[row * t + tt] = w.iter().zip(&centered).map(|(a, b)| a * b).sum::<f64>() as f32;
            }
        }
        Trial::new(c, t, out)
    }
}

pub fn apply_whitening(transform: &WhiteningTransform, trials: &[Trial]) -> Result<Vec<Trial>> {
    trials.iter().map(|t| transform.apply(t)).collect()
}

/// Fit one whitening transform per subject on the training trials of `split`
/// and apply it to all of that subject's trials.
pub fn whiten_subjects(
    ds: &EpochedDataset,
    split: &FoldSplit,
) -> Result<(EpochedDataset, Vec<WhiteningTransform>)> {
    split.check_against(ds)?;
    let mut out = ds.clone();
    let mut transforms = Vec::with_capacity(ds.n_subjects());
    for s in 0..ds.n_subjects() {
        let fit_on: Vec<&Trial> = (0..ds.n_classes)
            .flat_map(|k| split.train[s][k].iter().map(move |&i| ds.trial(s, k, i)))
            .collect();
        let w = fit_whitening(&fit_on).map_err(|e| match e {
            Error::RankDeficient { min_eigenvalue, .. } => Error::RankDeficient {
                subject: ds.subjects[s].clone(),
                min_eigenvalue,
            },
            other => other,
        })?;
        for trials in out.subject_trials_mut(s) {
            for tr in trials.iter_mut() {
                *tr = w.apply(tr)?;
            }
        }
        transforms.push(w);
    }
    Ok((out, transforms))
}

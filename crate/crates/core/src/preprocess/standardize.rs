use serde::{Deserialize, Serialize};

use crate::dataio::{EpochedDataset, Trial};
use crate::error::{Error, Result};
use crate::preprocess::FoldSplit;

/// Per-channel mean and standard deviation of one subject.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelStats {
    pub subject: String,
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

/// Population mean and standard deviation per channel over the concatenated
/// time courses of `trials`. Returns `(mean, std)`.
pub fn channel_stats(trials: &[&Trial]) -> Result<(Vec<f64>, Vec<f64>)> {
    let first = trials
        .first()
        .ok_or_else(|| Error::TooFewSamples("no trials to fit channel statistics".into()))?;
    let c = first.n_channels();
    let mut mean = vec![0.0; c];
    let mut m2 = vec![0.0; c];
    let mut count = 0usize;
    for tr in trials {
        for ch in 0..c {
            mean[ch] += tr.row(ch).iter().map(|&v| v as f64).sum::<f64>();
        }
        count += tr.n_times();
    }
    mean.iter_mut().for_each(|m| *m /= count as f64);
    for tr in trials {
        for ch in 0..c {
            m2[ch] += tr
                .row(ch)
                .iter()
                .map(|&v| (v as f64 - mean[ch]).powi(2))
                .sum::<f64>();
        }
    }
    let std = m2.into_iter().map(|v| (v / count as f64).sqrt()).collect();
    Ok((mean, std))
}

/// Per-subject channel statistics, fitted on one split and applied anywhere.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub subjects: Vec<ChannelStats>,
}

impl Standardizer {
    /// Fit on the training trials of `split`.
    pub fn fit(ds: &EpochedDataset, split: &FoldSplit) -> Result<Self> {
        split.check_against(ds)?;
        let mut subjects = Vec::with_capacity(ds.n_subjects());
        for s in 0..ds.n_subjects() {
            let trials: Vec<&Trial> = (0..ds.n_classes)
                .flat_map(|k| split.train[s][k].iter().map(move |&i| ds.trial(s, k, i)))
                .collect();
            let (mean, std) = channel_stats(&trials)?;
            if let Some(ch) = std.iter().position(|&v| !(v > 1e-12)) {
                return Err(Error::ZeroVariance {
                    subject: ds.subjects[s].clone(),
                    channel: ds.layout.ids()[ch].clone(),
                });
            }
            subjects.push(ChannelStats {
                subject: ds.subjects[s].clone(),
                mean,
                std,
            });
        }
        Ok(Self { subjects })
    }

    pub fn apply(&self, ds: &EpochedDataset) -> Result<EpochedDataset> {
        let mut out = ds.clone();
        for s in 0..ds.n_subjects() {
            let stats = self
                .subjects
                .iter()
                .find(|st| st.subject == ds.subjects[s])
                .ok_or_else(|| {
                    Error::InvalidArgument(format!("no statistics for subject {}", ds.subjects[s]))
                })?;
            if stats.mean.len() != ds.n_channels() {
                return Err(Error::Shape("standardizer channel count mismatch".into()));
            }
            for trials in out.subject_trials_mut(s) {
                for tr in trials.iter_mut() {
                    for ch in 0..stats.mean.len() {
                        let (m, sd) = (stats.mean[ch], stats.std[ch]);
                        for v in tr.row_mut(ch) {
                            *v = ((*v as f64 - m) / sd) as f32;
                        }
                    }
                }
            }
        }
        Ok(out)
    }
}

/// Standardise every channel of every subject with statistics from the
/// training trials of `split`; validation trials reuse those statistics.
pub fn standardize_channels(
    ds: &EpochedDataset,
    split: &FoldSplit,
) -> Result<(EpochedDataset, Standardizer)> {
    let st = Standardizer::fit(ds, split)?;
    Ok((st.apply(ds)?, st))
}

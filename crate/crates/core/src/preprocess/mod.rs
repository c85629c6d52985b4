//! Channel standardisation, per-subject PCA whitening and stratified splits.

mod splits;
mod standardize;
mod whitening;

use serde::{Deserialize, Serialize};

pub use splits::{make_splits, FoldSplit, SplitMode, SplitPlan};
pub use standardize::{channel_stats, standardize_channels, ChannelStats, Standardizer};
pub use whitening::{apply_whitening, channel_covariance, fit_whitening, whiten_subjects, WhiteningTransform};

/// Preprocessing applied before training.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Preprocessing {
    None,
    /// Per-channel z-scoring (group-level default).
    #[default]
    Standardize,
    /// Per-subject full-rank PCA whitening (subject-level default).
    Whiten,
}

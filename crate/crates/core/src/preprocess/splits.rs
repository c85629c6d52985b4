use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::dataio::EpochedDataset;
use crate::error::{Error, Result};
use crate::seeding;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SplitMode {
    /// One train/validation split with the given `train:val` ratio.
    Holdout { train: usize, val: usize },
    /// `k` folds; every trial is validated exactly once.
    KFold(usize),
}

impl Default for SplitMode {
    fn default() -> Self {
        SplitMode::Holdout { train: 4, val: 1 }
    }
}

/// Trial indices of one fold, indexed `[subject][class]`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FoldSplit {
    pub fold_id: usize,
    pub train: Vec<Vec<Vec<usize>>>,
    pub val: Vec<Vec<Vec<usize>>>,
}

impl FoldSplit {
    pub fn n_subjects(&self) -> usize {
        self.train.len()
    }

    pub fn n_train(&self, subject: usize) -> usize {
        self.train[subject].iter().map(Vec::len).sum()
    }

    pub fn n_val(&self, subject: usize) -> usize {
        self.val[subject].iter().map(Vec::len).sum()
    }

    /// Copy with each (subject, class) training list cut to its first
    /// `round(ratio · len)` entries; validation is untouched.
    pub fn with_train_fraction(&self, subject: usize, ratio: f64) -> Result<FoldSplit> {
        if !(0.0..=1.0).contains(&ratio) {
            return Err(Error::InvalidArgument(format!("training ratio {ratio} outside [0, 1]")));
        }
        let mut out = self.clone();
        for idx in out.train[subject].iter_mut() {
            let keep = (ratio * idx.len() as f64).round() as usize;
            idx.truncate(keep);
        }
        Ok(out)
    }

    /// Check that the fold is consistent with `ds`.
    pub fn check_against(&self, ds: &EpochedDataset) -> Result<()> {
        if self.train.len() != ds.n_subjects() || self.val.len() != ds.n_subjects() {
            return Err(Error::Split(format!(
                "split covers {} subjects, dataset has {}",
                self.train.len(),
                ds.n_subjects()
            )));
        }
        for s in 0..ds.n_subjects() {
            if self.train[s].len() != ds.n_classes || self.val[s].len() != ds.n_classes {
                return Err(Error::Split(format!("subject {s}: class count mismatch")));
            }
            for k in 0..ds.n_classes {
                for &i in self.train[s][k].iter().chain(&self.val[s][k]) {
                    if i >= ds.trials_per_class() {
                        return Err(Error::Split(format!(
                            "trial index {i} out of range for subject {s} class {k}"
                        )));
                    }
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitPlan {
    pub mode: SplitMode,
    pub seed: u64,
    pub folds: Vec<FoldSplit>,
}

impl SplitPlan {
    /// The single fold of a holdout plan (or the first fold of a k-fold plan).
    pub fn holdout(&self) -> &FoldSplit {
        &self.folds[0]
    }
}

/// Stratified per-(subject, class) splits, deterministic in `seed`.
pub fn make_splits(ds: &EpochedDataset, mode: SplitMode, seed: u64) -> Result<SplitPlan> {
    let n = ds.trials_per_class();
    let (n_s, n_c) = (ds.n_subjects(), ds.n_classes);
    let shuffled: Vec<Vec<Vec<usize>>> = (0..n_s)
        .map(|s| {
            (0..n_c)
                .map(|c| {
                    let mut idx: Vec<usize> = (0..n).collect();
                    idx.shuffle(&mut seeding::stream(seed, &[s as u64, c as u64]));
                    idx
                })
                .collect()
        })
        .collect();

    let folds = match mode {
        SplitMode::Holdout { train, val } => {
            if train == 0 || val == 0 {
                return Err(Error::Split(format!("degenerate ratio {train}:{val}")));
            }
            if !n.is_multiple_of(train + val) {
                return Err(Error::Split(format!(
                    "{n} trials per class cannot be split {train}:{val}"
                )));
            }
            let n_train = n / (train + val) * train;
            let fold = FoldSplit {
                fold_id: 0,
                train: map_cells(&shuffled, |idx| idx[..n_train].to_vec()),
                val: map_cells(&shuffled, |idx| idx[n_train..].to_vec()),
            };
            vec![fold]
        }
        SplitMode::KFold(k) => {
            if k < 2 {
                return Err(Error::Split(format!("k-fold needs k >= 2, got {k}")));
            }
            if n < k {
                return Err(Error::Split(format!(
                    "{n} trials per class is fewer than {k} folds"
                )));
            }
            (0..k)
                .map(|f| {
                    let (lo, hi) = (f * n / k, (f + 1) * n / k);
                    FoldSplit {
                        fold_id: f,
                        train: map_cells(&shuffled, |idx| {
                            idx[..lo].iter().chain(&idx[hi..]).copied().collect()
                        }),
                        val: map_cells(&shuffled, |idx| idx[lo..hi].to_vec()),
                    }
                })
                .collect()
        }
    };
    Ok(SplitPlan { mode, seed, folds })
}

fn map_cells(
    cells: &[Vec<Vec<usize>>],
    f: impl Fn(&[usize]) -> Vec<usize>,
) -> Vec<Vec<Vec<usize>>> {
    cells
        .iter()
        .map(|by_class| by_class.iter().map(|idx| f(idx)).collect())
        .collect()
}

//! Training protocols: subject-level, naive group and embedding-aided group
//! models, finetuning, leave-one-subject-out sweeps, sub-group scaling,
//! k-fold cross-validation and embedding ablations.

mod protocols;
mod report;
mod train;

use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::dataio::EpochedDataset;
use crate::error::{Error, Result};
use crate::nn::{Activation, ModelConfig};
use crate::preprocess::Preprocessing;

pub use protocols::{
    embedding_ablation, finetune, kfold_cv, loso_run, subgroup_scaling, AblationMode,
    AblationResult, KfoldResult, LosoCurve, LosoVariant, SubgroupCurve,
};
pub use report::{read_report, write_report, write_subject_csv};
pub use train::{
    evaluate_subject, fit, parallel_map, prepare, train, train_on, EmbeddingSource, Example,
    TrainOutcome,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TrainMode {
    /// One model per subject.
    Subject,
    /// One shared model on pooled trials.
    Group,
    /// Shared model with a learned embedding per subject.
    GroupEmb,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Init {
    #[default]
    Fresh,
    FromCheckpoint(PathBuf),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainSpec {
    pub mode: TrainMode,
    /// Identity activations everywhere.
    pub linear: bool,
    pub epochs: usize,
    pub lr: f64,
    pub batch_size: usize,
    pub seed: u64,
    pub init: Init,
    pub preprocessing: Preprocessing,
    /// Architecture template; data-dependent sizes are filled in from the
    /// dataset.
    pub model: ModelConfig,
    /// Evaluate the validation split every this many epochs (0: final only).
    pub eval_every: usize,
    /// Worker threads for independent runs.
    pub jobs: usize,
}

impl TrainSpec {
    /// Hyperparameters of the original experiments.
    pub fn paper(mode: TrainMode, linear: bool) -> Self {
        let subject = mode == TrainMode::Subject;
        Self {
            mode,
            linear,
            epochs: if linear { 500 } else { 2000 },
            lr: if subject { 5e-5 } else { 1e-4 },
            batch_size: if subject { 59 } else { 590 },
            seed: 0,
            init: Init::Fresh,
            preprocessing: if subject {
                Preprocessing::Whiten
            } else {
                Preprocessing::Standardize
            },
            model: ModelConfig {
                n_conv_layers: if subject { 3 } else { 6 },
                dropout: if subject { 0.7 } else { 0.4 },
                embedding_size: if mode == TrainMode::GroupEmb { 10 } else { 0 },
                ..ModelConfig::default()
            },
            eval_every: 1,
            jobs: 1,
        }
    }

    /// Reduced widths and budgets for desk-scale synthetic runs.
    pub fn desk(mode: TrainMode, linear: bool) -> Self {
        let subject = mode == TrainMode::Subject;
        let paper = Self::paper(mode, linear);
        Self {
            epochs: if linear { 200 } else { 600 },
            lr: if subject { 5e-4 } else { 1e-3 },
            batch_size: if subject { 16 } else { 64 },
            model: ModelConfig {
                hidden_channels: 16,
                fc_hidden: 64,
                ..paper.model
            },
            eval_every: 10,
            ..paper
        }
    }

    /// Model config for `ds`: channel, class, time and subject counts come
    /// from the data; `linear` switches every activation to the identity.
    pub fn model_config(&self, ds: &EpochedDataset) -> ModelConfig {
        let mut cfg = self.model.clone();
        cfg.n_input_channels = ds.n_channels();
        cfg.n_classes = ds.n_classes;
        cfg.n_timesteps = ds.n_timesteps();
        match self.mode {
            TrainMode::Subject => {
                cfg.n_subjects = 1;
                cfg.embedding_size = 0;
            }
            TrainMode::Group => {
                cfg.n_subjects = ds.n_subjects();
                cfg.embedding_size = 0;
            }
            TrainMode::GroupEmb => cfg.n_subjects = ds.n_subjects(),
        }
        if self.linear {
            cfg.activation = Activation::Identity;
            cfg.activation_mask = None;
        }
        cfg
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidArgument(format!("train spec: {m}")));
        if self.batch_size == 0 {
            return bad("batch size must be positive");
        }
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return bad("learning rate must be positive");
        }
        if self.mode == TrainMode::GroupEmb && self.model.embedding_size == 0 {
            return bad("group_emb needs embedding_size > 0");
        }
        Ok(())
    }

    /// Hex SHA-256 of the canonical JSON of this spec. The thread count
    /// does not change results and is left out.
    pub fn hash(&self) -> String {
        config_hash(&self.without_jobs())
    }

    pub(crate) fn without_jobs(&self) -> Self {
        Self { jobs: 1, ..self.clone() }
    }
}

/// Hex SHA-256 of the JSON serialisation of `value`.
pub fn config_hash<T: Serialize>(value: &T) -> String {
    let json = serde_json::to_vec(value).expect("serializable config");
    Sha256::digest(&json).iter().map(|b| format!("{b:02x}")).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubjectResult {
    pub subject: String,
    pub accuracy: f64,
    pub labels: Vec<usize>,
    pub predictions: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct TrainingCurve {
    pub label: String,
    /// Mean minibatch loss of every epoch.
    pub train_loss: Vec<f64>,
    /// Epochs (1-based) at which the validation split was evaluated.
    pub eval_epochs: Vec<usize>,
    pub val_loss: Vec<f64>,
    pub val_accuracy: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub experiment: String,
    pub seed: u64,
    pub config_hash: String,
    pub subjects: Vec<SubjectResult>,
    pub mean_accuracy: f64,
    pub curves: Vec<TrainingCurve>,
    pub stats: Vec<crate::stats::StatsBlock>,
}

impl ExperimentReport {
    pub fn new(experiment: &str, seed: u64, config_hash: String, subjects: Vec<SubjectResult>) -> Self {
        let mean_accuracy = if subjects.is_empty() {
            0.0
        } else {
            subjects.iter().map(|s| s.accuracy).sum::<f64>() / subjects.len() as f64
        };
        Self {
            experiment: experiment.into(),
            seed,
            config_hash,
            subjects,
            mean_accuracy,
            curves: Vec::new(),
            stats: Vec::new(),
        }
    }

    pub fn accuracies(&self) -> Vec<f64> {
        self.subjects.iter().map(|s| s.accuracy).collect()
    }

    pub fn subject(&self, id: &str) -> Option<&SubjectResult> {
        self.subjects.iter().find(|s| s.subject == id)
    }
}

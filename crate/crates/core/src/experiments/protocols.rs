use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::dataio::EpochedDataset;
use crate::error::{Error, Result};
use crate::experiments::train::collect_examples;
use crate::experiments::{
    evaluate_subject, fit, parallel_map, prepare, train_on, EmbeddingSource, SubjectResult,
    TrainMode, TrainSpec, TrainingCurve,
};
use crate::nn::WavenetClassifier;
use crate::preprocess::{make_splits, FoldSplit, SplitMode};
use crate::seeding;
use crate::stats::{self, Sided, WilcoxonResult};

// RNG stream tags
const FRESH_ROW: u64 = 10;
const ORDERING: u64 = 11;
const SHUFFLE_ROWS: u64 = 12;
const SCRATCH_INIT: u64 = 13;
const FINETUNE: u64 = 1 << 20;

fn check_compatible(model: &WavenetClassifier<f32>, ds: &EpochedDataset) -> Result<()> {
    let cfg = model.config();
    if cfg.n_input_channels != ds.n_channels()
        || cfg.n_timesteps != ds.n_timesteps()
        || cfg.n_classes != ds.n_classes
    {
        return Err(Error::ConfigMismatch(format!(
            "model expects {}×{} trials with {} classes, dataset has {}×{} with {}",
            cfg.n_input_channels,
            cfg.n_timesteps,
            cfg.n_classes,
            ds.n_channels(),
            ds.n_timesteps(),
            ds.n_classes
        )));
    }
    Ok(())
}

/// Continue training `base` on the training split of one subject.
///
/// With `fresh_embedding` the subject's embedding row is redrawn (and the
/// table grown if the subject is beyond it); otherwise a subject missing
/// from the table is an error.
pub fn finetune(
    base: &WavenetClassifier<f32>,
    ds: &EpochedDataset,
    split: &FoldSplit,
    subject: usize,
    spec: &TrainSpec,
    fresh_embedding: bool,
) -> Result<(WavenetClassifier<f32>, SubjectResult, TrainingCurve)> {
    check_compatible(base, ds)?;
    split.check_against(ds)?;
    let mut model = base.clone();
    if model.config().embedding_size > 0 {
        let mut rng = seeding::stream(spec.seed, &[FRESH_ROW, subject as u64]);
        if subject >= model.config().n_subjects {
            if !fresh_embedding {
                return Err(Error::InvalidArgument(format!(
                    "subject {} is absent from the embedding table ({} rows) and no fresh row was requested",
                    ds.subjects[subject],
                    model.config().n_subjects
                )));
            }
            model.extend_subjects(subject + 1, &mut rng)?;
        } else if fresh_embedding {
            model.reset_embedding_row(subject, &mut rng)?;
        }
    }
    let train = collect_examples(ds, &split.train, subject, subject);
    let val = collect_examples(ds, &split.val, subject, subject);
    let curve = fit(
        &mut model,
        &train,
        &val,
        spec,
        FINETUNE + subject as u64,
        &format!("finetune {}", ds.subjects[subject]),
    )?;
    let result = evaluate_subject(&model, ds, split, subject, &EmbeddingSource::Row(subject))?;
    Ok((model, result, curve))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LosoVariant {
    Group,
    GroupEmb,
    SubjectScratch,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LosoCurve {
    pub variant: LosoVariant,
    pub subject: String,
    pub ratios: Vec<f64>,
    pub accuracies: Vec<f64>,
    /// Batch size actually used at each ratio (capped by the trial count).
    pub batch_sizes: Vec<usize>,
    /// Validation accuracy of the pre-trained group model on the other
    /// subjects (group variants only).
    pub pretrain_accuracy: Option<f64>,
}

/// Leave `left_out` out of group pre-training, then adapt to growing
/// fractions of its training split. Ratio 0 is zero-shot for the group
/// variants and an untrained model for `SubjectScratch`. Every point is
/// evaluated on the full validation split of the left-out subject.
pub fn loso_run(
    ds: &EpochedDataset,
    split: &FoldSplit,
    left_out: usize,
    ratios: &[f64],
    variant: LosoVariant,
    pretrain: &TrainSpec,
    tune: &TrainSpec,
) -> Result<LosoCurve> {
    if ds.n_subjects() < 2 {
        return Err(Error::InvalidArgument("leave-one-subject-out needs at least 2 subjects".into()));
    }
    if left_out >= ds.n_subjects() {
        return Err(Error::InvalidArgument(format!("subject index {left_out} out of range")));
    }
    if let Some(r) = ratios.iter().find(|r| !(0.0..=1.0).contains(*r)) {
        return Err(Error::InvalidArgument(format!("training ratio {r} outside [0, 1]")));
    }
    let prepared = prepare(ds, split, pretrain.preprocessing)?;
    let mut curve = LosoCurve {
        variant,
        subject: ds.subjects[left_out].clone(),
        ratios: ratios.to_vec(),
        accuracies: Vec::new(),
        batch_sizes: Vec::new(),
        pretrain_accuracy: None,
    };

    let base = match variant {
        LosoVariant::SubjectScratch => None,
        LosoVariant::Group | LosoVariant::GroupEmb => {
            let mut spec = pretrain.clone();
            spec.mode = if variant == LosoVariant::Group {
                TrainMode::Group
            } else {
                TrainMode::GroupEmb
            };
            let others: Vec<usize> = (0..ds.n_subjects()).filter(|&s| s != left_out).collect();
            let outcome = train_on(&prepared, split, &spec, &others)?;
            curve.pretrain_accuracy = Some(outcome.report.mean_accuracy);
            outcome.models.into_iter().next()
        }
    };

    for &ratio in ratios {
        let fold = split.with_train_fraction(left_out, ratio)?;
        let n_train = fold.n_train(left_out);
        let mut spec = tune.clone();
        spec.batch_size = spec.batch_size.min(n_train.max(1));
        if n_train == 0 {
            spec.epochs = 0;
        }
        let acc = match &base {
            Some(model) => {
                let fresh = variant == LosoVariant::GroupEmb;
                finetune(model, &prepared, &fold, left_out, &spec, fresh)?.1.accuracy
            }
            None => {
                spec.mode = TrainMode::Subject;
                let cfg = spec.model_config(&prepared);
                let mut rng = seeding::stream(spec.seed, &[SCRATCH_INIT, left_out as u64]);
                let mut model = WavenetClassifier::new(cfg, &mut rng)?;
                let train = collect_examples(&prepared, &fold.train, left_out, 0);
                let val = collect_examples(&prepared, &fold.val, left_out, 0);
                fit(&mut model, &train, &val, &spec, left_out as u64, "scratch")?;
                evaluate_subject(&model, &prepared, &fold, left_out, &EmbeddingSource::Row(0))?.accuracy
            }
        };
        curve.accuracies.push(acc);
        curve.batch_sizes.push(spec.batch_size);
    }
    Ok(curve)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubgroupCurve {
    /// Subject order; the model at size `n` is trained on the first `n`.
    pub ordering: Vec<usize>,
    pub sizes: Vec<usize>,
    /// Mean over all subjects, untrained subjects counted at chance.
    pub all_subjects: Vec<f64>,
    /// Mean over the trained subjects only.
    pub trained_subjects: Vec<f64>,
    /// `[size][subject]` accuracy, `None` for untrained subjects.
    pub per_subject: Vec<Vec<Option<f64>>>,
}

/// Train `spec` on growing prefixes of a seeded subject ordering.
pub fn subgroup_scaling(
    ds: &EpochedDataset,
    split: &FoldSplit,
    spec: &TrainSpec,
    ordering_seed: u64,
    sizes: &[usize],
) -> Result<SubgroupCurve> {
    let n_s = ds.n_subjects();
    if let Some(&n) = sizes.iter().find(|&&n| n == 0 || n > n_s) {
        return Err(Error::InvalidArgument(format!("sub-group size {n} outside [1, {n_s}]")));
    }
    let prepared = prepare(ds, split, spec.preprocessing)?;
    let mut ordering: Vec<usize> = (0..n_s).collect();
    ordering.shuffle(&mut seeding::stream(ordering_seed, &[ORDERING]));
    let chance = 1.0 / ds.n_classes as f64;
    let mut inner = spec.clone();
    inner.jobs = 1;
    let runs = parallel_map(sizes.to_vec(), spec.jobs, |n| {
        let outcome = train_on(&prepared, split, &inner, &ordering[..n])?;
        let mut row = vec![None; n_s];
        for r in &outcome.report.subjects {
            let s = ds.subject_index(&r.subject).expect("evaluated subject exists");
            row[s] = Some(r.accuracy);
        }
        Ok(row)
    })?;
    let mut curve = SubgroupCurve {
        ordering: ordering.clone(),
        sizes: sizes.to_vec(),
        all_subjects: Vec::new(),
        trained_subjects: Vec::new(),
        per_subject: Vec::new(),
    };
    for (row, &n) in runs.into_iter().zip(sizes) {
        let trained: Vec<f64> = row.iter().flatten().copied().collect();
        let sum: f64 = trained.iter().sum();
        curve.trained_subjects.push(sum / n as f64);
        curve.all_subjects.push((sum + (n_s - n) as f64 * chance) / n_s as f64);
        curve.per_subject.push(row);
    }
    Ok(curve)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KfoldResult {
    pub k: usize,
    /// Mean validation accuracy over subjects, per fold.
    pub fold_accuracies: Vec<f64>,
    pub mean: f64,
    /// 95% Student-t interval of the fold accuracies.
    pub ci: (f64, f64),
}

pub fn kfold_cv(ds: &EpochedDataset, spec: &TrainSpec, k: usize, split_seed: u64) -> Result<KfoldResult> {
    let plan = make_splits(ds, SplitMode::KFold(k), split_seed)?;
    let all: Vec<usize> = (0..ds.n_subjects()).collect();
    let mut inner = spec.clone();
    inner.jobs = 1;
    let fold_accuracies = parallel_map(plan.folds.iter().collect(), spec.jobs, |fold| {
        let prepared = prepare(ds, fold, inner.preprocessing)?;
        Ok(train_on(&prepared, fold, &inner, &all)?.report.mean_accuracy)
    })?;
    Ok(KfoldResult {
        k,
        mean: stats::mean(&fold_accuracies),
        ci: stats::confidence_interval(&fold_accuracies, 0.95)?,
        fold_accuracies,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AblationMode {
    /// Every embedding replaced by zeros.
    Zero,
    /// Subjects receive another subject's row (a random derangement).
    Shuffle { seed: u64 },
    /// Subject `subjects[i]` receives row `rows[i]`.
    Permutation(Vec<usize>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationResult {
    pub mode: AblationMode,
    pub subjects: Vec<String>,
    pub intact: Vec<f64>,
    pub ablated: Vec<f64>,
    /// Mean of `intact − ablated`.
    pub mean_drop: f64,
    /// One-sided signed-rank test of `intact > ablated`; `None` when every
    /// difference is zero.
    pub test: Option<WilcoxonResult>,
}

fn derangement(n: usize, rng: &mut impl rand::Rng) -> Vec<usize> {
    let mut p: Vec<usize> = (0..n).collect();
    if n < 2 {
        return p;
    }
    loop {
        p.shuffle(rng);
        if p.iter().enumerate().all(|(i, &v)| i != v) {
            return p;
        }
    }
}

/// Evaluate `model` on the preprocessed `ds` with intact and with ablated
/// subject embeddings.
pub fn embedding_ablation(
    model: &WavenetClassifier<f32>,
    ds: &EpochedDataset,
    split: &FoldSplit,
    subjects: &[usize],
    mode: &AblationMode,
) -> Result<AblationResult> {
    let e = model.config().embedding_size;
    if e == 0 {
        return Err(Error::InvalidArgument("embedding ablation needs a model with embeddings".into()));
    }
    check_compatible(model, ds)?;
    let rows: Vec<usize> = match mode {
        AblationMode::Zero => subjects.to_vec(),
        AblationMode::Shuffle { seed } => {
            let p = derangement(subjects.len(), &mut seeding::stream(*seed, &[SHUFFLE_ROWS]));
            p.into_iter().map(|i| subjects[i]).collect()
        }
        AblationMode::Permutation(rows) => {
            if rows.len() != subjects.len() {
                return Err(Error::Shape("permutation length differs from subject count".into()));
            }
            rows.clone()
        }
    };
    let mut intact = Vec::new();
    let mut ablated = Vec::new();
    for (&s, &row) in subjects.iter().zip(&rows) {
        intact.push(evaluate_subject(model, ds, split, s, &EmbeddingSource::Row(s))?.accuracy);
        let source = match mode {
            AblationMode::Zero => EmbeddingSource::Vector(vec![0.0; e]),
            _ => EmbeddingSource::Vector(model.embedding_row(row)?.to_vec()),
        };
        ablated.push(evaluate_subject(model, ds, split, s, &source)?.accuracy);
    }
    let test = match stats::wilcoxon_signed_rank(&intact, &ablated, Sided::Greater) {
        Ok(t) => Some(t),
        Err(Error::TestUndefined(_)) => None,
        Err(e) => return Err(e),
    };
    let drops: Vec<f64> = intact.iter().zip(&ablated).map(|(a, b)| a - b).collect();
    Ok(AblationResult {
        mode: mode.clone(),
        subjects: subjects.iter().map(|&s| ds.subjects[s].clone()).collect(),
        mean_drop: stats::mean(&drops),
        intact,
        ablated,
        test,
    })
}

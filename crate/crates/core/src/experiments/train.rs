use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use rand::seq::SliceRandom;

use crate::dataio::EpochedDataset;
use crate::error::{Error, Result};
use crate::experiments::{
    config_hash, ExperimentReport, Init, SubjectResult, TrainMode, TrainSpec, TrainingCurve,
};
use crate::nn::{adam_step, argmax, cross_entropy, load_checkpoint, AdamConfig, AdamState, WavenetClassifier};
use crate::preprocess::{whiten_subjects, FoldSplit, Preprocessing, Standardizer};
use crate::seeding;

// RNG stream tags
const INIT: u64 = 1;
const SHUFFLE: u64 = 2;
const DROPOUT: u64 = 3;

/// One training or evaluation trial; `row` selects the embedding row.
#[derive(Debug, Clone, Copy)]
pub struct Example<'a> {
    pub data: &'a [f32],
    pub row: usize,
    pub label: usize,
}

/// Where the embedding of an evaluated subject comes from.
#[derive(Debug, Clone, PartialEq)]
pub enum EmbeddingSource {
    Row(usize),
    Vector(Vec<f32>),
}

pub struct TrainOutcome {
    /// One model for group modes, one per trained subject otherwise.
    pub models: Vec<WavenetClassifier<f32>>,
    pub report: ExperimentReport,
}

/// Fit the chosen preprocessing on the training trials of `fold` and apply
/// it to every trial.
pub fn prepare(ds: &EpochedDataset, fold: &FoldSplit, preprocessing: Preprocessing) -> Result<EpochedDataset> {
    match preprocessing {
        Preprocessing::None => {
            fold.check_against(ds)?;
            Ok(ds.clone())
        }
        Preprocessing::Standardize => Standardizer::fit(ds, fold)?.apply(ds),
        Preprocessing::Whiten => Ok(whiten_subjects(ds, fold)?.0),
    }
}

pub(crate) fn collect_examples<'a>(
    ds: &'a EpochedDataset,
    indices: &[Vec<Vec<usize>>],
    subject: usize,
    row: usize,
) -> Vec<Example<'a>> {
    let mut out = Vec::new();
    for (label, idx) in indices[subject].iter().enumerate() {
        for &i in idx {
            out.push(Example {
                data: ds.trial(subject, label, i).data(),
                row,
                label,
            });
        }
    }
    out
}

fn eval_examples(model: &WavenetClassifier<f32>, examples: &[Example]) -> Result<(f64, f64)> {
    let mut logits = Vec::with_capacity(examples.len());
    let mut correct = 0usize;
    for ex in examples {
        let z = model.logits(ex.data, ex.row)?;
        if argmax(&z) == ex.label {
            correct += 1;
        }
        logits.push(z);
    }
    let labels: Vec<usize> = examples.iter().map(|e| e.label).collect();
    let (loss, _) = cross_entropy(&logits, &labels)?;
    Ok((loss as f64, correct as f64 / examples.len() as f64))
}

/// Minibatch Adam on `train` for `spec.epochs` epochs with a fresh optimizer
/// state. Trials are reshuffled every epoch; `tag` separates the RNG streams
/// of runs sharing a seed.
pub fn fit(
    model: &mut WavenetClassifier<f32>,
    train: &[Example],
    val: &[Example],
    spec: &TrainSpec,
    tag: u64,
    label: &str,
) -> Result<TrainingCurve> {
    let mut curve = TrainingCurve {
        label: label.into(),
        ..TrainingCurve::default()
    };
    if spec.epochs == 0 {
        return Ok(curve);
    }
    if train.is_empty() {
        return Err(Error::InvalidArgument(format!("{label}: empty training split")));
    }
    if spec.batch_size > train.len() {
        return Err(Error::InvalidArgument(format!(
            "{label}: batch size {} exceeds the {} training trials",
            spec.batch_size,
            train.len()
        )));
    }
    let adam = AdamConfig::with_lr(spec.lr);
    let mut state = AdamState::new(model.params());
    let mut order: Vec<usize> = (0..train.len()).collect();
    for epoch in 0..spec.epochs {
        let e = epoch as u64;
        order.shuffle(&mut seeding::stream(spec.seed, &[SHUFFLE, tag, e]));
        let mut drop_rng = seeding::stream(spec.seed, &[DROPOUT, tag, e]);
        let mut loss_sum = 0.0;
        let mut n_batches = 0;
        for chunk in order.chunks(spec.batch_size) {
            let batch: Vec<(&[f32], usize, usize)> = chunk
                .iter()
                .map(|&i| (train[i].data, train[i].row, train[i].label))
                .collect();
            let (loss, grads) = model.loss_and_grad(&batch, Some(&mut drop_rng))?;
            if !loss.is_finite() || !grads.is_finite() {
                return Err(Error::NonFinite(format!("{label}: loss or gradient at epoch {}", epoch + 1)));
            }
            adam_step(model.params_mut(), &grads, &mut state, &adam);
            loss_sum += loss as f64;
            n_batches += 1;
        }
        curve.train_loss.push(loss_sum / n_batches as f64);
        let last = epoch + 1 == spec.epochs;
        let due = spec.eval_every > 0 && (epoch + 1) % spec.eval_every == 0;
        if !val.is_empty() && (last || due) {
            let (vl, va) = eval_examples(model, val)?;
            curve.eval_epochs.push(epoch + 1);
            curve.val_loss.push(vl);
            curve.val_accuracy.push(va);
        }
    }
    Ok(curve)
}

/// Accuracy of `model` on the validation trials of `subject`.
pub fn evaluate_subject(
    model: &WavenetClassifier<f32>,
    ds: &EpochedDataset,
    fold: &FoldSplit,
    subject: usize,
    source: &EmbeddingSource,
) -> Result<SubjectResult> {
    let mut labels = Vec::new();
    let mut predictions = Vec::new();
    for (label, idx) in fold.val[subject].iter().enumerate() {
        for &i in idx {
            let data = ds.trial(subject, label, i).data();
            let logits = match source {
                EmbeddingSource::Row(r) => model.logits(data, *r)?,
                EmbeddingSource::Vector(v) => model.logits_with_embedding(data, v)?,
            };
            labels.push(label);
            predictions.push(argmax(&logits));
        }
    }
    let accuracy = crate::stats::accuracy(&predictions, &labels)?;
    Ok(SubjectResult {
        subject: ds.subjects[subject].clone(),
        accuracy,
        labels,
        predictions,
    })
}

/// Run `f` over `items` on up to `jobs` threads; results keep input order.
pub fn parallel_map<T, R, F>(items: Vec<T>, jobs: usize, f: F) -> Result<Vec<R>>
where
    T: Send,
    R: Send,
    F: Fn(T) -> Result<R> + Sync,
{
    if jobs <= 1 || items.len() <= 1 {
        return items.into_iter().map(f).collect();
    }
    let n = items.len();
    let slots: Vec<Mutex<Option<T>>> = items.into_iter().map(|t| Mutex::new(Some(t))).collect();
    let results: Vec<Mutex<Option<Result<R>>>> = (0..n).map(|_| Mutex::new(None)).collect();
    let next = AtomicUsize::new(0);
    std::thread::scope(|scope| {
        for _ in 0..jobs.min(n) {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                if i >= n {
                    break;
                }
                let item = slots[i].lock().unwrap().take().expect("each item taken once");
                *results[i].lock().unwrap() = Some(f(item));
            });
        }
    });
    results
        .into_iter()
        .map(|r| r.into_inner().unwrap().expect("every item processed"))
        .collect()
}

fn initial_model(spec: &TrainSpec, ds: &EpochedDataset, tag: u64) -> Result<WavenetClassifier<f32>> {
    let cfg = spec.model_config(ds);
    match &spec.init {
        Init::Fresh => WavenetClassifier::new(cfg, &mut seeding::stream(spec.seed, &[INIT, tag])),
        Init::FromCheckpoint(path) => load_checkpoint(path, Some(&cfg)),
    }
}

/// Preprocess `ds` with `spec.preprocessing` and train on every subject.
pub fn train(ds: &EpochedDataset, split: &FoldSplit, spec: &TrainSpec) -> Result<TrainOutcome> {
    let prepared = prepare(ds, split, spec.preprocessing)?;
    let all: Vec<usize> = (0..ds.n_subjects()).collect();
    train_on(&prepared, split, spec, &all)
}

/// Train on the already-preprocessed `ds`, restricted to `subjects`, and
/// evaluate each of them on its validation split. Group modes pool the
/// subjects' training trials in ascending subject order.
pub fn train_on(
    ds: &EpochedDataset,
    split: &FoldSplit,
    spec: &TrainSpec,
    subjects: &[usize],
) -> Result<TrainOutcome> {
    spec.validate()?;
    split.check_against(ds)?;
    if subjects.is_empty() {
        return Err(Error::InvalidArgument("no subjects to train on".into()));
    }
    let mut subjects = subjects.to_vec();
    subjects.sort_unstable();
    subjects.dedup();
    if let Some(&s) = subjects.iter().find(|&&s| s >= ds.n_subjects()) {
        return Err(Error::InvalidArgument(format!("subject index {s} out of range")));
    }
    let hash = config_hash(&(spec.without_jobs(), &subjects, split));
    let name = match spec.mode {
        TrainMode::Subject => "train_subject",
        TrainMode::Group => "train_group",
        TrainMode::GroupEmb => "train_group_emb",
    };
    match spec.mode {
        TrainMode::Subject => {
            let runs = parallel_map(subjects.clone(), spec.jobs, |s| {
                let mut model = initial_model(spec, ds, s as u64)?;
                let tr = collect_examples(ds, &split.train, s, 0);
                let va = collect_examples(ds, &split.val, s, 0);
                let curve = fit(&mut model, &tr, &va, spec, s as u64, &ds.subjects[s])?;
                let result = evaluate_subject(&model, ds, split, s, &EmbeddingSource::Row(0))?;
                Ok((model, curve, result))
            })?;
            let mut models = Vec::new();
            let mut curves = Vec::new();
            let mut results = Vec::new();
            for (m, c, r) in runs {
                models.push(m);
                curves.push(c);
                results.push(r);
            }
            let mut report = ExperimentReport::new(name, spec.seed, hash, results);
            report.curves = curves;
            Ok(TrainOutcome { models, report })
        }
        TrainMode::Group | TrainMode::GroupEmb => {
            let mut model = initial_model(spec, ds, 0)?;
            let tr: Vec<Example> = subjects
                .iter()
                .flat_map(|&s| collect_examples(ds, &split.train, s, s))
                .collect();
            let va: Vec<Example> = subjects
                .iter()
                .flat_map(|&s| collect_examples(ds, &split.val, s, s))
                .collect();
            let curve = fit(&mut model, &tr, &va, spec, 0, "group")?;
            let results = subjects
                .iter()
                .map(|&s| evaluate_subject(&model, ds, split, s, &EmbeddingSource::Row(s)))
                .collect::<Result<Vec<_>>>()?;
            let mut report = ExperimentReport::new(name, spec.seed, hash, results);
            report.curves = vec![curve];
            Ok(TrainOutcome {
                models: vec![model],
                report,
            })
        }
    }
}

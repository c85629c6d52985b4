use groupdecode::dataio::{generate_synthetic, SyntheticSpec};
use groupdecode::experiments::{
    embedding_ablation, finetune, loso_run, read_report, train, write_report, AblationMode, LosoVariant, TrainMode,
    TrainSpec,
};
use groupdecode::nn::save_checkpoint;
use groupdecode::preprocess::{make_splits, SplitMode};
use groupdecode::stats::{binomial_ci, mean, median, sign_test, wilcoxon_signed_rank, Sided};

use crate::fixtures::{self, group_spec, Trained};
use crate::Verdict;

/// Per-subject accuracy averaged over seeds.
fn subject_means(runs: &[Trained]) -> Vec<f64> {
    let n = runs[0].report.subjects.len();
    (0..n)
        .map(|s| mean(&runs.iter().map(|r| r.report.subjects[s].accuracy).collect::<Vec<_>>()))
        .collect()
}

fn pct(v: &[f64]) -> String {
    let parts: Vec<String> = v.iter().map(|a| format!("{:.0}", a * 100.0)).collect();
    format!("[{}]", parts.join(", "))
}

pub fn embedding_effect() -> Verdict {
    let r = fixtures::effect();
    let emb = subject_means(&r.emb);
    let group = subject_means(&r.group);
    let gain = mean(&emb) - mean(&group);
    let test = wilcoxon_signed_rank(&emb, &group, Sided::Greater).unwrap();
    let minutes = r.seconds / 60.0;
    Verdict::new(
        gain >= 0.10 && test.p < 0.05 && minutes <= 30.0,
        format!(
            "angle {:.2} rad: group-emb {} vs group {} (% per subject, {} seeds), gain {:.1} points (>= 10), one-sided Wilcoxon p = {:.4}, {minutes:.1} min",
            r.data.spec.subject_mixing_angle,
            pct(&emb),
            pct(&group),
            r.emb.len(),
            gain * 100.0,
            test.p
        ),
    )
}

pub fn ablation() -> Verdict {
    let r = fixtures::effect();
    let d = &r.data;
    let chance = 1.0 / d.raw.n_classes as f64;
    let mut pass = true;
    let mut notes = Vec::new();
    for (name, mode) in [("zero", AblationMode::Zero), ("shuffle", AblationMode::Shuffle { seed: 5 })] {
        let runs: Vec<_> = r
            .emb
            .iter()
            .map(|t| embedding_ablation(&t.model, &d.prepared, &d.split, &d.subjects, &mode).unwrap())
            .collect();
        let n = d.subjects.len();
        let avg = |f: &dyn Fn(&groupdecode::experiments::AblationResult) -> &Vec<f64>| -> Vec<f64> {
            (0..n).map(|s| mean(&runs.iter().map(|a| f(a)[s]).collect::<Vec<_>>())).collect()
        };
        let intact = avg(&|a| &a.intact);
        let ablated = avg(&|a| &a.ablated);
        let p = wilcoxon_signed_rank(&intact, &ablated, Sided::Greater).map(|t| t.p).unwrap_or(1.0);
        // pooled ablated accuracy against chance
        let n_trials: usize = (0..n).map(|s| d.split.n_val(s)).sum::<usize>() * runs.len();
        let correct = (mean(&ablated) * n_trials as f64).round() as u64;
        let (lo, _) = binomial_ci(correct, n_trials as u64, 0.95).unwrap();
        let ok = p < 0.05 && lo > chance;
        pass &= ok;
        notes.push(format!(
            "{name}: {:.0}% -> {:.0}%, p = {p:.4}, ablated CI lower bound {:.1}% vs chance {:.1}%",
            mean(&intact) * 100.0,
            mean(&ablated) * 100.0,
            lo * 100.0,
            chance * 100.0
        ));
    }
    Verdict::new(pass, notes.join("; "))
}

const TUNE_EPOCHS: usize = 20;

pub fn finetuning() -> Verdict {
    let d = fixtures::transfer();
    let base = fixtures::transfer_emb();
    let mut tune = group_spec(TrainMode::GroupEmb, 0);
    tune.epochs = TUNE_EPOCHS;
    tune.batch_size = 16;
    let tuned: Vec<f64> = d
        .subjects
        .iter()
        .map(|&s| finetune(&base.model, &d.prepared, &d.split, s, &tune, false).unwrap().1.accuracy)
        .collect();
    // scratch subject models get the group pre-training epochs as well
    let mut scratch_spec = TrainSpec::desk(TrainMode::Subject, false);
    scratch_spec.epochs = group_spec(TrainMode::GroupEmb, 0).epochs + TUNE_EPOCHS;
    scratch_spec.eval_every = 0;
    scratch_spec.preprocessing = tune.preprocessing;
    scratch_spec.model.hidden_channels = tune.model.hidden_channels;
    scratch_spec.model.dropout = tune.model.dropout;
    let scratch: Vec<f64> = train(&d.raw, &d.split, &scratch_spec).unwrap().report.accuracies();
    let diffs: Vec<f64> = tuned.iter().zip(&scratch).map(|(a, b)| a - b).collect();
    let med = median(&diffs);
    Verdict::new(
        med >= 0.0,
        format!(
            "finetuned {} vs scratch {} (%), median difference {:+.1} points (>= 0)",
            pct(&tuned),
            pct(&scratch),
            med * 100.0
        ),
    )
}

pub fn loso() -> Verdict {
    let d = fixtures::transfer();
    let chance = 1.0 / d.raw.n_classes as f64;
    // the group variant drops the embedding of this spec
    let mut pretrain = group_spec(TrainMode::GroupEmb, 0);
    pretrain.epochs = 40;
    let mut tune = pretrain.clone();
    tune.epochs = TUNE_EPOCHS;
    tune.batch_size = 16;
    let ratios = [0.0, 1.0];
    let mut curves = Vec::new();
    for variant in [LosoVariant::SubjectScratch, LosoVariant::Group, LosoVariant::GroupEmb] {
        let per_subject: Vec<_> = d
            .subjects
            .iter()
            .map(|&s| loso_run(&d.raw, &d.split, s, &ratios, variant, &pretrain, &tune).unwrap())
            .collect();
        curves.push((variant, per_subject));
    }
    let at = |i: usize, r: usize| -> Vec<f64> { curves[i].1.iter().map(|c| c.accuracies[r]).collect() };

    let scratch0 = at(0, 0);
    let scratch_ok = d.subjects.iter().zip(&scratch0).all(|(&s, &a)| {
        let n = d.split.n_val(s) as u64;
        let (lo, hi) = binomial_ci((a * n as f64).round() as u64, n, 0.99).unwrap();
        lo <= chance && chance <= hi
    });
    let chance_v = vec![chance; d.subjects.len()];
    let p_group = wilcoxon_signed_rank(&at(1, 0), &chance_v, Sided::Greater).map(|t| t.p).unwrap_or(1.0);
    let p_emb = wilcoxon_signed_rank(&at(2, 0), &chance_v, Sided::Greater).map(|t| t.p).unwrap_or(1.0);
    let p_gain = sign_test(&at(2, 1), &at(2, 0), Sided::Greater).unwrap().p;
    Verdict::new(
        scratch_ok && p_group < 0.05 && p_emb < 0.05 && p_gain < 0.05,
        format!(
            "ratio 0: scratch {} within 99% chance CI: {scratch_ok}; group {} p = {p_group:.4}; group-emb {} p = {p_emb:.4}; group-emb ratio 1 {} > ratio 0, sign test p = {p_gain:.4}",
            pct(&scratch0),
            pct(&at(1, 0)),
            pct(&at(2, 0)),
            pct(&at(2, 1)),
        ),
    )
}

pub fn determinism() -> Verdict {
    let spec = SyntheticSpec {
        n_subjects: 3,
        n_classes: 3,
        trials_per_class: 10,
        n_channels: 8,
        n_timesteps: 128,
        info_channels: vec![0, 1, 2],
        ..SyntheticSpec::desk()
    };
    let dir = tempfile::tempdir().unwrap();
    let mut runs = Vec::new();
    for (i, jobs) in [1usize, 1, 2].into_iter().enumerate() {
        let ds = generate_synthetic(&spec).unwrap();
        let split = make_splits(&ds, SplitMode::default(), 3).unwrap().holdout().clone();
        let mut artefacts = Vec::new();
        for mode in [TrainMode::Subject, TrainMode::Group, TrainMode::GroupEmb] {
            let mut ts = TrainSpec::desk(mode, false);
            ts.epochs = 3;
            ts.eval_every = 1;
            ts.batch_size = 8;
            ts.seed = 11;
            ts.jobs = jobs;
            ts.model.hidden_channels = 4;
            ts.model.fc_hidden = 8;
            let out = train(&ds, &split, &ts).unwrap();
            let run_dir = dir.path().join(format!("{i}-{mode:?}"));
            write_report(&out.report, &run_dir).unwrap();
            let mut bytes = std::fs::read(run_dir.join("report.json")).unwrap();
            for (k, m) in out.models.iter().enumerate() {
                let p = run_dir.join(format!("model{k}.ckpt"));
                save_checkpoint(m, &p).unwrap();
                bytes.extend(std::fs::read(&p).unwrap());
            }
            assert_eq!(read_report(run_dir.join("report.json")).unwrap(), out.report);
            artefacts.push(bytes);
        }
        runs.push(artefacts);
    }
    let same = runs.windows(2).all(|w| w[0] == w[1]);
    Verdict::new(
        same,
        format!("3 training modes x 3 reruns (1, 1 and 2 threads): reports and checkpoints identical: {same}"),
    )
}

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use groupdecode::dataio::{generate_synthetic, read_dataset, write_dataset, EpochedDataset, MANIFEST_FILE};
use groupdecode::experiments::{
    finetune, loso_run, parallel_map, prepare, read_report, subgroup_scaling, train, write_report,
    write_subject_csv, ExperimentReport, Init, LosoCurve, LosoVariant, SubgroupCurve, TrainMode,
};
use groupdecode::interpret::{
    embedding_diagnostics, kernel_fir, kernel_pfi, line_plot_svg, sensor_map_svg, spatial_pfi,
    spatiospectral_pfi, spatiotemporal_pfi, spectral_pfi, temporal_pfi, write_pfi_csv, write_psd_csv,
    CiMethod, EmbeddingDiagnostics, EvalSet, Grouping, KernelAxis, KernelRef, Permutation, PfiAxis,
    PfiResult, Psd,
};
use groupdecode::nn::{load_checkpoint, save_checkpoint, WavenetClassifier};
use groupdecode::preprocess::{make_splits, FoldSplit};
use serde::{Deserialize, Serialize};

use crate::config::{load_run, resolve, RunConfig};
use crate::{CiArg, Cli, Command, Global, PfiKind, TrainFlags};

const PFI_FILE: &str = "pfi.json";
const LOSO_FILE: &str = "loso.json";
const SUBGROUP_FILE: &str = "subgroup.json";
const PSD_FILE: &str = "psd.json";
const EMBEDDING_FILE: &str = "embedding.json";
const REPORT_FILE: &str = "report.json";

pub fn dispatch(cli: Cli) -> Result<()> {
    let g = cli.global;
    match cli.command {
        Command::Gen {
            out,
            subjects,
            classes,
            trials,
            channels,
            timesteps,
            mixing_angle,
            noise,
            force,
        } => {
            let mut cfg = base_config(&g, None, None)?;
            let s = &mut cfg.synthetic;
            if let Some(v) = subjects {
                s.n_subjects = v;
            }
            if let Some(v) = classes {
                s.n_classes = v;
            }
            if let Some(v) = trials {
                s.trials_per_class = v;
            }
            if let Some(v) = channels {
                s.n_channels = v;
                s.info_channels = groupdecode::dataio::default_info_channels(&s.layout(), s.info_channels.len().min(v));
            }
            if let Some(v) = timesteps {
                s.n_timesteps = v;
            }
            if let Some(v) = mixing_angle {
                s.subject_mixing_angle = v;
            }
            if let Some(v) = noise {
                s.noise_amplitude = v;
            }
            cmd_gen(cfg, &out, force)
        }
        Command::Train {
            data,
            mode,
            linear,
            out,
            init,
            flags,
        } => {
            let mut cfg = base_config(&g, mode.map(Into::into), linear.then_some(true))?;
            apply_train_flags(&mut cfg, &flags, g.jobs);
            if let Some(p) = init {
                cfg.train.init = Init::FromCheckpoint(p);
            }
            set_data(&mut cfg, data)?;
            cmd_train(cfg, &out)
        }
        Command::Finetune {
            run,
            out,
            subjects,
            fresh_embedding,
            flags,
        } => {
            let mut cfg = load_run(&run)?;
            reseed(&mut cfg, &g);
            apply_train_flags(&mut cfg, &flags, g.jobs);
            cmd_finetune(cfg, &run, &out, &subjects, fresh_embedding)
        }
        Command::Loso {
            data,
            left_out,
            variant,
            ratios,
            tune_epochs,
            out,
            flags,
        } => {
            let variant: LosoVariant = variant.into();
            let mode = match variant {
                LosoVariant::Group => TrainMode::Group,
                LosoVariant::GroupEmb => TrainMode::GroupEmb,
                LosoVariant::SubjectScratch => TrainMode::Subject,
            };
            let mut cfg = base_config(&g, Some(mode), None)?;
            apply_train_flags(&mut cfg, &flags, g.jobs);
            set_data(&mut cfg, data)?;
            cmd_loso(cfg, &left_out, variant, &ratios, tune_epochs, &out)
        }
        Command::Subgroup {
            data,
            sizes,
            ordering_seed,
            out,
            flags,
        } => {
            let mut cfg = base_config(&g, Some(TrainMode::GroupEmb), None)?;
            apply_train_flags(&mut cfg, &flags, g.jobs);
            set_data(&mut cfg, data)?;
            cmd_subgroup(cfg, &sizes, ordering_seed, &out)
        }
        Command::Pfi {
            run,
            kind,
            grouping,
            colocated,
            kernel,
            subject,
            window_s,
            neighbourhood_k,
            band_hz,
            repeats,
            stride,
            max_evaluations,
            identity,
            ci,
            out,
        } => {
            let mut cfg = load_run(&run)?;
            reseed(&mut cfg, &g);
            let p = &mut cfg.pfi;
            p.jobs = g.jobs;
            if let Some(v) = window_s {
                p.window_s = v;
            }
            if let Some(v) = neighbourhood_k {
                p.neighbourhood_k = v;
            }
            if let Some(v) = band_hz {
                p.band_hz = v;
            }
            if let Some(v) = repeats {
                p.n_repeats = v;
            }
            if let Some(v) = stride {
                p.time_stride = v;
            }
            if let Some(v) = max_evaluations {
                p.max_evaluations = v;
            }
            if identity {
                p.permutation = Permutation::Identity;
            }
            let ci = match ci {
                CiArg::T => CiMethod::StudentT,
                CiArg::Bootstrap => CiMethod::Bootstrap {
                    n_boot: 2000,
                    seed: cfg.pfi.seed,
                },
            };
            let kernel = kernel.as_deref().map(parse_kernel).transpose()?;
            let out = out.unwrap_or_else(|| {
                let mut name = format!("pfi-{}", kind_name(kind));
                if let Some(k) = kernel {
                    name.push_str(&format!("-k{}-{}", k.layer, k.kernel));
                }
                run.join(name)
            });
            let req = PfiRequest {
                kind,
                grouping,
                colocated,
                kernel,
                subject,
                ci,
            };
            cmd_pfi(cfg, &run, &req, &out)
        }
        Command::Fir {
            run,
            kernel,
            subject,
            noise_trials,
            out,
        } => {
            let mut cfg = load_run(&run)?;
            reseed(&mut cfg, &g);
            if let Some(n) = noise_trials {
                cfg.fir.n_noise_trials = n;
            }
            let k = parse_kernel(&kernel)?;
            let out = out.unwrap_or_else(|| run.join(format!("fir-k{}-{}", k.layer, k.kernel)));
            cmd_fir(cfg, &run, k, subject.as_deref(), &out)
        }
        Command::Embed { run, out } => {
            let cfg = load_run(&run)?;
            let out = out.unwrap_or_else(|| run.join("embedding"));
            cmd_embed(cfg, &run, &out)
        }
        Command::Report { run } => cmd_report(&run),
    }
}

fn kind_name(kind: PfiKind) -> &'static str {
    match kind {
        PfiKind::Temporal => "temporal",
        PfiKind::Spatial => "spatial",
        PfiKind::Spatiotemporal => "spatiotemporal",
        PfiKind::Spectral => "spectral",
        PfiKind::Spatiospectral => "spatiospectral",
    }
}

fn reseed(cfg: &mut RunConfig, g: &Global) {
    if let Some(s) = g.seed {
        cfg.set_seed(s);
    }
}

fn base_config(g: &Global, mode: Option<TrainMode>, linear: Option<bool>) -> Result<RunConfig> {
    let mut cfg = resolve(g.config.as_deref(), g.preset, mode, linear)?;
    reseed(&mut cfg, g);
    cfg.train.jobs = g.jobs;
    cfg.pfi.jobs = g.jobs;
    Ok(cfg)
}

fn apply_train_flags(cfg: &mut RunConfig, f: &TrainFlags, jobs: usize) {
    let t = &mut cfg.train;
    t.jobs = jobs;
    if let Some(v) = f.epochs {
        t.epochs = v;
    }
    if let Some(v) = f.lr {
        t.lr = v;
    }
    if let Some(v) = f.batch_size {
        t.batch_size = v;
    }
    if let Some(v) = f.eval_every {
        t.eval_every = v;
    }
    if let Some(v) = f.preprocessing {
        t.preprocessing = v.into();
    }
    if let Some(v) = f.layers {
        t.model.n_conv_layers = v;
    }
    if let Some(v) = f.hidden {
        t.model.hidden_channels = v;
    }
    if let Some(v) = f.fc_hidden {
        t.model.fc_hidden = v;
    }
    if let Some(v) = f.dropout {
        t.model.dropout = v;
    }
    if let Some(v) = f.embedding_size {
        t.model.embedding_size = v;
    }
}

fn set_data(cfg: &mut RunConfig, data: Option<PathBuf>) -> Result<()> {
    let path = data
        .or_else(|| cfg.data.clone())
        .ok_or_else(|| anyhow!("no dataset given: pass --data or set \"data\" in the config file"))?;
    if !path.join(MANIFEST_FILE).exists() {
        bail!("missing file {} (not a dataset directory)", path.join(MANIFEST_FILE).display());
    }
    cfg.data = Some(fs::canonicalize(&path).with_context(|| format!("cannot resolve {}", path.display()))?);
    Ok(())
}

fn load_data(cfg: &RunConfig) -> Result<(EpochedDataset, FoldSplit)> {
    let path = cfg.data.as_ref().ok_or_else(|| anyhow!("config names no dataset"))?;
    let ds = read_dataset(path).with_context(|| format!("reading dataset {}", path.display()))?;
    let plan = make_splits(&ds, cfg.split, cfg.split_seed)?;
    Ok((ds, plan.holdout().clone()))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    fs::write(path, serde_json::to_string_pretty(value)?).with_context(|| format!("cannot write {}", path.display()))
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).with_context(|| format!("missing file {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("{} does not hold the expected result", path.display()))
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).with_context(|| format!("cannot write {}", path.display()))
}

fn subject_ckpt(id: &str) -> String {
    format!("model-{id}.ckpt")
}

fn cmd_gen(cfg: RunConfig, out: &Path, force: bool) -> Result<()> {
    if out.join(MANIFEST_FILE).exists() && !force {
        bail!("{} already holds a dataset (use --force to replace it)", out.display());
    }
    let ds = generate_synthetic(&cfg.synthetic)?;
    write_dataset(&ds, out)?;
    cfg.save(out)?;
    println!(
        "wrote {} subjects × {} classes × {} trials ({}×{}) to {}",
        ds.n_subjects(),
        ds.n_classes,
        ds.trials_per_class(),
        ds.n_channels(),
        ds.n_timesteps(),
        out.display()
    );
    Ok(())
}

fn cmd_train(cfg: RunConfig, out: &Path) -> Result<()> {
    cfg.train.validate()?;
    let (ds, fold) = load_data(&cfg)?;
    cfg.save(out)?;
    let outcome = train(&ds, &fold, &cfg.train)?;
    let mut report = outcome.report;
    report.config_hash = cfg.hash();
    match cfg.train.mode {
        TrainMode::Subject => {
            for (m, r) in outcome.models.iter().zip(&report.subjects) {
                save_checkpoint(m, out.join(subject_ckpt(&r.subject)))?;
            }
        }
        _ => save_checkpoint(&outcome.models[0], out.join("model.ckpt"))?,
    }
    write_report(&report, out)?;
    emit_report(&report, out)?;
    println!("{}: mean validation accuracy {:.4}", report.experiment, report.mean_accuracy);
    Ok(())
}

fn cmd_finetune(mut cfg: RunConfig, run: &Path, out: &Path, ids: &[String], fresh: bool) -> Result<()> {
    if cfg.train.mode == TrainMode::Subject {
        bail!("finetune needs a group or group_emb run, {} holds subject models", run.display());
    }
    let (ds, fold) = load_data(&cfg)?;
    let model_cfg = cfg.train.model_config(&ds);
    let base = load_checkpoint(run.join("model.ckpt"), Some(&model_cfg))?;
    let subjects = subject_indices(&ds, ids)?;
    cfg.train.init = Init::FromCheckpoint(run.join("model.ckpt"));
    cfg.save(out)?;
    let prepared = prepare(&ds, &fold, cfg.train.preprocessing)?;
    let mut spec = cfg.train.clone();
    spec.jobs = 1;
    let results = parallel_map(subjects, cfg.train.jobs, |s| finetune(&base, &prepared, &fold, s, &spec, fresh))?;
    let mut subjects_out = Vec::new();
    let mut curves = Vec::new();
    for (model, result, curve) in results {
        save_checkpoint(&model, out.join(subject_ckpt(&result.subject)))?;
        subjects_out.push(result);
        curves.push(curve);
    }
    let mut report = ExperimentReport::new("finetune", cfg.seed, cfg.hash(), subjects_out);
    report.curves = curves;
    write_report(&report, out)?;
    emit_report(&report, out)?;
    println!("finetune: mean validation accuracy {:.4}", report.mean_accuracy);
    Ok(())
}

fn subject_indices(ds: &EpochedDataset, ids: &[String]) -> Result<Vec<usize>> {
    if ids.is_empty() {
        return Ok((0..ds.n_subjects()).collect());
    }
    ids.iter()
        .map(|id| {
            ds.subject_index(id)
                .ok_or_else(|| anyhow!("unknown subject '{id}' (dataset has {})", ds.subjects.join(", ")))
        })
        .collect()
}

fn cmd_loso(
    cfg: RunConfig,
    left_out: &str,
    variant: LosoVariant,
    ratios: &[f64],
    tune_epochs: Option<usize>,
    out: &Path,
) -> Result<()> {
    cfg.train.validate()?;
    let (ds, fold) = load_data(&cfg)?;
    let s = subject_indices(&ds, &[left_out.to_string()])?[0];
    cfg.save(out)?;
    let mut tune = cfg.train.clone();
    if let Some(e) = tune_epochs {
        tune.epochs = e;
    }
    let curve = loso_run(&ds, &fold, s, ratios, variant, &cfg.train, &tune)?;
    write_json(&out.join(LOSO_FILE), &curve)?;
    emit_loso(&curve, out)?;
    for (r, a) in curve.ratios.iter().zip(&curve.accuracies) {
        println!("ratio {r:.2}: accuracy {a:.4}");
    }
    Ok(())
}

fn cmd_subgroup(cfg: RunConfig, sizes: &[usize], ordering_seed: u64, out: &Path) -> Result<()> {
    cfg.train.validate()?;
    let (ds, fold) = load_data(&cfg)?;
    let sizes: Vec<usize> = if sizes.is_empty() {
        (1..=ds.n_subjects()).collect()
    } else {
        sizes.to_vec()
    };
    cfg.save(out)?;
    let curve = subgroup_scaling(&ds, &fold, &cfg.train, ordering_seed, &sizes)?;
    write_json(&out.join(SUBGROUP_FILE), &curve)?;
    emit_subgroup(&curve, out)?;
    for (n, a) in curve.sizes.iter().zip(&curve.all_subjects) {
        println!("{n} subjects: mean accuracy over all subjects {a:.4}");
    }
    Ok(())
}

struct PfiRequest {
    kind: PfiKind,
    grouping: String,
    colocated: Option<PathBuf>,
    kernel: Option<KernelRef>,
    subject: Option<String>,
    ci: CiMethod,
}

#[derive(Serialize, Deserialize)]
struct PfiOutput {
    kind: String,
    kernel: Option<KernelRef>,
    ci: CiMethod,
    result: PfiResult,
}

fn parse_kernel(s: &str) -> Result<KernelRef> {
    let (l, k) = s
        .split_once(':')
        .ok_or_else(|| anyhow!("kernel must be given as layer:kernel, got '{s}'"))?;
    Ok(KernelRef {
        layer: l.trim().parse().with_context(|| format!("bad layer index in '{s}'"))?,
        kernel: k.trim().parse().with_context(|| format!("bad kernel index in '{s}'"))?,
    })
}

/// The model of a run plus the subjects it is evaluated on and the
/// embedding row of each.
fn run_model(
    cfg: &RunConfig,
    run: &Path,
    ds: &EpochedDataset,
    subject: Option<&str>,
) -> Result<(WavenetClassifier<f32>, Vec<usize>, bool)> {
    let model_cfg = cfg.train.model_config(ds);
    if cfg.train.mode == TrainMode::Subject {
        let id = subject.ok_or_else(|| anyhow!("{} holds subject models: pass --subject", run.display()))?;
        let s = subject_indices(ds, &[id.to_string()])?[0];
        let m = load_checkpoint(run.join(subject_ckpt(id)), Some(&model_cfg))?;
        Ok((m, vec![s], true))
    } else {
        let subjects = match subject {
            Some(id) => subject_indices(ds, &[id.to_string()])?,
            None => (0..ds.n_subjects()).collect(),
        };
        let m = load_checkpoint(run.join("model.ckpt"), Some(&model_cfg))?;
        Ok((m, subjects, false))
    }
}

fn cmd_pfi(cfg: RunConfig, run: &Path, req: &PfiRequest, out: &Path) -> Result<()> {
    let (ds, fold) = load_data(&cfg)?;
    let (model, subjects, single) = run_model(&cfg, run, &ds, req.subject.as_deref())?;
    let prepared = prepare(&ds, &fold, cfg.train.preprocessing)?;
    let set = EvalSet::validation(&prepared, &fold, &subjects, |s| if single { 0 } else { s })?;
    let grouping = match &req.colocated {
        Some(path) => {
            let groups: Vec<Vec<String>> = read_json(path)?;
            let idx = groups
                .iter()
                .map(|g| g.iter().map(|id| ds.layout.index_of(id)).collect::<groupdecode::Result<Vec<_>>>())
                .collect::<groupdecode::Result<Vec<_>>>()?;
            Grouping::Colocated(idx)
        }
        None => req.grouping.parse()?,
    };
    let p = &cfg.pfi;
    let result = match req.kernel {
        Some(k) => {
            let axis = match req.kind {
                PfiKind::Temporal => KernelAxis::Time,
                PfiKind::Spatial => KernelAxis::Space(grouping),
                PfiKind::Spectral => KernelAxis::Frequency,
                _ => bail!("kernel PFI supports the temporal, spatial and spectral kinds"),
            };
            kernel_pfi(&model, k, &set, p, &axis)?
        }
        None => match req.kind {
            PfiKind::Temporal => temporal_pfi(&model, &set, p)?,
            PfiKind::Spatial => spatial_pfi(&model, &set, p, &grouping)?,
            PfiKind::Spatiotemporal => spatiotemporal_pfi(&model, &set, p)?,
            PfiKind::Spectral => spectral_pfi(&model, &set, p)?,
            PfiKind::Spatiospectral => spatiospectral_pfi(&model, &set, p)?,
        },
    };
    cfg.save(out)?;
    let output = PfiOutput {
        kind: kind_name(req.kind).into(),
        kernel: req.kernel,
        ci: req.ci,
        result,
    };
    write_json(&out.join(PFI_FILE), &output)?;
    emit_pfi(&output, out)?;
    let best = output.result.argmax();
    println!(
        "{} PFI over {} points, baseline {:.4}, largest mean at index {best}",
        output.kind,
        output.result.axis.len(),
        output.result.baseline
    );
    Ok(())
}

fn cmd_fir(cfg: RunConfig, run: &Path, k: KernelRef, subject: Option<&str>, out: &Path) -> Result<()> {
    let (ds, _) = load_data(&cfg)?;
    let (model, subjects, single) = run_model(&cfg, run, &ds, subject)?;
    let mut fir = cfg.fir.clone();
    fir.sfreq = ds.sfreq;
    fir.subject_row = if single { 0 } else { subjects[0] };
    let psd = kernel_fir(&model, k, &fir)?;
    cfg.save(out)?;
    write_json(&out.join(PSD_FILE), &psd)?;
    emit_psd(&psd, out)?;
    let peak = psd.freqs[groupdecode::nn::argmax(&psd.power)];
    println!("kernel {}:{} peak response at {peak:.2} Hz", k.layer, k.kernel);
    Ok(())
}

fn cmd_embed(cfg: RunConfig, run: &Path, out: &Path) -> Result<()> {
    if cfg.train.mode != TrainMode::GroupEmb {
        bail!("embedding diagnostics need a group_emb run");
    }
    let (ds, _) = load_data(&cfg)?;
    let (model, _, _) = run_model(&cfg, run, &ds, None)?;
    let report = read_report(run.join(REPORT_FILE))?;
    let mut acc = vec![f64::NAN; ds.n_subjects()];
    for r in &report.subjects {
        let s = ds
            .subject_index(&r.subject)
            .ok_or_else(|| anyhow!("report lists unknown subject '{}'", r.subject))?;
        acc[s] = r.accuracy;
    }
    if acc.iter().any(|a| a.is_nan()) {
        bail!("report does not cover every subject of the embedding table");
    }
    let diag = embedding_diagnostics(&model, &acc)?;
    fs::create_dir_all(out).with_context(|| format!("cannot create {}", out.display()))?;
    write_json(&out.join(EMBEDDING_FILE), &diag)?;
    emit_embedding(&diag, out)?;
    println!("embedding PCA over {} subjects; degenerate: {}", ds.n_subjects(), diag.degenerate);
    Ok(())
}

/// Regenerate every table and figure from the raw results in `run`.
fn cmd_report(run: &Path) -> Result<()> {
    if !run.is_dir() {
        bail!("missing run directory {}", run.display());
    }
    let mut done = Vec::new();
    let mut dirs = vec![run.to_path_buf()];
    for entry in fs::read_dir(run).with_context(|| format!("cannot list {}", run.display()))? {
        let p = entry?.path();
        if p.is_dir() {
            dirs.push(p);
        }
    }
    dirs.sort();
    for dir in dirs {
        if dir.join(REPORT_FILE).exists() {
            emit_report(&read_report(dir.join(REPORT_FILE))?, &dir)?;
            done.push(dir.join(REPORT_FILE));
        }
        if dir.join(PFI_FILE).exists() {
            emit_pfi(&read_json(&dir.join(PFI_FILE))?, &dir)?;
            done.push(dir.join(PFI_FILE));
        }
        if dir.join(LOSO_FILE).exists() {
            emit_loso(&read_json(&dir.join(LOSO_FILE))?, &dir)?;
            done.push(dir.join(LOSO_FILE));
        }
        if dir.join(SUBGROUP_FILE).exists() {
            emit_subgroup(&read_json(&dir.join(SUBGROUP_FILE))?, &dir)?;
            done.push(dir.join(SUBGROUP_FILE));
        }
        if dir.join(PSD_FILE).exists() {
            emit_psd(&read_json(&dir.join(PSD_FILE))?, &dir)?;
            done.push(dir.join(PSD_FILE));
        }
        if dir.join(EMBEDDING_FILE).exists() {
            emit_embedding(&read_json(&dir.join(EMBEDDING_FILE))?, &dir)?;
            done.push(dir.join(EMBEDDING_FILE));
        }
    }
    if done.is_empty() {
        bail!("no stored results found in {}", run.display());
    }
    for p in done {
        println!("regenerated outputs of {}", p.display());
    }
    Ok(())
}

fn emit_report(report: &ExperimentReport, dir: &Path) -> Result<()> {
    write_subject_csv(report, dir.join("subjects.csv"))?;
    let x: Vec<f64> = (1..=report.subjects.len()).map(|i| i as f64).collect();
    let y: Vec<f64> = report.subjects.iter().map(|s| s.accuracy).collect();
    write_text(
        &dir.join("accuracy.svg"),
        &line_plot_svg(&x, &y, None, &format!("{} validation accuracy", report.experiment), "subject"),
    )?;
    if let Some(c) = report.curves.iter().find(|c| !c.eval_epochs.is_empty()) {
        let x: Vec<f64> = c.eval_epochs.iter().map(|&e| e as f64).collect();
        write_text(
            &dir.join("curve.svg"),
            &line_plot_svg(&x, &c.val_accuracy, None, &format!("{} validation accuracy", c.label), "epoch"),
        )?;
    }
    Ok(())
}

fn emit_pfi(o: &PfiOutput, dir: &Path) -> Result<()> {
    let r = &o.result;
    write_pfi_csv(r, o.ci, dir.join("pfi.csv"))?;
    let mean = r.mean();
    let ci = r.intervals(0.95, o.ci);
    let title = format!("{} PFI", o.kind);
    let svg = match &r.axis {
        PfiAxis::Time { times_s } => line_plot_svg(times_s, &mean, Some(&ci), &title, "time (s)"),
        PfiAxis::Bands { bands } => {
            let x: Vec<f64> = bands.iter().map(|(lo, hi)| (lo + hi) / 2.0).collect();
            line_plot_svg(&x, &mean, Some(&ci), &title, "frequency (Hz)")
        }
        PfiAxis::Channels { labels, positions, .. } => sensor_map_svg(positions, &mean, labels, &title),
        PfiAxis::ChannelTime { labels, times_s } => {
            let marginal = marginal_over_rows(&mean, labels.len(), times_s.len());
            line_plot_svg(times_s, &marginal, None, &format!("{title} (mean over channels)"), "time (s)")
        }
        PfiAxis::ChannelBand { labels, bands } => {
            let x: Vec<f64> = bands.iter().map(|(lo, hi)| (lo + hi) / 2.0).collect();
            let marginal = marginal_over_rows(&mean, labels.len(), bands.len());
            line_plot_svg(&x, &marginal, None, &format!("{title} (mean over channels)"), "frequency (Hz)")
        }
    };
    write_text(&dir.join("pfi.svg"), &svg)
}

fn marginal_over_rows(grid: &[f64], rows: usize, cols: usize) -> Vec<f64> {
    (0..cols)
        .map(|j| (0..rows).map(|i| grid[i * cols + j]).sum::<f64>() / rows as f64)
        .collect()
}

fn csv_writer(path: &Path) -> Result<csv::Writer<fs::File>> {
    csv::Writer::from_path(path).with_context(|| format!("cannot write {}", path.display()))
}

fn emit_loso(c: &LosoCurve, dir: &Path) -> Result<()> {
    let mut w = csv_writer(&dir.join("loso.csv"))?;
    w.write_record(["ratio", "accuracy", "batch_size"])?;
    for ((r, a), b) in c.ratios.iter().zip(&c.accuracies).zip(&c.batch_sizes) {
        w.write_record([r.to_string(), a.to_string(), b.to_string()])?;
    }
    w.flush()?;
    write_text(
        &dir.join("loso.svg"),
        &line_plot_svg(&c.ratios, &c.accuracies, None, &format!("left-out subject {}", c.subject), "training ratio"),
    )
}

fn emit_subgroup(c: &SubgroupCurve, dir: &Path) -> Result<()> {
    let mut w = csv_writer(&dir.join("subgroup.csv"))?;
    w.write_record(["n_subjects", "all_subjects", "trained_subjects"])?;
    for ((n, a), t) in c.sizes.iter().zip(&c.all_subjects).zip(&c.trained_subjects) {
        w.write_record([n.to_string(), a.to_string(), t.to_string()])?;
    }
    w.flush()?;
    let x: Vec<f64> = c.sizes.iter().map(|&n| n as f64).collect();
    write_text(
        &dir.join("subgroup.svg"),
        &line_plot_svg(&x, &c.all_subjects, None, "mean accuracy over all subjects", "subjects in training"),
    )
}

fn emit_psd(p: &Psd, dir: &Path) -> Result<()> {
    write_psd_csv(p, dir.join("psd.csv"))?;
    write_text(
        &dir.join("psd.svg"),
        &line_plot_svg(&p.freqs, &p.power, None, "kernel output PSD", "frequency (Hz)"),
    )
}

fn emit_embedding(d: &EmbeddingDiagnostics, dir: &Path) -> Result<()> {
    let mut w = csv_writer(&dir.join("embedding.csv"))?;
    w.write_record(["component", "variance", "r", "p"])?;
    for (i, (v, c)) in d.variances.iter().zip(&d.correlations).enumerate() {
        let (r, p) = c.as_ref().map(|c| (c.r.to_string(), c.p.to_string())).unwrap_or_default();
        w.write_record([(i + 1).to_string(), v.to_string(), r, p])?;
    }
    w.flush()?;
    Ok(())
}

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use groupdecode::experiments::{LosoVariant, TrainMode};
use groupdecode::preprocess::Preprocessing;

use crate::config::Preset;

#[derive(Parser)]
#[command(name = "groupdecode", version, about = "Group-level decoding of epoched MEG/EEG trials")]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Global {
    /// Root seed for every random stream.
    #[arg(long, global = true, env = "GROUPDECODE_SEED")]
    seed: Option<u64>,
    /// Worker threads for independent runs and repeats.
    #[arg(long, global = true, default_value_t = 1)]
    jobs: usize,
    /// JSON config overlaid on the preset defaults (flags override it).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true, value_enum)]
    preset: Option<Preset>,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Subject,
    Group,
    GroupEmb,
}

impl From<ModeArg> for TrainMode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::Subject => TrainMode::Subject,
            ModeArg::Group => TrainMode::Group,
            ModeArg::GroupEmb => TrainMode::GroupEmb,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum PrepArg {
    None,
    Standardize,
    Whiten,
}

impl From<PrepArg> for Preprocessing {
    fn from(p: PrepArg) -> Self {
        match p {
            PrepArg::None => Preprocessing::None,
            PrepArg::Standardize => Preprocessing::Standardize,
            PrepArg::Whiten => Preprocessing::Whiten,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum VariantArg {
    Group,
    GroupEmb,
    SubjectScratch,
}

impl From<VariantArg> for LosoVariant {
    fn from(v: VariantArg) -> Self {
        match v {
            VariantArg::Group => LosoVariant::Group,
            VariantArg::GroupEmb => LosoVariant::GroupEmb,
            VariantArg::SubjectScratch => LosoVariant::SubjectScratch,
        }
    }
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum PfiKind {
    Temporal,
    Spatial,
    Spatiotemporal,
    Spectral,
    Spatiospectral,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum CiArg {
    T,
    Bootstrap,
}

/// Training hyperparameter overrides shared by the training commands.
#[derive(Args, Clone, Default)]
struct TrainFlags {
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    lr: Option<f64>,
    #[arg(long)]
    batch_size: Option<usize>,
    #[arg(long)]
    eval_every: Option<usize>,
    #[arg(long, value_enum)]
    preprocessing: Option<PrepArg>,
    #[arg(long)]
    layers: Option<usize>,
    #[arg(long)]
    hidden: Option<usize>,
    #[arg(long)]
    fc_hidden: Option<usize>,
    #[arg(long)]
    dropout: Option<f64>,
    #[arg(long)]
    embedding_size: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic dataset with planted structure.
    Gen {
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        subjects: Option<usize>,
        #[arg(long)]
        classes: Option<usize>,
        #[arg(long)]
        trials: Option<usize>,
        #[arg(long)]
        channels: Option<usize>,
        #[arg(long)]
        timesteps: Option<usize>,
        #[arg(long)]
        mixing_angle: Option<f64>,
        #[arg(long)]
        noise: Option<f64>,
        /// Replace an existing dataset in `out`.
        #[arg(long)]
        force: bool,
    },
    /// Train subject, group or group-with-embedding models.
    Train {
        #[arg(long)]
        data: Option<PathBuf>,
        #[arg(long, value_enum)]
        mode: Option<ModeArg>,
        /// Identity activations.
        #[arg(long)]
        linear: bool,
        #[arg(long)]
        out: PathBuf,
        /// Start from a checkpoint instead of a fresh initialisation.
        #[arg(long)]
        init: Option<PathBuf>,
        #[command(flatten)]
        flags: TrainFlags,
    },
    /// Finetune a trained group model on each subject separately.
    Finetune {
        /// Run directory of the group model.
        #[arg(long)]
        run: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Subject ids (default: all).
        #[arg(long, value_delimiter = ',')]
        subjects: Vec<String>,
        /// Redraw each subject's embedding row before finetuning.
        #[arg(long)]
        fresh_embedding: bool,
        #[command(flatten)]
        flags: TrainFlags,
    },
    /// Leave-one-subject-out: pretrain without a subject, then sweep its
    /// training-data ratio.
    Loso {
        #[arg(long)]
        data: Option<PathBuf>,
        #[arg(long)]
        left_out: String,
        #[arg(long, value_enum)]
        variant: VariantArg,
        #[arg(long, value_delimiter = ',', default_value = "0,0.25,0.5,0.75,1")]
        ratios: Vec<f64>,
        /// Epochs for each finetuning run (default: the training epochs).
        #[arg(long)]
        tune_epochs: Option<usize>,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        flags: TrainFlags,
    },
    /// Train group-emb models on growing subsets of subjects.
    Subgroup {
        #[arg(long)]
        data: Option<PathBuf>,
        #[arg(long, value_delimiter = ',')]
        sizes: Vec<usize>,
        #[arg(long, default_value_t = 0)]
        ordering_seed: u64,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        flags: TrainFlags,
    },
    /// Permutation feature importance of a trained model or one kernel.
    Pfi {
        #[arg(long)]
        run: PathBuf,
        #[arg(long, value_enum)]
        kind: PfiKind,
        /// single | neighbourhood (spatial kinds).
        #[arg(long, default_value = "single")]
        grouping: String,
        /// JSON list of channel-id groups shuffled together.
        #[arg(long)]
        colocated: Option<PathBuf>,
        /// `layer:kernel`; switches to the output-deviation metric.
        #[arg(long)]
        kernel: Option<String>,
        /// Subject id whose model is analysed (subject-mode runs).
        #[arg(long)]
        subject: Option<String>,
        #[arg(long)]
        window_s: Option<f64>,
        #[arg(long)]
        neighbourhood_k: Option<usize>,
        #[arg(long)]
        band_hz: Option<f64>,
        #[arg(long)]
        repeats: Option<usize>,
        #[arg(long)]
        stride: Option<usize>,
        #[arg(long)]
        max_evaluations: Option<u64>,
        /// Identity permutations (sanity baseline).
        #[arg(long)]
        identity: bool,
        #[arg(long, value_enum, default_value = "t")]
        ci: CiArg,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Frequency response of one kernel from white-noise inputs.
    Fir {
        #[arg(long)]
        run: PathBuf,
        #[arg(long)]
        kernel: String,
        #[arg(long)]
        subject: Option<String>,
        #[arg(long)]
        noise_trials: Option<usize>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// PCA of the subject embeddings against per-subject accuracy.
    Embed {
        #[arg(long)]
        run: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Rebuild tables and figures of a run directory from its stored results.
    Report {
        #[arg(long)]
        run: PathBuf,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match commands::dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let msg = format!("{e:#}").replace('\n', " ");
            eprintln!("error: {msg}");
            ExitCode::FAILURE
        }
    }
}

//! Datasets and trained models shared between criteria, built on first use.

use std::sync::OnceLock;
use std::time::Instant;

use groupdecode::dataio::{generate_synthetic, EpochedDataset, SyntheticSpec};
use groupdecode::experiments::{prepare, train_on, ExperimentReport, TrainMode, TrainSpec};
use groupdecode::nn::WavenetClassifier;
use groupdecode::preprocess::{make_splits, FoldSplit, Preprocessing, SplitMode};

pub const SEEDS: [u64; 3] = [0, 1, 2];

/// Strongly mixed subjects: the sensor mapping of every subject differs.
pub fn effect_data() -> SyntheticSpec {
    SyntheticSpec {
        subject_mixing_angle: std::f64::consts::FRAC_PI_2 - 1e-3,
        noise_amplitude: 0.3,
        ..SyntheticSpec::desk()
    }
}

/// Moderately mixed subjects, used where group models must transfer.
pub fn transfer_data() -> SyntheticSpec {
    SyntheticSpec {
        noise_amplitude: 0.3,
        ..SyntheticSpec::desk()
    }
}

pub fn group_spec(mode: TrainMode, seed: u64) -> TrainSpec {
    let mut s = TrainSpec::desk(mode, false);
    s.epochs = 60;
    s.eval_every = 0;
    s.lr = 3e-3;
    s.seed = seed;
    s.preprocessing = Preprocessing::Standardize;
    s.model.hidden_channels = 32;
    s.model.dropout = 0.1;
    s
}

pub struct Data {
    pub spec: SyntheticSpec,
    pub raw: EpochedDataset,
    pub prepared: EpochedDataset,
    pub split: FoldSplit,
    pub subjects: Vec<usize>,
}

fn build(spec: SyntheticSpec) -> Data {
    let raw = generate_synthetic(&spec).unwrap();
    let split = make_splits(&raw, SplitMode::default(), 0).unwrap().holdout().clone();
    let prepared = prepare(&raw, &split, Preprocessing::Standardize).unwrap();
    let subjects = (0..raw.n_subjects()).collect();
    Data {
        spec,
        raw,
        prepared,
        split,
        subjects,
    }
}

pub struct Trained {
    pub model: WavenetClassifier<f32>,
    pub report: ExperimentReport,
}

fn fit_group(d: &Data, mode: TrainMode, seed: u64) -> Trained {
    let out = train_on(&d.prepared, &d.split, &group_spec(mode, seed), &d.subjects).unwrap();
    Trained {
        model: out.models.into_iter().next().unwrap(),
        report: out.report,
    }
}

pub struct EffectRuns {
    pub data: Data,
    pub emb: Vec<Trained>,
    pub group: Vec<Trained>,
    pub seconds: f64,
}

/// Naive group and group-emb models on the strongly mixed data, one per seed.
pub fn effect() -> &'static EffectRuns {
    static R: OnceLock<EffectRuns> = OnceLock::new();
    R.get_or_init(|| {
        let start = Instant::now();
        let data = build(effect_data());
        let emb = SEEDS.iter().map(|&s| fit_group(&data, TrainMode::GroupEmb, s)).collect();
        let group = SEEDS.iter().map(|&s| fit_group(&data, TrainMode::Group, s)).collect();
        EffectRuns {
            data,
            emb,
            group,
            seconds: start.elapsed().as_secs_f64(),
        }
    })
}

pub fn transfer() -> &'static Data {
    static D: OnceLock<Data> = OnceLock::new();
    D.get_or_init(|| build(transfer_data()))
}

/// Group-emb model on the moderately mixed data.
pub fn transfer_emb() -> &'static Trained {
    static M: OnceLock<Trained> = OnceLock::new();
    M.get_or_init(|| fit_group(transfer(), TrainMode::GroupEmb, 0))
}

/// Moderately mixed subjects over temporally white noise without the alpha
/// rhythm, so samples and channels outside the planted window carry no
/// information about it.
pub fn localization_data() -> SyntheticSpec {
    SyntheticSpec {
        noise_exponent: 0.0,
        alpha_ratio: 0.0,
        ..transfer_data()
    }
}

/// As above with a 400 ms window, long enough for the 10 Hz carrier to
/// dominate the template spectrum.
pub fn spectral_data() -> SyntheticSpec {
    SyntheticSpec {
        info_window: (0.1, 0.5),
        ..localization_data()
    }
}

pub struct PfiModel {
    pub spec: SyntheticSpec,
    pub prepared: EpochedDataset,
    pub split: FoldSplit,
    pub subjects: Vec<usize>,
    pub model: WavenetClassifier<f32>,
}

fn pfi_fit(spec: SyntheticSpec) -> PfiModel {
    let d = build(spec);
    let mut ts = group_spec(TrainMode::GroupEmb, 0);
    ts.model.hidden_channels = 16;
    let out = train_on(&d.prepared, &d.split, &ts, &d.subjects).unwrap();
    PfiModel {
        spec: d.spec,
        prepared: d.prepared,
        split: d.split,
        subjects: d.subjects,
        model: out.models.into_iter().next().unwrap(),
    }
}

pub fn pfi_model() -> &'static PfiModel {
    static M: OnceLock<PfiModel> = OnceLock::new();
    M.get_or_init(|| pfi_fit(localization_data()))
}

pub fn spectral_model() -> &'static PfiModel {
    static M: OnceLock<PfiModel> = OnceLock::new();
    M.get_or_init(|| pfi_fit(spectral_data()))
}

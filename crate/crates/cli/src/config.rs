use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::ValueEnum;
use groupdecode::dataio::SyntheticSpec;
use groupdecode::experiments::{config_hash, TrainMode, TrainSpec};
use groupdecode::interpret::{FirConfig, PfiConfig};
use groupdecode::preprocess::SplitMode;
use serde::{Deserialize, Serialize};
use serde_json::Value;

pub const CONFIG_FILE: &str = "config.json";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum, Default)]
#[serde(rename_all = "snake_case")]
pub enum Preset {
    /// Small synthetic datasets and budgets that run on a laptop.
    #[default]
    Desk,
    /// Original hyperparameters, for real data in the dataset format.
    Paper,
}

/// Everything a command needs to reproduce its outputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub preset: Preset,
    pub seed: u64,
    /// Dataset directory (absent for `gen`).
    pub data: Option<PathBuf>,
    pub synthetic: SyntheticSpec,
    pub split: SplitMode,
    pub split_seed: u64,
    pub train: TrainSpec,
    pub pfi: PfiConfig,
    pub fir: FirConfig,
}

impl RunConfig {
    pub fn defaults(preset: Preset, mode: TrainMode, linear: bool) -> Self {
        let train = match preset {
            Preset::Desk => TrainSpec::desk(mode, linear),
            Preset::Paper => TrainSpec::paper(mode, linear),
        };
        Self {
            preset,
            seed: 0,
            data: None,
            synthetic: SyntheticSpec::desk(),
            split: SplitMode::default(),
            split_seed: 0,
            train,
            pfi: PfiConfig::default(),
            fir: FirConfig::default(),
        }
    }

    /// Use `seed` for every random stream of the run.
    pub fn set_seed(&mut self, seed: u64) {
        self.seed = seed;
        self.synthetic.seed = seed;
        self.split_seed = seed;
        self.train.seed = seed;
        self.pfi.seed = seed;
        self.fir.seed = seed;
    }

    pub fn hash(&self) -> String {
        let mut c = self.clone();
        c.train.jobs = 1;
        c.pfi.jobs = 1;
        config_hash(&c)
    }

    pub fn save(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir).with_context(|| format!("cannot create {}", dir.display()))?;
        let path = dir.join(CONFIG_FILE);
        fs::write(&path, serde_json::to_string_pretty(self)?)
            .with_context(|| format!("cannot write {}", path.display()))
    }
}

/// Recursively overlay `top` onto `base`; objects merge key by key, any
/// other value replaces.
pub fn merge(base: &mut Value, top: Value) {
    match (base, top) {
        (Value::Object(b), Value::Object(t)) => {
            for (k, v) in t {
                match b.get_mut(&k) {
                    Some(slot) => merge(slot, v),
                    None => {
                        b.insert(k, v);
                    }
                }
            }
        }
        (slot, v) => *slot = v,
    }
}

pub fn read_json(path: &Path) -> Result<Value> {
    let text = fs::read_to_string(path).with_context(|| format!("missing file {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("{} is not valid JSON", path.display()))
}

/// Defaults for the preset and mode, overlaid by `file`, before flags.
///
/// Preset, mode and linearity pick the defaults, so they are resolved first:
/// a flag wins over the file, the file over the built-in default.
pub fn resolve(
    file: Option<&Path>,
    preset: Option<Preset>,
    mode: Option<TrainMode>,
    linear: Option<bool>,
) -> Result<RunConfig> {
    let layer = file.map(read_json).transpose()?;
    let from_file = |ptr: &str| layer.as_ref().and_then(|v| v.pointer(ptr)).cloned();
    let preset = match preset {
        Some(p) => p,
        None => from_file("/preset")
            .map(serde_json::from_value)
            .transpose()
            .context("config schema violation at 'preset'")?
            .unwrap_or_default(),
    };
    let mode = match mode {
        Some(m) => m,
        None => from_file("/train/mode")
            .map(serde_json::from_value)
            .transpose()
            .context("config schema violation at 'train.mode'")?
            .unwrap_or(TrainMode::GroupEmb),
    };
    let linear = linear
        .or_else(|| from_file("/train/linear").and_then(|v| v.as_bool()))
        .unwrap_or(false);
    let defaults = RunConfig::defaults(preset, mode, linear);
    let mut value = serde_json::to_value(&defaults)?;
    if let Some(mut layer) = layer {
        // the resolved choices override whatever the file said
        if let Value::Object(m) = &mut layer {
            m.remove("preset");
            if let Some(Value::Object(t)) = m.get_mut("train") {
                t.remove("mode");
                t.remove("linear");
            }
        }
        merge(&mut value, layer);
    }
    let cfg: RunConfig = serde_json::from_value(value).map_err(|e| {
        anyhow::anyhow!(
            "config schema violation in {}: {e}",
            file.map(|p| p.display().to_string()).unwrap_or_default()
        )
    })?;
    Ok(cfg)
}

/// Load a run's persisted configuration.
pub fn load_run(run: &Path) -> Result<RunConfig> {
    let path = run.join(CONFIG_FILE);
    if !path.exists() {
        bail!("missing file {} (is {} a run directory?)", path.display(), run.display());
    }
    resolve(Some(&path), None, None, None)
}

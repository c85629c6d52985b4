//! Dataset directory format.
//!
//! ```text
//! <dir>/manifest.json      shape, sampling, subjects, layout, per-file CRC32
//! <dir>/sub-<id>.f32       little-endian f32, [class][trial][channel][time]
//! ```

use std::fs;
use std::path::Path;

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};

use crate::dataio::{ChannelLayout, EpochedDataset, Trial};
use crate::error::{Error, Result};

pub const FORMAT_VERSION: u32 = 1;
pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Manifest {
    pub version: u32,
    pub n_subjects: usize,
    pub n_classes: usize,
    pub trials_per_class: usize,
    pub n_channels: usize,
    pub n_timesteps: usize,
    pub sfreq: f64,
    pub t_offset: f64,
    pub subjects: Vec<String>,
    pub layout: IndexMap<String, [f64; 2]>,
    /// CRC32 of each payload file, keyed by file name.
    pub checksums: IndexMap<String, u32>,
}

pub fn subject_file_name(id: &str) -> String {
    format!("sub-{id}.f32")
}

fn encode_subject(ds: &EpochedDataset, s: usize) -> Vec<u8> {
    let n = ds.n_classes * ds.trials_per_class() * ds.n_channels() * ds.n_timesteps();
    let mut buf = Vec::with_capacity(n * 4);
    for class in 0..ds.n_classes {
        for tr in ds.trials(s, class) {
            for v in tr.data() {
                buf.extend_from_slice(&v.to_le_bytes());
            }
        }
    }
    buf
}

pub fn write_dataset(ds: &EpochedDataset, dir: impl AsRef<Path>) -> Result<()> {
    let dir = dir.as_ref();
    ds.validate()?;
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut checksums = IndexMap::new();
    for (s, id) in ds.subjects.iter().enumerate() {
        let name = subject_file_name(id);
        let bytes = encode_subject(ds, s);
        checksums.insert(name.clone(), crc32fast::hash(&bytes));
        let path = dir.join(&name);
        fs::write(&path, &bytes).map_err(|e| Error::io(&path, e))?;
    }
    let manifest = Manifest {
        version: FORMAT_VERSION,
        n_subjects: ds.n_subjects(),
        n_classes: ds.n_classes,
        trials_per_class: ds.trials_per_class(),
        n_channels: ds.n_channels(),
        n_timesteps: ds.n_timesteps(),
        sfreq: ds.sfreq,
        t_offset: ds.t_offset,
        subjects: ds.subjects.clone(),
        layout: ds
            .layout
            .ids()
            .iter()
            .cloned()
            .zip(ds.layout.positions().iter().copied())
            .collect(),
        checksums,
    };
    let path = dir.join(MANIFEST_FILE);
    let json = serde_json::to_string_pretty(&manifest)?;
    fs::write(&path, json).map_err(|e| Error::io(&path, e))?;
    Ok(())
}

pub fn read_manifest(dir: impl AsRef<Path>) -> Result<Manifest> {
    let path = dir.as_ref().join(MANIFEST_FILE);
    let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    let manifest: Manifest = serde_json::from_str(&text)?;
    check_manifest(&manifest)?;
    Ok(manifest)
}

fn check_manifest(m: &Manifest) -> Result<()> {
    let field = |f: &str, msg: String| {
        Err(Error::Manifest {
            field: f.to_string(),
            message: msg,
        })
    };
    if m.version != FORMAT_VERSION {
        return field("version", format!("unsupported version {}", m.version));
    }
    if m.layout.len() != m.n_channels {
        return Err(Error::LayoutLengthMismatch {
            expected: m.n_channels,
            actual: m.layout.len(),
        });
    }
    if m.subjects.len() != m.n_subjects {
        return field(
            "subjects",
            format!("{} ids listed, n_subjects is {}", m.subjects.len(), m.n_subjects),
        );
    }
    for id in &m.subjects {
        if !m.checksums.contains_key(&subject_file_name(id)) {
            return field("checksums", format!("no checksum for subject {id}"));
        }
    }
    if m.n_classes == 0 || m.trials_per_class == 0 || m.n_timesteps == 0 {
        return field("shape", "zero-sized dimension".into());
    }
    Ok(())
}

pub fn read_dataset(dir: impl AsRef<Path>) -> Result<EpochedDataset> {
    let dir = dir.as_ref();
    let m = read_manifest(dir)?;
    let layout = ChannelLayout::new(
        m.layout.keys().cloned().collect(),
        m.layout.values().copied().collect(),
    )?;
    let (c, t) = (m.n_channels, m.n_timesteps);
    let per_trial = c * t;
    let expected = (m.n_classes * m.trials_per_class * per_trial * 4) as u64;
    let mut all = Vec::with_capacity(m.n_subjects);
    for id in &m.subjects {
        let name = subject_file_name(id);
        let path = dir.join(&name);
        let bytes = fs::read(&path).map_err(|e| Error::io(&path, e))?;
        if bytes.len() as u64 != expected {
            return Err(Error::PayloadSizeMismatch {
                file: name,
                expected,
                actual: bytes.len() as u64,
            });
        }
        let crc = crc32fast::hash(&bytes);
        let want = m.checksums[&name];
        if crc != want {
            return Err(Error::ChecksumMismatch {
                file: name,
                expected: want,
                actual: crc,
            });
        }
        let values: Vec<f32> = bytes
            .chunks_exact(4)
            .map(|b| f32::from_le_bytes([b[0], b[1], b[2], b[3]]))
            .collect();
        let mut by_class = Vec::with_capacity(m.n_classes);
        let mut chunks = values.chunks_exact(per_trial);
        for _ in 0..m.n_classes {
            let trials = (0..m.trials_per_class)
                .map(|_| Trial::new(c, t, chunks.next().expect("size checked").to_vec()))
                .collect::<Result<Vec<_>>>()?;
            by_class.push(trials);
        }
        all.push(by_class);
    }
    EpochedDataset::new(m.subjects, m.n_classes, m.sfreq, m.t_offset, layout, all)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataio::{generate_synthetic, SyntheticSpec};

    fn tiny() -> SyntheticSpec {
        SyntheticSpec {
            n_subjects: 2,
            n_classes: 2,
            trials_per_class: 3,
            n_channels: 32,
            n_timesteps: 64,
            info_window: (0.0, 0.05),
            ..SyntheticSpec::desk()
        }
    }

    #[test]
    fn round_trip() {
        let ds = generate_synthetic(&tiny()).unwrap();
        let dir = tempfile::tempdir().unwrap();
        write_dataset(&ds, dir.path()).unwrap();
        assert_eq!(read_dataset(dir.path()).unwrap(), ds);
    }

    #[test]
    fn truncated_payload() {
        let ds = generate_synthetic(&tiny()).unwrap();
        let dir = tempfile::tempdir().unwrap();
        write_dataset(&ds, dir.path()).unwrap();
        let p = dir.path().join("sub-01.f32");
        let mut b = fs::read(&p).unwrap();
        b.pop();
        fs::write(&p, b).unwrap();
        let err = read_dataset(dir.path()).unwrap_err();
        assert!(matches!(err, Error::PayloadSizeMismatch { .. }));
        assert!(err.to_string().contains("payload size mismatch"));
    }

    #[test]
    fn layout_shorter_than_channel_count() {
        let ds = generate_synthetic(&tiny()).unwrap();
        let dir = tempfile::tempdir().unwrap();
        write_dataset(&ds, dir.path()).unwrap();
        let mut m = read_manifest(dir.path()).unwrap();
        m.layout.pop();
        fs::write(
            dir.path().join(MANIFEST_FILE),
            serde_json::to_string(&m).unwrap(),
        )
        .unwrap();
        let err = read_dataset(dir.path()).unwrap_err();
        assert!(err.to_string().contains("layout length mismatch"), "{err}");
    }

    #[test]
    fn corrupted_payload_fails_checksum() {
        let ds = generate_synthetic(&tiny()).unwrap();
        let dir = tempfile::tempdir().unwrap();
        write_dataset(&ds, dir.path()).unwrap();
        let p = dir.path().join("sub-02.f32");
        let mut b = fs::read(&p).unwrap();
        b[10] ^= 0xff;
        fs::write(&p, b).unwrap();
        assert!(matches!(
            read_dataset(dir.path()),
            Err(Error::ChecksumMismatch { .. })
        ));
    }
}

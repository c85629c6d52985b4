use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::experiments::ExperimentReport;

/// Write `report.json` and `subjects.csv` into `dir`.
pub fn write_report(report: &ExperimentReport, dir: impl AsRef<Path>) -> Result<()> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let path = dir.join("report.json");
    fs::write(&path, serde_json::to_string_pretty(report)?).map_err(|e| Error::io(&path, e))?;
    write_subject_csv(report, dir.join("subjects.csv"))
}

pub fn read_report(path: impl AsRef<Path>) -> Result<ExperimentReport> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Ok(serde_json::from_str(&text)?)
}

/// Per-subject table: `subject,accuracy,n_trials`.
pub fn write_subject_csv(report: &ExperimentReport, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let io = |e: csv::Error| Error::io(path, e.into());
    let mut w = csv::Writer::from_path(path).map_err(io)?;
    w.write_record(["subject", "accuracy", "n_trials"]).map_err(io)?;
    for s in &report.subjects {
        w.write_record([s.subject.clone(), s.accuracy.to_string(), s.labels.len().to_string()])
            .map_err(io)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

//! Acceptance suite: one line per criterion, non-zero exit if any fails.
//!
//! Pass criterion numbers as arguments to run a subset, e.g.
//! `cargo test --test acceptance -- 4 5`.

mod experiments;
mod fixtures;
mod formats;
mod interpret;
mod model;

use std::io::Write;
use std::panic::{self, AssertUnwindSafe};
use std::process::ExitCode;
use std::time::Instant;

/// Result of one criterion: whether it holds and the measured quantities.
pub struct Verdict {
    pub pass: bool,
    pub detail: String,
}

impl Verdict {
    pub fn new(pass: bool, detail: impl Into<String>) -> Self {
        Self {
            pass,
            detail: detail.into(),
        }
    }
}

type Check = fn() -> Verdict;

const CRITERIA: &[(u32, &str, Check)] = &[
    (1, "gradient correctness", model::gradients),
    (2, "architecture arithmetic", model::architecture),
    (3, "linear homogeneity and additivity", model::linearity),
    (4, "embedding effect", experiments::embedding_effect),
    (5, "embedding ablation", experiments::ablation),
    (6, "finetuning vs scratch", experiments::finetuning),
    (7, "leave-one-subject-out shape", experiments::loso),
    (8, "temporal PFI localization", interpret::temporal),
    (9, "spatial PFI localization", interpret::spatial),
    (10, "spectral machinery", interpret::spectral),
    (11, "kernel FIR", interpret::fir),
    (12, "Wilcoxon exactness", formats::wilcoxon),
    (13, "determinism", experiments::determinism),
    (14, "format round trip", formats::round_trip),
];

fn main() -> ExitCode {
    let wanted: Vec<u32> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let mut failed = Vec::new();
    let mut err = std::io::stderr();
    for &(id, name, check) in CRITERIA {
        if !wanted.is_empty() && !wanted.contains(&id) {
            continue;
        }
        let start = Instant::now();
        let verdict = panic::catch_unwind(AssertUnwindSafe(check))
            .unwrap_or_else(|e| {
                let msg = e
                    .downcast_ref::<String>()
                    .cloned()
                    .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                    .unwrap_or_default();
                Verdict::new(false, format!("panicked: {msg}"))
            });
        let status = if verdict.pass { "PASS" } else { "FAIL" };
        let _ = writeln!(
            err,
            "criterion {id:2} {name:<36} {status} ({:.0}s) {}",
            start.elapsed().as_secs_f64(),
            verdict.detail
        );
        if !verdict.pass {
            failed.push(id);
        }
    }
    if failed.is_empty() {
        ExitCode::SUCCESS
    } else {
        let _ = writeln!(err, "failed criteria: {failed:?}");
        ExitCode::FAILURE
    }
}

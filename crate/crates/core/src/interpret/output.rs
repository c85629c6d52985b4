use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::interpret::{CiMethod, PfiAxis, PfiResult, Psd};

fn csv_err(path: &Path, e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(path, io),
        other => Error::InvalidArgument(format!("writing {}: {other:?}", path.display())),
    }
}

/// Long-form CSV of a PFI result with 95% intervals over repeats.
pub fn write_pfi_csv(result: &PfiResult, method: CiMethod, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_err(path, e))?;
    let mean = result.mean();
    let ci = result.intervals(0.95, method);
    let f = |v: f64| format!("{v}");
    let mut rows: Vec<Vec<String>> = Vec::new();
    let header: &[&str] = match &result.axis {
        PfiAxis::Time { times_s } => {
            for (i, t) in times_s.iter().enumerate() {
                rows.push(vec![f(*t), f(mean[i]), f(ci[i].0), f(ci[i].1)]);
            }
            &["time_s", "mean_loss", "ci_lo", "ci_hi"]
        }
        PfiAxis::Channels { labels, positions, .. } => {
            for (i, l) in labels.iter().enumerate() {
                let [x, y] = positions[i];
                rows.push(vec![l.clone(), f(x), f(y), f(mean[i]), f(ci[i].0), f(ci[i].1)]);
            }
            &["channel", "x", "y", "mean_loss", "ci_lo", "ci_hi"]
        }
        PfiAxis::Bands { bands } => {
            for (i, (lo, hi)) in bands.iter().enumerate() {
                rows.push(vec![f(*lo), f(*hi), f(mean[i]), f(ci[i].0), f(ci[i].1)]);
            }
            &["band_lo_hz", "band_hi_hz", "mean_loss", "ci_lo", "ci_hi"]
        }
        PfiAxis::ChannelTime { labels, times_s } => {
            let mut i = 0;
            for l in labels {
                for t in times_s {
                    rows.push(vec![l.clone(), f(*t), f(mean[i]), f(ci[i].0), f(ci[i].1)]);
                    i += 1;
                }
            }
            &["channel", "time_s", "mean_loss", "ci_lo", "ci_hi"]
        }
        PfiAxis::ChannelBand { labels, bands } => {
            let mut i = 0;
            for l in labels {
                for (lo, hi) in bands {
                    rows.push(vec![l.clone(), f(*lo), f(*hi), f(mean[i]), f(ci[i].0), f(ci[i].1)]);
                    i += 1;
                }
            }
            &["channel", "band_lo_hz", "band_hi_hz", "mean_loss", "ci_lo", "ci_hi"]
        }
    };
    w.write_record(header).map_err(|e| csv_err(path, e))?;
    for r in rows {
        w.write_record(&r).map_err(|e| csv_err(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn write_psd_csv(psd: &Psd, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_err(path, e))?;
    w.write_record(["freq_hz", "power"]).map_err(|e| csv_err(path, e))?;
    for (f, p) in psd.freqs.iter().zip(&psd.power) {
        w.write_record([f.to_string(), p.to_string()]).map_err(|e| csv_err(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

fn range(v: &[f64]) -> (f64, f64) {
    let lo = v.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = v.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if !lo.is_finite() || !hi.is_finite() {
        (0.0, 1.0)
    } else if hi > lo {
        (lo, hi)
    } else {
        (lo - 0.5, hi + 0.5)
    }
}

/// SVG 1.1 line plot, with an optional shaded band `(lower, upper)` per point.
pub fn line_plot_svg(x: &[f64], y: &[f64], band: Option<&[(f64, f64)]>, title: &str, xlabel: &str) -> String {
    let (w, h, m) = (640.0, 360.0, 50.0);
    let (x0, x1) = range(x);
    let mut all: Vec<f64> = y.to_vec();
    if let Some(b) = band {
        all.extend(b.iter().flat_map(|&(lo, hi)| [lo, hi]));
    }
    let (y0, y1) = range(&all);
    let px = |v: f64| m + (v - x0) / (x1 - x0) * (w - 2.0 * m);
    let py = |v: f64| h - m - (v - y0) / (y1 - y0) * (h - 2.0 * m);
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<?xml version="1.0" encoding="UTF-8"?>
<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{w}" height="{h}">
<rect width="100%" height="100%" fill="white"/>
<text x="{}" y="20" text-anchor="middle" font-family="sans-serif" font-size="14">{}</text>
<text x="{}" y="{}" text-anchor="middle" font-family="sans-serif" font-size="12">{}</text>"#,
        w / 2.0,
        escape(title),
        w / 2.0,
        h - 10.0,
        escape(xlabel)
    );
    if let Some(b) = band {
        let upper = x.iter().zip(b).map(|(&xv, &(_, hi))| format!("{:.2},{:.2}", px(xv), py(hi)));
        let lower = x.iter().zip(b).rev().map(|(&xv, &(lo, _))| format!("{:.2},{:.2}", px(xv), py(lo)));
        let pts: Vec<String> = upper.chain(lower).collect();
        let _ = writeln!(s, r#"<polygon points="{}" fill="steelblue" fill-opacity="0.25" stroke="none"/>"#, pts.join(" "));
    }
    if y0 < 0.0 && y1 > 0.0 {
        let _ = writeln!(
            s,
            r#"<line x1="{m}" y1="{0:.2}" x2="{1}" y2="{0:.2}" stroke="gray" stroke-dasharray="4,3"/>"#,
            py(0.0),
            w - m
        );
    }
    let pts: Vec<String> = x.iter().zip(y).map(|(&a, &b)| format!("{:.2},{:.2}", px(a), py(b))).collect();
    let _ = writeln!(s, r#"<polyline points="{}" fill="none" stroke="steelblue" stroke-width="2"/>"#, pts.join(" "));
    let _ = writeln!(
        s,
        r#"<rect x="{m}" y="{m}" width="{}" height="{}" fill="none" stroke="black"/>"#,
        w - 2.0 * m,
        h - 2.0 * m
    );
    for (v, anchor_y) in [(y0, py(y0)), (y1, py(y1))] {
        let _ = writeln!(
            s,
            r#"<text x="{}" y="{anchor_y:.2}" text-anchor="end" font-family="sans-serif" font-size="10">{v:.3}</text>"#,
            m - 4.0
        );
    }
    for (v, anchor_x) in [(x0, px(x0)), (x1, px(x1))] {
        let _ = writeln!(
            s,
            r#"<text x="{anchor_x:.2}" y="{}" text-anchor="middle" font-family="sans-serif" font-size="10">{v:.3}</text>"#,
            h - m + 14.0
        );
    }
    s.push_str("</svg>\n");
    s
}

/// SVG 1.1 sensor map: one circle per channel at its layout position,
/// coloured from white (minimum) to red (maximum).
pub fn sensor_map_svg(positions: &[[f64; 2]], values: &[f64], labels: &[String], title: &str) -> String {
    let size = 480.0;
    let xs: Vec<f64> = positions.iter().map(|p| p[0]).collect();
    let ys: Vec<f64> = positions.iter().map(|p| p[1]).collect();
    let (x0, x1) = range(&xs);
    let (y0, y1) = range(&ys);
    let span = (x1 - x0).max(y1 - y0);
    let (v0, v1) = range(values);
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<?xml version="1.0" encoding="UTF-8"?>
<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{size}" height="{}">
<rect width="100%" height="100%" fill="white"/>
<text x="{}" y="20" text-anchor="middle" font-family="sans-serif" font-size="14">{}</text>"#,
        size + 30.0,
        size / 2.0,
        escape(title)
    );
    for ((p, &v), l) in positions.iter().zip(values).zip(labels) {
        let cx = 40.0 + (p[0] - x0) / span * (size - 80.0);
        let cy = 70.0 + (y1 - p[1]) / span * (size - 80.0);
        let a = ((v - v0) / (v1 - v0)).clamp(0.0, 1.0);
        let gb = (255.0 * (1.0 - a)).round() as u8;
        let _ = writeln!(
            s,
            r#"<circle cx="{cx:.2}" cy="{cy:.2}" r="9" fill="rgb(255,{gb},{gb})" stroke="black"><title>{} {v:.4}</title></circle>"#,
            escape(l)
        );
    }
    s.push_str("</svg>\n");
    s
}

use serde::{Deserialize, Serialize};
use statrs::distribution::{Binomial, ContinuousCDF, DiscreteCDF, Normal};

use crate::error::{Error, Result};
use crate::stats::{Sided, StatsBlock};

/// Largest number of non-zero differences handled by the exact distribution.
const EXACT_MAX_N: usize = 20;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WilcoxonResult {
    /// Sum of the ranks of the positive differences.
    pub statistic: f64,
    pub p: f64,
    /// Differences left after dropping zeros.
    pub n: usize,
    pub sided: Sided,
    pub exact: bool,
}

impl WilcoxonResult {
    pub fn block(&self) -> StatsBlock {
        StatsBlock {
            test: "wilcoxon_signed_rank".into(),
            statistic: self.statistic,
            p: self.p,
            n: self.n,
            sided: self.sided,
            correction: None,
        }
    }
}

/// Midranks of `|d|` (1-based).
fn abs_midranks(d: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..d.len()).collect();
    order.sort_by(|&a, &b| d[a].abs().total_cmp(&d[b].abs()));
    let mut ranks = vec![0.0; d.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && d[order[j + 1]].abs() == d[order[i]].abs() {
            j += 1;
        }
        let r = (i + j) as f64 / 2.0 + 1.0;
        for &k in &order[i..=j] {
            ranks[k] = r;
        }
        i = j + 1;
    }
    ranks
}

fn nonzero_differences(a: &[f64], b: &[f64]) -> Result<Vec<f64>> {
    if a.len() != b.len() {
        return Err(Error::Shape(format!("paired samples of length {} and {}", a.len(), b.len())));
    }
    if a.iter().chain(b).any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("paired sample".into()));
    }
    let d: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).filter(|&v| v != 0.0).collect();
    if d.is_empty() {
        return Err(Error::TestUndefined("all paired differences are zero".into()));
    }
    Ok(d)
}

fn tail_p(lower: f64, upper: f64, sided: Sided) -> f64 {
    match sided {
        Sided::Two => (2.0 * lower.min(upper)).min(1.0),
        Sided::Greater => upper,
        Sided::Less => lower,
    }
}

/// Wilcoxon signed-rank test on the paired differences `a − b`.
///
/// Zero differences are dropped and tied magnitudes receive midranks. Up to
/// 20 remaining pairs the null distribution over all sign assignments is
/// computed exactly; beyond that a tie-corrected normal approximation is
/// used.
pub fn wilcoxon_signed_rank(a: &[f64], b: &[f64], sided: Sided) -> Result<WilcoxonResult> {
    let d = nonzero_differences(a, b)?;
    let ranks = abs_midranks(&d);
    let n = d.len();
    let w: f64 = d.iter().zip(&ranks).filter(|(v, _)| **v > 0.0).map(|(_, r)| r).sum();

    let (lower, upper, exact) = if n <= EXACT_MAX_N {
        // midranks are multiples of 1/2, so doubled ranks are integers
        let doubled: Vec<usize> = ranks.iter().map(|r| (2.0 * r).round() as usize).collect();
        let total: usize = doubled.iter().sum();
        let mut counts = vec![0f64; total + 1];
        counts[0] = 1.0;
        let mut reach = 0;
        for &r in &doubled {
            for s in (0..=reach).rev() {
                let c = counts[s];
                if c != 0.0 {
                    counts[s + r] += c;
                }
            }
            reach += r;
        }
        let w2 = (2.0 * w).round() as usize;
        let all = 2f64.powi(n as i32);
        let lower: f64 = counts[..=w2].iter().sum::<f64>() / all;
        let upper: f64 = counts[w2..].iter().sum::<f64>() / all;
        (lower, upper, true)
    } else {
        let nf = n as f64;
        let mean = nf * (nf + 1.0) / 4.0;
        let mut ties = 0.0;
        let mut sorted = ranks.clone();
        sorted.sort_by(f64::total_cmp);
        let mut i = 0;
        while i < sorted.len() {
            let j = sorted[i..].iter().take_while(|&&r| r == sorted[i]).count();
            let t = j as f64;
            ties += t * t * t - t;
            i += j;
        }
        let var = nf * (nf + 1.0) * (2.0 * nf + 1.0) / 24.0 - ties / 48.0;
        let z = (w - mean) / var.sqrt();
        let norm = Normal::standard();
        (norm.cdf(z), norm.sf(z), false)
    };
    Ok(WilcoxonResult {
        statistic: w,
        p: tail_p(lower, upper, sided),
        n,
        sided,
        exact,
    })
}

/// Exact p-value by enumerating all `2^n` sign patterns; for checking
/// [`wilcoxon_signed_rank`] on small samples.
pub fn wilcoxon_exact_brute_force(a: &[f64], b: &[f64], sided: Sided) -> Result<f64> {
    let d = nonzero_differences(a, b)?;
    let ranks = abs_midranks(&d);
    let n = d.len();
    if n > 24 {
        return Err(Error::InvalidArgument("brute force limited to 24 pairs".into()));
    }
    let w: f64 = d.iter().zip(&ranks).filter(|(v, _)| **v > 0.0).map(|(_, r)| r).sum();
    let (mut le, mut ge) = (0u64, 0u64);
    for mask in 0u64..(1 << n) {
        let s: f64 = (0..n).filter(|i| mask >> i & 1 == 1).map(|i| ranks[i]).sum();
        if s <= w + 1e-9 {
            le += 1;
        }
        if s >= w - 1e-9 {
            ge += 1;
        }
    }
    let all = (1u64 << n) as f64;
    Ok(tail_p(le as f64 / all, ge as f64 / all, sided))
}

/// Exact sign test on `a − b` (zeros dropped).
pub fn sign_test(a: &[f64], b: &[f64], sided: Sided) -> Result<StatsBlock> {
    let d = nonzero_differences(a, b)?;
    let n = d.len() as u64;
    let pos = d.iter().filter(|&&v| v > 0.0).count() as u64;
    let bin = Binomial::new(0.5, n).expect("valid binomial");
    let lower = bin.cdf(pos);
    let upper = if pos == 0 { 1.0 } else { bin.sf(pos - 1) };
    Ok(StatsBlock {
        test: "sign".into(),
        statistic: pos as f64,
        p: tail_p(lower, upper, sided),
        n: n as usize,
        sided,
        correction: None,
    })
}

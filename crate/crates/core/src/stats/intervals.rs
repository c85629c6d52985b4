use rand::Rng;
use statrs::distribution::{Beta, ContinuousCDF, StudentsT};

use crate::error::{Error, Result};
use crate::seeding;
use crate::stats::{mean, sample_std};

fn check_level(level: f64) -> Result<()> {
    if !(level > 0.0 && level < 1.0) {
        return Err(Error::InvalidArgument(format!("confidence level {level} outside (0, 1)")));
    }
    Ok(())
}

/// Quantile of Student's t with `df` degrees of freedom.
pub fn t_quantile(df: f64, p: f64) -> f64 {
    StudentsT::new(0.0, 1.0, df).expect("df > 0").inverse_cdf(p)
}

/// Student-t interval `mean ± t_{n−1,(1+level)/2} · s / √n`.
pub fn confidence_interval(values: &[f64], level: f64) -> Result<(f64, f64)> {
    check_level(level)?;
    if values.len() < 2 {
        return Err(Error::InvalidArgument(format!(
            "confidence interval needs at least 2 values, got {}",
            values.len()
        )));
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("confidence interval input".into()));
    }
    let n = values.len() as f64;
    let m = mean(values);
    let s = sample_std(values);
    if s == 0.0 {
        return Ok((m, m));
    }
    let half = t_quantile(n - 1.0, 0.5 + level / 2.0) * s / n.sqrt();
    Ok((m - half, m + half))
}

/// Clopper–Pearson interval for `k` successes out of `n`.
pub fn binomial_ci(k: u64, n: u64, level: f64) -> Result<(f64, f64)> {
    check_level(level)?;
    if n == 0 || k > n {
        return Err(Error::InvalidArgument(format!("{k} successes out of {n}")));
    }
    let alpha = 1.0 - level;
    let (kf, nf) = (k as f64, n as f64);
    let lo = if k == 0 {
        0.0
    } else {
        Beta::new(kf, nf - kf + 1.0).expect("positive shape").inverse_cdf(alpha / 2.0)
    };
    let hi = if k == n {
        1.0
    } else {
        Beta::new(kf + 1.0, nf - kf).expect("positive shape").inverse_cdf(1.0 - alpha / 2.0)
    };
    Ok((lo, hi))
}

/// Percentile bootstrap interval of the mean.
pub fn bootstrap_ci(values: &[f64], level: f64, n_boot: usize, seed: u64) -> Result<(f64, f64)> {
    check_level(level)?;
    if values.len() < 2 || n_boot == 0 {
        return Err(Error::InvalidArgument("bootstrap needs ≥ 2 values and ≥ 1 resample".into()));
    }
    let mut rng = seeding::stream(seed, &[0xb007]);
    let n = values.len();
    let mut means: Vec<f64> = (0..n_boot)
        .map(|_| (0..n).map(|_| values[rng.random_range(0..n)]).sum::<f64>() / n as f64)
        .collect();
    means.sort_by(f64::total_cmp);
    let q = |p: f64| means[((p * n_boot as f64).floor() as usize).min(n_boot - 1)];
    Ok((q((1.0 - level) / 2.0), q((1.0 + level) / 2.0)))
}

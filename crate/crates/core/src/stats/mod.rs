//! Accuracy, signed-rank and sign tests, confidence intervals and
//! correlations.

mod correlation;
mod intervals;
mod wilcoxon;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use correlation::{pearson_r, spearman_rho, Correlation};
pub use intervals::{binomial_ci, bootstrap_ci, confidence_interval, t_quantile};
pub use wilcoxon::{sign_test, wilcoxon_exact_brute_force, wilcoxon_signed_rank, WilcoxonResult};

/// Alternative hypothesis of a paired test on `a − b`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Sided {
    #[default]
    Two,
    /// `a − b` tends to be positive.
    Greater,
    /// `a − b` tends to be negative.
    Less,
}

/// Serializable summary of a test as it appears in reports.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StatsBlock {
    pub test: String,
    pub statistic: f64,
    pub p: f64,
    pub n: usize,
    pub sided: Sided,
    pub correction: Option<String>,
}

pub fn accuracy(predictions: &[usize], labels: &[usize]) -> Result<f64> {
    if predictions.len() != labels.len() {
        return Err(Error::Shape(format!(
            "{} predictions for {} labels",
            predictions.len(),
            labels.len()
        )));
    }
    if labels.is_empty() {
        return Err(Error::InvalidArgument("accuracy of an empty set".into()));
    }
    let correct = predictions.iter().zip(labels).filter(|(p, l)| p == l).count();
    Ok(correct as f64 / labels.len() as f64)
}

/// Bonferroni-adjusted p-value for a family of `m` tests.
pub fn bonferroni(p: f64, m: usize) -> f64 {
    (p * m as f64).min(1.0)
}

pub fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

pub fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        (v[n / 2 - 1] + v[n / 2]) / 2.0
    }
}

/// Sample standard deviation (`n − 1` denominator).
pub fn sample_std(values: &[f64]) -> f64 {
    let m = mean(values);
    let ss: f64 = values.iter().map(|v| (v - m).powi(2)).sum();
    (ss / (values.len() as f64 - 1.0)).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    #[test]
    fn accuracy_by_count() {
        let labels: Vec<usize> = (0..118).collect();
        let preds: Vec<usize> = (0..118).map(|i| if i < 59 { i } else { 0 }).collect();
        assert_eq!(accuracy(&preds, &labels).unwrap(), 0.5);
        assert_eq!(accuracy(&labels, &labels).unwrap(), 1.0);
        assert!(accuracy(&[], &[]).is_err());
    }

    #[test]
    fn random_guessing_is_at_chance() {
        let mut rng = crate::seeding::stream(3, &[]);
        let n = 10_000;
        let labels: Vec<usize> = (0..n).map(|_| rng.random_range(0..118)).collect();
        let preds: Vec<usize> = (0..n).map(|_| rng.random_range(0..118)).collect();
        let acc = accuracy(&preds, &labels).unwrap();
        let k = (acc * n as f64).round() as u64;
        // chance lies inside the observed 99% interval
        let (lo, hi) = binomial_ci(k, n as u64, 0.99).unwrap();
        assert!(lo <= 1.0 / 118.0 && 1.0 / 118.0 <= hi, "{acc} ({lo}, {hi})");
    }

    #[test]
    fn median_even_odd() {
        assert_eq!(median(&[3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(&[4.0, 1.0, 2.0, 3.0]), 2.5);
    }
}

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::WavenetClassifier;
use crate::stats::{pearson_r, Correlation};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingDiagnostics {
    /// Variance along each principal component, descending.
    pub variances: Vec<f64>,
    /// Unit loading vectors (length `E`), one per component.
    pub components: Vec<Vec<f64>>,
    /// `[subject][component]` projections of the centred table.
    pub scores: Vec<Vec<f64>>,
    /// Correlation of each component's scores with the accuracies; `None`
    /// for components without variance.
    pub correlations: Vec<Option<Correlation>>,
    /// Every component has zero variance (all rows identical).
    pub degenerate: bool,
}

/// Centred PCA of the `S × E` embedding table and the Pearson correlation
/// of every component with the per-subject accuracies.
pub fn embedding_diagnostics(model: &WavenetClassifier<f32>, accuracies: &[f64]) -> Result<EmbeddingDiagnostics> {
    let cfg = model.config();
    let table = model
        .embeddings()
        .ok_or_else(|| Error::InvalidArgument("model has no subject embeddings".into()))?;
    let (s, e) = (cfg.n_subjects, cfg.embedding_size);
    if s < 3 {
        return Err(Error::TooFewSamples(format!("embedding PCA needs at least 3 subjects, got {s}")));
    }
    if accuracies.len() != s {
        return Err(Error::Shape(format!("{} accuracies for {s} subjects", accuracies.len())));
    }
    let mut x = DMatrix::from_fn(s, e, |i, j| table[i * e + j] as f64);
    for j in 0..e {
        let mu = x.column(j).mean();
        x.column_mut(j).add_scalar_mut(-mu);
    }
    let cov = x.transpose() * &x / (s as f64 - 1.0);
    let eig = SymmetricEigen::new(cov);
    let mut order: Vec<usize> = (0..e).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));

    let total: f64 = eig.eigenvalues.iter().map(|v| v.max(0.0)).sum();
    let tol = 1e-12 * total.max(1e-300);
    let variances: Vec<f64> = order.iter().map(|&k| eig.eigenvalues[k].max(0.0)).collect();
    let components: Vec<Vec<f64>> = order
        .iter()
        .map(|&k| eig.eigenvectors.column(k).iter().copied().collect())
        .collect();
    let scores: Vec<Vec<f64>> = (0..s)
        .map(|i| {
            components
                .iter()
                .map(|v| (0..e).map(|j| x[(i, j)] * v[j]).sum())
                .collect()
        })
        .collect();
    let degenerate = total <= 0.0 || variances.iter().all(|&v| v <= tol);
    let correlations = (0..e)
        .map(|k| {
            if degenerate || variances[k] <= tol {
                return None;
            }
            let col: Vec<f64> = scores.iter().map(|r| r[k]).collect();
            pearson_r(&col, accuracies).ok()
        })
        .collect();
    Ok(EmbeddingDiagnostics {
        variances,
        components,
        scores,
        correlations,
        degenerate,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::ModelConfig;

    fn model_with(rows: &[Vec<f32>]) -> WavenetClassifier<f32> {
        let cfg = ModelConfig {
            n_input_channels: 2,
            n_classes: 2,
            n_timesteps: 4,
            n_conv_layers: 1,
            hidden_channels: 2,
            fc_hidden: 2,
            embedding_size: rows[0].len(),
            n_subjects: rows.len(),
            ..ModelConfig::default()
        };
        let mut m = WavenetClassifier::zeros(cfg).unwrap();
        for (i, r) in rows.iter().enumerate() {
            m.set_embedding_row(i, r).unwrap();
        }
        m
    }

    #[test]
    fn identical_rows_are_degenerate() {
        let m = model_with(&vec![vec![0.3, -1.0, 2.0]; 4]);
        let d = embedding_diagnostics(&m, &[0.1, 0.2, 0.3, 0.4]).unwrap();
        assert!(d.degenerate);
        assert!(d.variances.iter().all(|&v| v == 0.0));
        assert!(d.correlations.iter().all(Option::is_none));
    }

    #[test]
    fn rank_one_table_tracks_accuracy() {
        let acc = [0.2, 0.5, 0.35, 0.9, 0.6];
        let dir = [0.6f32, -0.8, 0.0];
        let rows: Vec<Vec<f32>> = acc.iter().map(|&a| dir.iter().map(|d| d * a as f32).collect()).collect();
        let d = embedding_diagnostics(&model_with(&rows), &acc).unwrap();
        assert!(!d.degenerate);
        let r = d.correlations[0].as_ref().unwrap().r;
        assert!((r.abs() - 1.0).abs() < 1e-6, "{r}");
        assert!(d.variances[1] < 1e-9 * d.variances[0]);
    }

    #[test]
    fn too_few_subjects() {
        let m = model_with(&[vec![1.0, 0.0], vec![0.0, 1.0]]);
        assert!(matches!(embedding_diagnostics(&m, &[0.1, 0.2]), Err(Error::TooFewSamples(_))));
    }
}

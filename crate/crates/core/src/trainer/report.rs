use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::models::{ActionVector, FitOutcome};
use crate::tensor::Tensor;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PhaseMetrics {
    pub train_accuracy: f64,
    pub val_accuracy: f64,
    pub test_accuracy: f64,
    pub best_epoch: usize,
}

impl PhaseMetrics {
    pub fn from_fit<M>(fit: &FitOutcome<M>) -> Self {
        Self {
            train_accuracy: fit.train_accuracy,
            val_accuracy: fit.val_accuracy,
            test_accuracy: fit.test_accuracy,
            best_epoch: fit.best_epoch,
        }
    }
}

/// Summary of the derived per-node actions. `histogram[i]` counts actions
/// in `[1+i, 2+i)`, the last bin also holding `k_max` itself.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ActionStats {
    pub min: f64,
    pub mean: f64,
    pub max: f64,
    pub histogram: Vec<usize>,
}

impl ActionStats {
    pub fn from_actions(actions: &ActionVector) -> Self {
        let v = actions.values();
        let bins = (actions.k_max() - 1).max(1);
        let mut histogram = vec![0; bins];
        for &a in v {
            histogram[((a - 1.0).floor() as usize).min(bins - 1)] += 1;
        }
        let n = v.len().max(1) as f64;
        Self {
            min: v.iter().copied().fold(f64::INFINITY, f64::min),
            mean: v.iter().sum::<f64>() / n,
            max: v.iter().copied().fold(f64::NEG_INFINITY, f64::max),
            histogram,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Curves {
    pub rl_action: Vec<f64>,
    pub rl_reward: Vec<f64>,
    pub rl_fitness: Vec<f64>,
    pub rl_episode_mean_fitness: Vec<f64>,
    pub grain_loss: Vec<f64>,
    pub grain_val_accuracy: Vec<f64>,
    pub gcn_loss: Vec<f64>,
    pub gcn_val_accuracy: Vec<f64>,
    pub mlp_loss: Vec<f64>,
    pub mlp_val_accuracy: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub dataset: String,
    /// Absent for graphs without edges.
    pub homophily: Option<f64>,
    pub seed: u64,
    /// `file` or `seeded:<seed>`.
    pub splits: String,
    pub config: BTreeMap<String, serde_json::Value>,
    pub grain: PhaseMetrics,
    pub gcn: Option<PhaseMetrics>,
    pub mlp: Option<PhaseMetrics>,
    pub actions: ActionStats,
    pub curves: Curves,
    pub wall_clock_seconds: f64,
}

impl MetricsReport {
    /// Copy with the timing field zeroed, for run-to-run comparison.
    pub fn without_wall_clock(&self) -> Self {
        Self {
            wall_clock_seconds: 0.0,
            ..self.clone()
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }
}

pub fn emit_report(report: &MetricsReport, path: &Path) -> Result<()> {
    let mut text = report.to_json()?;
    text.push('\n');
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn read_report(path: &Path) -> Result<MetricsReport> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    MetricsReport::from_json(&text)
}

/// Projects rows onto their two leading principal components. Each
/// component's sign is fixed so its largest-magnitude loading is positive.
pub fn pca_2d(x: &Tensor) -> Tensor {
    let (n, d) = (x.rows(), x.cols());
    let mut out = Tensor::zeros(&[n, 2]);
    if n == 0 || d == 0 {
        return out;
    }
    let mut centered = DMatrix::from_row_slice(n, d, x.data());
    for j in 0..d {
        let mean = centered.column(j).mean();
        centered.column_mut(j).add_scalar_mut(-mean);
    }
    let cov = centered.transpose() * &centered / (n.max(2) - 1) as f64;
    let eig = SymmetricEigen::new(cov);
    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]).then(a.cmp(&b)));
    for (c, &k) in order.iter().take(2).enumerate() {
        let mut axis = eig.eigenvectors.column(k).into_owned();
        let pivot = axis.iamax();
        if axis[pivot] < 0.0 {
            axis.neg_mut();
        }
        let proj = &centered * axis;
        for i in 0..n {
            out.row_mut(i)[c] = proj[i];
        }
    }
    out
}

/// Writes `node_id\tx\ty\tlabel` rows of the 2-D projection of `logits`.
pub fn write_embedding(logits: &Tensor, labels: &[usize], path: &Path) -> Result<()> {
    if logits.rows() != labels.len() {
        return Err(Error::invalid(format!(
            "{} embedding rows for {} labels",
            logits.rows(),
            labels.len()
        )));
    }
    let xy = pca_2d(logits);
    let mut text = String::from("node_id\tx\ty\tlabel\n");
    for (i, &l) in labels.iter().enumerate() {
        let r = xy.row(i);
        writeln!(text, "{i}\t{}\t{}\t{l}", r[0], r[1]).expect("string write");
    }
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn action_histogram_bins() {
        let acts = ActionVector::new(vec![1.0, 1.9, 2.0, 7.5, 8.0], 8).unwrap();
        let s = ActionStats::from_actions(&acts);
        assert_eq!(s.histogram, vec![2, 1, 0, 0, 0, 0, 2]);
        assert_eq!((s.min, s.max), (1.0, 8.0));
        assert!((s.mean - 4.08).abs() < 1e-12);
    }

    #[test]
    fn pca_recovers_dominant_axis() {
        let rows: Vec<Vec<f64>> = (0..20).map(|i| vec![i as f64, 0.01 * (i % 3) as f64, 1.0]).collect();
        let xy = pca_2d(&Tensor::from_rows(&rows).unwrap());
        for i in 0..20 {
            assert!((xy.get(i, 0) - (i as f64 - 9.5)).abs() < 1e-3);
        }
    }
}

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::csr::CsrGraph;
use crate::error::{Error, Result};
use crate::tensor::{SeededRng, Tensor};

pub const TRAIN_FRACTION: f64 = 0.6;
pub const VAL_FRACTION: f64 = 0.2;

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Splits {
    pub train: Vec<usize>,
    pub val: Vec<usize>,
    pub test: Vec<usize>,
}

/// Where a dataset's splits came from; recorded in the report.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SplitSource {
    File,
    Seeded(u64),
}

impl Splits {
    /// Per-class 60/20/20 random split.
    pub fn stratified(labels: &[usize], num_classes: usize, rng: &mut SeededRng) -> Splits {
        let mut by_class: Vec<Vec<usize>> = vec![Vec::new(); num_classes];
        for (i, &c) in labels.iter().enumerate() {
            by_class[c].push(i);
        }
        let mut splits = Splits::default();
        for members in &mut by_class {
            rng.shuffle(members);
            let n = members.len() as f64;
            let n_train = (TRAIN_FRACTION * n).round() as usize;
            let n_val = ((VAL_FRACTION * n).round() as usize).min(members.len() - n_train);
            splits.train.extend_from_slice(&members[..n_train]);
            splits.val.extend_from_slice(&members[n_train..n_train + n_val]);
            splits.test.extend_from_slice(&members[n_train + n_val..]);
        }
        splits.train.sort_unstable();
        splits.val.sort_unstable();
        splits.test.sort_unstable();
        splits
    }

    /// Checks that the three sets are nonempty, in range and disjoint.
    pub fn validate(&self, n_nodes: usize) -> Result<()> {
        let mut owner = vec![None; n_nodes];
        for (name, ids) in [("train", &self.train), ("val", &self.val), ("test", &self.test)] {
            if ids.is_empty() {
                return Err(Error::invalid(format!("{name} split is empty")));
            }
            for &i in ids {
                if i >= n_nodes {
                    return Err(Error::invalid(format!("{name} split holds node {i} outside 0..{n_nodes}")));
                }
                if let Some(prev) = owner[i] {
                    return Err(Error::invalid(format!("node {i} is in both {prev} and {name} splits")));
                }
                owner[i] = Some(name);
            }
        }
        Ok(())
    }
}

/// Graph, node features, labels and splits.
#[derive(Clone, Debug)]
pub struct LabeledDataset {
    pub name: String,
    /// Structure as loaded: symmetric, no self-loops, unweighted.
    pub graph: CsrGraph,
    /// Self-looped symmetric renormalization of `graph`.
    pub normalized: Arc<CsrGraph>,
    pub features: Tensor,
    pub labels: Vec<usize>,
    pub num_classes: usize,
    pub splits: Splits,
    pub split_source: SplitSource,
}

impl LabeledDataset {
    pub fn new(
        name: impl Into<String>,
        graph: CsrGraph,
        features: Tensor,
        labels: Vec<usize>,
        num_classes: usize,
        splits: Splits,
        split_source: SplitSource,
    ) -> Result<Self> {
        let n = graph.n_nodes();
        if features.shape().len() != 2 || features.rows() != n {
            return Err(Error::invalid(format!(
                "feature matrix {:?} does not match {n} nodes",
                features.shape()
            )));
        }
        if labels.len() != n {
            return Err(Error::invalid(format!("{} labels for {n} nodes", labels.len())));
        }
        if let Some((i, &c)) = labels.iter().enumerate().find(|(_, &c)| c >= num_classes) {
            return Err(Error::invalid(format!("node {i} has label {c} >= {num_classes} classes")));
        }
        splits.validate(n)?;
        let normalized = Arc::new(graph.normalize());
        Ok(Self {
            name: name.into(),
            graph,
            normalized,
            features,
            labels,
            num_classes,
            splits,
            split_source,
        })
    }

    pub fn n_nodes(&self) -> usize {
        self.graph.n_nodes()
    }

    pub fn dim(&self) -> usize {
        self.features.cols()
    }

    pub fn homophily(&self) -> Result<f64> {
        self.graph.edge_homophily(&self.labels)
    }

    pub fn labels_of(&self, ids: &[usize]) -> Vec<usize> {
        ids.iter().map(|&i| self.labels[i]).collect()
    }

    /// Same data with labels replaced (used for chance-level checks).
    pub fn with_labels(&self, labels: Vec<usize>) -> Result<Self> {
        LabeledDataset::new(
            self.name.clone(),
            self.graph.clone(),
            self.features.clone(),
            labels,
            self.num_classes,
            self.splits.clone(),
            self.split_source,
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn stratified_split_proportions() {
        let labels: Vec<usize> = (0..100).map(|i| i % 4).collect();
        let s = Splits::stratified(&labels, 4, &mut SeededRng::new(1));
        assert_eq!((s.train.len(), s.val.len(), s.test.len()), (60, 20, 20));
        s.validate(100).unwrap();
        for c in 0..4 {
            assert_eq!(s.train.iter().filter(|&&i| labels[i] == c).count(), 15);
        }
    }

    #[test]
    fn overlapping_splits_rejected() {
        let s = Splits {
            train: vec![0, 1],
            val: vec![1],
            test: vec![2],
        };
        assert!(s.validate(3).unwrap_err().to_string().contains("node 1"));
    }

    #[test]
    fn dataset_rejects_bad_label() {
        let g = CsrGraph::from_edges(&[(0, 1)], 3).unwrap();
        let s = Splits {
            train: vec![0],
            val: vec![1],
            test: vec![2],
        };
        let err = LabeledDataset::new("x", g, Tensor::zeros(&[3, 1]), vec![0, 1, 2], 2, s, SplitSource::File);
        assert!(err.is_err());
    }
}

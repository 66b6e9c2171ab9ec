use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use super::csr::CsrGraph;
use super::dataset::{LabeledDataset, SplitSource, Splits};
use crate::error::{Error, Result};
use crate::tensor::{SeededRng, Tensor};

/// Parameters of the controllable-homophily generator.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SynthConfig {
    pub n: usize,
    pub classes: usize,
    /// Probability that an edge joins two nodes of the same class.
    pub h_target: f64,
    pub avg_degree: f64,
    pub dim: usize,
    /// Norm of each (orthogonal) class-mean feature vector.
    pub class_separation: f64,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            n: 500,
            classes: 5,
            h_target: 0.2,
            avg_degree: 10.0,
            dim: 16,
            class_separation: 1.5,
            seed: 0,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        let fail = |m: String| Err(Error::invalid(format!("synthetic config: {m}")));
        if self.classes == 0 || self.n < self.classes {
            return fail(format!("need n >= classes >= 1, got n={} classes={}", self.n, self.classes));
        }
        if !(0.0..=1.0).contains(&self.h_target) {
            return fail(format!("h_target {} outside [0, 1]", self.h_target));
        }
        if self.classes == 1 && self.h_target < 1.0 {
            return fail("a single class cannot produce inter-class edges".into());
        }
        if !(self.avg_degree > 0.0) {
            return fail(format!("avg_degree must be positive, got {}", self.avg_degree));
        }
        if self.dim < self.classes {
            return fail(format!(
                "orthogonal class means need dim >= classes, got dim={} classes={}",
                self.dim, self.classes
            ));
        }
        if !(self.class_separation >= 0.0) {
            return fail(format!("class_separation must be >= 0, got {}", self.class_separation));
        }
        let m = self.n_edges();
        if m as f64 > (self.n as f64) * (self.n as f64 - 1.0) / 2.0 {
            return fail(format!("{m} edges do not fit a simple graph on {} nodes", self.n));
        }
        Ok(())
    }

    pub fn n_edges(&self) -> usize {
        (self.n as f64 * self.avg_degree / 2.0).floor() as usize
    }

    pub fn name(&self) -> String {
        format!("synthetic-h{}-n{}-seed{}", self.h_target, self.n, self.seed)
    }
}

/// Draws a labeled graph whose edge homophily tracks `h_target`.
///
/// Labels are balanced across classes and randomly placed. Each edge is
/// intra-class with probability `h_target`, otherwise it joins two random
/// nodes of different classes; duplicates are redrawn. Features are
/// `class_separation * e_label + N(0, I)`.
pub fn generate_synthetic(cfg: &SynthConfig) -> Result<LabeledDataset> {
    cfg.validate()?;
    let root = SeededRng::new(cfg.seed);
    let (n, c) = (cfg.n, cfg.classes);

    let mut labels: Vec<usize> = (0..n).map(|i| i % c).collect();
    root.derive(1).shuffle(&mut labels);
    let mut members: Vec<Vec<usize>> = vec![Vec::new(); c];
    for (i, &l) in labels.iter().enumerate() {
        members[l].push(i);
    }
    let intra_sources: Vec<usize> = (0..n).filter(|&i| members[labels[i]].len() >= 2).collect();
    if cfg.h_target > 0.0 && intra_sources.is_empty() {
        return Err(Error::invalid("synthetic config: no class has two members for intra-class edges"));
    }

    let target = cfg.n_edges();
    let mut rng = root.derive(2);
    let mut seen: HashSet<(usize, usize)> = HashSet::with_capacity(target * 2);
    let mut edges = Vec::with_capacity(target);
    let max_attempts = 100 * target + 1000;
    let mut attempts = 0;
    while edges.len() < target {
        attempts += 1;
        if attempts > max_attempts {
            return Err(Error::invalid(format!(
                "synthetic config: placed only {} of {target} distinct edges",
                edges.len()
            )));
        }
        let (u, v) = if rng.bernoulli(cfg.h_target) {
            let u = intra_sources[rng.below(intra_sources.len())];
            let group = &members[labels[u]];
            let v = loop {
                let v = group[rng.below(group.len())];
                if v != u {
                    break v;
                }
            };
            (u, v)
        } else {
            let u = rng.below(n);
            let v = loop {
                let v = rng.below(n);
                if labels[v] != labels[u] {
                    break v;
                }
            };
            (u, v)
        };
        let key = (u.min(v), u.max(v));
        if seen.insert(key) {
            edges.push(key);
        }
    }
    let graph = CsrGraph::from_edges(&edges, n)?;

    let mut rng = root.derive(3);
    let mut features = Tensor::zeros(&[n, cfg.dim]);
    for (i, &l) in labels.iter().enumerate() {
        let row = features.row_mut(i);
        for v in row.iter_mut() {
            *v = rng.normal();
        }
        row[l] += cfg.class_separation;
    }

    let splits = Splits::stratified(&labels, c, &mut root.derive(4));
    LabeledDataset::new(cfg.name(), graph, features, labels, c, splits, SplitSource::Seeded(cfg.seed))
}

use std::collections::VecDeque;

use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// Undirected graph in compressed sparse row form.
///
/// Both directions of every edge are stored, column indices are sorted
/// within each row and unique. A graph produced by [`CsrGraph::normalize`]
/// additionally carries one self-loop per node and the symmetric
/// renormalized weights.
#[derive(Clone, Debug, PartialEq)]
pub struct CsrGraph {
    n_nodes: usize,
    row_offsets: Vec<usize>,
    col_indices: Vec<usize>,
    weights: Option<Vec<f64>>,
}

impl CsrGraph {
    /// Builds a symmetric, deduplicated graph from an edge list. Input
    /// self-edges are dropped; normalization adds exactly one back.
    pub fn from_edges(edges: &[(usize, usize)], n_nodes: usize) -> Result<Self> {
        let mut adj: Vec<Vec<usize>> = vec![Vec::new(); n_nodes];
        for &(u, v) in edges {
            if u >= n_nodes || v >= n_nodes {
                return Err(Error::invalid(format!(
                    "edge ({u}, {v}) references a node outside 0..{n_nodes}"
                )));
            }
            if u != v {
                adj[u].push(v);
                adj[v].push(u);
            }
        }
        let mut row_offsets = Vec::with_capacity(n_nodes + 1);
        let mut col_indices = Vec::new();
        row_offsets.push(0);
        for row in &mut adj {
            row.sort_unstable();
            row.dedup();
            col_indices.extend_from_slice(row);
            row_offsets.push(col_indices.len());
        }
        Ok(Self {
            n_nodes,
            row_offsets,
            col_indices,
            weights: None,
        })
    }

    pub fn n_nodes(&self) -> usize {
        self.n_nodes
    }

    pub fn row_offsets(&self) -> &[usize] {
        &self.row_offsets
    }

    pub fn col_indices(&self) -> &[usize] {
        &self.col_indices
    }

    pub fn weights(&self) -> Option<&[f64]> {
        self.weights.as_deref()
    }

    pub fn is_normalized(&self) -> bool {
        self.weights.is_some()
    }

    /// Stored column indices of row `v`, self-loop included when present.
    pub fn row(&self, v: usize) -> &[usize] {
        &self.col_indices[self.row_offsets[v]..self.row_offsets[v + 1]]
    }

    pub fn row_weights(&self, v: usize) -> Option<&[f64]> {
        self.weights
            .as_ref()
            .map(|w| &w[self.row_offsets[v]..self.row_offsets[v + 1]])
    }

    /// Neighbors of `v` other than itself.
    pub fn neighbors(&self, v: usize) -> impl Iterator<Item = usize> + '_ {
        self.row(v).iter().copied().filter(move |&u| u != v)
    }

    pub fn degree(&self, v: usize) -> usize {
        self.neighbors(v).count()
    }

    /// Undirected edges `(u, v)` with `u < v`, self-loops excluded.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        (0..self.n_nodes).flat_map(move |u| self.row(u).iter().copied().filter(move |&v| u < v).map(move |v| (u, v)))
    }

    pub fn n_edges(&self) -> usize {
        self.edges().count()
    }

    /// Weight of entry `(i, j)`, zero when absent.
    pub fn weight(&self, i: usize, j: usize) -> f64 {
        let Some(w) = self.row_weights(i) else { return 0.0 };
        match self.row(i).binary_search(&j) {
            Ok(pos) => w[pos],
            Err(_) => 0.0,
        }
    }

    /// Returns `D^{-1/2} (A + I) D^{-1/2}` where `D` is the degree matrix
    /// of `A + I`. Existing weights are ignored; only the structure is used.
    pub fn normalize(&self) -> CsrGraph {
        let mut row_offsets = Vec::with_capacity(self.n_nodes + 1);
        let mut col_indices = Vec::with_capacity(self.col_indices.len() + self.n_nodes);
        row_offsets.push(0);
        for v in 0..self.n_nodes {
            let mut inserted = false;
            for u in self.neighbors(v) {
                if !inserted && u > v {
                    col_indices.push(v);
                    inserted = true;
                }
                col_indices.push(u);
            }
            if !inserted {
                col_indices.push(v);
            }
            row_offsets.push(col_indices.len());
        }
        let degree: Vec<f64> = (0..self.n_nodes)
            .map(|v| (row_offsets[v + 1] - row_offsets[v]) as f64)
            .collect();
        let mut weights = Vec::with_capacity(col_indices.len());
        for v in 0..self.n_nodes {
            for &u in &col_indices[row_offsets[v]..row_offsets[v + 1]] {
                weights.push(1.0 / (degree[v] * degree[u]).sqrt());
            }
        }
        CsrGraph {
            n_nodes: self.n_nodes,
            row_offsets,
            col_indices,
            weights: Some(weights),
        }
    }

    /// Sparse-times-dense product `Â X`. Requires weights.
    pub fn spmm(&self, x: &Tensor) -> Result<Tensor> {
        let Some(weights) = &self.weights else {
            return Err(Error::invalid("propagation needs a normalized (weighted) graph"));
        };
        if x.rows() != self.n_nodes || x.shape().len() != 2 {
            return Err(Error::Shape {
                op: "spmm",
                lhs: vec![self.n_nodes, self.n_nodes],
                rhs: x.shape().to_vec(),
            });
        }
        let d = x.cols();
        let mut out = Tensor::zeros(&[self.n_nodes, d]);
        for v in 0..self.n_nodes {
            let (lo, hi) = (self.row_offsets[v], self.row_offsets[v + 1]);
            let dst = out.row_mut(v);
            for (&u, &w) in self.col_indices[lo..hi].iter().zip(&weights[lo..hi]) {
                for (o, xv) in dst.iter_mut().zip(x.row(u)) {
                    *o += w * xv;
                }
            }
        }
        Ok(out)
    }

    /// Nodes at shortest-path distance `1..=k` from `v`, ascending.
    pub fn khop_neighborhood(&self, v: usize, k: usize) -> Vec<usize> {
        let mut dist = vec![usize::MAX; self.n_nodes];
        dist[v] = 0;
        let mut queue = VecDeque::from([v]);
        let mut found = Vec::new();
        while let Some(u) = queue.pop_front() {
            if dist[u] == k {
                continue;
            }
            for w in self.neighbors(u) {
                if dist[w] == usize::MAX {
                    dist[w] = dist[u] + 1;
                    found.push(w);
                    queue.push_back(w);
                }
            }
        }
        found.sort_unstable();
        found
    }

    /// Fraction of undirected edges (self-loops excluded) whose endpoints
    /// share a label.
    pub fn edge_homophily(&self, labels: &[usize]) -> Result<f64> {
        if labels.len() != self.n_nodes {
            return Err(Error::invalid(format!(
                "homophily needs {} labels, got {}",
                self.n_nodes,
                labels.len()
            )));
        }
        let (mut same, mut total) = (0usize, 0usize);
        for (u, v) in self.edges() {
            total += 1;
            if labels[u] == labels[v] {
                same += 1;
            }
        }
        if total == 0 {
            return Err(Error::invalid("edge homophily is undefined for a graph without edges"));
        }
        Ok(same as f64 / total as f64)
    }

    /// Relabels nodes so that old node `i` becomes `perm[i]`.
    pub fn permute(&self, perm: &[usize]) -> Result<CsrGraph> {
        let edges: Vec<(usize, usize)> = self.edges().map(|(u, v)| (perm[u], perm[v])).collect();
        let g = CsrGraph::from_edges(&edges, self.n_nodes)?;
        Ok(if self.is_normalized() { g.normalize() } else { g })
    }
}

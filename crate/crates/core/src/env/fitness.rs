use std::collections::HashMap;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{LabeledDataset, PropagationCache};
use crate::models::{accuracy, check_action, combine_node, glorot_uniform, granular_combine, ActionVector};
use crate::tensor::{Adam, AdamConfig, Param, SeededRng, Tape, Tensor};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FitnessConfig {
    pub epochs: usize,
    pub lr: f64,
    pub alpha: f64,
    /// Grid spacing for cache keys; actions are evaluated at the grid point.
    pub quantum: f64,
    /// Seeds the inner head's initial weights, identically on every call.
    pub seed: u64,
}

impl Default for FitnessConfig {
    fn default() -> Self {
        Self {
            epochs: 20,
            lr: 0.2,
            alpha: 0.2,
            quantum: 0.1,
            seed: 0,
        }
    }
}

impl FitnessConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 {
            return Err(Error::invalid("inner fitness needs at least one epoch"));
        }
        if !(self.lr > 0.0) {
            return Err(Error::invalid(format!("inner learning rate {} must be positive", self.lr)));
        }
        if !(0.0..=1.0).contains(&self.alpha) {
            return Err(Error::invalid(format!("alpha {} outside [0, 1]", self.alpha)));
        }
        if !(self.quantum > 0.0) {
            return Err(Error::invalid(format!("quantum {} must be positive", self.quantum)));
        }
        Ok(())
    }
}

/// Validation accuracy of a one-layer model (granular combine, linear head,
/// log-softmax) when every node follows a fixed snapshot of actions except
/// one node whose action is overridden.
#[derive(Debug)]
pub struct FitnessEvaluator {
    dataset: Arc<LabeledDataset>,
    cache: Arc<PropagationCache>,
    cfg: FitnessConfig,
    snapshot: Option<ActionVector>,
    base: Tensor,
    memo: HashMap<(usize, i64), f64>,
    evaluations: usize,
}

impl FitnessEvaluator {
    pub fn new(dataset: Arc<LabeledDataset>, cache: Arc<PropagationCache>, cfg: FitnessConfig) -> Result<Self> {
        cfg.validate()?;
        if cache.features().rows() != dataset.n_nodes() {
            return Err(Error::invalid("propagation cache does not match the dataset"));
        }
        if dataset.splits.train.is_empty() || dataset.splits.val.is_empty() {
            return Err(Error::invalid("fitness needs nonempty train and val splits"));
        }
        Ok(Self {
            dataset,
            cache,
            cfg,
            snapshot: None,
            base: Tensor::zeros(&[0, 0]),
            memo: HashMap::new(),
            evaluations: 0,
        })
    }

    pub fn config(&self) -> &FitnessConfig {
        &self.cfg
    }

    pub fn k_max(&self) -> usize {
        self.cache.k_max()
    }

    pub fn snapshot(&self) -> Option<&ActionVector> {
        self.snapshot.as_ref()
    }

    /// Installs the actions every other node takes. Clears the memo when
    /// the snapshot changes.
    pub fn set_snapshot(&mut self, actions: ActionVector) -> Result<()> {
        if self.snapshot.as_ref() == Some(&actions) {
            return Ok(());
        }
        self.base = granular_combine(&self.cache, &actions, self.cfg.alpha)?;
        self.snapshot = Some(actions);
        self.memo.clear();
        Ok(())
    }

    /// Inner trainings actually run (memo misses).
    pub fn evaluations(&self) -> usize {
        self.evaluations
    }

    pub fn cached(&self) -> usize {
        self.memo.len()
    }

    /// Grid key and grid-point action for `a`.
    pub fn quantize(&self, a: f64) -> (i64, f64) {
        let key = (a / self.cfg.quantum).round() as i64;
        let q = (key as f64 * self.cfg.quantum).clamp(1.0, self.k_max() as f64);
        (key, q)
    }

    pub fn fitness(&mut self, v: usize, a: f64) -> Result<f64> {
        check_action(a, self.k_max())?;
        if v >= self.dataset.n_nodes() {
            return Err(Error::invalid(format!("node {v} out of range")));
        }
        if self.snapshot.is_none() {
            return Err(Error::invalid("fitness evaluator has no policy snapshot"));
        }
        let (key, q) = self.quantize(a);
        if let Some(&f) = self.memo.get(&(v, key)) {
            return Ok(f);
        }
        let mut z = self.base.clone();
        combine_node(&self.cache, v, q, self.cfg.alpha, z.row_mut(v))?;
        let f = self.train_and_score(&z)?;
        self.evaluations += 1;
        self.memo.insert((v, key), f);
        Ok(f)
    }

    /// Fitness with every node at the same action, bypassing the snapshot.
    pub fn uniform_fitness(&self, a: f64) -> Result<f64> {
        let actions = ActionVector::uniform(self.dataset.n_nodes(), a, self.k_max())?;
        self.train_and_score(&granular_combine(&self.cache, &actions, self.cfg.alpha)?)
    }

    fn train_and_score(&self, z: &Tensor) -> Result<f64> {
        let ds = &self.dataset;
        let classes = ds.num_classes;
        let mut rng = SeededRng::new(self.cfg.seed);
        let mut params = [
            Param::new("w", glorot_uniform(z.cols(), classes, &mut rng)),
            Param::new("b", Tensor::zeros(&[1, classes])),
        ];
        let mut adam = Adam::new(AdamConfig::with_lr(self.cfg.lr), params.iter());
        let z_train = z.gather_rows(&ds.splits.train);
        let y_train = ds.labels_of(&ds.splits.train);
        for _ in 0..self.cfg.epochs {
            let mut tape = Tape::new();
            let w = tape.leaf(params[0].value.clone());
            let b = tape.leaf(params[1].value.clone());
            let x = tape.leaf(z_train.clone());
            let logits = tape.matmul(x, w)?;
            let logits = tape.add_row(logits, b)?;
            let lp = tape.log_softmax(logits);
            let loss = tape.nll_loss(lp, &y_train)?;
            let grads = tape.backward(loss)?;
            let g = [grads.wrt(w, &params[0].value), grads.wrt(b, &params[1].value)];
            let [p0, p1] = &mut params;
            adam.step(&mut [p0, p1], &g)?;
        }
        let z_val = z.gather_rows(&ds.splits.val);
        let mut scores = z_val.matmul(&params[0].value)?;
        let bias = params[1].value.data();
        for (j, s) in scores.data_mut().iter_mut().enumerate() {
            *s += bias[j % classes];
        }
        let val_labels = ds.labels_of(&ds.splits.val);
        let ids: Vec<usize> = (0..val_labels.len()).collect();
        Ok(accuracy(&scores, &val_labels, &ids))
    }
}

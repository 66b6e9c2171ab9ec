use serde::{Deserialize, Serialize};

use super::classifier::NodeClassifier;
use crate::error::{Error, Result};
use crate::graph::LabeledDataset;
use crate::tensor::{Adam, AdamConfig, SeededRng, Tape, Tensor};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FitConfig {
    pub epochs: usize,
    pub lr: f64,
    pub weight_decay: f64,
    /// Seeds the dropout masks.
    pub seed: u64,
}

impl Default for FitConfig {
    fn default() -> Self {
        Self {
            epochs: 200,
            lr: 0.01,
            weight_decay: 5e-4,
            seed: 0,
        }
    }
}

/// Result of training: the checkpoint with the best validation accuracy
/// (earliest on ties) and per-epoch curves.
#[derive(Clone, Debug)]
pub struct FitOutcome<M> {
    pub model: M,
    pub loss_curve: Vec<f64>,
    pub val_curve: Vec<f64>,
    /// Zero-based epoch of the kept checkpoint.
    pub best_epoch: usize,
    pub train_accuracy: f64,
    pub val_accuracy: f64,
    pub test_accuracy: f64,
    /// Eval-mode logits of the kept checkpoint.
    pub logits: Tensor,
}

/// Row-wise argmax; ties go to the lowest index.
pub fn argmax_rows(t: &Tensor) -> Vec<usize> {
    (0..t.rows())
        .map(|i| {
            let row = t.row(i);
            let mut best = 0;
            for (j, &x) in row.iter().enumerate().skip(1) {
                if x > row[best] {
                    best = j;
                }
            }
            best
        })
        .collect()
}

/// Fraction of `ids` whose argmax prediction matches the label.
pub fn accuracy(scores: &Tensor, labels: &[usize], ids: &[usize]) -> f64 {
    if ids.is_empty() {
        return 0.0;
    }
    let pred = argmax_rows(&scores.gather_rows(ids));
    let hits = ids.iter().zip(&pred).filter(|(&i, &p)| labels[i] == p).count();
    hits as f64 / ids.len() as f64
}

/// Full-batch Adam on the train-split NLL.
pub fn fit_and_score<M: NodeClassifier>(
    model: M,
    inputs: &M::Inputs,
    dataset: &LabeledDataset,
    cfg: &FitConfig,
) -> Result<FitOutcome<M>> {
    if cfg.epochs == 0 {
        return Err(Error::invalid("training needs at least one epoch"));
    }
    let splits = &dataset.splits;
    for (name, ids) in [("train", &splits.train), ("val", &splits.val), ("test", &splits.test)] {
        if ids.is_empty() {
            return Err(Error::invalid(format!("{name} split is empty")));
        }
    }
    let train_labels = dataset.labels_of(&splits.train);
    let adam_cfg = AdamConfig {
        weight_decay: cfg.weight_decay,
        ..AdamConfig::with_lr(cfg.lr)
    };
    let mut model = model;
    let mut adam = Adam::new(adam_cfg, model.params());
    let mut rng = SeededRng::new(cfg.seed);
    let mut loss_curve = Vec::with_capacity(cfg.epochs);
    let mut val_curve = Vec::with_capacity(cfg.epochs);
    let mut best: Option<(usize, f64, M, Tensor)> = None;

    for epoch in 0..cfg.epochs {
        let mut tape = Tape::new();
        let out = model.forward(&mut tape, inputs, true, &mut rng)?;
        let train_lp = tape.gather_rows(out.log_probs, &splits.train)?;
        let loss = tape.nll_loss(train_lp, &train_labels)?;
        loss_curve.push(tape.value(loss).item());
        let grads = tape.backward(loss)?;
        let g: Vec<Tensor> = out
            .params
            .iter()
            .zip(model.params())
            .map(|(&v, p)| grads.wrt(v, &p.value))
            .collect();
        adam.step(&mut model.params_mut(), &g)?;

        let mut tape = Tape::new();
        let eval = model.forward(&mut tape, inputs, false, &mut rng)?;
        let logits = tape.value(eval.logits);
        let val = accuracy(logits, &dataset.labels, &splits.val);
        val_curve.push(val);
        if best.as_ref().is_none_or(|b| val > b.1) {
            best = Some((epoch, val, model.clone(), logits.clone()));
        }
    }

    let (best_epoch, val_accuracy, model, logits) = best.expect("at least one epoch");
    Ok(FitOutcome {
        train_accuracy: accuracy(&logits, &dataset.labels, &splits.train),
        test_accuracy: accuracy(&logits, &dataset.labels, &splits.test),
        val_accuracy,
        best_epoch,
        model,
        loss_curve,
        val_curve,
        logits,
    })
}

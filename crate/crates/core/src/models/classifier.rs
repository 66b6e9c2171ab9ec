use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::actions::ActionVector;
use super::combine::{check_alpha, granular_combine, GranularPropagation};
use crate::error::{Error, Result};
use crate::graph::{LabeledDataset, Propagation, PropagationCache};
use crate::tensor::{LinearMap, Param, SeededRng, Tape, Tensor, Var};

/// Vars produced by one forward pass.
#[derive(Clone, Debug)]
pub struct Forward {
    pub log_probs: Var,
    /// Final-layer output before log-softmax.
    pub logits: Var,
    /// One leaf per parameter, in `params()` order.
    pub params: Vec<Var>,
}

/// A full-batch node classifier trainable by [`super::fit_and_score`].
pub trait NodeClassifier: Clone {
    type Inputs;

    fn params(&self) -> Vec<&Param>;
    fn params_mut(&mut self) -> Vec<&mut Param>;
    fn forward(&self, tape: &mut Tape, inputs: &Self::Inputs, training: bool, rng: &mut SeededRng) -> Result<Forward>;

    fn num_parameters(&self) -> usize {
        self.params().iter().map(|p| p.value.len()).sum()
    }
}

/// Glorot-uniform `rows × cols` matrix.
pub fn glorot_uniform(rows: usize, cols: usize, rng: &mut SeededRng) -> Tensor {
    let bound = (6.0 / (rows + cols) as f64).sqrt();
    let data = (0..rows * cols).map(|_| rng.uniform_range(-bound, bound)).collect();
    Tensor::matrix(rows, cols, data).expect("sized buffer")
}

fn check_dropout(p: f64) -> Result<()> {
    if !(0.0..1.0).contains(&p) {
        return Err(Error::invalid(format!("dropout {p} outside [0, 1)")));
    }
    Ok(())
}

fn layer_stack(widths: &[usize], rng: &mut SeededRng) -> Result<Vec<Param>> {
    if widths.len() < 2 || widths.contains(&0) {
        return Err(Error::invalid(format!("layer widths {widths:?} need at least two positive entries")));
    }
    Ok(widths
        .windows(2)
        .enumerate()
        .map(|(l, w)| Param::new(format!("w{}", l + 1), glorot_uniform(w[0], w[1], rng)))
        .collect())
}

/// `first · W_1`, then for each later layer `hop(H) · W_l`; relu and
/// dropout between layers, log-softmax at the end.
fn stack_forward(
    tape: &mut Tape,
    first: &Tensor,
    hop: Option<Arc<dyn LinearMap>>,
    weights: &[Param],
    dropout: f64,
    training: bool,
    rng: &mut SeededRng,
) -> Result<Forward> {
    let params: Vec<Var> = weights.iter().map(|w| tape.leaf(w.value.clone())).collect();
    let mut h = tape.leaf(first.clone());
    for (l, &w) in params.iter().enumerate() {
        if l > 0 {
            if let Some(map) = &hop {
                h = tape.linear_map(h, Arc::clone(map))?;
            }
        }
        h = tape.matmul(h, w)?;
        if l + 1 < params.len() {
            h = tape.relu(h);
            h = tape.dropout(h, dropout, rng, training)?;
        }
    }
    let log_probs = tape.log_softmax(h);
    Ok(Forward {
        log_probs,
        logits: h,
        params,
    })
}

/// Multi-layer classifier that aggregates with per-node hop granularity.
/// Bias-free; one weight matrix per layer shared by every node.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GranularModel {
    pub alpha: f64,
    pub k_max: usize,
    pub dropout: f64,
    pub weights: Vec<Param>,
}

/// Precomputed first-layer aggregation plus the operator applied to
/// hidden layers, both fixed by one action vector.
#[derive(Clone, Debug)]
pub struct GranularInputs {
    pub first: Tensor,
    pub deep: Arc<GranularPropagation>,
}

impl GranularModel {
    /// `widths` = `[d_in, hidden.., classes]`.
    pub fn new(widths: &[usize], alpha: f64, k_max: usize, dropout: f64, rng: &mut SeededRng) -> Result<Self> {
        check_alpha(alpha)?;
        check_dropout(dropout)?;
        if k_max < 1 {
            return Err(Error::invalid("k_max must be at least 1"));
        }
        Ok(Self {
            alpha,
            k_max,
            dropout,
            weights: layer_stack(widths, rng)?,
        })
    }

    pub fn layers(&self) -> usize {
        self.weights.len()
    }

    pub fn prepare(&self, dataset: &LabeledDataset, cache: &PropagationCache, actions: &ActionVector) -> Result<GranularInputs> {
        if actions.k_max() > self.k_max {
            return Err(Error::invalid(format!(
                "actions allow up to {} hops but the model was built for {}",
                actions.k_max(),
                self.k_max
            )));
        }
        Ok(GranularInputs {
            first: granular_combine(cache, actions, self.alpha)?,
            deep: Arc::new(GranularPropagation::new(Arc::clone(&dataset.normalized), actions, self.alpha)?),
        })
    }
}

impl NodeClassifier for GranularModel {
    type Inputs = GranularInputs;

    fn params(&self) -> Vec<&Param> {
        self.weights.iter().collect()
    }

    fn params_mut(&mut self) -> Vec<&mut Param> {
        self.weights.iter_mut().collect()
    }

    fn forward(&self, tape: &mut Tape, inputs: &GranularInputs, training: bool, rng: &mut SeededRng) -> Result<Forward> {
        let hop: Arc<dyn LinearMap> = inputs.deep.clone();
        stack_forward(tape, &inputs.first, Some(hop), &self.weights, self.dropout, training, rng)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BaselineKind {
    Gcn,
    Mlp,
}

impl BaselineKind {
    pub fn name(self) -> &'static str {
        match self {
            BaselineKind::Gcn => "gcn",
            BaselineKind::Mlp => "mlp",
        }
    }
}

/// Two-layer GCN (`Â relu(Â X W_1) W_2`) or MLP, bias-free.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BaselineModel {
    pub kind: BaselineKind,
    pub dropout: f64,
    pub weights: Vec<Param>,
}

#[derive(Clone, Debug)]
pub struct BaselineInputs {
    pub first: Tensor,
    pub hop: Option<Arc<Propagation>>,
}

impl BaselineModel {
    pub fn new(kind: BaselineKind, d_in: usize, hidden: usize, classes: usize, dropout: f64, rng: &mut SeededRng) -> Result<Self> {
        check_dropout(dropout)?;
        Ok(Self {
            kind,
            dropout,
            weights: layer_stack(&[d_in, hidden, classes], rng)?,
        })
    }

    pub fn prepare(&self, dataset: &LabeledDataset) -> Result<BaselineInputs> {
        Ok(match self.kind {
            BaselineKind::Mlp => BaselineInputs {
                first: dataset.features.clone(),
                hop: None,
            },
            BaselineKind::Gcn => BaselineInputs {
                first: dataset.normalized.spmm(&dataset.features)?,
                hop: Some(Arc::new(Propagation::new(Arc::clone(&dataset.normalized))?)),
            },
        })
    }
}

impl NodeClassifier for BaselineModel {
    type Inputs = BaselineInputs;

    fn params(&self) -> Vec<&Param> {
        self.weights.iter().collect()
    }

    fn params_mut(&mut self) -> Vec<&mut Param> {
        self.weights.iter_mut().collect()
    }

    fn forward(&self, tape: &mut Tape, inputs: &BaselineInputs, training: bool, rng: &mut SeededRng) -> Result<Forward> {
        let hop = inputs.hop.clone().map(|p| p as Arc<dyn LinearMap>);
        stack_forward(tape, &inputs.first, hop, &self.weights, self.dropout, training, rng)
    }
}

/// Log-probabilities and logits from one pass.
pub fn model_forward<M: NodeClassifier>(
    model: &M,
    inputs: &M::Inputs,
    training: bool,
    rng: &mut SeededRng,
) -> Result<(Tensor, Tensor)> {
    let mut tape = Tape::new();
    let out = model.forward(&mut tape, inputs, training, rng)?;
    Ok((tape.value(out.log_probs).clone(), tape.value(out.logits).clone()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{generate_synthetic, SynthConfig};

    fn small() -> LabeledDataset {
        generate_synthetic(&SynthConfig {
            n: 40,
            classes: 3,
            dim: 4,
            avg_degree: 3.0,
            ..SynthConfig::default()
        })
        .unwrap()
    }

    #[test]
    fn zero_weights_give_uniform_rows() {
        let ds = small();
        let mut model = GranularModel::new(&[4, 8, 3], 0.2, 4, 0.5, &mut SeededRng::new(0)).unwrap();
        for w in &mut model.weights {
            w.value = Tensor::zeros(w.value.shape());
        }
        let cache = PropagationCache::build(&ds.normalized, &ds.features, 4).unwrap();
        let acts = ActionVector::uniform(40, 2.7, 4).unwrap();
        let inputs = model.prepare(&ds, &cache, &acts).unwrap();
        let (lp, _) = model_forward(&model, &inputs, false, &mut SeededRng::new(0)).unwrap();
        for &x in lp.data() {
            assert!((x + 3f64.ln()).abs() < 1e-12);
        }
    }

    #[test]
    fn eval_is_repeatable_and_rows_normalized() {
        let ds = small();
        let model = BaselineModel::new(BaselineKind::Gcn, 4, 8, 3, 0.5, &mut SeededRng::new(1)).unwrap();
        let inputs = model.prepare(&ds).unwrap();
        let (a, _) = model_forward(&model, &inputs, false, &mut SeededRng::new(2)).unwrap();
        let (b, _) = model_forward(&model, &inputs, false, &mut SeededRng::new(3)).unwrap();
        assert_eq!(a, b);
        for i in 0..a.rows() {
            let s: f64 = a.row(i).iter().map(|x| x.exp()).sum();
            assert!((s - 1.0).abs() < 1e-10);
        }
    }

    #[test]
    fn parameter_count_ignores_hop_budget() {
        let a = GranularModel::new(&[16, 64, 5], 0.2, 2, 0.5, &mut SeededRng::new(0)).unwrap();
        let b = GranularModel::new(&[16, 64, 5], 0.2, 8, 0.5, &mut SeededRng::new(0)).unwrap();
        assert_eq!(a.num_parameters(), b.num_parameters());
        assert_eq!(a.num_parameters(), 16 * 64 + 64 * 5);
    }
}

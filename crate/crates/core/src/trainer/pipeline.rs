use std::sync::Arc;
use std::time::Instant;

use log::{debug, info};
use serde::{Deserialize, Serialize};

use super::config::{streams, TrainConfig};
use super::report::{ActionStats, Curves, MetricsReport, PhaseMetrics};
use crate::env::GranularityEnv;
use crate::error::Result;
use crate::graph::{LabeledDataset, PropagationCache, SplitSource};
use crate::models::{fit_and_score, ActionVector, BaselineKind, BaselineModel, FitOutcome, GranularModel};
use crate::td3::{ActorNet, ReplayBuffer, Td3Agent, Transition};
use crate::tensor::SeededRng;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StepLog {
    pub step: usize,
    pub node: usize,
    pub action: f64,
    pub reward: f64,
    pub fitness: f64,
}

#[derive(Clone, Debug)]
pub struct RlOutcome {
    /// Actor whose episode had the highest mean fitness; the initial actor
    /// when no step ran.
    pub policy: ActorNet,
    pub log: Vec<StepLog>,
    pub episode_mean_fitness: Vec<f64>,
    pub best_episode: Option<usize>,
    pub updates: u64,
    /// Env steps taken before the first agent update.
    pub first_update_step: Option<usize>,
    pub fitness_evaluations: usize,
}

/// Propagation cache sized for the configured hop budget.
pub fn build_cache(dataset: &LabeledDataset, cfg: &TrainConfig) -> Result<Arc<PropagationCache>> {
    Ok(Arc::new(PropagationCache::build(&dataset.normalized, &dataset.features, cfg.gnn.k_max)?))
}

/// Noise-free policy action for every node.
pub fn derive_actions(policy: &ActorNet, dataset: &LabeledDataset, k_max: usize) -> Result<ActionVector> {
    let values = policy
        .actions(&dataset.features)?
        .into_iter()
        .map(|a| a.clamp(1.0, k_max as f64))
        .collect();
    ActionVector::new(values, k_max)
}

/// Explores the decision process with a TD3 agent for `cfg.rl.steps` steps.
///
/// Each episode starts by freezing the current deterministic policy as the
/// action snapshot for all other nodes. The returned policy is the snapshot
/// whose completed episode scored the best mean fitness.
pub fn run_rl_phase(dataset: &Arc<LabeledDataset>, cache: &Arc<PropagationCache>, cfg: &TrainConfig) -> Result<RlOutcome> {
    cfg.validate()?;
    let k_max = cfg.gnn.k_max;
    let mut agent = Td3Agent::new(dataset.dim(), cfg.td3_config(), cfg.stream_seed(streams::AGENT))?;
    let mut env = GranularityEnv::new(
        Arc::clone(dataset),
        Arc::clone(cache),
        cfg.env_config(),
        cfg.stream_seed(streams::ENV),
    )?;
    let mut buffer = ReplayBuffer::new(cfg.td3.capacity)?;
    let mut out = RlOutcome {
        policy: agent.actor.clone(),
        log: Vec::with_capacity(cfg.rl.steps),
        episode_mean_fitness: Vec::new(),
        best_episode: None,
        updates: 0,
        first_update_step: None,
        fitness_evaluations: 0,
    };
    let mut best_full: Option<(f64, usize, ActorNet)> = None;
    let mut best_partial: Option<(f64, usize, ActorNet)> = None;
    let mut episode: Option<(ActorNet, Vec<f64>)> = None;
    let mut state = None;

    for step in 0..cfg.rl.steps {
        if episode.is_none() {
            env.set_policy_snapshot(derive_actions(&agent.actor, dataset, k_max)?)?;
            state = Some(env.reset());
            episode = Some((agent.actor.clone(), Vec::with_capacity(cfg.rl.episode_len)));
        }
        let s = state.take().expect("state set on reset");
        let a = agent.explore(&s)?;
        let node = env.state().node;
        let res = env.step(a)?;
        buffer.push(Transition {
            state: s,
            action: a,
            reward: res.reward,
            next_state: Arc::clone(&res.next_state),
        });
        for _ in 0..cfg.rl.updates_per_step {
            if agent.update(&buffer)?.is_update() && out.first_update_step.is_none() {
                out.first_update_step = Some(step);
            }
        }
        out.log.push(StepLog {
            step,
            node,
            action: a,
            reward: res.reward,
            fitness: res.fitness,
        });
        let (_, fits) = episode.as_mut().expect("episode open");
        fits.push(res.fitness);
        state = Some(res.next_state);

        let last = step + 1 == cfg.rl.steps;
        if res.done || last {
            let (actor, fits) = episode.take().expect("episode open");
            let mean = fits.iter().sum::<f64>() / fits.len() as f64;
            let index = out.episode_mean_fitness.len();
            out.episode_mean_fitness.push(mean);
            debug!("episode {index}: mean fitness {mean:.4}");
            let slot = if res.done { &mut best_full } else { &mut best_partial };
            if slot.as_ref().is_none_or(|b| mean > b.0) {
                *slot = Some((mean, index, actor));
            }
        }
    }
    if let Some((_, index, actor)) = best_full.or(best_partial) {
        out.policy = actor;
        out.best_episode = Some(index);
    }
    out.updates = agent.updates();
    out.fitness_evaluations = env.evaluator().evaluations();
    Ok(out)
}

/// Trains the granular classifier on fixed per-node actions.
pub fn run_gnn_phase(
    dataset: &LabeledDataset,
    cache: &PropagationCache,
    actions: &ActionVector,
    cfg: &TrainConfig,
) -> Result<FitOutcome<GranularModel>> {
    let mut widths = vec![dataset.dim()];
    widths.extend(std::iter::repeat_n(cfg.gnn.hidden, cfg.gnn.layers - 1));
    widths.push(dataset.num_classes);
    let mut rng = SeededRng::new(cfg.stream_seed(streams::MODEL_INIT));
    let model = GranularModel::new(&widths, cfg.gnn.alpha, cfg.gnn.k_max, cfg.gnn.dropout, &mut rng)?;
    let inputs = model.prepare(dataset, cache, actions)?;
    fit_and_score(model, &inputs, dataset, &cfg.fit_config())
}

pub fn run_baseline(dataset: &LabeledDataset, kind: BaselineKind, cfg: &TrainConfig) -> Result<FitOutcome<BaselineModel>> {
    let mut rng = SeededRng::new(cfg.stream_seed(streams::MODEL_INIT));
    let model = BaselineModel::new(kind, dataset.dim(), cfg.gnn.hidden, dataset.num_classes, cfg.gnn.dropout, &mut rng)?;
    let inputs = model.prepare(dataset)?;
    fit_and_score(model, &inputs, dataset, &cfg.fit_config())
}

/// Enabled baselines, GCN first.
pub fn run_baselines(dataset: &LabeledDataset, cfg: &TrainConfig) -> Result<Vec<(BaselineKind, FitOutcome<BaselineModel>)>> {
    let mut out = Vec::new();
    for (kind, on) in [(BaselineKind::Gcn, cfg.baselines.gcn), (BaselineKind::Mlp, cfg.baselines.mlp)] {
        if on {
            out.push((kind, run_baseline(dataset, kind, cfg)?));
        }
    }
    Ok(out)
}

/// Everything produced by [`run_pipeline`].
#[derive(Clone, Debug)]
pub struct PipelineOutcome {
    pub report: MetricsReport,
    pub rl: RlOutcome,
    pub actions: ActionVector,
    pub grain: FitOutcome<GranularModel>,
    pub baselines: Vec<(BaselineKind, FitOutcome<BaselineModel>)>,
}

/// RL phase, action derivation, final classifier and baselines.
pub fn run_pipeline(dataset: Arc<LabeledDataset>, cfg: &TrainConfig) -> Result<PipelineOutcome> {
    let started = Instant::now();
    cfg.validate()?;
    let cache = build_cache(&dataset, cfg)?;
    info!("{}: rl phase, {} steps", dataset.name, cfg.rl.steps);
    let rl = run_rl_phase(&dataset, &cache, cfg)?;
    let actions = derive_actions(&rl.policy, &dataset, cfg.gnn.k_max)?;
    info!("{}: gnn phase, {} epochs", dataset.name, cfg.gnn.epochs);
    let grain = run_gnn_phase(&dataset, &cache, &actions, cfg)?;
    let baselines = run_baselines(&dataset, cfg)?;
    info!(
        "{}: grain test accuracy {:.4}",
        dataset.name, grain.test_accuracy
    );

    let mut curves = Curves {
        rl_action: rl.log.iter().map(|s| s.action).collect(),
        rl_reward: rl.log.iter().map(|s| s.reward).collect(),
        rl_fitness: rl.log.iter().map(|s| s.fitness).collect(),
        rl_episode_mean_fitness: rl.episode_mean_fitness.clone(),
        grain_loss: grain.loss_curve.clone(),
        grain_val_accuracy: grain.val_curve.clone(),
        ..Curves::default()
    };
    let mut report = MetricsReport {
        dataset: dataset.name.clone(),
        homophily: dataset.homophily().ok(),
        seed: cfg.seed,
        splits: match dataset.split_source {
            SplitSource::File => "file".to_string(),
            SplitSource::Seeded(s) => format!("seeded:{s}"),
        },
        config: cfg.dotted(),
        grain: PhaseMetrics::from_fit(&grain),
        gcn: None,
        mlp: None,
        actions: ActionStats::from_actions(&actions),
        curves: Curves::default(),
        wall_clock_seconds: 0.0,
    };
    for (kind, fit) in &baselines {
        match kind {
            BaselineKind::Gcn => {
                report.gcn = Some(PhaseMetrics::from_fit(fit));
                curves.gcn_loss = fit.loss_curve.clone();
                curves.gcn_val_accuracy = fit.val_curve.clone();
            }
            BaselineKind::Mlp => {
                report.mlp = Some(PhaseMetrics::from_fit(fit));
                curves.mlp_loss = fit.loss_curve.clone();
                curves.mlp_val_accuracy = fit.val_curve.clone();
            }
        }
    }
    report.curves = curves;
    report.wall_clock_seconds = started.elapsed().as_secs_f64();
    Ok(PipelineOutcome {
        report,
        rl,
        actions,
        grain,
        baselines,
    })
}

use std::sync::Arc;

use grain_core::env::*;
use grain_core::graph::{generate_synthetic, CsrGraph, LabeledDataset, PropagationCache, SplitSource, Splits, SynthConfig};
use grain_core::models::ActionVector;
use grain_core::tensor::{SeededRng, Tensor};
use proptest::prelude::*;

fn tiny(edges: &[(usize, usize)], n: usize, splits: Splits) -> Arc<LabeledDataset> {
    let x: Vec<Vec<f64>> = (0..n).map(|i| vec![i as f64, 1.0 - i as f64]).collect();
    let labels = (0..n).map(|i| i % 2).collect();
    Arc::new(
        LabeledDataset::new(
            "tiny",
            CsrGraph::from_edges(edges, n).unwrap(),
            Tensor::from_rows(&x).unwrap(),
            labels,
            2,
            splits,
            SplitSource::File,
        )
        .unwrap(),
    )
}

fn env_for(ds: &Arc<LabeledDataset>, cfg: EnvConfig, seed: u64) -> GranularityEnv {
    let cache = Arc::new(PropagationCache::build(&ds.normalized, &ds.features, 8).unwrap());
    let mut env = GranularityEnv::new(ds.clone(), cache, cfg, seed).unwrap();
    env.set_policy_snapshot(ActionVector::uniform(ds.n_nodes(), 4.5, 8).unwrap()).unwrap();
    env
}

fn quick() -> EnvConfig {
    EnvConfig {
        fitness: FitnessConfig { epochs: 5, ..FitnessConfig::default() },
        ..EnvConfig::default()
    }
}

#[test]
fn path_walk_from_end_is_forced() {
    let ds = tiny(&[(0, 1), (1, 2)], 3, Splits { train: vec![0], val: vec![1], test: vec![2] });
    let mut env = env_for(&ds, quick(), 0);
    let s0 = env.reset();
    assert_eq!(env.state().node, 0);
    assert_eq!(&*s0, ds.features.row(0));
    let step = env.step(1.2).unwrap();
    assert_eq!(step.next_node, 1);
    assert_eq!(&*step.next_state, ds.features.row(1));
    assert_eq!(env.state().history, vec![step.fitness]);
    assert_eq!(step.reward, compute_reward(&[step.fitness], &RewardConfig::default()).unwrap());
}

#[test]
fn isolated_node_falls_back_to_train_split() {
    let ds = tiny(&[(1, 2), (2, 3)], 4, Splits { train: vec![0, 3], val: vec![1], test: vec![2] });
    let mut env = env_for(&ds, quick(), 5);
    for _ in 0..20 {
        env.reset();
        if env.state().node == 0 {
            let step = env.step(3.0).unwrap();
            assert!(ds.splits.train.contains(&step.next_node));
        }
    }
}

#[test]
fn step_rejects_bad_actions() {
    let ds = tiny(&[(0, 1)], 3, Splits { train: vec![0], val: vec![1], test: vec![2] });
    let mut env = env_for(&ds, quick(), 0);
    env.reset();
    for a in [f64::NAN, 0.5, 8.5, f64::INFINITY] {
        assert!(env.step(a).is_err());
    }
}

#[test]
fn fitness_memo_returns_exact_value() {
    let ds = Arc::new(generate_synthetic(&SynthConfig { n: 100, ..SynthConfig::default() }).unwrap());
    let cache = Arc::new(PropagationCache::build(&ds.normalized, &ds.features, 8).unwrap());
    let mut ev = FitnessEvaluator::new(ds.clone(), cache, FitnessConfig::default()).unwrap();
    assert!(ev.fitness(0, 2.0).is_err(), "no snapshot installed");
    ev.set_snapshot(ActionVector::uniform(100, 4.5, 8).unwrap()).unwrap();
    let f = ev.fitness(3, 2.34).unwrap();
    assert_eq!(ev.fitness(3, 2.34).unwrap(), f);
    // Same 0.1 grid cell.
    assert_eq!(ev.fitness(3, 2.31).unwrap(), f);
    assert_eq!(ev.evaluations(), 1);
    assert!((0.0..=1.0).contains(&f));
    ev.set_snapshot(ActionVector::uniform(100, 4.5, 8).unwrap()).unwrap();
    assert_eq!(ev.cached(), 1, "unchanged snapshot keeps the memo");
    ev.set_snapshot(ActionVector::uniform(100, 2.0, 8).unwrap()).unwrap();
    assert_eq!(ev.cached(), 0);
}

/// Softmax regression on raw features by plain gradient descent.
fn linear_probe_val_accuracy(ds: &LabeledDataset) -> f64 {
    let (d, c) = (ds.dim(), ds.num_classes);
    let mut w = vec![vec![0.0; c]; d + 1];
    for _ in 0..300 {
        let mut grad = vec![vec![0.0; c]; d + 1];
        for &i in &ds.splits.train {
            let x: Vec<f64> = ds.features.row(i).iter().copied().chain([1.0]).collect();
            let z: Vec<f64> = (0..c).map(|k| (0..=d).map(|j| x[j] * w[j][k]).sum()).collect();
            let m = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let e: Vec<f64> = z.iter().map(|v| (v - m).exp()).collect();
            let s: f64 = e.iter().sum();
            for k in 0..c {
                let g = e[k] / s - if ds.labels[i] == k { 1.0 } else { 0.0 };
                for j in 0..=d {
                    grad[j][k] += g * x[j];
                }
            }
        }
        let scale = 0.5 / ds.splits.train.len() as f64;
        for j in 0..=d {
            for k in 0..c {
                w[j][k] -= scale * grad[j][k];
            }
        }
    }
    let correct = ds
        .splits
        .val
        .iter()
        .filter(|&&i| {
            let x: Vec<f64> = ds.features.row(i).iter().copied().chain([1.0]).collect();
            let z: Vec<f64> = (0..c).map(|k| (0..=d).map(|j| x[j] * w[j][k]).sum()).collect();
            let best = (0..c).fold(0, |b, k| if z[k] > z[b] { k } else { b });
            best == ds.labels[i]
        })
        .count();
    correct as f64 / ds.splits.val.len() as f64
}

#[test]
fn separable_data_gives_high_fitness() {
    let ds = Arc::new(generate_synthetic(&SynthConfig { class_separation: 5.0, ..SynthConfig::default() }).unwrap());
    let probe = linear_probe_val_accuracy(&ds);
    assert!(probe >= 0.95, "linear probe {probe}");
    let cache = Arc::new(PropagationCache::build(&ds.normalized, &ds.features, 8).unwrap());
    let mut ev = FitnessEvaluator::new(ds.clone(), cache, FitnessConfig { alpha: 1.0, ..FitnessConfig::default() }).unwrap();
    ev.set_snapshot(ActionVector::uniform(ds.n_nodes(), 1.0, 8).unwrap()).unwrap();
    let f = ev.fitness(0, 1.0).unwrap();
    assert!(f >= 0.95, "fitness {f}");
}

#[test]
fn randomized_labels_give_chance_fitness() {
    let ds = generate_synthetic(&SynthConfig { class_separation: 5.0, ..SynthConfig::default() }).unwrap();
    let mut rng = SeededRng::new(4);
    let labels = (0..ds.n_nodes()).map(|_| rng.below(ds.num_classes)).collect();
    let ds = Arc::new(ds.with_labels(labels).unwrap());
    let cache = Arc::new(PropagationCache::build(&ds.normalized, &ds.features, 8).unwrap());
    let mut ev = FitnessEvaluator::new(ds.clone(), cache, FitnessConfig::default()).unwrap();
    ev.set_snapshot(ActionVector::uniform(ds.n_nodes(), 4.5, 8).unwrap()).unwrap();
    let chance = 1.0 / ds.num_classes as f64;
    for a in [1.0, 3.3, 8.0] {
        let f = ev.fitness(7, a).unwrap();
        assert!((f - chance).abs() <= 0.1, "a={a}: {f}");
    }
}

#[test]
fn trajectories_are_reproducible_and_states_are_feature_rows() {
    let ds = Arc::new(generate_synthetic(&SynthConfig { n: 80, ..SynthConfig::default() }).unwrap());
    let run = |seed| {
        let mut env = env_for(&ds, quick(), seed);
        let mut rng = SeededRng::new(1);
        let mut trace = vec![];
        let mut s = env.reset();
        for _ in 0..30 {
            let step = env.step(rng.uniform_range(1.0, 8.0)).unwrap();
            assert_eq!(&*step.next_state, ds.features.row(step.next_node));
            assert_eq!(env.state().history.len(), env.state().t);
            trace.push((s.to_vec(), step.next_node, step.reward.to_bits(), step.fitness.to_bits()));
            s = step.next_state;
        }
        trace
    };
    assert_eq!(run(3), run(3));
}

#[test]
fn episode_ends_after_configured_length() {
    let ds = Arc::new(generate_synthetic(&SynthConfig { n: 60, ..SynthConfig::default() }).unwrap());
    let mut env = env_for(&ds, EnvConfig { episode_len: 3, ..quick() }, 0);
    env.reset();
    let done: Vec<bool> = (0..3).map(|_| env.step(2.0).unwrap().done).collect();
    assert_eq!(done, vec![false, false, true]);
    env.reset();
    assert!(env.state().history.is_empty());
}

#[test]
fn reward_examples() {
    let cfg = RewardConfig { scale: 10.0, window: 2 };
    assert!((compute_reward(&[0.5, 0.6, 0.7], &cfg).unwrap() - 1.0).abs() < 1e-12);
    let cfg = RewardConfig { scale: 10.0, window: 5 };
    assert!((compute_reward(&[0.5, 0.7], &cfg).unwrap() - 1.0).abs() < 1e-12);
    assert_eq!(compute_reward(&[0.4; 7], &cfg).unwrap(), 0.0);
    assert!(compute_reward(&[], &cfg).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn reward_ignores_history_outside_window(
        hist in prop::collection::vec(0.0f64..=1.0, 1..30),
        window in 0usize..8,
        junk in 0.0f64..=1.0,
    ) {
        let cfg = RewardConfig { scale: 10.0, window };
        let t = hist.len() - 1;
        let r = compute_reward(&hist, &cfg).unwrap();
        if t > window {
            let mut changed = hist.clone();
            changed[t - window - 1] = junk;
            prop_assert_eq!(compute_reward(&changed, &cfg).unwrap(), r);
        }
    }

    #[test]
    fn reward_sign_follows_improvement(
        hist in prop::collection::vec(0.1f64..=0.9, 1..20),
        window in 1usize..8,
        delta in 0.001f64..0.1,
    ) {
        let cfg = RewardConfig { scale: 10.0, window };
        let t = hist.len();
        let lo = t.saturating_sub(window);
        let seen = &hist[lo..];
        let max = seen.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let min = seen.iter().copied().fold(f64::INFINITY, f64::min);
        let mut up = hist.clone();
        up.push(max + delta);
        prop_assert!(compute_reward(&up, &cfg).unwrap() > 0.0);
        let mut down = hist.clone();
        down.push(min - delta);
        prop_assert!(compute_reward(&down, &cfg).unwrap() < 0.0);
    }
}

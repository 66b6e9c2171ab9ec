mod common;

use std::sync::Arc;

use common::*;
use grain_core::graph::{generate_synthetic, CsrGraph, LabeledDataset, PropagationCache, SplitSource, Splits, SynthConfig};
use grain_core::models::*;
use grain_core::tensor::{SeededRng, Tensor};
use proptest::prelude::*;

fn graph_case(max_n: usize) -> impl Strategy<Value = (usize, Vec<(usize, usize)>, u64)> {
    (1..=max_n).prop_flat_map(|n| (Just(n), prop::collection::vec((0..n, 0..n), 0..3 * n), any::<u64>()))
}

fn random_actions(n: usize, k_max: usize, rng: &mut SeededRng) -> Vec<f64> {
    (0..n)
        .map(|_| match rng.below(3) {
            0 => (1 + rng.below(k_max)) as f64,
            _ => rng.uniform_range(1.0, k_max as f64),
        })
        .collect()
}

fn cache_for(n: usize, edges: &[(usize, usize)], x: &Dense, k_max: usize) -> PropagationCache {
    let g = CsrGraph::from_edges(edges, n).unwrap().normalize();
    PropagationCache::build(&g, &Tensor::from_rows(x).unwrap(), k_max).unwrap()
}

#[test]
fn fractional_action_example() {
    let mut rng = SeededRng::new(3);
    let edges = random_edges(8, 0.3, &mut rng);
    let x = random_matrix(8, 2, &mut rng);
    let cache = cache_for(8, &edges, &x, 4);
    let z = granular_combine(&cache, &ActionVector::uniform(8, 2.3, 4).unwrap(), 0.0).unwrap();
    let p = powers(&normalized_adjacency(8, &edges), &x, 3);
    for i in 0..8 {
        for j in 0..2 {
            let want = (p[1][i][j] + p[2][i][j]) / 2.0 + 0.3 * p[2][i][j] + 0.7 * p[3][i][j];
            assert!((z.get(i, j) - want).abs() < 1e-10);
        }
    }
}

#[test]
fn integer_actions_zero_fractional_coefficients_bitwise() {
    for k in 1..=8 {
        for alpha in [0.0, 0.2, 0.7, 1.0] {
            let mix = HopMix::new(k as f64, alpha);
            assert_eq!(mix.lower_frac.to_bits(), 0.0f64.to_bits());
            assert_eq!(mix.upper_frac.to_bits(), 0.0f64.to_bits());
        }
    }
}

#[test]
fn rounding_ties_go_up() {
    assert_eq!(round_hops(2.5), 3);
    assert_eq!(round_hops(2.49), 2);
    assert_eq!(round_hops(1.0), 1);
}

#[test]
fn reference_form_matches_dense_recursion() {
    let mut rng = SeededRng::new(11);
    let edges = random_edges(10, 0.25, &mut rng);
    let x = random_matrix(10, 3, &mut rng);
    let g = CsrGraph::from_edges(&edges, 10).unwrap().normalize();
    let a_hat = normalized_adjacency(10, &edges);
    let xt = Tensor::from_rows(&x).unwrap();
    for a in [1.0, 2.0, 2.3, 3.5, 4.9] {
        for v in 0..10 {
            let got = reference_aggregate(&g, &xt, v, a).unwrap();
            let want = recursive_aggregate(&a_hat, &x, v, a);
            for (p, q) in got.iter().zip(&want) {
                assert!((p - q).abs() < 1e-10, "a={a} v={v}");
            }
        }
    }
}

#[test]
fn reference_form_integer_action_is_scaled_deepest_term() {
    let mut rng = SeededRng::new(5);
    let edges = random_edges(6, 0.4, &mut rng);
    let x = random_matrix(6, 2, &mut rng);
    let a_hat = normalized_adjacency(6, &edges);
    let g = CsrGraph::from_edges(&edges, 6).unwrap().normalize();
    let h2 = relu(&matmul(&a_hat, &relu(&matmul(&a_hat, &x))));
    let got = reference_aggregate(&g, &Tensor::from_rows(&x).unwrap(), 4, 2.0).unwrap();
    for j in 0..2 {
        assert!((got[j] - h2[4][j] / 2.0).abs() < 1e-12);
    }
}

fn dataset_from(n: usize, edges: &[(usize, usize)], x: &Dense, classes: usize) -> LabeledDataset {
    let labels: Vec<usize> = (0..n).map(|i| i % classes).collect();
    let splits = Splits {
        train: (0..n).filter(|i| i % 3 == 0).collect(),
        val: (0..n).filter(|i| i % 3 == 1).collect(),
        test: (0..n).filter(|i| i % 3 == 2).collect(),
    };
    LabeledDataset::new(
        "t",
        CsrGraph::from_edges(edges, n).unwrap(),
        Tensor::from_rows(x).unwrap(),
        labels,
        classes,
        splits,
        SplitSource::File,
    )
    .unwrap()
}

#[test]
fn alpha_one_integer_actions_reproduce_mlp() {
    let mut rng = SeededRng::new(21);
    let n = 15;
    let edges = random_edges(n, 0.3, &mut rng);
    let x = random_matrix(n, 4, &mut rng);
    let ds = dataset_from(n, &edges, &x, 3);
    let cache = PropagationCache::build(&ds.normalized, &ds.features, 8).unwrap();
    let actions: Vec<f64> = (0..n).map(|_| (1 + rng.below(8)) as f64).collect();
    let actions = ActionVector::new(actions, 8).unwrap();

    let granular = GranularModel::new(&[4, 6, 3], 1.0, 8, 0.5, &mut SeededRng::new(1)).unwrap();
    let mlp = BaselineModel::new(BaselineKind::Mlp, 4, 6, 3, 0.5, &mut SeededRng::new(1)).unwrap();
    let (g_out, _) = model_forward(&granular, &granular.prepare(&ds, &cache, &actions).unwrap(), false, &mut SeededRng::new(0)).unwrap();
    let (m_out, _) = model_forward(&mlp, &mlp.prepare(&ds).unwrap(), false, &mut SeededRng::new(0)).unwrap();
    assert!(max_abs_diff(&to_dense(&g_out), &to_dense(&m_out)) < 1e-12);

    let w: Vec<Dense> = granular.params().iter().map(|p| to_dense(&p.value)).collect();
    let oracle = mlp_forward(&x, &w[0], &w[1]);
    assert!(max_abs_diff(&to_dense(&g_out), &oracle) < 1e-12);
}

#[test]
fn parameter_count_ignores_hop_budget() {
    let mut rng = SeededRng::new(0);
    let a = GranularModel::new(&[30, 64, 5], 0.2, 2, 0.5, &mut rng).unwrap();
    let b = GranularModel::new(&[30, 64, 5], 0.2, 8, 0.5, &mut rng).unwrap();
    assert_eq!(a.num_parameters(), b.num_parameters());
    assert_eq!(a.num_parameters(), 30 * 64 + 64 * 5);
}

#[test]
fn fit_reaches_high_accuracy_on_separable_data() {
    let ds = generate_synthetic(&SynthConfig { h_target: 0.8, class_separation: 5.0, ..SynthConfig::default() }).unwrap();
    // Oracle first: a plain MLP confirms the data are separable.
    let cfg = FitConfig { epochs: 100, ..FitConfig::default() };
    let mlp = BaselineModel::new(BaselineKind::Mlp, ds.dim(), 64, ds.num_classes, 0.5, &mut SeededRng::new(0)).unwrap();
    let inputs = mlp.prepare(&ds).unwrap();
    let oracle = fit_and_score(mlp, &inputs, &ds, &cfg).unwrap();
    assert!(oracle.test_accuracy >= 0.9, "mlp oracle {}", oracle.test_accuracy);

    let cache = PropagationCache::build(&ds.normalized, &ds.features, 8).unwrap();
    let actions = ActionVector::uniform(ds.n_nodes(), 2.0, 8).unwrap();
    let model = GranularModel::new(&[ds.dim(), 64, ds.num_classes], 0.2, 8, 0.5, &mut SeededRng::new(0)).unwrap();
    let inputs = model.prepare(&ds, &cache, &actions).unwrap();
    let fit = fit_and_score(model, &inputs, &ds, &cfg).unwrap();
    assert!(fit.test_accuracy >= 0.9, "granular {}", fit.test_accuracy);
    assert!(fit.loss_curve[0] >= *fit.loss_curve.last().unwrap());
}

#[test]
fn shuffled_labels_give_chance_accuracy() {
    let ds = generate_synthetic(&SynthConfig { h_target: 0.8, class_separation: 5.0, ..SynthConfig::default() }).unwrap();
    let mut labels = ds.labels.clone();
    SeededRng::new(77).shuffle(&mut labels);
    let ds = ds.with_labels(labels).unwrap();
    let cache = PropagationCache::build(&ds.normalized, &ds.features, 8).unwrap();
    let actions = ActionVector::uniform(ds.n_nodes(), 2.0, 8).unwrap();
    let model = GranularModel::new(&[ds.dim(), 64, ds.num_classes], 0.2, 8, 0.5, &mut SeededRng::new(0)).unwrap();
    let inputs = model.prepare(&ds, &cache, &actions).unwrap();
    let fit = fit_and_score(model, &inputs, &ds, &FitConfig { epochs: 100, ..FitConfig::default() }).unwrap();
    let chance = 1.0 / ds.num_classes as f64;
    assert!((fit.val_accuracy - chance).abs() <= 0.1, "val {}", fit.val_accuracy);
    assert!((fit.test_accuracy - chance).abs() <= 0.1, "test {}", fit.test_accuracy);
}

#[test]
fn fit_rejects_empty_split_and_zero_epochs() {
    let ds = generate_synthetic(&SynthConfig { n: 60, ..SynthConfig::default() }).unwrap();
    let mlp = BaselineModel::new(BaselineKind::Mlp, ds.dim(), 8, ds.num_classes, 0.5, &mut SeededRng::new(0)).unwrap();
    let inputs = mlp.prepare(&ds).unwrap();
    assert!(fit_and_score(mlp, &inputs, &ds, &FitConfig { epochs: 0, ..FitConfig::default() }).is_err());
}

#[test]
fn fit_is_deterministic() {
    let ds = Arc::new(generate_synthetic(&SynthConfig { n: 100, ..SynthConfig::default() }).unwrap());
    let run = || {
        let m = BaselineModel::new(BaselineKind::Gcn, ds.dim(), 16, ds.num_classes, 0.5, &mut SeededRng::new(2)).unwrap();
        let inputs = m.prepare(&ds).unwrap();
        fit_and_score(m, &inputs, &ds, &FitConfig { epochs: 30, seed: 4, ..FitConfig::default() }).unwrap()
    };
    let (a, b) = (run(), run());
    assert_eq!(a.loss_curve, b.loss_curve);
    assert_eq!(a.logits, b.logits);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn combine_matches_dense_oracle((n, edges, seed) in graph_case(20), alpha in 0.0f64..=1.0) {
        let mut rng = SeededRng::new(seed);
        let x = random_matrix(n, 3, &mut rng);
        let acts = random_actions(n, 8, &mut rng);
        let cache = cache_for(n, &edges, &x, 8);
        let z = granular_combine(&cache, &ActionVector::new(acts.clone(), 8).unwrap(), alpha).unwrap();
        let want = combine(&normalized_adjacency(n, &edges), &x, &acts, alpha);
        let diff = max_abs_diff(&to_dense(&z), &want);
        prop_assert!(diff < 1e-10, "diff {diff}");
    }

    #[test]
    fn alpha_one_integer_is_identity((n, edges, seed) in graph_case(12)) {
        let mut rng = SeededRng::new(seed);
        let x = random_matrix(n, 2, &mut rng);
        let acts: Vec<f64> = (0..n).map(|_| (1 + rng.below(8)) as f64).collect();
        let cache = cache_for(n, &edges, &x, 8);
        let z = granular_combine(&cache, &ActionVector::new(acts, 8).unwrap(), 1.0).unwrap();
        prop_assert_eq!(to_dense(&z), x);
    }

    #[test]
    fn combine_is_permutation_equivariant((n, edges, seed) in graph_case(15), alpha in 0.0f64..=1.0) {
        let mut rng = SeededRng::new(seed);
        let x = random_matrix(n, 2, &mut rng);
        let acts = ActionVector::new(random_actions(n, 6, &mut rng), 6).unwrap();
        let mut perm: Vec<usize> = (0..n).collect();
        rng.shuffle(&mut perm);
        let mut px = zeros(n, 2);
        for i in 0..n {
            px[perm[i]] = x[i].clone();
        }
        let g = CsrGraph::from_edges(&edges, n).unwrap().normalize();
        let pg = g.permute(&perm).unwrap();
        let z = granular_combine(&PropagationCache::build(&g, &Tensor::from_rows(&x).unwrap(), 6).unwrap(), &acts, alpha).unwrap();
        let pz = granular_combine(&PropagationCache::build(&pg, &Tensor::from_rows(&px).unwrap(), 6).unwrap(), &acts.permute(&perm), alpha).unwrap();
        for i in 0..n {
            for j in 0..2 {
                prop_assert!((z.get(i, j) - pz.get(perm[i], j)).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn actions_out_of_bounds_rejected(a in prop_oneof![-10.0f64..0.999, 8.001f64..50.0]) {
        prop_assert!(ActionVector::new(vec![a], 8).is_err());
        prop_assert!(check_action(a, 8).is_err());
    }
}

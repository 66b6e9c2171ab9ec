//! Dense reference implementations used as test oracles. Nothing here calls
//! the sparse or tape code paths under test.
#![allow(dead_code)]

use grain_core::tensor::{SeededRng, Tensor};

pub type Dense = Vec<Vec<f64>>;

pub fn to_dense(t: &Tensor) -> Dense {
    (0..t.rows()).map(|i| t.row(i).to_vec()).collect()
}

pub fn zeros(r: usize, c: usize) -> Dense {
    vec![vec![0.0; c]; r]
}

pub fn matmul(a: &Dense, b: &Dense) -> Dense {
    let (n, m) = (a.len(), b.first().map_or(0, Vec::len));
    let mut out = zeros(n, m);
    for i in 0..n {
        for (k, bk) in b.iter().enumerate() {
            for j in 0..m {
                out[i][j] += a[i][k] * bk[j];
            }
        }
    }
    out
}

pub fn relu(a: &Dense) -> Dense {
    a.iter().map(|r| r.iter().map(|x| x.max(0.0)).collect()).collect()
}

pub fn log_softmax(a: &Dense) -> Dense {
    a.iter()
        .map(|r| {
            let m = r.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let lse = m + r.iter().map(|x| (x - m).exp()).sum::<f64>().ln();
            r.iter().map(|x| x - lse).collect()
        })
        .collect()
}

/// `D^{-1/2} (A + I) D^{-1/2}` from a raw edge list, self-edges ignored.
pub fn normalized_adjacency(n: usize, edges: &[(usize, usize)]) -> Dense {
    let mut a = zeros(n, n);
    for &(u, v) in edges {
        if u != v {
            a[u][v] = 1.0;
            a[v][u] = 1.0;
        }
    }
    for (i, row) in a.iter_mut().enumerate() {
        row[i] = 1.0;
    }
    let deg: Vec<f64> = a.iter().map(|r| r.iter().sum()).collect();
    let mut out = zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            out[i][j] = a[i][j] / deg[i].sqrt() / deg[j].sqrt();
        }
    }
    out
}

/// `[X, ÂX, Â²X, ..., Â^k X]`.
pub fn powers(a_hat: &Dense, x: &Dense, k: usize) -> Vec<Dense> {
    let mut out = vec![x.clone()];
    for _ in 0..k {
        let next = matmul(a_hat, out.last().unwrap());
        out.push(next);
    }
    out
}

/// Nearest integer, halves upward (actions are positive).
pub fn round_half_up(a: f64) -> usize {
    (a + 0.5).floor() as usize
}

/// The shared aggregator written termwise for one node:
/// `(1/k̄) Σ_{k=1..k̄} [(1-α) P_k + α H] + (a-⌊a⌋) P_k̄ + (⌈a⌉-a) P_{k̄+1}`.
pub fn combine_row(p: &[Dense], h: &Dense, i: usize, a: f64, alpha: f64) -> Vec<f64> {
    let kb = round_half_up(a);
    let d = h[i].len();
    let mut z = vec![0.0; d];
    for k in 1..=kb {
        for j in 0..d {
            z[j] += ((1.0 - alpha) * p[k][i][j] + alpha * h[i][j]) / kb as f64;
        }
    }
    for j in 0..d {
        z[j] += (a - a.floor()) * p[kb][i][j] + (a.ceil() - a) * p[kb + 1][i][j];
    }
    z
}

pub fn combine(a_hat: &Dense, h: &Dense, actions: &[f64], alpha: f64) -> Dense {
    let kmax = actions.iter().map(|&a| round_half_up(a)).max().unwrap_or(1);
    let p = powers(a_hat, h, kmax + 1);
    (0..h.len()).map(|i| combine_row(&p, h, i, actions[i], alpha)).collect()
}

/// Per-node recursion `h^k = relu(Â h^{k-1})`, `h^0 = X`, then
/// `h^k̄/k̄ + (a-⌊a⌋)(Â h^{k̄-1})_v + (⌈a⌉-a)(Â h^k̄)_v`.
pub fn recursive_aggregate(a_hat: &Dense, x: &Dense, v: usize, a: f64) -> Vec<f64> {
    let kb = round_half_up(a);
    let mut h = vec![x.clone()];
    for k in 1..=kb {
        let next = relu(&matmul(a_hat, &h[k - 1]));
        h.push(next);
    }
    let lower = matmul(a_hat, &h[kb - 1]);
    let upper = matmul(a_hat, &h[kb]);
    (0..x[v].len())
        .map(|j| h[kb][v][j] / kb as f64 + (a - a.floor()) * lower[v][j] + (a.ceil() - a) * upper[v][j])
        .collect()
}

/// Bias-free two-layer MLP `log_softmax(relu(X W1) W2)`.
pub fn mlp_forward(x: &Dense, w1: &Dense, w2: &Dense) -> Dense {
    log_softmax(&matmul(&relu(&matmul(x, w1)), w2))
}

/// Erdős–Rényi-style edge list on `n` nodes (may contain duplicates in
/// both directions, never self-edges).
pub fn random_edges(n: usize, p: f64, rng: &mut SeededRng) -> Vec<(usize, usize)> {
    let mut edges = Vec::new();
    for u in 0..n {
        for v in 0..n {
            if u != v && rng.bernoulli(p) {
                edges.push((u, v));
            }
        }
    }
    edges
}

pub fn random_matrix(r: usize, c: usize, rng: &mut SeededRng) -> Dense {
    (0..r).map(|_| (0..c).map(|_| rng.uniform_range(-1.0, 1.0)).collect()).collect()
}

pub fn max_abs_diff(a: &Dense, b: &Dense) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter()
        .zip(b)
        .flat_map(|(x, y)| {
            assert_eq!(x.len(), y.len());
            x.iter().zip(y).map(|(p, q)| (p - q).abs())
        })
        .fold(0.0, f64::max)
}

/// Stateless quadratic-reward problem `r(a) = -(a - a*)²` with a fixed
/// state `[1.0]`. Runs `steps` environment steps, one agent update per
/// step once the buffer holds a batch. Returns the final deterministic
/// action and the number of updates made.
pub fn run_toy_td3(seed: u64, target: f64, steps: usize, cfg: grain_core::td3::Td3Config) -> (f64, u64) {
    use grain_core::td3::{ReplayBuffer, Td3Agent, Transition};
    use std::sync::Arc;

    let state: Arc<[f64]> = Arc::from(vec![1.0]);
    let mut agent = Td3Agent::new(1, cfg.clone(), seed).unwrap();
    let mut buffer = ReplayBuffer::new(cfg.capacity).unwrap();
    for _ in 0..steps {
        let a = agent.explore(&state).unwrap();
        buffer.push(Transition {
            state: state.clone(),
            action: a,
            reward: -(a - target).powi(2),
            next_state: state.clone(),
        });
        agent.update(&buffer).unwrap();
    }
    (agent.actor.act(&state).unwrap(), agent.updates())
}

/// Optimum used by the toy problem for a given seed, spread over (1, 8).
pub fn toy_target(seed: u64) -> f64 {
    2.0 + 1.1 * seed as f64
}

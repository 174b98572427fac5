#![allow(dead_code)]

use frlab_core::WeightedGraph;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Connected graph on `n` vertices: a random spanning tree plus `extra`
/// random chords, weights in `[0.5, 2)`.
pub fn random_connected(n: usize, extra: usize, seed: u64) -> WeightedGraph {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut edges = Vec::with_capacity(n - 1 + extra);
    for v in 1..n {
        let u = rng.gen_range(0..v);
        edges.push((u, v, rng.gen_range(0.5..2.0)));
    }
    let mut seen: std::collections::HashSet<(usize, usize)> =
        edges.iter().map(|&(u, v, _)| (u.min(v), u.max(v))).collect();
    let mut added = 0;
    let mut attempts = 0;
    while added < extra && attempts < 20 * extra + 20 {
        attempts += 1;
        let (u, v) = (rng.gen_range(0..n), rng.gen_range(0..n));
        if u == v || !seen.insert((u.min(v), u.max(v))) {
            continue;
        }
        edges.push((u, v, rng.gen_range(0.5..2.0)));
        added += 1;
    }
    WeightedGraph::from_edges(n, &edges).unwrap()
}

pub fn path(n: usize) -> WeightedGraph {
    let edges: Vec<_> = (0..n - 1).map(|i| (i, i + 1, 1.0)).collect();
    WeightedGraph::from_edges(n, &edges).unwrap()
}

pub fn random_function(n: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect()
}

mod common;

use common::path;
use faer::linalg::solvers::Solve;
use faer::Mat;
use frlab_core::walks::exit_exponent_fit;
use frlab_core::{build_vicsek, make_walk, simulate_exit, MarkovOperator};

/// Expected exit time from `B(x, r)` by solving `(I - P) h = 1` inside the
/// ball with `h = 0` outside.
fn exact_mean_exit(op: &MarkovOperator<'_>, x: usize, r: u32) -> f64 {
    let g = op.graph();
    let dist = g.bfs_distances(x);
    let inside: Vec<usize> = (0..g.vertex_count()).filter(|&y| dist[y] < r).collect();
    let mut index = vec![usize::MAX; g.vertex_count()];
    for (i, &y) in inside.iter().enumerate() {
        index[y] = i;
    }
    let n = inside.len();
    let mut a = Mat::<f64>::zeros(n, n);
    for (i, &y) in inside.iter().enumerate() {
        a[(i, i)] += 1.0;
        for z in 0..g.vertex_count() {
            let p = op.p(y, z);
            if p > 0.0 && index[z] != usize::MAX {
                a[(i, index[z])] -= p;
            }
        }
    }
    let rhs = Mat::<f64>::from_fn(n, 1, |_, _| 1.0);
    let h = a.partial_piv_lu().solve(&rhs);
    h[(index[x], 0)]
}

#[test]
fn monte_carlo_matches_linear_solve() {
    let v = build_vicsek(2, 2).unwrap();
    let op = make_walk(&v.graph, 0.5).unwrap();
    for r in [1u32, 3, 5] {
        let exact = exact_mean_exit(&op, v.center, r);
        let mc = simulate_exit(&op, v.center, r, 20_000, 99).unwrap();
        assert!(
            (mc.mean - exact).abs() < 4.0 * mc.stderr,
            "r = {r}: {} +- {} vs {exact}",
            mc.mean,
            mc.stderr
        );
        assert!(mc.mean >= r as f64);
    }
}

#[test]
fn simple_walk_on_path_is_diffusive() {
    let g = path(201);
    let op = make_walk(&g, 0.0).unwrap();
    let mut stats = Vec::new();
    for r in [8u32, 16, 32] {
        let s = simulate_exit(&op, 100, r, 4000, 5).unwrap();
        let r2 = (r * r) as f64;
        assert!((s.mean - r2).abs() < 0.15 * r2, "r = {r}: {}", s.mean);
        assert!((exact_mean_exit(&op, 100, r) - r2).abs() < 1e-6 * r2);
        stats.push(s);
    }
    let fit = exit_exponent_fit(&stats).unwrap();
    assert!((fit.exponent - 2.0).abs() < 0.15, "{fit:?}");
}

#[test]
fn laziness_is_a_time_change() {
    let v = build_vicsek(2, 3).unwrap();
    let lazy = make_walk(&v.graph, 0.5).unwrap();
    let simple = make_walk(&v.graph, 0.0).unwrap();
    let mut fits = Vec::new();
    for op in [&lazy, &simple] {
        let stats: Vec<_> = [3u32, 9, 27]
            .iter()
            .map(|&r| simulate_exit(op, v.center, r, 4000, 21).unwrap())
            .collect();
        fits.push((stats[2].mean, exit_exponent_fit(&stats).unwrap().exponent));
    }
    let factor = fits[0].0 / fits[1].0;
    assert!((factor - 2.0).abs() < 0.15, "{factor}");
    assert!((fits[0].1 - fits[1].1).abs() < 0.1, "{fits:?}");
    // the time change is exact in expectation
    let a = exact_mean_exit(&lazy, v.center, 9);
    let b = exact_mean_exit(&simple, v.center, 9);
    assert!((a / b - 2.0).abs() < 1e-9);
}

#[test]
fn three_dimensional_walk_exponent() {
    let v = build_vicsek(3, 3).unwrap();
    let op = make_walk(&v.graph, 0.0).unwrap();
    let stats: Vec<_> = [3u32, 9, 27]
        .iter()
        .map(|&r| simulate_exit(&op, v.center, r, 4000, 8).unwrap())
        .collect();
    let fit = exit_exponent_fit(&stats).unwrap();
    assert!((fit.exponent - 3.0).abs() < 0.25, "{fit:?}");
}

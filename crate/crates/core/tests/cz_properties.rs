mod common;

use common::{path, random_connected};
use frlab_core::cz::{
    cz_decompose, cz_tail_claim, doubling_constant, maximal_function, uncentered_maximal_function,
    verify_decomposition, CzReport,
};
use frlab_core::{build_vicsek, lp_norm, make_walk, Backend, Calculus, WeightedGraph};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// A few tall spikes over low noise, and a level between the mean and the peak.
fn random_pair(g: &WeightedGraph, rng: &mut ChaCha8Rng) -> (Vec<f64>, f64) {
    let n = g.vertex_count();
    let mut f: Vec<f64> = (0..n).map(|_| rng.gen_range(-0.2..0.2)).collect();
    for _ in 0..rng.gen_range(1..6) {
        let x = rng.gen_range(0..n);
        f[x] += rng.gen_range(-50.0..50.0);
    }
    let avg = lp_norm(g, &f, 1.0) / g.total_measure();
    let peak = lp_norm(g, &f, f64::INFINITY);
    let lambda = (rng.gen_range(avg.ln()..(2.0 * peak).ln())).exp();
    (f, lambda)
}

fn run_family(g: &WeightedGraph, pairs: usize, seed: u64) -> [f64; 3] {
    let k = doubling_constant(g);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = [0.0f64; 3];
    for _ in 0..pairs {
        let (f, lambda) = random_pair(g, &mut rng);
        let dec = cz_decompose(g, &f, lambda).unwrap();
        let check = verify_decomposition(g, &f, &dec, k);
        assert!(check.passed(), "lambda = {lambda}: {check:?}");
        assert!(check.exact_error < 1e-10);
        worst[0] = worst[0].max(check.constants.c1);
        worst[1] = worst[1].max(check.constants.c2);
        worst[2] = worst[2].max(check.constants.c3);
    }
    worst
}

#[test]
fn random_pairs_on_path() {
    let worst = run_family(&path(101), 200, 1);
    assert!(worst.iter().all(|c| c.is_finite()));
}

#[test]
fn random_pairs_on_vicsek() {
    let v = build_vicsek(2, 2).unwrap();
    let worst = run_family(&v.graph, 200, 2);
    assert!(worst.iter().all(|c| c.is_finite()));
}

#[test]
fn random_pairs_on_random_graphs() {
    for seed in 0..4 {
        let g = random_connected(80, 20, seed);
        run_family(&g, 50, seed + 10);
    }
}

#[test]
fn level_set_shrinks_with_lambda() {
    let g = path(101);
    let mut f = vec![0.0; 101];
    f[50] = 100.0;
    let mut last = usize::MAX;
    let mut last_measure = f64::INFINITY;
    for lambda in [0.5, 1.0, 4.0, 16.0, 64.0, 101.0] {
        let mf = maximal_function(&g, &f);
        let count = mf.iter().filter(|&&v| v > lambda).count();
        assert!(count <= last);
        last = count;
        let dec = cz_decompose(&g, &f, lambda).unwrap();
        let total: f64 = dec.bad.iter().map(|b| b.ball.measure).sum();
        assert!(total <= last_measure + 1e-12);
        last_measure = total;
    }
    assert_eq!(last, 0);
}

#[test]
fn centered_and_uncentered_maximal_are_comparable() {
    let v = build_vicsek(2, 2).unwrap();
    for g in [path(120), v.graph.clone(), random_connected(150, 30, 4)] {
        let k = doubling_constant(&g);
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for _ in 0..5 {
            let (f, _) = random_pair(&g, &mut rng);
            let c = maximal_function(&g, &f);
            let u = uncentered_maximal_function(&g, &f);
            for x in 0..g.vertex_count() {
                assert!(c[x] <= u[x] * (1.0 + 1e-12));
                assert!(u[x] <= k.powi(3) * c[x] * (1.0 + 1e-12));
            }
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn decomposition_is_exact(n in 5usize..80, seed in any::<u64>(), scale in 0.01f64..10.0) {
        let g = random_connected(n, n / 4, seed);
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x55);
        let f: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0) * rng.gen_range(0.0..5.0)).collect();
        let avg = lp_norm(&g, &f, 1.0) / g.total_measure();
        let dec = cz_decompose(&g, &f, avg * (1.0 + scale)).unwrap();
        let check = verify_decomposition(&g, &f, &dec, doubling_constant(&g));
        prop_assert!(check.exact_error < 1e-10);
        prop_assert!(check.max_bad_mean < 1e-10);
        prop_assert!(check.halves_disjoint && check.covers_level_set && check.supports_ok);
    }
}

fn bump_tail_ratios(g: &WeightedGraph, center: usize, width: u32, m: f64, lambdas: &[f64]) -> Vec<f64> {
    let op = make_walk(g, 0.5).unwrap();
    let calc = Calculus::new(&op, Backend::Spectral).unwrap();
    // an uneven bump, so that bad parts are not killed by their own mean
    let dist = g.bfs_distances(center);
    let f: Vec<f64> = (0..g.vertex_count())
        .map(|x| if dist[x] <= width { 100.0 * (1.0 + 0.5 * (x as f64).sin()) } else { 0.0 })
        .collect();
    lambdas
        .iter()
        .map(|&lambda| {
            let dec = cz_decompose(g, &f, lambda).unwrap();
            assert!((1..=5).contains(&dec.bad.len()), "lambda = {lambda}: {} balls", dec.bad.len());
            let tails = cz_tail_claim(&calc, &dec, m).unwrap();
            let report = CzReport::new(g, &dec, Some(&tails));
            assert_eq!(report.per_ball.len(), dec.bad.len());
            tails.iter().map(|t| t.tail_ratio).fold(0.0, f64::max)
        })
        .collect()
}

#[test]
fn tail_claim_stable_on_vicsek() {
    let v = build_vicsek(2, 3).unwrap();
    let lambda0 = 64.0;
    let ratios = bump_tail_ratios(&v.graph, v.center, 1, v.walk_exponent(), &[0.5 * lambda0, lambda0, 2.0 * lambda0]);
    let hi = ratios.iter().copied().fold(0.0, f64::max);
    let lo = ratios.iter().copied().fold(f64::INFINITY, f64::min);
    assert!(hi.is_finite() && hi / lo < 3.0, "{ratios:?}");
}

#[test]
fn tail_claim_stable_on_path() {
    let g = path(201);
    let ratios = bump_tail_ratios(&g, 100, 1, 2.0, &[16.0, 32.0, 64.0]);
    let hi = ratios.iter().copied().fold(0.0, f64::max);
    let lo = ratios.iter().copied().fold(f64::INFINITY, f64::min);
    assert!(hi.is_finite() && hi / lo < 3.0, "{ratios:?}");
}

use frlab_core::counterexample::{build_gn, exponent_gap, gn_norms, nash_test, reverse_riesz_growth, threshold_p};
use frlab_core::vicsek::{growth_exponent, vicsek_vertex_count};
use frlab_core::{build_vicsek, Backend};

#[test]
fn structure_for_small_dimensions_and_levels() {
    for dim in 1..=3usize {
        for level in 0..=4u32 {
            if dim == 3 && level == 4 {
                continue;
            }
            let v = build_vicsek(dim, level).unwrap();
            let g = &v.graph;
            let expect = (1u128 << dim) * (1 + (1u128 << dim)).pow(level) + 1;
            assert_eq!(g.vertex_count() as u128, expect);
            assert_eq!(vicsek_vertex_count(dim, level), Some(expect));
            assert_eq!(g.edge_count() + 1, g.vertex_count(), "tree: |E| = |V| - 1");
            let d = g.bfs_distances(v.center);
            for &z in &v.corners {
                assert_eq!(d[z] as u64, 3u64.pow(level));
            }
        }
    }
}

#[test]
fn largest_structure_case() {
    let v = build_vicsek(3, 4).unwrap();
    assert_eq!(v.graph.vertex_count(), 8 * 9usize.pow(4) + 1);
    assert_eq!(v.graph.edge_count() + 1, v.graph.vertex_count());
    let d = v.graph.bfs_distances(v.center);
    assert!(v.corners.iter().all(|&z| d[z] == 81));
}

#[test]
fn edge_sum_closed_form() {
    for dim in 1..=3usize {
        for level in 1..=4u32 {
            let v = build_vicsek(dim, level).unwrap();
            let fam = build_gn(&v);
            for p in [1.5, 2.0, 3.0] {
                let norms = gn_norms(&fam, 0.5, p).unwrap();
                let expect = (1u64 << dim) as f64 * 3f64.powf(-(level as f64) * (p - 1.0));
                assert!(
                    (norms.edge_sum - expect).abs() <= 1e-12 * expect,
                    "N={dim} n={level} p={p}: {} vs {expect}",
                    norms.edge_sum
                );
            }
        }
    }
}

#[test]
fn gn_shape() {
    for dim in 1..=3usize {
        for level in 1..=3u32 {
            let v = build_vicsek(dim, level).unwrap();
            let fam = build_gn(&v);
            let g = &v.graph;
            let scale = 3f64.powi(level as i32);
            for x in 0..g.vertex_count() {
                if let Some(pos) = v.diagonal_pos(x) {
                    assert_eq!(fam.values[x], pos.to_corner as f64 / scale);
                }
                assert!((0.0..=1.0).contains(&fam.values[x]));
            }
            // off-diagonal vertices copy their nearest diagonal vertex
            let diag: Vec<usize> = (0..g.vertex_count()).filter(|&x| v.on_diagonal(x)).collect();
            for x in (0..g.vertex_count()).filter(|&x| !v.on_diagonal(x)).take(50) {
                let d = g.bfs_distances(x);
                let nearest = diag.iter().copied().min_by_key(|&z| d[z]).unwrap();
                let best = d[nearest];
                assert_eq!(diag.iter().filter(|&&z| d[z] == best).count(), 1);
                assert_eq!(fam.values[x], fam.values[nearest]);
            }
        }
    }
}

#[test]
fn norm_sandwich() {
    for level in 1..=4u32 {
        let v = build_vicsek(2, level).unwrap();
        let fam = build_gn(&v);
        let central_measure: f64 = v.central_block().iter().map(|&x| v.graph.measure(x)).sum();
        for p in [1.5, 2.0, 3.0] {
            let norms = gn_norms(&fam, 0.5, p).unwrap();
            assert!(norms.l1 <= v.graph.total_measure());
            assert!(norms.lp_p >= (2.0f64 / 3.0).powf(p) * central_measure - 1e-12);
            let ratio = norms.lp_p / fam.support_size() as f64;
            assert!(ratio > 0.1 && ratio <= 4.0, "level {level}: {ratio}");
        }
    }
}

#[test]
fn gap_sign_predicts_slope_sign() {
    let d = growth_exponent(2);
    for &(p, beta) in &[(1.3, 0.5), (1.7, 0.5), (3.0, 0.5), (1.5, 0.45), (2.5, 0.55)] {
        let rows = nash_test(2, &[2, 3], p, beta, Backend::Spectral, 0.5).unwrap();
        let gap = exponent_gap(d, p, beta);
        assert!(rows[0].slope_obs * gap < 0.0, "p={p} beta={beta} gap={gap} slope={}", rows[0].slope_obs);
        assert!((rows[0].slope_obs + gap).abs() < 0.02);
        assert_eq!(gap < 0.0, p < threshold_p(d, beta));
    }
}

#[test]
fn above_threshold_shows_no_growth() {
    let r = reverse_riesz_growth(2, &[2, 3, 4], 2.2, 0.5, Backend::Spectral, 0.5).unwrap();
    assert!(r.fit.exponent < 0.01, "{:?}", r.fit);
    assert!(r.rows[0].slope_obs < 0.0);
}

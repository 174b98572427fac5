mod common;

use common::{random_connected, random_function};
use frlab_core::calculus::{inner, project_mean_zero, random_mean_zero_family, ratio_table, series_terms_for};
use frlab_core::markov::kernel_column;
use frlab_core::{build_vicsek, gradient_length, laplacian, lp_norm, make_walk, Backend, Calculus};
use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn energy_identity(n in 2usize..60, extra in 0usize..40, seed in any::<u64>(), alpha in 0.0f64..0.9) {
        let g = random_connected(n, extra, seed);
        let op = make_walk(&g, alpha).unwrap();
        let f = random_function(n, seed ^ 1);
        let grad = gradient_length(&op, &f);
        let lhs = lp_norm(&g, &grad, 2.0).powi(2);
        let rhs = inner(&g, &laplacian(&op, &f), &f);
        prop_assert!((lhs - rhs).abs() <= 1e-10 * (1.0 + lhs.abs()), "{} vs {}", lhs, rhs);
    }

    #[test]
    fn fractional_powers_are_nonnegative(n in 2usize..40, seed in any::<u64>(), beta in 0.05f64..1.0) {
        let g = random_connected(n, n / 3, seed);
        let op = make_walk(&g, 0.5).unwrap();
        let calc = Calculus::new(&op, Backend::Spectral).unwrap();
        let f = random_function(n, seed.wrapping_add(7));
        let out = calc.frac_power(&f, beta, false).unwrap();
        prop_assert!(inner(&g, &out.values, &f) >= -1e-12);
    }

    #[test]
    fn riesz_is_an_isometry_on_mean_zero(n in 2usize..50, seed in any::<u64>()) {
        let g = random_connected(n, n / 2, seed);
        let op = make_walk(&g, 0.5).unwrap();
        let calc = Calculus::new(&op, Backend::Spectral).unwrap();
        let f = random_function(n, seed ^ 0xabc);
        let t = calc.riesz_apply(&f).unwrap();
        let (centered, _) = project_mean_zero(&g, &f);
        let a = lp_norm(&g, &t.values, 2.0);
        let b = lp_norm(&g, &centered, 2.0);
        prop_assert!((a - b).abs() < 1e-8 * b.max(1.0), "{} vs {}", a, b);
    }

    #[test]
    fn kernel_columns_conserve_mass_and_are_reversible(n in 2usize..40, seed in any::<u64>(), k in 0usize..30) {
        let g = random_connected(n, n / 2, seed);
        let op = make_walk(&g, 0.5).unwrap();
        let a = kernel_column(&op, 0, k).unwrap().pop().unwrap();
        a.check_invariants(&g, 1e-12).unwrap();
        let y = n - 1;
        let b = kernel_column(&op, y, k).unwrap().pop().unwrap();
        let lhs = a.values[y] * g.measure(y);
        let rhs = b.values[0] * g.measure(0);
        prop_assert!((lhs - rhs).abs() < 1e-12);
    }
}

#[test]
fn half_power_squared_is_the_laplacian() {
    let v = build_vicsek(2, 2).unwrap();
    let op = make_walk(&v.graph, 0.5).unwrap();
    let calc = Calculus::new(&op, Backend::Spectral).unwrap();
    let f = random_function(v.graph.vertex_count(), 5);
    let once = calc.frac_power(&f, 0.5, false).unwrap().values;
    let twice = calc.frac_power(&once, 0.5, false).unwrap().values;
    let direct = laplacian(&op, &f);
    for (a, b) in twice.iter().zip(&direct) {
        assert!((a - b).abs() < 1e-8);
    }
}

#[test]
fn riesz_of_half_power_is_the_gradient() {
    let v = build_vicsek(2, 2).unwrap();
    let op = make_walk(&v.graph, 0.5).unwrap();
    let calc = Calculus::new(&op, Backend::Spectral).unwrap();
    let g0 = random_function(v.graph.vertex_count(), 9);
    let f = calc.frac_power(&g0, 0.5, false).unwrap().values;
    let t = calc.riesz_apply(&f).unwrap();
    let grad = gradient_length(&op, &g0);
    assert!(t.removed_mean.abs() < 1e-12);
    for (a, b) in t.values.iter().zip(&grad) {
        assert!((a - b).abs() < 1e-8);
    }
}

#[test]
fn series_matches_spectral() {
    let v = build_vicsek(2, 1).unwrap();
    let op = make_walk(&v.graph, 0.5).unwrap();
    let spectral = Calculus::new(&op, Backend::Spectral).unwrap();
    let f = random_mean_zero_family(&v.graph, 1, 3).pop().unwrap();
    let exact = spectral.frac_power(&f, 0.5, false).unwrap().values;
    let mut last_err = f64::INFINITY;
    for k in [10, 50, 200, 2000] {
        let series = Calculus::new(&op, Backend::Series(k)).unwrap();
        let approx = series.frac_power(&f, 0.5, false).unwrap();
        assert!(approx.last_term_norm.unwrap() >= 0.0);
        let err = exact
            .iter()
            .zip(&approx.values)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        assert!(err < last_err, "K = {k}: {err} !< {last_err}");
        last_err = err;
    }
    assert!(last_err < 1e-4, "{last_err}");
}

#[test]
fn inverse_root_series_matches_spectral() {
    let v = build_vicsek(2, 1).unwrap();
    let op = make_walk(&v.graph, 0.5).unwrap();
    let spectral = Calculus::new(&op, Backend::Spectral).unwrap();
    let s_max = spectral.decomposition().unwrap().second_largest(1e-10).unwrap();
    let k = series_terms_for(-0.5, s_max, 1e-8);
    let series = Calculus::new(&op, Backend::Series(k)).unwrap();
    let f = random_mean_zero_family(&v.graph, 1, 4).pop().unwrap();
    let a = spectral.frac_power(&f, -0.5, false).unwrap().values;
    let b = series.frac_power(&f, -0.5, false).unwrap().values;
    let scale = lp_norm(&v.graph, &f, 2.0);
    for (x, y) in a.iter().zip(&b) {
        assert!((x - y).abs() < 1e-6 * scale.max(1.0));
    }
}

#[test]
fn restricted_radius_matches_dense() {
    let v = build_vicsek(2, 1).unwrap();
    let op = make_walk(&v.graph, 0.5).unwrap();
    let sd = frlab_core::spectral_decompose(&op).unwrap();
    let power = frlab_core::calculus::restricted_spectral_radius(&op);
    assert!((power - sd.second_largest(1e-10).unwrap()).abs() < 1e-6);
}

#[test]
fn eigenfunction_ratios() {
    let v = build_vicsek(2, 1).unwrap();
    let op = make_walk(&v.graph, 0.5).unwrap();
    let calc = Calculus::new(&op, Backend::Spectral).unwrap();
    let sd = calc.decomposition().unwrap();
    let family: Vec<Vec<f64>> = (0..sd.len() - 1).map(|j| sd.eigenfunction(j)).collect();
    let rows = ratio_table(&calc, &family, 1.5, 0.5).unwrap();
    for (j, row) in rows.iter().enumerate() {
        let lambda = sd.eigenvalues[j];
        let phi = &family[j];
        let expect = lp_norm(&v.graph, &gradient_length(&op, phi), 1.5)
            / ((1.0 - lambda).sqrt() * lp_norm(&v.graph, phi, 1.5));
        assert!(row.forward_ratio().is_finite());
        assert!((row.forward_ratio() - expect).abs() < 1e-8 * expect);
    }
}

#[test]
fn forward_ratio_is_level_stable() {
    let mut maxima = Vec::new();
    for level in [2u32, 3] {
        let v = build_vicsek(2, level).unwrap();
        let op = make_walk(&v.graph, 0.5).unwrap();
        let calc = Calculus::new(&op, Backend::Spectral).unwrap();
        let family = random_mean_zero_family(&v.graph, 30, 17);
        let rows = ratio_table(&calc, &family, 1.5, 0.5).unwrap();
        maxima.push(frlab_core::calculus::summarize(&rows).max_forward);
    }
    assert!(maxima[1] <= 1.25 * maxima[0], "{maxima:?}");
}

//! Discrete calculus on a weighted graph: gradient length, the Laplacian
//! `I - P`, weighted `L^p` norms, fractional powers `(I - P)^beta` and the
//! Riesz transform `grad (I - P)^{-1/2}`.
//!
//! Vertex functions are plain `&[f64]` slices indexed by vertex id. All inner
//! products are taken in `L^2(m)`: `<f, g> = sum_x f(x) g(x) m(x)`.

use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{LabError, Result};
use crate::graph::WeightedGraph;
use crate::markov::MarkovOperator;
use crate::report::fmt_num;
use crate::spectral::{spectral_decompose_with_cap, SpectralDecomposition, DEFAULT_DENSE_CAP};

/// Eigenvalues of `P` within this distance of 1 are treated as the kernel of `I - P`.
pub const KERNEL_TOL: f64 = 1e-10;

/// Default scalar tail target for choosing the series truncation.
pub const SERIES_TAIL_TOL: f64 = 1e-6;

/// `grad f(x) = (1/2 sum_y p(x, y) |f(y) - f(x)|^2)^{1/2}`.
pub fn gradient_length(op: &MarkovOperator<'_>, f: &[f64]) -> Vec<f64> {
    (0..op.vertex_count())
        .map(|x| {
            let (targets, probs) = op.row(x);
            let s: f64 = targets
                .iter()
                .zip(probs)
                .map(|(&y, &p)| p * (f[y] - f[x]).powi(2))
                .sum();
            (0.5 * s).sqrt()
        })
        .collect()
}

/// `(I - P) f`.
pub fn laplacian(op: &MarkovOperator<'_>, f: &[f64]) -> Vec<f64> {
    let pf = op.apply(f);
    f.iter().zip(&pf).map(|(a, b)| a - b).collect()
}

/// `(sum_x |f(x)|^p m(x))^{1/p}`, or `max_x |f(x)|` for `p = inf`. Values of
/// `p` in `(0, 1)` give the usual quasi-norm.
pub fn lp_norm(g: &WeightedGraph, f: &[f64], p: f64) -> f64 {
    assert!(p > 0.0, "lp_norm needs p > 0, got {p}");
    if p.is_infinite() {
        return f.iter().fold(0.0, |acc, v| acc.max(v.abs()));
    }
    lp_norm_pow(g, f, p).powf(1.0 / p)
}

/// `sum_x |f(x)|^p m(x)`.
pub fn lp_norm_pow(g: &WeightedGraph, f: &[f64], p: f64) -> f64 {
    f.iter()
        .zip(g.measures())
        .map(|(v, m)| v.abs().powf(p) * m)
        .sum()
}

pub fn inner(g: &WeightedGraph, f: &[f64], h: &[f64]) -> f64 {
    f.iter()
        .zip(h)
        .zip(g.measures())
        .map(|((a, b), m)| a * b * m)
        .sum()
}

/// `L^2(m)` average `sum f m / sum m`.
pub fn mean(g: &WeightedGraph, f: &[f64]) -> f64 {
    inner(g, f, &vec![1.0; f.len()]) / g.total_measure()
}

/// Removes the constant component; returns the projected function and the removed mean.
pub fn project_mean_zero(g: &WeightedGraph, f: &[f64]) -> (Vec<f64>, f64) {
    let mu = mean(g, f);
    (f.iter().map(|v| v - mu).collect(), mu)
}

/// Coefficients `c_k` of `(1 - s)^beta = sum_k c_k s^k` for `beta` in `(0, 1]`.
pub fn binomial_coeffs(beta: f64, terms: usize) -> Result<Vec<f64>> {
    if !(beta > 0.0 && beta <= 1.0) {
        return Err(LabError::Domain(format!(
            "binomial coefficients need beta in (0, 1], got {beta}"
        )));
    }
    Ok(power_series_coeffs(beta, terms))
}

/// `c_0 = 1`, `c_k = c_{k-1} (k - 1 - beta) / k`; valid for any real exponent.
pub(crate) fn power_series_coeffs(beta: f64, terms: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(terms + 1);
    let mut c = 1.0;
    out.push(c);
    for k in 1..=terms {
        c *= (k as f64 - 1.0 - beta) / k as f64;
        out.push(c);
    }
    out
}

/// Smallest `K` whose scalar tail `sum_{k > K} |c_k| s^k` at `s = s_max` is
/// below `tol`, bounded by `|c_{K+1}| s^{K+1} / (1 - s)`.
pub fn series_terms_for(beta: f64, s_max: f64, tol: f64) -> usize {
    assert!((0.0..1.0).contains(&s_max));
    let mut c: f64 = 1.0;
    let mut sk: f64 = 1.0;
    for k in 1..10_000_000usize {
        c *= (k as f64 - 1.0 - beta) / k as f64;
        sk *= s_max;
        if c.abs() * sk / (1.0 - s_max) < tol {
            return k - 1;
        }
    }
    10_000_000
}

/// Largest eigenvalue of `P` on the orthocomplement of constants, by power
/// iteration. Needs `alpha >= 1/2` so that the spectrum is nonnegative.
pub fn restricted_spectral_radius(op: &MarkovOperator<'_>) -> f64 {
    let g = op.graph();
    let mut rng = ChaCha8Rng::seed_from_u64(0xfeed);
    let f: Vec<f64> = (0..g.vertex_count()).map(|_| rng.gen::<f64>() - 0.5).collect();
    let (mut v, _) = project_mean_zero(g, &f);
    let mut est = 0.0;
    for _ in 0..100_000 {
        let nv = inner(g, &v, &v).sqrt();
        v.iter_mut().for_each(|x| *x /= nv);
        let w = op.apply(&v);
        let (w, _) = project_mean_zero(g, &w);
        let next = inner(g, &w, &v);
        v = w;
        if (next - est).abs() < 1e-13 {
            return next;
        }
        est = next;
    }
    est
}

/// How `(I - P)^beta` is evaluated.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Backend {
    /// Dense eigendecomposition of the symmetrised operator.
    Spectral,
    /// Truncated binomial series `sum_{k <= K} c_k P^k f`.
    Series(usize),
}

impl fmt::Display for Backend {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Backend::Spectral => write!(f, "spectral"),
            Backend::Series(k) => write!(f, "series{k}"),
        }
    }
}

#[derive(Debug, Clone)]
pub struct FracPower {
    pub values: Vec<f64>,
    /// Constant removed before applying a negative power (0 otherwise).
    pub removed_mean: f64,
    /// Series backend only: `L^2(m)` norm of the last retained term.
    pub last_term_norm: Option<f64>,
}

/// Functional calculus for one operator, holding the dense decomposition when
/// the spectral backend is selected.
pub struct Calculus<'a, 'g> {
    op: &'a MarkovOperator<'g>,
    backend: Backend,
    spectral: Option<SpectralDecomposition>,
}

impl<'a, 'g> Calculus<'a, 'g> {
    pub fn new(op: &'a MarkovOperator<'g>, backend: Backend) -> Result<Self> {
        Self::with_cap(op, backend, DEFAULT_DENSE_CAP)
    }

    pub fn with_cap(op: &'a MarkovOperator<'g>, backend: Backend, dense_cap: usize) -> Result<Self> {
        let spectral = match backend {
            Backend::Spectral => Some(spectral_decompose_with_cap(op, dense_cap)?),
            Backend::Series(_) => None,
        };
        Ok(Calculus {
            op,
            backend,
            spectral,
        })
    }

    pub fn from_decomposition(op: &'a MarkovOperator<'g>, sd: SpectralDecomposition) -> Self {
        Calculus {
            op,
            backend: Backend::Spectral,
            spectral: Some(sd),
        }
    }

    pub fn op(&self) -> &'a MarkovOperator<'g> {
        self.op
    }

    pub fn backend(&self) -> Backend {
        self.backend
    }

    pub fn decomposition(&self) -> Option<&SpectralDecomposition> {
        self.spectral.as_ref()
    }

    /// `(I - P)^beta f` for `beta` in `(0, 1]` or `beta = -1/2`.
    ///
    /// For `beta = -1/2` the pseudo-inverse is used: the constant component is
    /// removed first (and reported) when `project` is set, otherwise a
    /// non-mean-zero input is a domain error.
    pub fn frac_power(&self, f: &[f64], beta: f64, project: bool) -> Result<FracPower> {
        let g = self.op.graph();
        if f.len() != g.vertex_count() {
            return Err(LabError::Validation(format!(
                "function has {} entries, graph has {} vertices",
                f.len(),
                g.vertex_count()
            )));
        }
        let negative = beta == -0.5;
        if !(negative || (beta > 0.0 && beta <= 1.0)) {
            return Err(LabError::Domain(format!(
                "fractional power needs beta in (0, 1] or beta = -1/2, got {beta}"
            )));
        }
        let mut input = f.to_vec();
        let mut removed_mean = 0.0;
        if negative {
            let (proj, mu) = project_mean_zero(g, f);
            let scale = f.iter().fold(0.0f64, |a, v| a.max(v.abs())).max(f64::MIN_POSITIVE);
            if mu.abs() > 1e-12 * scale {
                if !project {
                    return Err(LabError::Domain(format!(
                        "inverse square root needs a mean-zero function, mean is {mu}"
                    )));
                }
                removed_mean = mu;
            }
            input = proj;
        }
        match (&self.spectral, self.backend) {
            (Some(sd), _) => {
                let values = sd.apply_fn(&input, |lambda| {
                    let gap = (1.0 - lambda).max(0.0);
                    if negative {
                        if gap <= KERNEL_TOL {
                            0.0
                        } else {
                            1.0 / gap.sqrt()
                        }
                    } else if gap == 0.0 {
                        0.0
                    } else {
                        gap.powf(beta)
                    }
                });
                Ok(FracPower {
                    values,
                    removed_mean,
                    last_term_norm: None,
                })
            }
            (None, Backend::Series(terms)) => {
                let coeffs = power_series_coeffs(beta, terms);
                let mut acc: Vec<f64> = input.clone();
                let mut power = input;
                let mut next = vec![0.0; power.len()];
                let mut last = 0.0;
                for &c in &coeffs[1..] {
                    self.op.apply_into(&power, &mut next);
                    std::mem::swap(&mut power, &mut next);
                    for (a, p) in acc.iter_mut().zip(&power) {
                        *a += c * p;
                    }
                    last = c.abs() * inner(g, &power, &power).sqrt();
                }
                Ok(FracPower {
                    values: acc,
                    removed_mean,
                    last_term_norm: Some(last),
                })
            }
            (None, Backend::Spectral) => unreachable!("spectral backend always holds a decomposition"),
        }
    }

    /// `grad (I - P)^{-1/2} (f - mean f)`.
    pub fn riesz_apply(&self, f: &[f64]) -> Result<RieszOutput> {
        let inv = self.frac_power(f, -0.5, true)?;
        Ok(RieszOutput {
            values: gradient_length(self.op, &inv.values),
            removed_mean: inv.removed_mean,
        })
    }

    /// Both norms of the forward/reverse comparison for one function.
    pub fn ratio(&self, f: &[f64], p: f64, beta: f64) -> Result<RatioReport> {
        let g = self.op.graph();
        let grad = gradient_length(self.op, f);
        let frac = self.frac_power(f, beta, false)?;
        Ok(RatioReport {
            level: None,
            p,
            beta,
            grad_norm: lp_norm(g, &grad, p),
            frac_norm: lp_norm(g, &frac.values, p),
            backend: self.backend.to_string(),
            alpha: self.op.alpha(),
        })
    }
}

#[derive(Debug, Clone)]
pub struct RieszOutput {
    pub values: Vec<f64>,
    pub removed_mean: f64,
}

/// `||grad f||_p` against `||(I - P)^beta f||_p` for one function.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RatioReport {
    pub level: Option<u32>,
    pub p: f64,
    pub beta: f64,
    pub grad_norm: f64,
    pub frac_norm: f64,
    pub backend: String,
    pub alpha: f64,
}

impl RatioReport {
    pub const CSV_HEADER: &'static str =
        "level,p,beta,grad_norm,frac_norm,forward_ratio,reverse_ratio,backend,alpha";

    /// `||grad f||_p / ||Delta^beta f||_p`, the Riesz direction.
    pub fn forward_ratio(&self) -> f64 {
        self.grad_norm / self.frac_norm
    }

    /// `||Delta^beta f||_p / ||grad f||_p`, the reverse direction.
    pub fn reverse_ratio(&self) -> f64 {
        self.frac_norm / self.grad_norm
    }

    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{},{}",
            self.level.map(|l| l.to_string()).unwrap_or_default(),
            fmt_num(self.p),
            fmt_num(self.beta),
            fmt_num(self.grad_norm),
            fmt_num(self.frac_norm),
            fmt_num(self.forward_ratio()),
            fmt_num(self.reverse_ratio()),
            self.backend,
            fmt_num(self.alpha)
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RatioSummary {
    pub max_forward: f64,
    pub min_forward: f64,
    pub max_reverse: f64,
    pub min_reverse: f64,
}

/// Norms and ratios for every member of `family`; order is preserved.
pub fn ratio_table(calc: &Calculus<'_, '_>, family: &[Vec<f64>], p: f64, beta: f64) -> Result<Vec<RatioReport>> {
    family.par_iter().map(|f| calc.ratio(f, p, beta)).collect()
}

pub fn summarize(reports: &[RatioReport]) -> RatioSummary {
    let fwd = reports.iter().map(RatioReport::forward_ratio);
    let rev = reports.iter().map(RatioReport::reverse_ratio);
    RatioSummary {
        max_forward: fwd.clone().fold(f64::NEG_INFINITY, f64::max),
        min_forward: fwd.fold(f64::INFINITY, f64::min),
        max_reverse: rev.clone().fold(f64::NEG_INFINITY, f64::max),
        min_reverse: rev.fold(f64::INFINITY, f64::min),
    }
}

/// Random functions with i.i.d. standard normal values projected to mean zero.
pub fn random_mean_zero_family(g: &WeightedGraph, count: usize, seed: u64) -> Vec<Vec<f64>> {
    use rand_distr_normal::standard_normal;
    (0..count)
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(i as u64);
            let f: Vec<f64> = (0..g.vertex_count()).map(|_| standard_normal(&mut rng)).collect();
            project_mean_zero(g, &f).0
        })
        .collect()
}

mod rand_distr_normal {
    use rand::Rng;

    /// Box-Muller draw; one of the pair is discarded.
    pub fn standard_normal<R: Rng>(rng: &mut R) -> f64 {
        let u1: f64 = 1.0 - rng.gen::<f64>();
        let u2: f64 = rng.gen();
        (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::markov::make_walk;
    use crate::vicsek::build_vicsek;

    fn two_vertex() -> WeightedGraph {
        WeightedGraph::from_edges(2, &[(0, 1, 1.0)]).unwrap()
    }

    #[test]
    fn two_vertex_gradient_and_laplacian() {
        let g = two_vertex();
        let op = make_walk(&g, 0.5).unwrap();
        let f = [1.0, -1.0];
        assert_eq!(gradient_length(&op, &f), vec![1.0, 1.0]);
        assert_eq!(laplacian(&op, &f), vec![1.0, -1.0]);
        assert!((lp_norm(&g, &f, 2.0) - 2f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn constants_are_harmonic() {
        let v = build_vicsek(2, 1).unwrap();
        let op = make_walk(&v.graph, 0.5).unwrap();
        let c = vec![3.5; v.graph.vertex_count()];
        assert!(gradient_length(&op, &c).iter().all(|&x| x == 0.0));
        assert!(laplacian(&op, &c).iter().all(|&x| x.abs() < 1e-15));
    }

    #[test]
    fn indicator_l1_and_holder_endpoint() {
        let v = build_vicsek(2, 1).unwrap();
        let g = &v.graph;
        let mut f = vec![0.0; g.vertex_count()];
        f[v.center] = 1.0;
        assert_eq!(lp_norm(g, &f, 1.0), g.measure(v.center));
        let h: Vec<f64> = (0..g.vertex_count()).map(|i| (i as f64).cos()).collect();
        assert!(lp_norm(g, &h, 1.0) <= lp_norm(g, &h, f64::INFINITY) * g.total_measure());
    }

    #[test]
    fn binomial_half() {
        let c = binomial_coeffs(0.5, 3).unwrap();
        let expect = [1.0, -0.5, -0.125, -0.0625];
        for (a, b) in c.iter().zip(expect) {
            assert!((a - b).abs() < 1e-15);
        }
        let one = binomial_coeffs(1.0, 4).unwrap();
        assert_eq!(one, vec![1.0, -1.0, 0.0, 0.0, 0.0]);
        assert!(binomial_coeffs(1.5, 3).is_err());
        assert!(binomial_coeffs(0.0, 3).is_err());
    }

    #[test]
    fn binomial_partial_sums_decay() {
        for &beta in &[0.25, 0.5, 0.75] {
            let c = binomial_coeffs(beta, 4000).unwrap();
            let mut partial = 0.0;
            for (k, ck) in c.iter().enumerate() {
                partial += ck;
                if k >= 1 {
                    assert!(*ck < 0.0);
                    assert!(partial.abs() <= ck.abs() * k as f64 / beta * (1.0 + 1e-9), "k={k}");
                }
            }
        }
    }

    #[test]
    fn two_vertex_half_power_is_identity_on_eigenfunction() {
        let g = two_vertex();
        let op = make_walk(&g, 0.5).unwrap();
        let calc = Calculus::new(&op, Backend::Spectral).unwrap();
        let out = calc.frac_power(&[1.0, -1.0], 0.5, false).unwrap();
        assert!((out.values[0] - 1.0).abs() < 1e-12);
        assert!((out.values[1] + 1.0).abs() < 1e-12);
    }

    #[test]
    fn inverse_root_requires_mean_zero_without_projection() {
        let g = two_vertex();
        let op = make_walk(&g, 0.5).unwrap();
        let calc = Calculus::new(&op, Backend::Spectral).unwrap();
        assert!(matches!(calc.frac_power(&[1.0, 0.0], -0.5, false), Err(LabError::Domain(_))));
        let out = calc.frac_power(&[1.0, 0.0], -0.5, true).unwrap();
        assert!((out.removed_mean - 0.5).abs() < 1e-15);
    }

    #[test]
    fn bad_beta_is_domain_error() {
        let g = two_vertex();
        let op = make_walk(&g, 0.5).unwrap();
        let calc = Calculus::new(&op, Backend::Series(10)).unwrap();
        assert!(matches!(calc.frac_power(&[1.0, -1.0], 1.5, false), Err(LabError::Domain(_))));
    }

    #[test]
    fn series_terms_monotone_in_tolerance() {
        let a = series_terms_for(0.5, 0.9, 1e-3);
        let b = series_terms_for(0.5, 0.9, 1e-6);
        assert!(a < b);
    }

    #[test]
    fn csv_row_layout() {
        let r = RatioReport {
            level: Some(3),
            p: 1.5,
            beta: 0.5,
            grad_norm: 2.0,
            frac_norm: 4.0,
            backend: "spectral".into(),
            alpha: 0.5,
        };
        assert_eq!(RatioReport::CSV_HEADER.split(',').count(), r.csv_row().split(',').count());
        assert!(r.csv_row().starts_with("3,"));
        assert_eq!(r.forward_ratio(), 0.5);
    }
}

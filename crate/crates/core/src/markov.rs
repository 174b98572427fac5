//! The lazy reversible random walk `P_alpha` and iteration of its kernel.
//!
//! `p_alpha(x, y) = alpha * 1{x = y} + (1 - alpha) * mu_xy / m(x)`. Rows sum to
//! one and `p(x, y) m(x) = p(y, x) m(y)`, so `P` is self-adjoint in `L^2(m)`.
//! Kernel columns `p_k(., y)` are produced by applying `P` repeatedly to the
//! indicator of `y`.

use std::ops::RangeInclusive;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{LabError, Result};
use crate::fit::{fit_power_law, log_grid, ScalingFit};
use crate::graph::{VolumeProfile, WeightedGraph};

/// Default laziness; keeps `p(x, x) >= 1/2` and the spectrum inside `[0, 1]`.
pub const DEFAULT_ALPHA: f64 = 0.5;

/// Default cap on `k_max * (stored entries)` for kernel iteration.
pub const DEFAULT_COMPUTE_BUDGET: u128 = 20_000_000_000;

/// Default cap on `(k_max + 1) * V` stored floats when collecting columns.
pub const DEFAULT_STORAGE_BUDGET: u128 = 200_000_000;

/// Fraction of the exit-time scale at which kernel statistics stay trusted.
pub const HORIZON_KAPPA: f64 = 0.1;

#[derive(Debug, Clone)]
pub struct MarkovOperator<'g> {
    graph: &'g WeightedGraph,
    alpha: f64,
    /// Off-diagonal transition probabilities aligned with the adjacency rows.
    probs: Vec<Vec<f64>>,
}

pub fn make_walk(g: &WeightedGraph, alpha: f64) -> Result<MarkovOperator<'_>> {
    if !(0.0..1.0).contains(&alpha) {
        return Err(LabError::Domain(format!(
            "laziness must lie in [0, 1), got {alpha}"
        )));
    }
    let probs = (0..g.vertex_count())
        .map(|x| {
            let m = g.measure(x);
            g.row(x).1.iter().map(|w| (1.0 - alpha) * w / m).collect()
        })
        .collect();
    Ok(MarkovOperator {
        graph: g,
        alpha,
        probs,
    })
}

impl<'g> MarkovOperator<'g> {
    pub fn graph(&self) -> &'g WeightedGraph {
        self.graph
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn vertex_count(&self) -> usize {
        self.graph.vertex_count()
    }

    /// `(LB)` holds iff every holding probability is positive, i.e. `alpha > 0`.
    pub fn satisfies_lb(&self) -> bool {
        self.alpha > 0.0
    }

    /// Human-readable caveats about the operator.
    pub fn warnings(&self) -> Vec<String> {
        let mut out = Vec::new();
        if !self.satisfies_lb() {
            out.push("LB violated: p(x,x) = 0".to_string());
            if self.graph.is_bipartite() {
                out.push("LB violated; spectrum may reach -1 (bipartite graph)".to_string());
            }
        }
        out
    }

    /// Transition probability `p(x, y)`.
    pub fn p(&self, x: usize, y: usize) -> f64 {
        let (targets, _) = self.graph.row(x);
        let mut out = if x == y { self.alpha } else { 0.0 };
        for (&z, &pz) in targets.iter().zip(&self.probs[x]) {
            if z == y {
                out += pz;
            }
        }
        out
    }

    /// Neighbours of `x` and the matching off-diagonal transition probabilities.
    pub(crate) fn row(&self, x: usize) -> (&[usize], &[f64]) {
        (self.graph.row(x).0, &self.probs[x])
    }

    /// `out = P f`.
    pub fn apply_into(&self, f: &[f64], out: &mut [f64]) {
        debug_assert_eq!(f.len(), self.vertex_count());
        for (x, o) in out.iter_mut().enumerate() {
            let (targets, probs) = self.row(x);
            let mut acc = self.alpha * f[x];
            for (&y, &p) in targets.iter().zip(probs) {
                acc += p * f[y];
            }
            *o = acc;
        }
    }

    pub fn apply(&self, f: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; f.len()];
        self.apply_into(f, &mut out);
        out
    }

    pub fn apply_power(&self, f: &[f64], k: usize) -> Vec<f64> {
        let mut cur = f.to_vec();
        let mut next = vec![0.0; f.len()];
        for _ in 0..k {
            self.apply_into(&cur, &mut next);
            std::mem::swap(&mut cur, &mut next);
        }
        cur
    }

    /// Streams `p_0(., y), p_1(., y), ...` without storing them.
    pub fn kernel_walk(&self, y: usize) -> Result<KernelWalk<'_, 'g>> {
        self.graph.check_vertex(y)?;
        let mut current = vec![0.0; self.vertex_count()];
        current[y] = 1.0;
        Ok(KernelWalk {
            op: self,
            base: y,
            step: 0,
            current,
            scratch: vec![0.0; self.vertex_count()],
        })
    }

    fn iteration_cost(&self, k_max: usize) -> u128 {
        k_max as u128 * (2 * self.graph.edge_count() + self.vertex_count()) as u128
    }
}

/// Kernel column `p_k(., y)`.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelColumn {
    pub base: usize,
    pub step: usize,
    pub values: Vec<f64>,
}

impl KernelColumn {
    /// `sum_x p_k(x, y) m(x)`, which equals `m(y)`.
    pub fn mass(&self, g: &WeightedGraph) -> f64 {
        self.values.iter().zip(g.measures()).map(|(p, m)| p * m).sum()
    }

    /// Checks nonnegativity and the column-mass identity.
    pub fn check_invariants(&self, g: &WeightedGraph, tol: f64) -> Result<()> {
        if let Some((x, &v)) = self.values.iter().enumerate().find(|(_, &v)| v < 0.0) {
            return Err(LabError::Validation(format!(
                "p_{}({x}, {}) = {v} is negative",
                self.step, self.base
            )));
        }
        let mass = self.mass(g);
        let target = g.measure(self.base);
        if (mass - target).abs() > tol * target.max(1.0) {
            return Err(LabError::Validation(format!(
                "column mass {mass} differs from m(y) = {target} at step {}",
                self.step
            )));
        }
        Ok(())
    }
}

pub struct KernelWalk<'a, 'g> {
    op: &'a MarkovOperator<'g>,
    base: usize,
    step: usize,
    current: Vec<f64>,
    scratch: Vec<f64>,
}

impl KernelWalk<'_, '_> {
    pub fn step(&self) -> usize {
        self.step
    }

    /// Current column `p_step(., y)`.
    pub fn values(&self) -> &[f64] {
        &self.current
    }

    pub fn advance(&mut self) {
        self.op.apply_into(&self.current, &mut self.scratch);
        std::mem::swap(&mut self.current, &mut self.scratch);
        self.step += 1;
    }

    pub fn column(&self) -> KernelColumn {
        KernelColumn {
            base: self.base,
            step: self.step,
            values: self.current.clone(),
        }
    }
}

/// Columns `k = 0..=k_max` of `p_k(., y)` under the default budgets.
pub fn kernel_column(op: &MarkovOperator<'_>, y: usize, k_max: usize) -> Result<Vec<KernelColumn>> {
    kernel_column_with_budget(op, y, k_max, DEFAULT_COMPUTE_BUDGET, DEFAULT_STORAGE_BUDGET)
}

pub fn kernel_column_with_budget(
    op: &MarkovOperator<'_>,
    y: usize,
    k_max: usize,
    compute_budget: u128,
    storage_budget: u128,
) -> Result<Vec<KernelColumn>> {
    let cost = op.iteration_cost(k_max);
    if cost > compute_budget {
        return Err(LabError::Resource {
            what: "kernel iteration compute budget",
            needed: cost,
            limit: compute_budget,
        });
    }
    let stored = (k_max as u128 + 1) * op.vertex_count() as u128;
    if stored > storage_budget {
        return Err(LabError::Resource {
            what: "kernel column storage budget",
            needed: stored,
            limit: storage_budget,
        });
    }
    let mut walk = op.kernel_walk(y)?;
    let mut out = Vec::with_capacity(k_max + 1);
    out.push(walk.column());
    for _ in 0..k_max {
        walk.advance();
        out.push(walk.column());
    }
    Ok(out)
}

/// Largest step at which kernel statistics at the centre of a level-`n`
/// Vicsek graph are trusted: `kappa * (3^(n-1))^m`.
pub fn trusted_horizon(level: u32, walk_exponent: f64) -> usize {
    let scale = 3f64.powi(level.saturating_sub(1) as i32);
    (HORIZON_KAPPA * scale.powf(walk_exponent)).floor() as usize
}

/// Fits `log p_k(y, y)` against `log k` over log-spaced steps of the window.
pub fn on_diagonal_fit(op: &MarkovOperator<'_>, y: usize, window: RangeInclusive<usize>) -> Result<ScalingFit> {
    let (lo, hi) = (*window.start(), *window.end());
    if lo < 10 || hi < 4 * lo {
        return Err(LabError::Validation(format!(
            "on-diagonal window [{lo}, {hi}] too small: need k_min >= 10 and k_max >= 4 k_min"
        )));
    }
    let cost = op.iteration_cost(hi);
    if cost > DEFAULT_COMPUTE_BUDGET {
        return Err(LabError::Resource {
            what: "kernel iteration compute budget",
            needed: cost,
            limit: DEFAULT_COMPUTE_BUDGET,
        });
    }
    let ks = log_grid(lo, hi, 40);
    let mut walk = op.kernel_walk(y)?;
    let mut xs = Vec::with_capacity(ks.len());
    let mut ys = Vec::with_capacity(ks.len());
    for &k in &ks {
        while walk.step() < k {
            walk.advance();
        }
        xs.push(k as f64);
        ys.push(walk.values()[y]);
    }
    fit_power_law(&xs, &ys)
}

/// Outcome of scanning the `(UE_m)` ratio.
#[derive(Debug, Clone, Serialize)]
pub struct UeReport {
    pub m: f64,
    pub c: f64,
    pub k_max: usize,
    /// Supremum over `x` and `1 <= k <= k_max`.
    pub sup_ratio: f64,
    pub argmax_k: usize,
    pub argmax_x: usize,
    /// Running supremum after each `k = 1..=k_max` (index `k - 1`).
    pub running_sup: Vec<f64>,
}

impl UeReport {
    pub fn sup_up_to(&self, k: usize) -> f64 {
        self.running_sup[k.min(self.k_max) - 1]
    }
}

pub(crate) fn ue_exponent(d: f64, k: f64, m: f64) -> f64 {
    if d == 0.0 {
        0.0
    } else {
        ((m * d.ln() - k.ln()) / (m - 1.0)).exp()
    }
}

/// Evaluates `sup p_{k-1}(x, y) V(y, k^{1/m}) / m(y) * exp(c (d^m / k)^{1/(m-1)})`
/// over `x` and `1 <= k <= k_max`. A bounded value certifies the upper
/// estimate with constant `c` on this range.
pub fn verify_ue(op: &MarkovOperator<'_>, y: usize, k_max: usize, m: f64, c: f64) -> Result<UeReport> {
    if !(m >= 2.0) || !(c > 0.0) || k_max == 0 {
        return Err(LabError::Domain(format!(
            "verify_ue needs m >= 2, c > 0 and k_max >= 1 (got m = {m}, c = {c}, k_max = {k_max})"
        )));
    }
    let g = op.graph();
    let profile = VolumeProfile::new(g, y);
    let my = g.measure(y);
    let mut walk = op.kernel_walk(y)?;
    let mut best = (f64::NEG_INFINITY, 0usize, y);
    let mut running = Vec::with_capacity(k_max);
    for k in 1..=k_max {
        // walk currently holds p_{k-1}
        let kf = k as f64;
        let log_vol = (profile.volume(kf.powf(1.0 / m)) / my).ln();
        for (x, &p) in walk.values().iter().enumerate() {
            if p <= 0.0 {
                continue;
            }
            let d = profile.dist[x] as f64;
            let log_ratio = p.ln() + log_vol + c * ue_exponent(d, kf, m);
            if log_ratio > best.0 {
                best = (log_ratio, k, x);
            }
        }
        running.push(best.0.exp());
        walk.advance();
    }
    Ok(UeReport {
        m,
        c,
        k_max,
        sup_ratio: best.0.exp(),
        argmax_k: best.1,
        argmax_x: best.2,
        running_sup: running,
    })
}

/// Largest `c` among `candidates` for which the UE ratio stays below `cap`.
pub fn ue_constant_scan(
    op: &MarkovOperator<'_>,
    y: usize,
    k_max: usize,
    m: f64,
    candidates: &[f64],
    cap: f64,
) -> Result<Option<f64>> {
    let mut best = None;
    for &c in candidates {
        let report = verify_ue(op, y, k_max, m, c)?;
        if report.sup_ratio <= cap {
            best = Some(best.map_or(c, |b: f64| b.max(c)));
        }
    }
    Ok(best)
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct AnalyticityEstimate {
    pub n: usize,
    /// Estimate of `||(I - P) P^n||_{L^2(m) -> L^2(m)}`.
    pub norm: f64,
    pub scaled: f64,
    pub iterations: usize,
    pub converged: bool,
}

/// Power-method estimate of `||(I - P) P^n||` on `L^2(m)`.
pub fn analyticity_norm(op: &MarkovOperator<'_>, n: usize) -> AnalyticityEstimate {
    const MAX_ITER: usize = 3000;
    const TOL: f64 = 1e-12;
    let g = op.graph();
    let m = g.measures();
    let norm_m = |f: &[f64]| f.iter().zip(m).map(|(v, w)| v * v * w).sum::<f64>().sqrt();
    let apply_t = |f: &[f64]| {
        let pn = op.apply_power(f, n);
        let pn1 = op.apply(&pn);
        pn.iter().zip(&pn1).map(|(a, b)| a - b).collect::<Vec<f64>>()
    };
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    let mut v: Vec<f64> = (0..g.vertex_count()).map(|_| rng.gen::<f64>() - 0.5).collect();
    let nv = norm_m(&v);
    v.iter_mut().for_each(|x| *x /= nv);
    let mut estimate = 0.0;
    let mut converged = false;
    let mut iterations = 0;
    for it in 1..=MAX_ITER {
        iterations = it;
        let w = apply_t(&v);
        let nw = norm_m(&w);
        if nw == 0.0 {
            estimate = 0.0;
            converged = true;
            break;
        }
        let change = (nw - estimate).abs();
        estimate = nw;
        v = w.into_iter().map(|x| x / nw).collect();
        if it > 1 && change <= TOL * nw {
            converged = true;
            break;
        }
    }
    AnalyticityEstimate {
        n,
        norm: estimate,
        scaled: n as f64 * estimate,
        iterations,
        converged,
    }
}

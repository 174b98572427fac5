//! Pointwise machinery behind the gradient estimate for heat kernels:
//! the Hardy-Stein quantity `J_k`, the pseudo-gradient `N_q`, the averaging
//! operator `A`, the exponentially weighted gradient norm, integrated gradient
//! tails and Neumann Poincare constants of balls.
//!
//! Throughout `u_k = p_{k-1}(., y)` and `u_{k+1} = P u_k`.

use faer::{Mat, Side};
use serde::Serialize;

use crate::calculus::{gradient_length, laplacian, lp_norm};
use crate::error::{LabError, Result};
use crate::graph::{Ball, VolumeProfile, WeightedGraph};
use crate::markov::{ue_exponent, MarkovOperator};
use crate::report::fmt_num;

/// Pointwise tolerance for the nonnegativity of `J_k`.
pub const J_TOL: f64 = 1e-12;

/// `A g(x) = sum_{z ~ x} g(z)`: plain neighbour sum, no weights, no self term.
pub fn averaging(g: &WeightedGraph, f: &[f64]) -> Vec<f64> {
    (0..g.vertex_count())
        .map(|x| g.neighbors(x).map(|(z, _)| f[z]).sum())
        .collect()
}

fn check_q(q: f64) -> Result<()> {
    if q > 1.0 && q < 2.0 {
        Ok(())
    } else {
        Err(LabError::Domain(format!("exponent q must lie in (1, 2), got {q}")))
    }
}

/// `-[d_k + Delta](u^q) = P(u^q) - u_next^q`.
fn hardy_stein(op: &MarkovOperator<'_>, u: &[f64], u_next: &[f64], q: f64) -> Vec<f64> {
    let uq: Vec<f64> = u.iter().map(|v| v.max(0.0).powf(q)).collect();
    let puq = op.apply(&uq);
    puq.iter()
        .zip(u_next)
        .map(|(a, b)| a - b.max(0.0).powf(q))
        .collect()
}

#[derive(Debug, Clone)]
pub struct PseudoGradient {
    pub values: Vec<f64>,
    /// Vertices where the value is below `-J_TOL`.
    pub violations: Vec<usize>,
}

/// `N_q u(x) = -u^{2-q}(x) [d_k + Delta] u^q(x)`, with `u^{2-q} = 0` where `u = 0`.
pub fn pseudo_gradient(op: &MarkovOperator<'_>, u: &[f64], u_next: &[f64], q: f64) -> Result<PseudoGradient> {
    check_q(q)?;
    let j = hardy_stein(op, u, u_next, q);
    let values: Vec<f64> = u
        .iter()
        .zip(&j)
        .map(|(&ux, &jx)| if ux > 0.0 { ux.powf(2.0 - q) * jx } else { 0.0 })
        .collect();
    let violations = values
        .iter()
        .enumerate()
        .filter(|(_, &v)| v < -J_TOL)
        .map(|(x, _)| x)
        .collect();
    Ok(PseudoGradient { values, violations })
}

/// Everything the gradient estimate looks at for one `(y, k, q)`.
#[derive(Debug, Clone)]
pub struct HardySteinSnapshot {
    pub base: usize,
    pub step: usize,
    pub q: f64,
    /// `p_{k-1}(., y)`.
    pub u: Vec<f64>,
    /// `p_k(., y)`.
    pub u_next: Vec<f64>,
    pub j: Vec<f64>,
    pub pseudo_gradient: Vec<f64>,
    pub averaged: Vec<f64>,
    /// `u_{k+1} - u_k`.
    pub time_difference: Vec<f64>,
}

impl HardySteinSnapshot {
    /// Builds the snapshot from `u = p_{k-1}(., y)`.
    pub fn new(op: &MarkovOperator<'_>, base: usize, step: usize, q: f64, u: Vec<f64>) -> Result<Self> {
        check_q(q)?;
        if step == 0 {
            return Err(LabError::Domain("Hardy-Stein step starts at k = 1".into()));
        }
        let u_next = op.apply(&u);
        let j = hardy_stein(op, &u, &u_next, q);
        let pg = pseudo_gradient(op, &u, &u_next, q)?;
        let averaged = averaging(op.graph(), &pg.values);
        let time_difference = u_next.iter().zip(&u).map(|(a, b)| a - b).collect();
        Ok(HardySteinSnapshot {
            base,
            step,
            q,
            u,
            u_next,
            j,
            pseudo_gradient: pg.values,
            averaged,
            time_difference,
        })
    }

    pub fn min_j(&self) -> f64 {
        self.j.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// `sum_x Delta(u^q)(x) m(x)`, zero by reversibility.
    pub fn laplacian_power_sum(&self, op: &MarkovOperator<'_>) -> f64 {
        let uq: Vec<f64> = self.u.iter().map(|v| v.powf(self.q)).collect();
        laplacian(op, &uq)
            .iter()
            .zip(op.graph().measures())
            .map(|(a, m)| a * m)
            .sum()
    }

    /// `sum J m / (q ||u||_q^{q-1} ||Delta u||_q)`.
    pub fn holder_ratio(&self, op: &MarkovOperator<'_>) -> f64 {
        let g = op.graph();
        let total: f64 = self.j.iter().zip(g.measures()).map(|(a, m)| a * m).sum();
        let bound = self.q * lp_norm(g, &self.u, self.q).powf(self.q - 1.0)
            * lp_norm(g, &laplacian(op, &self.u), self.q);
        if bound == 0.0 {
            0.0
        } else {
            total / bound
        }
    }

    /// Largest `|grad u|^2 / A[N_q u]` over `{u > 0}`; `0/0` points are
    /// counted as skipped.
    pub fn domination_ratio(&self, op: &MarkovOperator<'_>) -> DominationPoint {
        let grad = gradient_length(op, &self.u);
        let mut out = DominationPoint {
            step: self.step,
            max_ratio: 0.0,
            argmax: self.base,
            evaluated: 0,
            skipped: 0,
        };
        for x in 0..self.u.len() {
            if self.u[x] <= 0.0 {
                continue;
            }
            let num = grad[x] * grad[x];
            let den = self.averaged[x];
            if num == 0.0 && den <= 0.0 {
                out.skipped += 1;
                continue;
            }
            out.evaluated += 1;
            let r = if den > 0.0 { num / den } else { f64::INFINITY };
            if r > out.max_ratio {
                out.max_ratio = r;
                out.argmax = x;
            }
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DominationPoint {
    pub step: usize,
    pub max_ratio: f64,
    pub argmax: usize,
    pub evaluated: usize,
    pub skipped: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct DominationReport {
    pub base: usize,
    pub q: f64,
    pub per_step: Vec<DominationPoint>,
    pub max_ratio: f64,
    /// Most negative `J_k(x)` seen.
    pub min_j: f64,
    /// Largest `|sum Delta(u^q) m|` seen.
    pub max_laplacian_sum: f64,
    pub skipped: usize,
}

impl DominationReport {
    /// Largest over smallest per-step maximum.
    pub fn fluctuation(&self) -> f64 {
        let lo = self
            .per_step
            .iter()
            .map(|p| p.max_ratio)
            .fold(f64::INFINITY, f64::min);
        self.max_ratio / lo
    }
}

/// Sweeps `k` over `steps` (ascending, `k >= 1`) and records the domination
/// ratio along with the Hardy-Stein invariants.
pub fn check_gradient_domination(
    op: &MarkovOperator<'_>,
    y: usize,
    steps: std::ops::RangeInclusive<usize>,
    q: f64,
) -> Result<DominationReport> {
    check_q(q)?;
    let (lo, hi) = (*steps.start(), *steps.end());
    if lo == 0 || hi < lo {
        return Err(LabError::Domain(format!("invalid step range {lo}..={hi}")));
    }
    let mut walk = op.kernel_walk(y)?;
    while walk.step() + 1 < lo {
        walk.advance();
    }
    let mut report = DominationReport {
        base: y,
        q,
        per_step: Vec::with_capacity(hi - lo + 1),
        max_ratio: 0.0,
        min_j: f64::INFINITY,
        max_laplacian_sum: 0.0,
        skipped: 0,
    };
    for k in lo..=hi {
        let snap = HardySteinSnapshot::new(op, y, k, q, walk.values().to_vec())?;
        let point = snap.domination_ratio(op);
        report.max_ratio = report.max_ratio.max(point.max_ratio);
        report.min_j = report.min_j.min(snap.min_j());
        report.max_laplacian_sum = report.max_laplacian_sum.max(snap.laplacian_power_sum(op).abs());
        report.skipped += point.skipped;
        report.per_step.push(point);
        walk.advance();
    }
    Ok(report)
}

/// One row of the check table.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckRow {
    pub check_name: String,
    pub graph: String,
    pub level: Option<u32>,
    pub y: usize,
    pub q: f64,
    pub m: f64,
    pub c: f64,
    pub k: usize,
    pub lhs: f64,
    pub rhs: f64,
    pub ratio: f64,
    pub pass: bool,
}

impl CheckRow {
    pub const CSV_HEADER: &'static str = "check_name,graph,level,y,q,m,c,k,lhs,rhs,ratio,pass";

    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{},{},{},{},{}",
            self.check_name,
            self.graph,
            self.level.map(|l| l.to_string()).unwrap_or_default(),
            self.y,
            fmt_num(self.q),
            fmt_num(self.m),
            fmt_num(self.c),
            self.k,
            fmt_num(self.lhs),
            fmt_num(self.rhs),
            fmt_num(self.ratio),
            self.pass
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct WeightedGradientPoint {
    pub k: usize,
    /// `||grad p_{k-1}(., y) exp(c (d^m / k)^{1/(m-1)})||_q`.
    pub lhs: f64,
    /// `m(y) / (sqrt(k) V(y, k^{1/m})^{1 - 1/q})`.
    pub rhs: f64,
}

impl WeightedGradientPoint {
    pub fn ratio(&self) -> f64 {
        self.lhs / self.rhs
    }
}

fn weighted_point(
    op: &MarkovOperator<'_>,
    profile: &VolumeProfile,
    u: &[f64],
    k: usize,
    q: f64,
    m: f64,
    c: f64,
) -> WeightedGradientPoint {
    let g = op.graph();
    let kf = k as f64;
    let grad = gradient_length(op, u);
    let weighted: Vec<f64> = grad
        .iter()
        .zip(&profile.dist)
        .map(|(gr, &d)| gr * (c * ue_exponent(d as f64, kf, m)).exp())
        .collect();
    let vol = profile.volume(kf.powf(1.0 / m));
    WeightedGradientPoint {
        k,
        lhs: lp_norm(g, &weighted, q),
        rhs: g.measure(profile.base) / (kf.sqrt() * vol.powf(1.0 - 1.0 / q)),
    }
}

/// The weighted gradient estimate at a single step.
pub fn weighted_gradient_check(
    op: &MarkovOperator<'_>,
    y: usize,
    k: usize,
    q: f64,
    m: f64,
    c: f64,
) -> Result<WeightedGradientPoint> {
    Ok(weighted_gradient_grid(op, y, &[k], q, m, c)?[0])
}

/// The weighted gradient estimate over an ascending grid of steps, streaming
/// one kernel walk.
pub fn weighted_gradient_grid(
    op: &MarkovOperator<'_>,
    y: usize,
    ks: &[usize],
    q: f64,
    m: f64,
    c: f64,
) -> Result<Vec<WeightedGradientPoint>> {
    check_q(q)?;
    if !(m > 1.0) || c < 0.0 {
        return Err(LabError::Domain(format!("need m > 1 and c >= 0, got m = {m}, c = {c}")));
    }
    if ks.is_empty() || ks[0] == 0 || ks.windows(2).any(|w| w[0] >= w[1]) {
        return Err(LabError::Domain(format!("steps must be positive and increasing, got {ks:?}")));
    }
    let profile = VolumeProfile::new(op.graph(), y);
    let mut walk = op.kernel_walk(y)?;
    let mut out = Vec::with_capacity(ks.len());
    for &k in ks {
        while walk.step() + 1 < k {
            walk.advance();
        }
        out.push(weighted_point(op, &profile, walk.values(), k, q, m, c));
    }
    Ok(out)
}

/// `sum_{d(x, y) >= r} |grad p_{k-1}(., y)|(x) m(x)`.
pub fn integrated_gradient_tail(op: &MarkovOperator<'_>, y: usize, k: usize, r: u32) -> Result<f64> {
    if k == 0 {
        return Err(LabError::Domain("integrated gradient tail needs k >= 1".into()));
    }
    let g = op.graph();
    let dist = g.bfs_distances(y);
    let u = op.apply_power(&delta(g, y)?, k - 1);
    let grad = gradient_length(op, &u);
    Ok(grad
        .iter()
        .zip(&dist)
        .zip(g.measures())
        .filter(|((_, &d), _)| d >= r)
        .map(|((gr, _), m)| gr * m)
        .sum())
}

/// `tail / (k^{-1/2} exp(-c (r^m / k)^{1/(m-1)}))`.
pub fn implied_tail_constant(tail: f64, k: usize, r: u32, m: f64, c: f64) -> f64 {
    let kf = k as f64;
    tail * kf.sqrt() * (c * ue_exponent(r as f64, kf, m)).exp()
}

fn delta(g: &WeightedGraph, y: usize) -> Result<Vec<f64>> {
    g.check_vertex(y)?;
    let mut d = vec![0.0; g.vertex_count()];
    d[y] = 1.0;
    Ok(d)
}

/// Smallest `L` with `sum_B |f - f_B|^2 m <= L sum_{edges in B} mu_xy |f(x) - f(y)|^2`,
/// i.e. the inverse spectral gap of the Neumann Laplacian of the induced subgraph.
pub fn poincare_constant(g: &WeightedGraph, ball: &Ball) -> Result<f64> {
    let members = &ball.members;
    let n = members.len();
    if n < 2 {
        return Err(LabError::Validation(format!(
            "Poincare constant needs at least two vertices, ball has {n}"
        )));
    }
    let mut index = vec![usize::MAX; g.vertex_count()];
    for (i, &x) in members.iter().enumerate() {
        index[x] = i;
    }
    let mut lap = Mat::<f64>::zeros(n, n);
    let mut adj: Vec<Vec<usize>> = vec![Vec::new(); n];
    for (i, &x) in members.iter().enumerate() {
        for (z, w) in g.neighbors(x) {
            let j = index[z];
            if j == usize::MAX || j <= i {
                continue;
            }
            lap[(i, i)] += w;
            lap[(j, j)] += w;
            lap[(i, j)] -= w;
            lap[(j, i)] -= w;
            adj[i].push(j);
            adj[j].push(i);
        }
    }
    let mut seen = vec![false; n];
    let mut stack = vec![0];
    seen[0] = true;
    while let Some(i) = stack.pop() {
        for &j in &adj[i] {
            if !seen[j] {
                seen[j] = true;
                stack.push(j);
            }
        }
    }
    if seen.iter().any(|s| !s) {
        return Err(LabError::Validation(format!(
            "ball around {} of radius {} induces a disconnected subgraph",
            ball.center, ball.radius
        )));
    }
    let inv_sqrt: Vec<f64> = members.iter().map(|&x| 1.0 / g.measure(x).sqrt()).collect();
    let sym = Mat::<f64>::from_fn(n, n, |i, j| lap[(i, j)] * inv_sqrt[i] * inv_sqrt[j]);
    let eig = sym
        .self_adjoint_eigen(Side::Lower)
        .map_err(|e| LabError::Eigen(format!("{e:?}")))?;
    let gap = eig.S().column_vector()[1];
    if !(gap > 0.0) {
        return Err(LabError::Eigen(format!("nonpositive spectral gap {gap}")));
    }
    Ok(1.0 / gap)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::BallKind;
    use crate::markov::make_walk;
    use crate::vicsek::build_vicsek;

    fn path(n: usize) -> WeightedGraph {
        let edges: Vec<_> = (0..n - 1).map(|i| (i, i + 1, 1.0)).collect();
        WeightedGraph::from_edges(n, &edges).unwrap()
    }

    #[test]
    fn averaging_basics() {
        let v = build_vicsek(2, 1).unwrap();
        let g = &v.graph;
        let ones = vec![1.0; g.vertex_count()];
        let deg = averaging(g, &ones);
        for x in 0..g.vertex_count() {
            assert_eq!(deg[x], g.degree(x) as f64);
        }
        let mut ind = vec![0.0; g.vertex_count()];
        ind[v.center] = 1.0;
        let a = averaging(g, &ind);
        for x in 0..g.vertex_count() {
            let adjacent = g.neighbors(x).any(|(z, _)| z == v.center);
            assert_eq!(a[x], if adjacent { 1.0 } else { 0.0 });
        }
    }

    #[test]
    fn constant_has_zero_pseudo_gradient() {
        let g = path(5);
        let op = make_walk(&g, 0.5).unwrap();
        let u = vec![0.3; 5];
        let pg = pseudo_gradient(&op, &u, &u, 1.5).unwrap();
        assert!(pg.values.iter().all(|v| v.abs() < 1e-15));
        assert!(pseudo_gradient(&op, &u, &u, 2.0).is_err());
    }

    #[test]
    fn two_point_walk_closed_form() {
        let g = path(2);
        let q: f64 = 1.5;
        let op = make_walk(&g, 0.5).unwrap();
        let snap = HardySteinSnapshot::new(&op, 1, 1, q, vec![0.0, 1.0]).unwrap();
        let j1 = 0.5 - 0.5f64.powf(q);
        assert!((snap.j[0] - j1).abs() < 1e-15);
        assert!((snap.j[1] - j1).abs() < 1e-15);
        assert_eq!(snap.pseudo_gradient[0], 0.0);
        assert!((snap.pseudo_gradient[1] - j1).abs() < 1e-15);

        // k = 2 with laziness a: u = (1 - a, a)
        let a = 0.25;
        let b = 1.0 - a;
        let op = make_walk(&g, a).unwrap();
        let u = [b, a];
        let un = [a * u[0] + b * u[1], b * u[0] + a * u[1]];
        let j = |x: usize| a * u[x].powf(q) + b * u[1 - x].powf(q) - un[x].powf(q);
        let n = |x: usize| u[x].powf(2.0 - q) * j(x);
        let grad2 = |x: usize| 0.5 * b * (u[1 - x] - u[x]).powi(2);
        let expect = (grad2(0) / n(1)).max(grad2(1) / n(0));
        let walk_u = op.apply(&[0.0, 1.0]);
        let snap = HardySteinSnapshot::new(&op, 1, 2, q, walk_u).unwrap();
        let d = snap.domination_ratio(&op);
        assert_eq!(d.evaluated, 2);
        assert!((d.max_ratio - expect).abs() < 1e-12 * expect, "{} vs {expect}", d.max_ratio);
    }

    #[test]
    fn q_two_limit_is_continuous() {
        let v = build_vicsek(2, 1).unwrap();
        let op = make_walk(&v.graph, 0.5).unwrap();
        let u = op.apply_power(&delta(&v.graph, v.center).unwrap(), 3);
        let un = op.apply(&u);
        let sq: Vec<f64> = u.iter().map(|x| x * x).collect();
        let psq = op.apply(&sq);
        let limit: Vec<f64> = psq.iter().zip(&un).map(|(a, b)| a - b * b).collect();
        let near = pseudo_gradient(&op, &u, &un, 2.0 - 1e-7).unwrap();
        for (a, b) in near.values.iter().zip(&limit) {
            assert!((a - b).abs() < 1e-6);
        }
    }

    #[test]
    fn hardy_stein_nonnegative_and_summing() {
        let v = build_vicsek(2, 2).unwrap();
        let op = make_walk(&v.graph, 0.5).unwrap();
        for q in [1.25, 1.5, 1.75] {
            let rep = check_gradient_domination(&op, v.center, 5..=40, q).unwrap();
            assert!(rep.min_j >= -J_TOL);
            assert!(rep.max_laplacian_sum < 1e-10);
            assert!(rep.max_ratio.is_finite());
        }
    }

    #[test]
    fn far_tail_vanishes() {
        let v = build_vicsek(2, 2).unwrap();
        let op = make_walk(&v.graph, 0.5).unwrap();
        let t = integrated_gradient_tail(&op, v.center, 5, 7).unwrap();
        assert!(t < 1e-12);
        let total = integrated_gradient_tail(&op, v.center, 5, 0).unwrap();
        assert!(total > 0.0);
    }

    #[test]
    fn two_vertex_poincare() {
        // Neumann gap of the two-vertex graph with m = (1, 1): f = (1, -1) gives 2 / 4 ... closed form 1/2
        let g = path(2);
        let ball = g.ball_with(0, 1.0, BallKind::Closed).unwrap();
        let lam = poincare_constant(&g, &ball).unwrap();
        let mut best: f64 = 0.0;
        for i in -200..=200 {
            let t = i as f64 / 20.0;
            let mean = (1.0 + t) / 2.0;
            let var = (1.0 - mean).powi(2) + (t - mean).powi(2);
            let energy = (1.0 - t).powi(2);
            if energy > 0.0 {
                best = best.max(var / energy);
            }
        }
        assert!((lam - 0.5).abs() < 1e-12);
        assert!((best - 0.5).abs() < 1e-12);
    }

    #[test]
    fn disconnected_ball_rejected() {
        let g = path(5);
        let ball = Ball {
            center: 0,
            radius: 1.0,
            kind: BallKind::Open,
            members: vec![0, 2],
            measure: 2.0,
        };
        assert!(matches!(poincare_constant(&g, &ball), Err(LabError::Validation(_))));
    }

    #[test]
    fn check_row_layout() {
        let row = CheckRow {
            check_name: "weighted_gradient".into(),
            graph: "vicsek".into(),
            level: Some(4),
            y: 7,
            q: 1.5,
            m: 2.0,
            c: 0.02,
            k: 16,
            lhs: 1.0,
            rhs: 2.0,
            ratio: 0.5,
            pass: true,
        };
        assert_eq!(row.csv_row().split(',').count(), CheckRow::CSV_HEADER.split(',').count());
    }
}

//! Calderon-Zygmund decomposition on a finite doubling graph, the maximal
//! functions it is built from, and the off-diagonal tail estimate for the
//! Riesz transform applied to `(I - P^t) b_i`.

use rayon::prelude::*;
use serde::Serialize;

use crate::calculus::{lp_norm, Calculus};
use crate::error::{LabError, Result};
use crate::graph::{Ball, BallKind, WeightedGraph, UNREACHED};

/// `r^2` below 1, `r^m` from 1 on.
pub fn rho(r: f64, m: f64) -> f64 {
    if r < 1.0 {
        r * r
    } else {
        r.powf(m)
    }
}

/// Radii `1, 2, 4, ..` up to the first one whose open ball around any vertex
/// is the whole graph.
pub fn dyadic_radii(g: &WeightedGraph) -> Vec<u32> {
    let diam = g.sweep_diameter().max(1) as u64;
    let mut out = vec![1u32];
    while (*out.last().unwrap() as u64) <= 2 * diam {
        out.push(out.last().unwrap() * 2);
    }
    out
}

/// Per-shell sums of `|f| m` and `m` around `x`, accumulated into ball sums.
fn shell_sums(g: &WeightedGraph, f: &[f64], x: usize) -> (Vec<f64>, Vec<f64>) {
    let dist = g.bfs_distances(x);
    let ecc = dist.iter().copied().filter(|&d| d != UNREACHED).max().unwrap_or(0) as usize;
    let mut mass = vec![0.0; ecc + 1];
    let mut vol = vec![0.0; ecc + 1];
    for (y, &d) in dist.iter().enumerate() {
        mass[d as usize] += f[y].abs() * g.measure(y);
        vol[d as usize] += g.measure(y);
    }
    for d in 1..=ecc {
        mass[d] += mass[d - 1];
        vol[d] += vol[d - 1];
    }
    (mass, vol)
}

/// Centered maximal function over the dyadic radius grid:
/// `M f(x) = max_r V(x, r)^{-1} sum_{B(x, r)} |f| m`. Under doubling it is
/// comparable to the uncentered operator with constant `K_D^3`.
pub fn maximal_function(g: &WeightedGraph, f: &[f64]) -> Vec<f64> {
    let radii = dyadic_radii(g);
    (0..g.vertex_count())
        .into_par_iter()
        .map(|x| {
            let (mass, vol) = shell_sums(g, f, x);
            radii
                .iter()
                .map(|&r| {
                    let i = (r as usize - 1).min(mass.len() - 1);
                    mass[i] / vol[i]
                })
                .fold(0.0, f64::max)
        })
        .collect()
}

/// Uncentered maximal function over every open ball of integer radius,
/// by brute force. Quadratic in the vertex count.
pub fn uncentered_maximal_function(g: &WeightedGraph, f: &[f64]) -> Vec<f64> {
    let n = g.vertex_count();
    let per_center: Vec<Vec<f64>> = (0..n)
        .into_par_iter()
        .map(|z| {
            let dist = g.bfs_distances(z);
            let (mass, vol) = shell_sums(g, f, z);
            // best[d] = max over radii r > d of the average on B(z, r)
            let mut best = vec![0.0; mass.len()];
            let mut run: f64 = 0.0;
            for d in (0..mass.len()).rev() {
                run = run.max(mass[d] / vol[d]);
                best[d] = run;
            }
            dist.iter().map(|&d| best[d as usize]).collect()
        })
        .collect();
    (0..n)
        .map(|x| per_center.iter().map(|row| row[x]).fold(0.0, f64::max))
        .collect()
}

/// `max_{x, r >= 1} V(x, 2r) / V(x, r)` over integer radii.
pub fn doubling_constant(g: &WeightedGraph) -> f64 {
    (0..g.vertex_count())
        .into_par_iter()
        .map(|x| {
            let (_, vol) = shell_sums(g, &vec![0.0; g.vertex_count()], x);
            let at = |r: usize| vol[(r - 1).min(vol.len() - 1)];
            (1..=vol.len()).map(|r| at(2 * r) / at(r)).fold(1.0, f64::max)
        })
        .reduce(|| 1.0, f64::max)
}

/// One bad part `b_i`, supported in `B_i`.
#[derive(Debug, Clone)]
pub struct BadPart {
    pub ball: Ball,
    /// Distance from the selected centre to the complement of the level set.
    pub whitney_radius: u32,
    /// `(x, b_i(x))` over the support.
    pub values: Vec<(usize, f64)>,
    /// The weighted mean `c_i` removed from `f`.
    pub offset: f64,
}

impl BadPart {
    pub fn l1(&self, g: &WeightedGraph) -> f64 {
        self.values.iter().map(|&(x, v)| v.abs() * g.measure(x)).sum()
    }

    pub fn dense(&self, n: usize) -> Vec<f64> {
        let mut out = vec![0.0; n];
        for &(x, v) in &self.values {
            out[x] = v;
        }
        out
    }
}

/// Realized constants of the four decomposition properties.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CzConstants {
    /// `||g||_inf / lambda`.
    pub c1: f64,
    /// `max_i ||b_i||_1 / (lambda m(B_i))`.
    pub c2: f64,
    /// `lambda sum_i m(B_i) / ||f||_1`.
    pub c3: f64,
    /// Largest number of balls containing one vertex.
    pub c4: f64,
}

#[derive(Debug, Clone)]
pub struct CzDecomposition {
    pub lambda: f64,
    pub good: Vec<f64>,
    pub bad: Vec<BadPart>,
    pub overlap: usize,
    pub constants: CzConstants,
    /// Whether the level set was the whole graph (one ball covering everything).
    pub whole_graph: bool,
}

/// A posteriori checks of a decomposition.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CzVerification {
    pub exact_error: f64,
    pub max_bad_mean: f64,
    pub supports_ok: bool,
    pub halves_disjoint: bool,
    pub covers_level_set: bool,
    pub constants: CzConstants,
    pub caps: CzConstants,
}

impl CzVerification {
    pub fn passed(&self) -> bool {
        self.exact_error < 1e-10
            && self.max_bad_mean < 1e-10
            && self.supports_ok
            && self.halves_disjoint
            && self.covers_level_set
            && self.constants.c1 <= self.caps.c1
            && self.constants.c2 <= self.caps.c2
            && self.constants.c3 <= self.caps.c3
            && self.constants.c4 <= self.caps.c4
    }
}

fn ball_closure_radius(r: u32) -> f64 {
    2.5 * r as f64
}

pub fn cz_decompose(g: &WeightedGraph, f: &[f64], lambda: f64) -> Result<CzDecomposition> {
    let n = g.vertex_count();
    if f.len() != n {
        return Err(LabError::Validation(format!(
            "function has {} entries, graph has {n} vertices",
            f.len()
        )));
    }
    if let Some(x) = f.iter().position(|v| !v.is_finite()) {
        return Err(LabError::Validation(format!("f({x}) = {} is not finite", f[x])));
    }
    if !(lambda > 0.0 && lambda.is_finite()) {
        return Err(LabError::Validation(format!("level must be positive, got {lambda}")));
    }
    let maximal = maximal_function(g, f);
    let omega: Vec<usize> = (0..n).filter(|&x| maximal[x] > lambda).collect();
    let norm1 = lp_norm(g, f, 1.0);

    if omega.is_empty() {
        return Ok(CzDecomposition {
            lambda,
            good: f.to_vec(),
            bad: Vec::new(),
            overlap: 0,
            constants: CzConstants {
                c1: lp_norm(g, f, f64::INFINITY) / lambda,
                c2: 0.0,
                c3: 0.0,
                c4: 0.0,
            },
            whole_graph: false,
        });
    }

    let complement: Vec<usize> = (0..n).filter(|&x| maximal[x] <= lambda).collect();
    let mut in_omega = vec![false; n];
    for &x in &omega {
        in_omega[x] = true;
    }

    let mut balls: Vec<(Ball, u32)> = Vec::new();
    let whole_graph = complement.is_empty();
    if whole_graph {
        let center = omega[0];
        let radius = g.eccentricity(center) as f64 + 1.0;
        balls.push((g.ball_with(center, radius, BallKind::Open)?, g.eccentricity(center) + 1));
    } else {
        let whitney = g.distance_to_set(&complement);
        let mut order = omega.clone();
        // decreasing radius, ties by vertex id
        order.sort_by(|a, b| whitney[*b].cmp(&whitney[*a]).then(a.cmp(b)));
        let mut taken = vec![false; n];
        for x in order {
            let r = whitney[x];
            let half = g.ball_with(x, r as f64 / 2.0, BallKind::Open)?;
            if half.members.iter().any(|&y| taken[y]) {
                continue;
            }
            for &y in &half.members {
                taken[y] = true;
            }
            balls.push((g.ball_with(x, ball_closure_radius(r), BallKind::Open)?, r));
        }
    }

    let mut count = vec![0usize; n];
    let mut count_omega = vec![0usize; n];
    for (ball, _) in &balls {
        for &y in &ball.members {
            count[y] += 1;
            if in_omega[y] {
                count_omega[y] += 1;
            }
        }
    }
    let overlap = count.iter().copied().max().unwrap_or(0);

    let mut good = f.to_vec();
    let mut bad = Vec::with_capacity(balls.len());
    for (ball, r) in balls {
        let support: Vec<(usize, f64)> = ball
            .members
            .iter()
            .filter(|&&y| in_omega[y])
            .map(|&y| (y, 1.0 / count_omega[y] as f64))
            .collect();
        let weight: f64 = support.iter().map(|&(y, chi)| chi * g.measure(y)).sum();
        let offset = support.iter().map(|&(y, chi)| chi * f[y] * g.measure(y)).sum::<f64>() / weight;
        let values: Vec<(usize, f64)> = support
            .iter()
            .map(|&(y, chi)| (y, chi * (f[y] - offset)))
            .collect();
        for &(y, v) in &values {
            good[y] -= v;
        }
        bad.push(BadPart {
            ball,
            whitney_radius: r,
            values,
            offset,
        });
    }

    let c1 = lp_norm(g, &good, f64::INFINITY) / lambda;
    let c2 = bad
        .iter()
        .map(|b| b.l1(g) / (lambda * b.ball.measure))
        .fold(0.0, f64::max);
    let total: f64 = bad.iter().map(|b| b.ball.measure).sum();
    let c3 = if norm1 > 0.0 { lambda * total / norm1 } else { 0.0 };
    Ok(CzDecomposition {
        lambda,
        good,
        bad,
        overlap,
        constants: CzConstants {
            c1,
            c2,
            c3,
            c4: overlap as f64,
        },
        whole_graph,
    })
}

/// Upper bounds for the realized constants that follow from the doubling
/// constant `K` of the graph and the realized overlap, valid for
/// `lambda >= ||f||_1 / m(V)`.
pub fn proven_caps(doubling: f64, overlap: usize) -> CzConstants {
    let k = overlap.max(1) as f64;
    CzConstants {
        c1: (k * doubling.powi(3)).max(1.0),
        c2: 2.0 * doubling.powi(3),
        c3: doubling.powi(5),
        c4: f64::INFINITY,
    }
}

pub fn verify_decomposition(g: &WeightedGraph, f: &[f64], dec: &CzDecomposition, doubling: f64) -> CzVerification {
    let n = g.vertex_count();
    let mut sum = dec.good.clone();
    let mut supports_ok = true;
    let mut max_bad_mean: f64 = 0.0;
    let scale = lp_norm(g, f, f64::INFINITY).max(1.0) * g.total_measure();
    for b in &dec.bad {
        let mut mean = 0.0;
        for &(x, v) in &b.values {
            sum[x] += v;
            mean += v * g.measure(x);
            supports_ok &= b.ball.contains(x);
        }
        max_bad_mean = max_bad_mean.max(mean.abs() / scale);
    }
    let exact_error = sum
        .iter()
        .zip(f)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);

    let maximal = maximal_function(g, f);
    let mut covered = vec![false; n];
    let mut half_owner = vec![false; n];
    let mut halves_disjoint = true;
    for b in &dec.bad {
        for &x in &b.ball.members {
            covered[x] = true;
        }
        if !dec.whole_graph {
            let half = g
                .ball_with(b.ball.center, b.whitney_radius as f64 / 2.0, BallKind::Open)
                .expect("centre is a valid vertex");
            for &x in &half.members {
                halves_disjoint &= !half_owner[x];
                half_owner[x] = true;
            }
        }
    }
    let covers_level_set = (0..n).all(|x| maximal[x] <= dec.lambda || covered[x]);
    CzVerification {
        exact_error,
        max_bad_mean,
        supports_ok,
        halves_disjoint,
        covers_level_set,
        constants: dec.constants,
        caps: proven_caps(doubling, dec.overlap),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TailPoint {
    pub center: usize,
    pub radius: f64,
    pub steps: usize,
    pub b_l1: f64,
    /// `sum_{x not in 2 B_i} |T (I - P^t) b_i| m / ||b_i||_1`, zero when `b_i = 0`.
    pub tail_ratio: f64,
}

/// For each bad part, `t_i = ceil(rho(r_i))` with `r_i` the radius of `B_i`,
/// and the mass of the Riesz transform of `(I - P^{t_i}) b_i` outside `2 B_i`.
pub fn cz_tail_claim(calc: &Calculus<'_, '_>, dec: &CzDecomposition, m: f64) -> Result<Vec<TailPoint>> {
    let op = calc.op();
    let g = op.graph();
    let n = g.vertex_count();
    dec.bad
        .par_iter()
        .map(|b| {
            let radius = b.ball.radius;
            let steps = rho(radius, m).ceil() as usize;
            let b_l1 = b.l1(g);
            if b_l1 == 0.0 {
                return Ok(TailPoint {
                    center: b.ball.center,
                    radius,
                    steps,
                    b_l1,
                    tail_ratio: 0.0,
                });
            }
            let dense = b.dense(n);
            let smoothed = op.apply_power(&dense, steps);
            let h: Vec<f64> = dense.iter().zip(&smoothed).map(|(a, s)| a - s).collect();
            let t = calc.riesz_apply(&h)?;
            let dist = g.bfs_distances(b.ball.center);
            let outside: f64 = (0..n)
                .filter(|&x| (dist[x] as f64) >= 2.0 * radius)
                .map(|x| t.values[x].abs() * g.measure(x))
                .sum();
            Ok(TailPoint {
                center: b.ball.center,
                radius,
                steps,
                b_l1,
                tail_ratio: outside / b_l1,
            })
        })
        .collect()
}

#[derive(Debug, Clone, Serialize)]
pub struct CzBallReport {
    pub center: usize,
    pub radius: f64,
    pub b_l1: f64,
    pub tail_ratio: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct CzReport {
    pub lambda: f64,
    pub n_balls: usize,
    pub overlap: usize,
    pub constants: CzConstants,
    pub per_ball: Vec<CzBallReport>,
}

impl CzReport {
    pub fn new(g: &WeightedGraph, dec: &CzDecomposition, tails: Option<&[TailPoint]>) -> Self {
        CzReport {
            lambda: dec.lambda,
            n_balls: dec.bad.len(),
            overlap: dec.overlap,
            constants: dec.constants,
            per_ball: dec
                .bad
                .iter()
                .enumerate()
                .map(|(i, b)| CzBallReport {
                    center: b.ball.center,
                    radius: b.ball.radius,
                    b_l1: b.l1(g),
                    tail_ratio: tails.map(|t| t[i].tail_ratio),
                })
                .collect(),
        }
    }
}

//! The tent functions `g_n` on Vicsek graphs and the scaling argument showing
//! that the reverse Riesz inequality fails for `p < 2`.
//!
//! `g_n` is 1 at the centre `z_0`, 0 at every corner `z_i`, linear along the
//! main diagonals (`g_n(z) = 3^{-n} d(z_i, z)`) and constant on every branch
//! hanging off a diagonal.

use rayon::prelude::*;
use serde::Serialize;

use crate::calculus::{gradient_length, lp_norm, lp_norm_pow, Backend, Calculus};
use crate::error::{LabError, Result};
use crate::fit::{fit_power_law, loglog_slope, ScalingFit};
use crate::graph::UNREACHED;
use crate::markov::make_walk;
use crate::report::fmt_num;
use crate::vicsek::{build_vicsek, growth_exponent, VicsekGraph};

#[derive(Debug, Clone)]
pub struct GnFamily<'v> {
    pub vicsek: &'v VicsekGraph,
    pub values: Vec<f64>,
}

impl GnFamily<'_> {
    /// `|Omega_n|`, the number of vertices.
    pub fn support_size(&self) -> usize {
        self.vicsek.graph.vertex_count()
    }
}

pub fn build_gn(v: &VicsekGraph) -> GnFamily<'_> {
    let g = &v.graph;
    let scale = v.side_half() as f64;
    let n = g.vertex_count();
    let mut values = vec![f64::NAN; n];
    let mut dist = vec![UNREACHED; n];
    let mut queue = std::collections::VecDeque::new();
    for x in 0..n {
        if let Some(pos) = v.diagonal_pos(x) {
            values[x] = pos.to_corner as f64 / scale;
            dist[x] = 0;
            queue.push_back(x);
        }
    }
    // every branch off a diagonal is a subtree, so its unique nearest
    // diagonal vertex is the one BFS reaches it from
    while let Some(x) = queue.pop_front() {
        for (y, _) in g.neighbors(x) {
            if dist[y] == UNREACHED {
                dist[y] = dist[x] + 1;
                values[y] = values[x];
                queue.push_back(y);
            }
        }
    }
    GnFamily { vicsek: v, values }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GnNorms {
    pub l1: f64,
    /// `||g_n||_p^p`.
    pub lp_p: f64,
    /// `sum_{x ~ y} |g_n(x) - g_n(y)|^p`, each edge once.
    pub edge_sum: f64,
    /// `||grad g_n||_p` for the lazy walk.
    pub grad_norm: f64,
}

pub fn gn_norms(fam: &GnFamily<'_>, alpha: f64, p: f64) -> Result<GnNorms> {
    let g = &fam.vicsek.graph;
    let op = make_walk(g, alpha)?;
    let f = &fam.values;
    let edge_sum = g
        .canonical_edges()
        .iter()
        .map(|&(x, y, _)| (f[x] - f[y]).abs().powf(p))
        .sum();
    Ok(GnNorms {
        l1: lp_norm(g, f, 1.0),
        lp_p: lp_norm_pow(g, f, p),
        edge_sum,
        grad_norm: lp_norm(g, &gradient_length(&op, f), p),
    })
}

/// `beta (D + 1) / D - 1/p - 1/(p' D)`; negative values predict failure.
pub fn exponent_gap(d: f64, p: f64, beta: f64) -> f64 {
    let p_conj = p / (p - 1.0);
    beta * (d + 1.0) / d - 1.0 / p - 1.0 / (p_conj * d)
}

/// `p* = (D - 1) / (beta (D + 1) - 1)`: failure is predicted for `1 < p < p*`.
pub fn threshold_p(d: f64, beta: f64) -> f64 {
    (d - 1.0) / (beta * (d + 1.0) - 1.0)
}

/// `2 beta p / ((p - 1) D')` with `D' = 2D / (D + 1)`.
pub fn nash_exponent(d: f64, p: f64, beta: f64) -> f64 {
    let d_prime = 2.0 * d / (d + 1.0);
    2.0 * beta * p / ((p - 1.0) * d_prime)
}

fn check_admissible(d: f64, p: f64, beta: f64, levels: &[u32]) -> Result<()> {
    let (lo, hi) = (1.0 / (d + 1.0), d / (d + 1.0));
    if !(beta > lo && beta < hi) {
        return Err(LabError::Validation(format!(
            "beta = {beta} outside the admissible interval ({lo}, {hi}) = (1/(D+1), D/(D+1))"
        )));
    }
    if !(p > 1.0 && p.is_finite()) {
        return Err(LabError::Validation(format!("p must exceed 1, got {p}")));
    }
    if levels.is_empty() || levels.windows(2).any(|w| w[0] >= w[1]) {
        return Err(LabError::Validation(format!(
            "levels must be nonempty and strictly increasing, got {levels:?}"
        )));
    }
    Ok(())
}

/// One level of the Nash/reverse-Riesz experiment.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NashReport {
    pub dim: usize,
    pub level: u32,
    pub support_size: usize,
    pub p: f64,
    pub beta: f64,
    pub d: f64,
    pub d_prime: f64,
    pub norms: GnNorms,
    pub frac_norm: f64,
    /// `||g||_p^{1 + a}`.
    pub lhs: f64,
    /// `||g||_1^a ||grad g||_p`.
    pub rhs: f64,
    /// `||g||_1^a ||Delta^beta g||_p`.
    pub rhs_frac: f64,
    pub gap_pred: f64,
    /// Slope of `log(lhs / rhs)` against `log |Omega_n|` over all levels of the run.
    pub slope_obs: f64,
}

impl NashReport {
    pub const CSV_HEADER: &'static str =
        "N,n,p,beta,l1,lp_p,edge_sum,grad_norm,frac_norm,forward_ratio,reverse_ratio,gap_pred,slope_obs";

    pub fn forward_ratio(&self) -> f64 {
        self.norms.grad_norm / self.frac_norm
    }

    pub fn reverse_ratio(&self) -> f64 {
        self.frac_norm / self.norms.grad_norm
    }

    pub fn discrepancy(&self) -> f64 {
        self.lhs / self.rhs
    }

    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{},{},{},{},{},{}",
            self.dim,
            self.level,
            fmt_num(self.p),
            fmt_num(self.beta),
            fmt_num(self.norms.l1),
            fmt_num(self.norms.lp_p),
            fmt_num(self.norms.edge_sum),
            fmt_num(self.norms.grad_norm),
            fmt_num(self.frac_norm),
            fmt_num(self.forward_ratio()),
            fmt_num(self.reverse_ratio()),
            fmt_num(self.gap_pred),
            fmt_num(self.slope_obs)
        )
    }
}

fn level_report(dim: usize, level: u32, p: f64, beta: f64, backend: Backend, alpha: f64) -> Result<NashReport> {
    let v = build_vicsek(dim, level)?;
    let fam = build_gn(&v);
    let norms = gn_norms(&fam, alpha, p)?;
    let op = make_walk(&v.graph, alpha)?;
    let calc = Calculus::new(&op, backend)?;
    let frac = calc.frac_power(&fam.values, beta, false)?;
    let frac_norm = lp_norm(&v.graph, &frac.values, p);
    let d = growth_exponent(dim);
    let a = nash_exponent(d, p, beta);
    let lp = norms.lp_p.powf(1.0 / p);
    Ok(NashReport {
        dim,
        level,
        support_size: fam.support_size(),
        p,
        beta,
        d,
        d_prime: 2.0 * d / (d + 1.0),
        norms,
        frac_norm,
        lhs: lp.powf(1.0 + a),
        rhs: norms.l1.powf(a) * norms.grad_norm,
        rhs_frac: norms.l1.powf(a) * frac_norm,
        gap_pred: exponent_gap(d, p, beta),
        slope_obs: f64::NAN,
    })
}

/// Evaluates both sides of the graph Nash inequality on `g_n` at each level.
pub fn nash_test(dim: usize, levels: &[u32], p: f64, beta: f64, backend: Backend, alpha: f64) -> Result<Vec<NashReport>> {
    check_admissible(growth_exponent(dim), p, beta, levels)?;
    let mut reports: Vec<NashReport> = levels
        .par_iter()
        .map(|&n| level_report(dim, n, p, beta, backend, alpha))
        .collect::<Result<_>>()?;
    let xs: Vec<f64> = reports.iter().map(|r| r.support_size as f64).collect();
    let ys: Vec<f64> = reports.iter().map(NashReport::discrepancy).collect();
    let slope = loglog_slope(&xs, &ys).unwrap_or(f64::NAN);
    for r in &mut reports {
        r.slope_obs = slope;
    }
    Ok(reports)
}

#[derive(Debug, Clone, Serialize)]
pub struct GrowthReport {
    pub rows: Vec<NashReport>,
    /// Fit of the reverse ratio `||Delta^beta g_n||_p / ||grad g_n||_p` against `|Omega_n|`.
    pub fit: ScalingFit,
    pub max_forward: f64,
    /// Largest over smallest reverse ratio across levels.
    pub reverse_spread: f64,
}

pub fn reverse_riesz_growth(
    dim: usize,
    levels: &[u32],
    p: f64,
    beta: f64,
    backend: Backend,
    alpha: f64,
) -> Result<GrowthReport> {
    let rows = nash_test(dim, levels, p, beta, backend, alpha)?;
    let xs: Vec<f64> = rows.iter().map(|r| r.support_size as f64).collect();
    let ys: Vec<f64> = rows.iter().map(NashReport::reverse_ratio).collect();
    let fit = fit_power_law(&xs, &ys)?;
    let hi = ys.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lo = ys.iter().copied().fold(f64::INFINITY, f64::min);
    Ok(GrowthReport {
        max_forward: rows.iter().map(NashReport::forward_ratio).fold(f64::NEG_INFINITY, f64::max),
        reverse_spread: hi / lo,
        rows,
        fit,
    })
}

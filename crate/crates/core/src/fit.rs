//! Log-log least-squares fits of power laws.

use serde::Serialize;
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::error::{LabError, Result};
use crate::graph::WeightedGraph;

/// Result of fitting `log y = log_constant + exponent * log x`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ScalingFit {
    pub exponent: f64,
    pub log_constant: f64,
    pub r_squared: f64,
    /// Standard error of the fitted exponent.
    pub exponent_stderr: f64,
    pub x_min: f64,
    pub x_max: f64,
    pub n_points: usize,
}

impl ScalingFit {
    /// Two-sided Student-t confidence interval for the exponent.
    pub fn exponent_interval(&self, confidence: f64) -> (f64, f64) {
        let dof = (self.n_points - 2) as f64;
        let t = StudentsT::new(0.0, 1.0, dof)
            .expect("n_points >= 3 gives a valid t distribution")
            .inverse_cdf(0.5 + confidence / 2.0);
        let half = t * self.exponent_stderr;
        (self.exponent - half, self.exponent + half)
    }

    pub fn predict(&self, x: f64) -> f64 {
        (self.log_constant + self.exponent * x.ln()).exp()
    }
}

/// Ordinary least squares on `(ln x, ln y)`. Needs at least three points,
/// all strictly positive and finite.
pub fn fit_power_law(xs: &[f64], ys: &[f64]) -> Result<ScalingFit> {
    if xs.len() != ys.len() {
        return Err(LabError::Validation(format!(
            "fit needs paired data, got {} abscissae and {} ordinates",
            xs.len(),
            ys.len()
        )));
    }
    if xs.len() < 3 {
        return Err(LabError::Validation(format!(
            "fit needs at least 3 points, got {}",
            xs.len()
        )));
    }
    for (&x, &y) in xs.iter().zip(ys) {
        if !(x.is_finite() && x > 0.0 && y.is_finite() && y > 0.0) {
            return Err(LabError::Validation(format!(
                "log-log fit needs positive finite data, got ({x}, {y})"
            )));
        }
    }
    let lx: Vec<f64> = xs.iter().map(|x| x.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|y| y.ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxx: f64 = lx.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    let syy: f64 = ly.iter().map(|y| (y - my).powi(2)).sum();
    if sxx <= 0.0 {
        return Err(LabError::Validation("fit abscissae are all equal".into()));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let sse: f64 = lx
        .iter()
        .zip(&ly)
        .map(|(x, y)| (y - intercept - slope * x).powi(2))
        .sum();
    let r_squared = if syy > 0.0 { 1.0 - sse / syy } else { 1.0 };
    let stderr = (sse / (n - 2.0) / sxx).sqrt();
    if !slope.is_finite() {
        return Err(LabError::Validation("fitted exponent is not finite".into()));
    }
    Ok(ScalingFit {
        exponent: slope,
        log_constant: intercept,
        r_squared,
        exponent_stderr: stderr,
        x_min: xs.iter().copied().fold(f64::INFINITY, f64::min),
        x_max: xs.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        n_points: xs.len(),
    })
}

/// Least-squares slope of `ln y` against `ln x`; works from two points.
pub fn loglog_slope(xs: &[f64], ys: &[f64]) -> Option<f64> {
    if xs.len() != ys.len() || xs.len() < 2 {
        return None;
    }
    let lx: Vec<f64> = xs.iter().map(|x| x.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|y| y.ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxx: f64 = lx.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    slope.is_finite().then_some(slope)
}

/// Fits `V(x, r) ~ r^D`, averaging `log V` over the given centres at each radius.
///
/// Radii must span at least a decade and stay below a quarter of the
/// (double-sweep) diameter.
pub fn volume_growth_fit(g: &WeightedGraph, centers: &[usize], radii: &[usize]) -> Result<ScalingFit> {
    if centers.is_empty() {
        return Err(LabError::Validation("volume fit needs at least one centre".into()));
    }
    for &c in centers {
        g.check_vertex(c)?;
    }
    let rmin = radii.iter().copied().min().unwrap_or(0);
    let rmax = radii.iter().copied().max().unwrap_or(0);
    if rmin == 0 || (rmax as f64) < 10.0 * rmin as f64 {
        return Err(LabError::Validation(format!(
            "radii must be positive and span a decade, got [{rmin}, {rmax}]"
        )));
    }
    let diam = g.sweep_diameter();
    if 4 * rmax > diam as usize {
        return Err(LabError::Validation(format!(
            "largest radius {rmax} exceeds a quarter of the diameter {diam}"
        )));
    }
    let mut xs = Vec::with_capacity(radii.len());
    let mut ys = Vec::with_capacity(radii.len());
    let dists: Vec<Vec<u32>> = centers
        .iter()
        .map(|&c| g.bfs_distances_within(c, rmax as u32))
        .collect();
    for &r in radii {
        let mean_log: f64 = dists
            .iter()
            .map(|d| {
                let v: f64 = d
                    .iter()
                    .zip(g.measures())
                    .filter(|(&dx, _)| (dx as usize) < r)
                    .map(|(_, &m)| m)
                    .sum();
                v.ln()
            })
            .sum::<f64>()
            / centers.len() as f64;
        xs.push(r as f64);
        ys.push(mean_log.exp());
    }
    fit_power_law(&xs, &ys)
}

/// Geometric grid of distinct integers between `lo` and `hi`, both included.
pub fn log_grid(lo: usize, hi: usize, points: usize) -> Vec<usize> {
    assert!(lo >= 1 && hi >= lo && points >= 2);
    let (a, b) = ((lo as f64).ln(), (hi as f64).ln());
    let mut out: Vec<usize> = (0..points)
        .map(|i| (a + (b - a) * i as f64 / (points - 1) as f64).exp().round() as usize)
        .collect();
    out.dedup();
    out
}

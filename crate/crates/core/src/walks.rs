//! Monte Carlo exit times of the lazy walk from graph balls.
//!
//! `tau_{x, r} = min { n >= 1 : d(X_n, x) >= r }` with `X_0 = x`. Trial `i`
//! draws from `ChaCha8Rng::seed_from_u64(seed)` on stream `i`, so results do
//! not depend on how trials are scheduled.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{LabError, Result};
use crate::fit::{fit_power_law, ScalingFit};
use crate::markov::MarkovOperator;
use crate::report::fmt_num;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ExitTimeStats {
    pub center: usize,
    pub radius: u32,
    pub trials: u64,
    pub mean: f64,
    /// Standard error of the mean.
    pub stderr: f64,
    pub alpha: f64,
    pub seed: u64,
}

impl ExitTimeStats {
    pub const CSV_HEADER: &'static str = "graph,level,alpha,x,r,trials,mean,stderr,seed";

    pub fn csv_row(&self, graph: &str, level: Option<u32>) -> String {
        format!(
            "{},{},{},{},{},{},{},{},{}",
            graph,
            level.map(|l| l.to_string()).unwrap_or_default(),
            fmt_num(self.alpha),
            self.center,
            self.radius,
            self.trials,
            fmt_num(self.mean),
            fmt_num(self.stderr),
            self.seed
        )
    }
}

/// Cumulative neighbour weights per vertex for inverse-CDF sampling.
struct StepTable {
    offsets: Vec<usize>,
    targets: Vec<usize>,
    cumulative: Vec<f64>,
}

impl StepTable {
    fn new(op: &MarkovOperator<'_>) -> Self {
        let g = op.graph();
        let mut offsets = Vec::with_capacity(g.vertex_count() + 1);
        let mut targets = Vec::new();
        let mut cumulative = Vec::new();
        offsets.push(0);
        for x in 0..g.vertex_count() {
            let mut acc = 0.0;
            for (y, w) in g.neighbors(x) {
                acc += w;
                targets.push(y);
                cumulative.push(acc);
            }
            offsets.push(targets.len());
        }
        StepTable {
            offsets,
            targets,
            cumulative,
        }
    }

    #[inline]
    fn jump(&self, x: usize, u: f64) -> usize {
        let range = self.offsets[x]..self.offsets[x + 1];
        let cum = &self.cumulative[range.clone()];
        let target = u * cum[cum.len() - 1];
        let i = cum.partition_point(|&c| c <= target).min(cum.len() - 1);
        self.targets[range.start + i]
    }
}

fn run_trial(table: &StepTable, dist: &[u32], alpha: f64, x: usize, r: u32, seed: u64, trial: u64) -> u64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(trial);
    let mut pos = x;
    let mut n = 0u64;
    loop {
        n += 1;
        let u: f64 = rng.gen();
        if u >= alpha {
            pos = table.jump(pos, (u - alpha) / (1.0 - alpha));
            if dist[pos] >= r {
                return n;
            }
        }
    }
}

pub fn simulate_exit(op: &MarkovOperator<'_>, x: usize, r: u32, trials: u64, seed: u64) -> Result<ExitTimeStats> {
    let g = op.graph();
    g.check_vertex(x)?;
    if trials == 0 {
        return Err(LabError::Validation("exit simulation needs at least one trial".into()));
    }
    if r == 0 {
        return Err(LabError::Validation("exit radius must be at least 1".into()));
    }
    let ecc = g.eccentricity(x);
    if r > ecc {
        return Err(LabError::Validation(format!(
            "exit radius {r} exceeds the eccentricity {ecc} of vertex {x}; the walk could never leave the ball"
        )));
    }
    // unreached vertices carry u32::MAX and count as outside
    let dist = g.bfs_distances_within(x, r);
    let table = StepTable::new(op);
    let alpha = op.alpha();
    let (sum, sum_sq) = (0..trials)
        .into_par_iter()
        .map(|t| {
            let tau = run_trial(&table, &dist, alpha, x, r, seed, t);
            (tau as u128, (tau as u128) * (tau as u128))
        })
        .reduce(|| (0, 0), |a, b| (a.0 + b.0, a.1 + b.1));
    let n = trials as f64;
    let mean = sum as f64 / n;
    let stderr = if trials > 1 {
        let var = (sum_sq as f64 - n * mean * mean) / (n - 1.0);
        (var.max(0.0) / n).sqrt()
    } else {
        f64::NAN
    };
    Ok(ExitTimeStats {
        center: x,
        radius: r,
        trials,
        mean,
        stderr,
        alpha,
        seed,
    })
}

/// Log-log fit of mean exit time against radius.
pub fn exit_exponent_fit(stats: &[ExitTimeStats]) -> Result<ScalingFit> {
    let xs: Vec<f64> = stats.iter().map(|s| s.radius as f64).collect();
    let ys: Vec<f64> = stats.iter().map(|s| s.mean).collect();
    fit_power_law(&xs, &ys)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::WeightedGraph;
    use crate::markov::make_walk;

    fn path(n: usize) -> WeightedGraph {
        let edges: Vec<_> = (0..n - 1).map(|i| (i, i + 1, 1.0)).collect();
        WeightedGraph::from_edges(n, &edges).unwrap()
    }

    #[test]
    fn radius_one_is_geometric() {
        let g = path(5);
        let op = make_walk(&g, 0.5).unwrap();
        let s = simulate_exit(&op, 2, 1, 20_000, 3).unwrap();
        assert!((s.mean - 2.0).abs() < 4.0 * s.stderr + 1e-9, "{s:?}");
        let op0 = make_walk(&g, 0.0).unwrap();
        let s0 = simulate_exit(&op0, 2, 1, 100, 3).unwrap();
        assert_eq!(s0.mean, 1.0);
        assert_eq!(s0.stderr, 0.0);
    }

    #[test]
    fn deterministic_given_seed() {
        let g = path(31);
        let op = make_walk(&g, 0.5).unwrap();
        let a = simulate_exit(&op, 15, 6, 500, 11).unwrap();
        let b = simulate_exit(&op, 15, 6, 500, 11).unwrap();
        let c = simulate_exit(&op, 15, 6, 500, 12).unwrap();
        assert_eq!(a, b);
        assert_ne!(a.mean, c.mean);
    }

    #[test]
    fn radius_beyond_graph_rejected() {
        let g = path(5);
        let op = make_walk(&g, 0.5).unwrap();
        assert!(matches!(simulate_exit(&op, 2, 3, 10, 1), Err(LabError::Validation(_))));
        assert!(simulate_exit(&op, 2, 2, 10, 1).is_ok());
    }

    #[test]
    fn csv_layout() {
        let s = ExitTimeStats {
            center: 4,
            radius: 9,
            trials: 10,
            mean: 100.0,
            stderr: 1.0,
            alpha: 0.5,
            seed: 7,
        };
        let row = s.csv_row("vicsek", Some(5));
        assert_eq!(row.split(',').count(), ExitTimeStats::CSV_HEADER.split(',').count());
        assert!(row.ends_with(",7"));
    }
}

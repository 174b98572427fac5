//! Vicsek fractal graphs in `N` dimensions.
//!
//! A level-`k` block is a cube of side `2 * 3^k`. The level-0 block is a star:
//! its centre `(1, .., 1)` joined to the `2^N` cube corners by diagonal steps
//! `(+-1, .., +-1)`. A level-`k` block is assembled from `1 + 2^N` level-`(k-1)`
//! blocks, one in the centre and one in each corner of a `3 x .. x 3` grid;
//! each corner copy shares its inner corner vertex with the central copy.
//! Vertices are merged by exact coordinate equality and numbered in
//! lexicographic coordinate order.

use std::collections::{BTreeSet, HashMap};

use crate::error::{LabError, Result};
use crate::graph::{Coords, WeightedGraph};

/// Default cap on the number of vertices a construction may produce.
pub const DEFAULT_VERTEX_BUDGET: u128 = 2_000_000;

/// Position of a vertex on one of the main diagonals joining `z_0` to a corner.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DiagonalPos {
    /// Corner index `i` of the diagonal `z_0 -- z_i`. The centre reports 0.
    pub index: usize,
    /// Graph distance `d(z_i, z)` along the diagonal.
    pub to_corner: u64,
}

#[derive(Debug, Clone)]
pub struct VicsekGraph {
    pub graph: WeightedGraph,
    pub dim: usize,
    pub level: u32,
    pub center: usize,
    /// Corners `z_i`; corner `i` has coordinate `2 * 3^n` along axis `j` iff bit `j` of `i` is set.
    pub corners: Vec<usize>,
    diagonal: Vec<Option<DiagonalPos>>,
}

impl VicsekGraph {
    pub fn side_half(&self) -> u64 {
        3u64.pow(self.level)
    }

    /// Growth exponent `log_3(1 + 2^N)`.
    pub fn growth_exponent(&self) -> f64 {
        growth_exponent(self.dim)
    }

    /// Walk dimension `D + 1` of the Vicsek family.
    pub fn walk_exponent(&self) -> f64 {
        self.growth_exponent() + 1.0
    }

    pub fn diagonal_pos(&self, x: usize) -> Option<DiagonalPos> {
        self.diagonal[x]
    }

    pub fn on_diagonal(&self, x: usize) -> bool {
        self.diagonal[x].is_some()
    }

    /// Vertices of the central level-`(n-1)` block (the whole graph at level 0).
    pub fn central_block(&self) -> Vec<usize> {
        let coords = self.graph.coords().expect("vicsek graphs carry coordinates");
        let c = self.side_half() as i64;
        let h = if self.level == 0 { c } else { c / 3 };
        (0..self.graph.vertex_count())
            .filter(|&x| coords.of(x).iter().all(|&v| (v - c).abs() <= h))
            .collect()
    }
}

pub fn growth_exponent(dim: usize) -> f64 {
    (1.0 + 2f64.powi(dim as i32)).ln() / 3f64.ln()
}

/// Closed-form vertex count `2^N (1 + 2^N)^n + 1`.
pub fn vicsek_vertex_count(dim: usize, level: u32) -> Option<u128> {
    let corners = 1u128.checked_shl(dim as u32)?;
    let per = corners.checked_add(1)?.checked_pow(level)?;
    corners.checked_mul(per)?.checked_add(1)
}

pub fn build_vicsek(dim: usize, level: u32) -> Result<VicsekGraph> {
    build_vicsek_with_budget(dim, level, DEFAULT_VERTEX_BUDGET)
}

pub fn build_vicsek_with_budget(dim: usize, level: u32, budget: u128) -> Result<VicsekGraph> {
    if dim == 0 {
        return Err(LabError::Validation("embedding dimension must be >= 1".into()));
    }
    let needed = vicsek_vertex_count(dim, level).unwrap_or(u128::MAX);
    if needed > budget {
        return Err(LabError::Resource {
            what: "vicsek vertex budget",
            needed,
            limit: budget,
        });
    }

    // Edges as flat coordinate pairs: 2 * dim entries per edge.
    let ncorner = 1usize << dim;
    let mut edges: Vec<i64> = Vec::with_capacity(2 * dim * ncorner);
    for c in 0..ncorner {
        edges.extend(std::iter::repeat(1).take(dim));
        edges.extend((0..dim).map(|j| if c >> j & 1 == 1 { 2 } else { 0 }));
    }
    let mut sub_side: i64 = 2;
    for _ in 0..level {
        let mut offsets: Vec<Vec<i64>> = vec![vec![sub_side; dim]];
        for c in 0..ncorner {
            offsets.push(
                (0..dim)
                    .map(|j| if c >> j & 1 == 1 { 2 * sub_side } else { 0 })
                    .collect(),
            );
        }
        let mut next = Vec::with_capacity(edges.len() * offsets.len());
        for off in &offsets {
            for chunk in edges.chunks_exact(dim) {
                next.extend(chunk.iter().zip(off).map(|(a, b)| a + b));
            }
        }
        edges = next;
        sub_side *= 3;
    }

    let unique: BTreeSet<&[i64]> = edges.chunks_exact(dim).collect();
    let index: HashMap<&[i64], usize> = unique.iter().enumerate().map(|(i, &c)| (c, i)).collect();
    let n = unique.len();
    let coord_values: Vec<i64> = unique.iter().flat_map(|c| c.iter().copied()).collect();
    let edge_list: Vec<(usize, usize, f64)> = edges
        .chunks_exact(2 * dim)
        .map(|e| (index[&e[..dim]], index[&e[dim..]], 1.0))
        .collect();
    let graph = WeightedGraph::from_edges(n, &edge_list)?.with_coords(Coords {
        dim,
        values: coord_values,
    });

    let half = 3i64.pow(level);
    let center_coord = vec![half; dim];
    let center = index[center_coord.as_slice()];
    let corners: Vec<usize> = (0..ncorner)
        .map(|c| {
            let coord: Vec<i64> = (0..dim)
                .map(|j| if c >> j & 1 == 1 { 2 * half } else { 0 })
                .collect();
            index[coord.as_slice()]
        })
        .collect();

    let mut diagonal = vec![None; n];
    for (i, _) in corners.iter().enumerate() {
        let dir: Vec<i64> = (0..dim).map(|j| if i >> j & 1 == 1 { 1 } else { -1 }).collect();
        for t in 0..=half {
            let p: Vec<i64> = center_coord.iter().zip(&dir).map(|(c, s)| c + s * t).collect();
            let x = *index
                .get(p.as_slice())
                .expect("main diagonals consist of lattice vertices");
            if t == 0 && i > 0 {
                continue;
            }
            diagonal[x] = Some(DiagonalPos {
                index: i,
                to_corner: (half - t) as u64,
            });
        }
    }

    Ok(VicsekGraph {
        graph,
        dim,
        level,
        center,
        corners,
        diagonal,
    })
}

//! Weighted graphs with vertex measure, BFS metric and metric balls.
//!
//! Adjacency is stored in compressed rows. Every stored edge `x ~ y` carries
//! a weight `mu_xy > 0` with `mu_xy == mu_yx`, and the vertex measure is
//! `m(x) = sum_{y ~ x} mu_xy`. Graphs are validated connected at
//! construction and immutable afterwards.

use std::collections::{BTreeMap, VecDeque};
use std::io::{BufRead, Write};

use sha2::{Digest, Sha256};

use crate::error::{LabError, Result};

/// Distance value used for vertices not reached by a truncated BFS.
pub const UNREACHED: u32 = u32::MAX;

#[derive(Debug, Clone)]
pub struct WeightedGraph {
    offsets: Vec<usize>,
    targets: Vec<usize>,
    weights: Vec<f64>,
    measure: Vec<f64>,
    max_degree: usize,
    coords: Option<Coords>,
}

/// Integer coordinate labels, `dim` entries per vertex.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Coords {
    pub dim: usize,
    pub values: Vec<i64>,
}

impl Coords {
    pub fn of(&self, x: usize) -> &[i64] {
        &self.values[x * self.dim..(x + 1) * self.dim]
    }
}

/// Open (`d < r`) or closed (`d <= r`) metric ball.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BallKind {
    Open,
    Closed,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Ball {
    pub center: usize,
    pub radius: f64,
    pub kind: BallKind,
    /// Member vertices in BFS order (center first).
    pub members: Vec<usize>,
    pub measure: f64,
}

impl Ball {
    pub fn contains(&self, x: usize) -> bool {
        self.members.contains(&x)
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }
}

impl WeightedGraph {
    /// Builds a graph from undirected edges `(u, v, mu_uv)`.
    ///
    /// Repeated pairs must carry the same weight; the symmetric closure is
    /// applied automatically.
    pub fn from_edges(n: usize, edges: &[(usize, usize, f64)]) -> Result<Self> {
        let mut canon: BTreeMap<(usize, usize), f64> = BTreeMap::new();
        for (i, &(u, v, w)) in edges.iter().enumerate() {
            if u >= n || v >= n {
                return Err(LabError::InvalidVertex {
                    vertex: u.max(v),
                    count: n,
                });
            }
            if !(w.is_finite() && w > 0.0) {
                return Err(LabError::Format {
                    line: i + 1,
                    msg: format!("weight must be positive and finite, got {w}"),
                });
            }
            if u == v {
                return Err(LabError::Format {
                    line: i + 1,
                    msg: format!("self-loop at vertex {u}"),
                });
            }
            let key = (u.min(v), u.max(v));
            if let Some(&prev) = canon.get(&key) {
                if prev != w {
                    return Err(LabError::Format {
                        line: i + 1,
                        msg: format!(
                            "edge {}-{} given with conflicting weights {prev} and {w}",
                            key.0, key.1
                        ),
                    });
                }
            } else {
                canon.insert(key, w);
            }
        }
        Self::from_canonical(n, &canon)
    }

    fn from_canonical(n: usize, canon: &BTreeMap<(usize, usize), f64>) -> Result<Self> {
        if n == 0 {
            return Err(LabError::Validation("graph has no vertices".into()));
        }
        let mut degree = vec![0usize; n];
        for &(u, v) in canon.keys() {
            degree[u] += 1;
            degree[v] += 1;
        }
        let mut offsets = vec![0usize; n + 1];
        for x in 0..n {
            offsets[x + 1] = offsets[x] + degree[x];
        }
        let mut fill = offsets.clone();
        let mut targets = vec![0usize; offsets[n]];
        let mut weights = vec![0.0; offsets[n]];
        for (&(u, v), &w) in canon {
            targets[fill[u]] = v;
            weights[fill[u]] = w;
            fill[u] += 1;
            targets[fill[v]] = u;
            weights[fill[v]] = w;
            fill[v] += 1;
        }
        let measure: Vec<f64> = (0..n)
            .map(|x| weights[offsets[x]..offsets[x + 1]].iter().sum())
            .collect();
        let g = WeightedGraph {
            offsets,
            targets,
            weights,
            measure,
            max_degree: degree.iter().copied().max().unwrap_or(0),
            coords: None,
        };
        if n > 1 {
            let reached = g
                .bfs_distances(0)
                .iter()
                .filter(|&&d| d != UNREACHED)
                .count();
            if reached != n {
                return Err(LabError::Validation(format!(
                    "graph is disconnected: {reached} of {n} vertices reachable from vertex 0"
                )));
            }
        }
        Ok(g)
    }

    pub fn with_coords(mut self, coords: Coords) -> Self {
        assert_eq!(coords.values.len(), coords.dim * self.vertex_count());
        self.coords = Some(coords);
        self
    }

    pub fn coords(&self) -> Option<&Coords> {
        self.coords.as_ref()
    }

    pub fn vertex_count(&self) -> usize {
        self.measure.len()
    }

    /// Number of undirected edges.
    pub fn edge_count(&self) -> usize {
        self.targets.len() / 2
    }

    pub fn max_degree(&self) -> usize {
        self.max_degree
    }

    pub fn degree(&self, x: usize) -> usize {
        self.offsets[x + 1] - self.offsets[x]
    }

    pub fn neighbors(&self, x: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let range = self.offsets[x]..self.offsets[x + 1];
        self.targets[range.clone()]
            .iter()
            .copied()
            .zip(self.weights[range].iter().copied())
    }

    pub(crate) fn row(&self, x: usize) -> (&[usize], &[f64]) {
        let range = self.offsets[x]..self.offsets[x + 1];
        (&self.targets[range.clone()], &self.weights[range])
    }

    pub fn measure(&self, x: usize) -> f64 {
        self.measure[x]
    }

    pub fn measures(&self) -> &[f64] {
        &self.measure
    }

    pub fn total_measure(&self) -> f64 {
        self.measure.iter().sum()
    }

    pub fn measure_of(&self, set: &[usize]) -> f64 {
        set.iter().map(|&x| self.measure[x]).sum()
    }

    pub fn check_vertex(&self, x: usize) -> Result<()> {
        if x < self.vertex_count() {
            Ok(())
        } else {
            Err(LabError::InvalidVertex {
                vertex: x,
                count: self.vertex_count(),
            })
        }
    }

    /// Weight `mu_xy`, zero when `x` and `y` are not neighbours.
    pub fn weight(&self, x: usize, y: usize) -> f64 {
        self.neighbors(x)
            .find(|&(z, _)| z == y)
            .map(|(_, w)| w)
            .unwrap_or(0.0)
    }

    pub fn bfs_distances(&self, x: usize) -> Vec<u32> {
        self.bfs_distances_within(x, UNREACHED)
    }

    /// BFS distances from `x`, exploring only vertices at distance `<= max_depth`.
    pub fn bfs_distances_within(&self, x: usize, max_depth: u32) -> Vec<u32> {
        let mut dist = vec![UNREACHED; self.vertex_count()];
        let mut queue = VecDeque::new();
        dist[x] = 0;
        queue.push_back(x);
        while let Some(u) = queue.pop_front() {
            let du = dist[u];
            if du >= max_depth {
                continue;
            }
            for &v in self.row(u).0 {
                if dist[v] == UNREACHED {
                    dist[v] = du + 1;
                    queue.push_back(v);
                }
            }
        }
        dist
    }

    /// Multi-source BFS distance to the nearest vertex of `sources`.
    pub fn distance_to_set(&self, sources: &[usize]) -> Vec<u32> {
        let mut dist = vec![UNREACHED; self.vertex_count()];
        let mut queue = VecDeque::new();
        for &s in sources {
            if dist[s] != 0 {
                dist[s] = 0;
                queue.push_back(s);
            }
        }
        while let Some(u) = queue.pop_front() {
            for &v in self.row(u).0 {
                if dist[v] == UNREACHED {
                    dist[v] = dist[u] + 1;
                    queue.push_back(v);
                }
            }
        }
        dist
    }

    pub fn eccentricity(&self, x: usize) -> u32 {
        self.bfs_distances(x).into_iter().max().unwrap_or(0)
    }

    /// Exact diameter by BFS from every vertex; quadratic, meant for small graphs.
    pub fn diameter(&self) -> u32 {
        (0..self.vertex_count())
            .map(|x| self.eccentricity(x))
            .max()
            .unwrap_or(0)
    }

    pub fn is_bipartite(&self) -> bool {
        let mut color = vec![u8::MAX; self.vertex_count()];
        let mut queue = VecDeque::new();
        color[0] = 0;
        queue.push_back(0);
        while let Some(u) = queue.pop_front() {
            for &v in self.row(u).0 {
                if color[v] == u8::MAX {
                    color[v] = 1 - color[u];
                    queue.push_back(v);
                } else if color[v] == color[u] {
                    return false;
                }
            }
        }
        true
    }

    /// Double-sweep diameter bound: exact on trees, a lower bound in general.
    pub fn sweep_diameter(&self) -> u32 {
        let d0 = self.bfs_distances(0);
        let far = (0..d0.len()).max_by_key(|&x| (d0[x], usize::MAX - x)).unwrap_or(0);
        self.eccentricity(far)
    }

    /// Open ball `B(x, r) = { y : d(x, y) < r }`.
    pub fn ball(&self, x: usize, r: usize) -> Result<Ball> {
        self.ball_with(x, r as f64, BallKind::Open)
    }

    pub fn ball_with(&self, x: usize, r: f64, kind: BallKind) -> Result<Ball> {
        self.check_vertex(x)?;
        if !(r >= 0.0) {
            return Err(LabError::Validation(format!("ball radius must be >= 0, got {r}")));
        }
        let depth = max_depth_for(r, kind);
        let members = match depth {
            None => Vec::new(),
            Some(depth) => self.bfs_order_within(x, depth),
        };
        let measure = self.measure_of(&members);
        Ok(Ball {
            center: x,
            radius: r,
            kind,
            members,
            measure,
        })
    }

    /// Vertices within distance `max_depth` of `x`, in BFS order.
    pub fn bfs_order_within(&self, x: usize, max_depth: u32) -> Vec<usize> {
        let mut seen = vec![false; self.vertex_count()];
        let mut order = vec![x];
        seen[x] = true;
        let mut frontier_start = 0;
        for _ in 0..max_depth {
            let frontier_end = order.len();
            if frontier_start == frontier_end {
                break;
            }
            for i in frontier_start..frontier_end {
                let u = order[i];
                for &v in self.row(u).0 {
                    if !seen[v] {
                        seen[v] = true;
                        order.push(v);
                    }
                }
            }
            frontier_start = frontier_end;
        }
        order
    }

    /// Measure `V(x, r)` of the open ball.
    pub fn volume(&self, x: usize, r: f64) -> f64 {
        match max_depth_for(r, BallKind::Open) {
            None => 0.0,
            Some(depth) => self.measure_of(&self.bfs_order_within(x, depth)),
        }
    }

    /// Undirected edges `(u, v, w)` with `u < v`, sorted.
    pub fn canonical_edges(&self) -> Vec<(usize, usize, f64)> {
        let mut out = Vec::with_capacity(self.edge_count());
        for u in 0..self.vertex_count() {
            for (v, w) in self.neighbors(u) {
                if u < v {
                    out.push((u, v, w));
                }
            }
        }
        out.sort_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)));
        out
    }

    /// Hex SHA-256 digest of the canonical edge list text.
    pub fn fingerprint(&self) -> String {
        let mut buf = Vec::new();
        self.write_edge_list(&mut buf)
            .expect("writing to a Vec cannot fail");
        let digest = Sha256::digest(&buf);
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn write_edge_list<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        for (u, v, w) in self.canonical_edges() {
            writeln!(out, "{u} {v} {w}")?;
        }
        Ok(())
    }

    /// Coordinate sidecar, one `v x1 .. xN` line per vertex. No-op without coordinates.
    pub fn write_coords<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        if let Some(c) = &self.coords {
            for x in 0..self.vertex_count() {
                write!(out, "{x}")?;
                for v in c.of(x) {
                    write!(out, " {v}")?;
                }
                writeln!(out)?;
            }
        }
        Ok(())
    }
}

/// BFS distances from a base vertex together with cumulative shell measures,
/// giving `V(y, r)` for any real radius in O(1).
#[derive(Debug, Clone)]
pub struct VolumeProfile {
    pub base: usize,
    pub dist: Vec<u32>,
    cumulative: Vec<f64>,
}

impl VolumeProfile {
    pub fn new(g: &WeightedGraph, base: usize) -> Self {
        let dist = g.bfs_distances(base);
        let ecc = dist.iter().copied().filter(|&d| d != UNREACHED).max().unwrap_or(0) as usize;
        let mut cumulative = vec![0.0; ecc + 1];
        for (x, &d) in dist.iter().enumerate() {
            if d != UNREACHED {
                cumulative[d as usize] += g.measure(x);
            }
        }
        for d in 1..cumulative.len() {
            cumulative[d] += cumulative[d - 1];
        }
        VolumeProfile {
            base,
            dist,
            cumulative,
        }
    }

    pub fn eccentricity(&self) -> u32 {
        (self.cumulative.len() - 1) as u32
    }

    /// Open-ball measure `V(base, r)`.
    pub fn volume(&self, r: f64) -> f64 {
        match max_depth_for(r, BallKind::Open) {
            None => 0.0,
            Some(depth) => {
                let i = (depth as usize).min(self.cumulative.len() - 1);
                self.cumulative[i]
            }
        }
    }
}

fn max_depth_for(r: f64, kind: BallKind) -> Option<u32> {
    match kind {
        BallKind::Open => {
            let c = r.ceil();
            if c < 1.0 {
                None
            } else {
                Some((c as u64 - 1).min(u32::MAX as u64 - 1) as u32)
            }
        }
        BallKind::Closed => Some((r.floor() as u64).min(u32::MAX as u64 - 1) as u32),
    }
}

/// Parses the whitespace-separated `u v w` edge-list format. Lines starting
/// with `#` and blank lines are skipped.
pub fn load_edge_list<R: BufRead>(source: R) -> Result<WeightedGraph> {
    let mut edges = Vec::new();
    let mut lines = Vec::new();
    let mut max_vertex = 0usize;
    for (idx, line) in source.lines().enumerate() {
        let line = line?;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let lineno = idx + 1;
        let fields: Vec<&str> = trimmed.split_whitespace().collect();
        if fields.len() != 3 {
            return Err(LabError::Format {
                line: lineno,
                msg: format!("expected `u v w`, got {} fields", fields.len()),
            });
        }
        let parse_id = |s: &str| {
            s.parse::<usize>().map_err(|e| LabError::Format {
                line: lineno,
                msg: format!("bad vertex id {s:?}: {e}"),
            })
        };
        let u = parse_id(fields[0])?;
        let v = parse_id(fields[1])?;
        let w: f64 = fields[2].parse().map_err(|e| LabError::Format {
            line: lineno,
            msg: format!("bad weight {:?}: {e}", fields[2]),
        })?;
        if !(w.is_finite() && w > 0.0) {
            return Err(LabError::Format {
                line: lineno,
                msg: format!("weight must be positive, got {w}"),
            });
        }
        max_vertex = max_vertex.max(u).max(v);
        edges.push((u, v, w));
        lines.push(lineno);
    }
    if edges.is_empty() {
        return Err(LabError::Validation("edge list is empty".into()));
    }
    WeightedGraph::from_edges(max_vertex + 1, &edges).map_err(|e| match e {
        LabError::Format { line, msg } => LabError::Format {
            line: lines[line - 1],
            msg,
        },
        other => other,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn path(n: usize) -> WeightedGraph {
        let edges: Vec<_> = (0..n - 1).map(|i| (i, i + 1, 1.0)).collect();
        WeightedGraph::from_edges(n, &edges).unwrap()
    }

    #[test]
    fn load_path_of_three() {
        let g = load_edge_list("0 1 1\n1 2 1\n".as_bytes()).unwrap();
        assert_eq!(g.vertex_count(), 3);
        assert_eq!(g.measures(), &[1.0, 2.0, 1.0]);
        assert_eq!(g.weight(1, 0), 1.0);
    }

    #[test]
    fn negative_weight_is_format_error() {
        let err = load_edge_list("0 1 -1\n".as_bytes()).unwrap_err();
        assert!(matches!(err, LabError::Format { line: 1, .. }), "{err}");
    }

    #[test]
    fn disconnected_is_validation_error() {
        let err = load_edge_list("0 1 1\n2 3 1\n".as_bytes()).unwrap_err();
        assert!(matches!(err, LabError::Validation(_)), "{err}");
    }

    #[test]
    fn conflicting_duplicate_rejected() {
        let err = load_edge_list("# c\n0 1 1\n1 0 2\n".as_bytes()).unwrap_err();
        assert!(matches!(err, LabError::Format { line: 3, .. }), "{err}");
        // consistent duplicates are merged
        let g = load_edge_list("0 1 2\n1 0 2\n".as_bytes()).unwrap();
        assert_eq!(g.edge_count(), 1);
        assert_eq!(g.measures(), &[2.0, 2.0]);
    }

    #[test]
    fn open_balls_on_path() {
        let g = path(7);
        let b = g.ball(3, 2).unwrap();
        assert_eq!(b.len(), 3);
        let b1 = g.ball(3, 1).unwrap();
        assert_eq!(b1.members, vec![3]);
        assert_eq!(b1.measure, g.measure(3));
        let closed = g.ball_with(3, 2.0, BallKind::Closed).unwrap();
        assert_eq!(closed.len(), 5);
        assert_eq!(g.volume(3, 2.5), g.ball(3, 3).unwrap().measure);
    }

    #[test]
    fn edge_list_round_trip_keeps_fingerprint() {
        let g = load_edge_list("0 1 1.5\n1 2 1\n2 0 0.25\n".as_bytes()).unwrap();
        let mut buf = Vec::new();
        g.write_edge_list(&mut buf).unwrap();
        let h = load_edge_list(buf.as_slice()).unwrap();
        assert_eq!(g.fingerprint(), h.fingerprint());
        assert_eq!(g.fingerprint().len(), 64);
    }
}

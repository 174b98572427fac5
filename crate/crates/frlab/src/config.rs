//! Flat `key = value` experiment configuration.
//!
//! Lists are comma separated, `#` starts a comment. Every key is optional;
//! missing keys take the defaults below.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use frlab_core::markov::DEFAULT_ALPHA;
use frlab_core::spectral::DEFAULT_DENSE_CAP;
use frlab_core::vicsek::DEFAULT_VERTEX_BUDGET;
use frlab_core::Backend;

#[derive(Debug, Clone, PartialEq)]
pub enum GraphSpec {
    Vicsek { dim: usize, level: u32 },
    EdgeList(PathBuf),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub graph: GraphSpec,
    pub alpha: f64,
    pub backend: Backend,
    pub p: Vec<f64>,
    pub q: Vec<f64>,
    pub beta: Vec<f64>,
    /// Vicsek levels for the counterexample sweep.
    pub levels: Vec<u32>,
    pub k_min: usize,
    pub k_max: usize,
    /// Steps for the weighted gradient check.
    pub k_grid: Vec<usize>,
    /// Exit radii.
    pub radii: Vec<u32>,
    /// Volume-fit radii; empty means a log grid up to a quarter of the diameter.
    pub volume_radii: Vec<usize>,
    pub trials: u64,
    /// Random functions for ratio tables, random pairs for the decomposition.
    pub samples: usize,
    /// Levels for the decomposition tail probe.
    pub lambda: Vec<f64>,
    /// Base vertex; defaults to the Vicsek centre or vertex 0.
    pub center: Option<usize>,
    /// Walk exponent; defaults to `1 + log_3(1 + 2^N)` on Vicsek graphs and 2 otherwise.
    pub walk_exponent: Option<f64>,
    /// Constant in the stretched-exponential weight.
    pub c: f64,
    pub seed: u64,
    pub out: PathBuf,
    pub vertex_budget: u128,
    pub dense_cap: usize,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            graph: GraphSpec::Vicsek { dim: 2, level: 3 },
            alpha: DEFAULT_ALPHA,
            backend: Backend::Spectral,
            p: vec![1.5, 2.0],
            q: vec![1.25, 1.5, 1.75],
            beta: vec![0.5],
            levels: vec![2, 3, 4],
            k_min: 10,
            k_max: 100,
            k_grid: vec![8, 16, 32, 64],
            radii: vec![3, 9, 27],
            volume_radii: Vec::new(),
            trials: 1000,
            samples: 20,
            lambda: vec![32.0, 64.0, 128.0],
            center: None,
            walk_exponent: None,
            c: 0.02,
            seed: 0,
            out: PathBuf::from("results"),
            vertex_budget: DEFAULT_VERTEX_BUDGET,
            dense_cap: DEFAULT_DENSE_CAP,
        }
    }
}

fn parse_one<T: std::str::FromStr>(key: &str, raw: &str) -> Result<T>
where
    T::Err: std::fmt::Display,
{
    raw.trim()
        .parse::<T>()
        .map_err(|e| anyhow::anyhow!("config key `{key}`: cannot parse {raw:?}: {e}"))
}

fn parse_list<T: std::str::FromStr>(key: &str, raw: &str) -> Result<Vec<T>>
where
    T::Err: std::fmt::Display,
{
    let items: Vec<T> = raw
        .split(',')
        .filter(|s| !s.trim().is_empty())
        .map(|s| parse_one(key, s))
        .collect::<Result<_>>()?;
    if items.is_empty() {
        bail!("config key `{key}`: list must not be empty");
    }
    Ok(items)
}

fn parse_graph(raw: &str) -> Result<GraphSpec> {
    let parts: Vec<&str> = raw.split_whitespace().collect();
    match parts.as_slice() {
        ["vicsek", dim, level] => Ok(GraphSpec::Vicsek {
            dim: parse_one("graph", dim)?,
            level: parse_one("graph", level)?,
        }),
        ["edges", path] => Ok(GraphSpec::EdgeList(PathBuf::from(path))),
        _ => bail!("config key `graph`: expected `vicsek <N> <n>` or `edges <path>`, got {raw:?}"),
    }
}

fn parse_backend(raw: &str) -> Result<Backend> {
    let parts: Vec<&str> = raw.split_whitespace().collect();
    match parts.as_slice() {
        ["spectral"] => Ok(Backend::Spectral),
        ["series", k] => Ok(Backend::Series(parse_one("backend", k)?)),
        _ => bail!("config key `backend`: expected `spectral` or `series <K>`, got {raw:?}"),
    }
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = ExperimentConfig::default();
        for (idx, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                bail!("config line {}: expected `key = value`, got {line:?}", idx + 1);
            };
            cfg.set(key.trim(), value.trim())?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        let mut cfg = Self::parse(&text).with_context(|| format!("in config {}", path.display()))?;
        // edge-list paths are relative to the config file
        if let GraphSpec::EdgeList(p) = &cfg.graph {
            if p.is_relative() {
                if let Some(dir) = path.parent() {
                    cfg.graph = GraphSpec::EdgeList(dir.join(p));
                }
            }
        }
        Ok(cfg)
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        match key {
            "graph" => self.graph = parse_graph(value)?,
            "alpha" => self.alpha = parse_one(key, value)?,
            "backend" => self.backend = parse_backend(value)?,
            "p" => self.p = parse_list(key, value)?,
            "q" => self.q = parse_list(key, value)?,
            "beta" => self.beta = parse_list(key, value)?,
            "levels" => self.levels = parse_list(key, value)?,
            "k_range" => {
                let ks: Vec<usize> = parse_list(key, value)?;
                let [lo, hi] = ks[..] else {
                    bail!("config key `k_range`: expected two values `k_min, k_max`");
                };
                self.k_min = lo;
                self.k_max = hi;
            }
            "k_grid" => self.k_grid = parse_list(key, value)?,
            "radii" => self.radii = parse_list(key, value)?,
            "volume_radii" => self.volume_radii = parse_list(key, value)?,
            "trials" => self.trials = parse_one(key, value)?,
            "samples" => self.samples = parse_one(key, value)?,
            "lambda" => self.lambda = parse_list(key, value)?,
            "center" => self.center = Some(parse_one(key, value)?),
            "walk_exponent" => self.walk_exponent = Some(parse_one(key, value)?),
            "c" => self.c = parse_one(key, value)?,
            "seed" => self.seed = parse_one(key, value)?,
            "out" => self.out = PathBuf::from(value),
            "vertex_budget" => self.vertex_budget = parse_one(key, value)?,
            "dense_cap" => self.dense_cap = parse_one(key, value)?,
            _ => bail!("unknown config key `{key}`"),
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..1.0).contains(&self.alpha) {
            bail!("config key `alpha`: must lie in [0, 1), got {}", self.alpha);
        }
        if let Some(p) = self.p.iter().find(|&&p| !(p > 1.0)) {
            bail!("config key `p`: every entry must exceed 1, got {p}");
        }
        if let Some(q) = self.q.iter().find(|&&q| !(q > 1.0 && q < 2.0)) {
            bail!("config key `q`: every entry must lie in (1, 2), got {q}");
        }
        if let Some(b) = self.beta.iter().find(|&&b| !(b > 0.0 && b <= 1.0)) {
            bail!("config key `beta`: every entry must lie in (0, 1], got {b}");
        }
        if self.k_min == 0 || self.k_max < self.k_min {
            bail!("config key `k_range`: need 1 <= k_min <= k_max, got {}, {}", self.k_min, self.k_max);
        }
        if self.k_grid.contains(&0) {
            bail!("config key `k_grid`: steps must be positive");
        }
        if self.radii.contains(&0) {
            bail!("config key `radii`: radii must be positive");
        }
        if self.trials == 0 {
            bail!("config key `trials`: must be positive");
        }
        if self.samples == 0 {
            bail!("config key `samples`: must be positive");
        }
        if let Some(l) = self.lambda.iter().find(|&&l| !(l > 0.0)) {
            bail!("config key `lambda`: levels must be positive, got {l}");
        }
        if let Some(m) = self.walk_exponent {
            if !(m >= 2.0) {
                bail!("config key `walk_exponent`: must be at least 2, got {m}");
            }
        }
        if !(self.c >= 0.0) {
            bail!("config key `c`: must be nonnegative, got {}", self.c);
        }
        if let GraphSpec::Vicsek { dim, .. } = self.graph {
            if dim == 0 {
                bail!("config key `graph`: Vicsek dimension must be positive");
            }
        }
        Ok(())
    }

    /// Canonical rendering of every field, used for the input digest.
    pub fn canonical(&self) -> String {
        fn list<T: ToString>(xs: &[T]) -> String {
            xs.iter().map(ToString::to_string).collect::<Vec<_>>().join(", ")
        }
        let mut s = String::new();
        let graph = match &self.graph {
            GraphSpec::Vicsek { dim, level } => format!("vicsek {dim} {level}"),
            GraphSpec::EdgeList(p) => format!("edges {}", p.display()),
        };
        let backend = match self.backend {
            Backend::Spectral => "spectral".to_string(),
            Backend::Series(k) => format!("series {k}"),
        };
        let _ = writeln!(s, "graph = {graph}");
        let _ = writeln!(s, "alpha = {:?}", self.alpha);
        let _ = writeln!(s, "backend = {backend}");
        let _ = writeln!(s, "p = {}", list(&self.p));
        let _ = writeln!(s, "q = {}", list(&self.q));
        let _ = writeln!(s, "beta = {}", list(&self.beta));
        let _ = writeln!(s, "levels = {}", list(&self.levels));
        let _ = writeln!(s, "k_range = {}, {}", self.k_min, self.k_max);
        let _ = writeln!(s, "k_grid = {}", list(&self.k_grid));
        let _ = writeln!(s, "radii = {}", list(&self.radii));
        if !self.volume_radii.is_empty() {
            let _ = writeln!(s, "volume_radii = {}", list(&self.volume_radii));
        }
        let _ = writeln!(s, "trials = {}", self.trials);
        let _ = writeln!(s, "samples = {}", self.samples);
        let _ = writeln!(s, "lambda = {}", list(&self.lambda));
        if let Some(c) = self.center {
            let _ = writeln!(s, "center = {c}");
        }
        if let Some(m) = self.walk_exponent {
            let _ = writeln!(s, "walk_exponent = {m:?}");
        }
        let _ = writeln!(s, "c = {:?}", self.c);
        let _ = writeln!(s, "seed = {}", self.seed);
        let _ = writeln!(s, "out = {}", self.out.display());
        let _ = writeln!(s, "vertex_budget = {}", self.vertex_budget);
        let _ = writeln!(s, "dense_cap = {}", self.dense_cap);
        s
    }
}

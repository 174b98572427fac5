//! One function per subcommand. Each returns the tables it produced; the
//! caller writes them and the manifest.

use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use log::{info, warn};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use frlab_core::calculus::{random_mean_zero_family, ratio_table};
use frlab_core::counterexample::nash_test;
use frlab_core::cz::{cz_tail_claim, doubling_constant, verify_decomposition};
use frlab_core::estimates::{check_gradient_domination, weighted_gradient_grid, J_TOL};
use frlab_core::fit::log_grid;
use frlab_core::markov::{kernel_column, on_diagonal_fit};
use frlab_core::report::fmt_num;
use frlab_core::vicsek::build_vicsek_with_budget;
use frlab_core::walks::exit_exponent_fit;
use frlab_core::{
    cz_decompose, fit_power_law, load_edge_list, lp_norm, make_walk, simulate_exit, volume_growth_fit, Calculus,
    CheckRow, ExitTimeStats, KernelCache, KernelColumn, MarkovOperator, NashReport, RatioReport, ScalingFit,
    VicsekGraph, WeightedGraph,
};

use crate::config::{ExperimentConfig, GraphSpec};
use crate::manifest::CacheStats;
use crate::output::Table;

pub const SUBCOMMANDS: [&str; 9] = [
    "build-graph",
    "heat-kernel",
    "fit-exponents",
    "riesz-ratios",
    "estimates",
    "czd",
    "walk-exit",
    "counterexample",
    "full-suite",
];

pub const EXPONENT_HEADER: &str = "quantity,exponent,stderr,ci_low,ci_high,r_squared,n_points";

#[derive(Debug, Default)]
pub struct CommandOutput {
    pub tables: Vec<Table>,
    /// Raw files (name, bytes) such as the edge list.
    pub files: Vec<(String, Vec<u8>)>,
    pub cache: Option<CacheStats>,
}

/// The configured graph, with its Vicsek structure when it has one.
pub struct LoadedGraph {
    pub name: String,
    pub level: Option<u32>,
    vicsek: Option<VicsekGraph>,
    plain: Option<WeightedGraph>,
}

impl LoadedGraph {
    pub fn load(cfg: &ExperimentConfig) -> Result<Self> {
        match &cfg.graph {
            GraphSpec::Vicsek { dim, level } => {
                let v = build_vicsek_with_budget(*dim, *level, cfg.vertex_budget)
                    .with_context(|| format!("building Vicsek graph N = {dim}, n = {level}"))?;
                Ok(Self::from_vicsek(v))
            }
            GraphSpec::EdgeList(path) => {
                let file = std::fs::File::open(path).with_context(|| format!("opening edge list {}", path.display()))?;
                let g = load_edge_list(std::io::BufReader::new(file))
                    .with_context(|| format!("loading edge list {}", path.display()))?;
                let name = path
                    .file_stem()
                    .map(|s| s.to_string_lossy().replace(',', "_"))
                    .unwrap_or_else(|| "edges".into());
                Ok(LoadedGraph {
                    name,
                    level: None,
                    vicsek: None,
                    plain: Some(g),
                })
            }
        }
    }

    pub fn from_vicsek(v: VicsekGraph) -> Self {
        LoadedGraph {
            name: format!("vicsek{}", v.dim),
            level: Some(v.level),
            vicsek: Some(v),
            plain: None,
        }
    }

    pub fn from_graph(name: &str, g: WeightedGraph) -> Self {
        LoadedGraph {
            name: name.to_string(),
            level: None,
            vicsek: None,
            plain: Some(g),
        }
    }

    pub fn graph(&self) -> &WeightedGraph {
        match (&self.vicsek, &self.plain) {
            (Some(v), _) => &v.graph,
            (None, Some(g)) => g,
            (None, None) => unreachable!("a loaded graph has one representation"),
        }
    }

    pub fn vicsek(&self) -> Option<&VicsekGraph> {
        self.vicsek.as_ref()
    }

    pub fn center(&self, cfg: &ExperimentConfig) -> Result<usize> {
        let c = cfg.center.unwrap_or_else(|| self.vicsek.as_ref().map_or(0, |v| v.center));
        self.graph().check_vertex(c).context("config key `center`")?;
        Ok(c)
    }

    pub fn walk_exponent(&self, cfg: &ExperimentConfig) -> f64 {
        cfg.walk_exponent
            .unwrap_or_else(|| self.vicsek.as_ref().map_or(2.0, |v| v.walk_exponent()))
    }

    pub fn level_field(&self) -> String {
        self.level.map(|l| l.to_string()).unwrap_or_default()
    }
}

pub fn exponent_row(quantity: &str, fit: &ScalingFit) -> String {
    let (lo, hi) = if fit.n_points > 2 {
        fit.exponent_interval(0.95)
    } else {
        (f64::NAN, f64::NAN)
    };
    format!(
        "{quantity},{},{},{},{},{},{}",
        fmt_num(fit.exponent),
        fmt_num(fit.exponent_stderr),
        fmt_num(lo),
        fmt_num(hi),
        fmt_num(fit.r_squared),
        fit.n_points
    )
}

pub fn cache_dir(cfg: &ExperimentConfig) -> PathBuf {
    std::env::var_os("FRLAB_CACHE")
        .map(PathBuf::from)
        .unwrap_or_else(|| cfg.out.join("cache"))
}

pub fn build_graph(cfg: &ExperimentConfig) -> Result<CommandOutput> {
    let lg = LoadedGraph::load(cfg)?;
    let g = lg.graph();
    let mut summary = Table::new(
        "graph_summary",
        "graph,level,vertices,edges,diameter,max_degree,total_measure,fingerprint",
        cfg.seed,
    );
    summary.push(format!(
        "{},{},{},{},{},{},{},{}",
        lg.name,
        lg.level_field(),
        g.vertex_count(),
        g.edge_count(),
        g.diameter(),
        g.max_degree(),
        fmt_num(g.total_measure()),
        g.fingerprint()
    ));
    let mut edges = Vec::new();
    g.write_edge_list(&mut edges)?;
    let mut files = vec![("graph.edges".to_string(), edges)];
    if g.coords().is_some() {
        let mut coords = Vec::new();
        g.write_coords(&mut coords)?;
        files.push(("graph.coords".to_string(), coords));
    }
    Ok(CommandOutput {
        tables: vec![summary],
        files,
        cache: None,
    })
}

/// Columns `p_k(., y)` for each `k` in `ks`, served from the cache when possible.
fn cached_columns(
    op: &MarkovOperator<'_>,
    y: usize,
    ks: &[usize],
    cache: &KernelCache,
    stats: &mut CacheStats,
) -> Result<Vec<KernelColumn>> {
    let g = op.graph();
    let fp = g.fingerprint();
    let alpha = op.alpha();
    let hit: Option<Vec<KernelColumn>> = ks.iter().map(|&k| cache.lookup(&fp, y, alpha, k)).collect();
    if let Some(cols) = hit {
        stats.hits += 1;
        info!("kernel cache hit for base {y}");
        return Ok(cols);
    }
    stats.misses += 1;
    let k_max = *ks.iter().max().expect("nonempty step list");
    match kernel_column(op, y, k_max) {
        Ok(all) => {
            let path = cache.store(&fp, alpha, &all)?;
            info!("stored kernel columns in {}", path.display());
            Ok(ks.iter().map(|&k| all[k].clone()).collect())
        }
        Err(frlab_core::LabError::Resource { what, .. }) if what.contains("storage") => {
            warn!("kernel columns too large to cache; iterating without storing");
            let mut walk = op.kernel_walk(y)?;
            let mut out = Vec::with_capacity(ks.len());
            for &k in ks {
                while walk.step() < k {
                    walk.advance();
                }
                out.push(walk.column());
            }
            Ok(out)
        }
        Err(e) => Err(e.into()),
    }
}

pub fn heat_kernel(cfg: &ExperimentConfig) -> Result<CommandOutput> {
    let lg = LoadedGraph::load(cfg)?;
    let g = lg.graph();
    let op = make_walk(g, cfg.alpha)?;
    let y = lg.center(cfg)?;
    let ks = log_grid(cfg.k_min, cfg.k_max, 40);
    let cache = KernelCache::new(cache_dir(cfg));
    let mut stats = CacheStats {
        dir: cache.dir().display().to_string(),
        hits: 0,
        misses: 0,
    };
    let cols = cached_columns(&op, y, &ks, &cache, &mut stats)?;
    let mut table = Table::new("heat_kernel", "graph,level,alpha,y,k,p_yy,mass,max_value", cfg.seed);
    for col in &cols {
        let max = col.values.iter().copied().fold(0.0, f64::max);
        table.push(format!(
            "{},{},{},{y},{},{},{},{}",
            lg.name,
            lg.level_field(),
            fmt_num(cfg.alpha),
            col.step,
            fmt_num(col.values[y]),
            fmt_num(col.mass(g)),
            fmt_num(max)
        ));
    }
    let mut tables = vec![table];
    if cols.len() >= 3 {
        let xs: Vec<f64> = cols.iter().map(|c| c.step as f64).collect();
        let ys: Vec<f64> = cols.iter().map(|c| c.values[y]).collect();
        if let Ok(fit) = fit_power_law(&xs, &ys) {
            let mut t = Table::new("heat_kernel_fit", EXPONENT_HEADER, cfg.seed);
            t.push(exponent_row("on_diagonal", &fit));
            tables.push(t);
        }
    }
    Ok(CommandOutput {
        tables,
        files: Vec::new(),
        cache: Some(stats),
    })
}

fn default_volume_radii(g: &WeightedGraph) -> Vec<usize> {
    let hi = (g.sweep_diameter() / 4).max(1) as usize;
    let lo = (hi / 40).max(1);
    log_grid(lo, hi, 12)
}

pub fn fit_exponents(cfg: &ExperimentConfig) -> Result<CommandOutput> {
    let lg = LoadedGraph::load(cfg)?;
    let g = lg.graph();
    let y = lg.center(cfg)?;
    let op = make_walk(g, cfg.alpha)?;
    let radii = if cfg.volume_radii.is_empty() {
        default_volume_radii(g)
    } else {
        cfg.volume_radii.clone()
    };
    let volume = volume_growth_fit(g, &[y], &radii).context("volume growth fit")?;
    let stats: Vec<ExitTimeStats> = cfg
        .radii
        .iter()
        .map(|&r| simulate_exit(&op, y, r, cfg.trials, cfg.seed))
        .collect::<frlab_core::Result<_>>()
        .context("exit-time simulation")?;
    let walk = exit_exponent_fit(&stats).context("exit-time fit")?;
    let diag = on_diagonal_fit(&op, y, cfg.k_min..=cfg.k_max).context("on-diagonal fit")?;
    let mut t = Table::new("exponents", EXPONENT_HEADER, cfg.seed);
    t.push(exponent_row("volume", &volume));
    t.push(exponent_row("walk", &walk));
    t.push(exponent_row("on_diagonal", &diag));
    t.push(format!(
        "on_diagonal_predicted,{},nan,nan,nan,nan,0",
        fmt_num(-volume.exponent / walk.exponent)
    ));
    Ok(CommandOutput {
        tables: vec![t],
        ..Default::default()
    })
}

pub fn riesz_ratios(cfg: &ExperimentConfig) -> Result<CommandOutput> {
    let lg = LoadedGraph::load(cfg)?;
    let g = lg.graph();
    let op = make_walk(g, cfg.alpha)?;
    let calc = Calculus::with_cap(&op, cfg.backend, cfg.dense_cap)?;
    let family = random_mean_zero_family(g, cfg.samples, cfg.seed);
    let mut t = Table::new("riesz_ratios", &format!("graph,sample,{}", RatioReport::CSV_HEADER), cfg.seed);
    for &p in &cfg.p {
        for &beta in &cfg.beta {
            let rows = ratio_table(&calc, &family, p, beta)?;
            for (i, mut r) in rows.into_iter().enumerate() {
                r.level = lg.level;
                t.push(format!("{},{i},{}", lg.name, r.csv_row()));
            }
        }
    }
    Ok(CommandOutput {
        tables: vec![t],
        ..Default::default()
    })
}

pub fn estimates(cfg: &ExperimentConfig) -> Result<CommandOutput> {
    let lg = LoadedGraph::load(cfg)?;
    let g = lg.graph();
    let op = make_walk(g, cfg.alpha)?;
    let y = lg.center(cfg)?;
    let m = lg.walk_exponent(cfg);
    let mut t = Table::new("estimates", CheckRow::CSV_HEADER, cfg.seed);
    let row = |name: &str, q: f64, c: f64, k: usize, lhs: f64, rhs: f64, ratio: f64, pass: bool| CheckRow {
        check_name: name.to_string(),
        graph: lg.name.clone(),
        level: lg.level,
        y,
        q,
        m,
        c,
        k,
        lhs,
        rhs,
        ratio,
        pass,
    };
    for &q in &cfg.q {
        let rep = check_gradient_domination(&op, y, cfg.k_min..=cfg.k_max, q)?;
        t.push(row("hardy_stein_min_j", q, 0.0, cfg.k_max, rep.min_j, -J_TOL, f64::NAN, rep.min_j >= -J_TOL).csv_row());
        t.push(
            row("laplacian_power_sum", q, 0.0, cfg.k_max, rep.max_laplacian_sum, 1e-10, f64::NAN, rep.max_laplacian_sum < 1e-10)
                .csv_row(),
        );
        for p in &rep.per_step {
            let pass = p.max_ratio.is_finite();
            t.push(row("gradient_domination", q, 0.0, p.step, p.max_ratio, rep.max_ratio, p.max_ratio / rep.max_ratio, pass).csv_row());
        }
        let pts = weighted_gradient_grid(&op, y, &cfg.k_grid, q, m, cfg.c)?;
        let ratios: Vec<f64> = pts.iter().map(|p| p.ratio()).collect();
        let spread = ratios.iter().copied().fold(f64::NEG_INFINITY, f64::max)
            / ratios.iter().copied().fold(f64::INFINITY, f64::min);
        for p in &pts {
            t.push(row("weighted_gradient", q, cfg.c, p.k, p.lhs, p.rhs, p.ratio(), spread < 4.0).csv_row());
        }
    }
    Ok(CommandOutput {
        tables: vec![t],
        ..Default::default()
    })
}

/// Sparse spikes over low noise, with a level drawn log-uniformly between
/// the mean of `|f|` and twice its peak.
pub fn random_cz_pair(g: &WeightedGraph, rng: &mut ChaCha8Rng) -> (Vec<f64>, f64) {
    let n = g.vertex_count();
    let mut f: Vec<f64> = (0..n).map(|_| rng.gen_range(-0.2..0.2)).collect();
    for _ in 0..rng.gen_range(1..6) {
        let x = rng.gen_range(0..n);
        f[x] += rng.gen_range(-50.0..50.0);
    }
    let avg = lp_norm(g, &f, 1.0) / g.total_measure();
    let peak = lp_norm(g, &f, f64::INFINITY);
    let lambda = rng.gen_range(avg.ln()..(2.0 * peak).ln()).exp();
    (f, lambda)
}

/// Uneven bump of width `width` around `center`.
pub fn bump(g: &WeightedGraph, center: usize, width: u32) -> Vec<f64> {
    let dist = g.bfs_distances(center);
    (0..g.vertex_count())
        .map(|x| {
            if dist[x] <= width {
                100.0 * (1.0 + 0.5 * (x as f64).sin())
            } else {
                0.0
            }
        })
        .collect()
}

pub const CZ_HEADER: &str =
    "graph,level,sample,lambda,n_balls,overlap,c1,c2,c3,c4,cap_c1,cap_c2,cap_c3,exact_error,max_bad_mean,pass";
pub const CZ_TAIL_HEADER: &str = "graph,level,lambda,ball,center,radius,steps,b_l1,tail_ratio";

/// Decomposes `samples` random pairs; returns the table and the number that failed verification.
pub fn czd_pairs(lg: &LoadedGraph, samples: usize, seed: u64) -> Result<(Table, usize)> {
    let g = lg.graph();
    let k = doubling_constant(g);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut t = Table::new(&format!("czd_{}", lg.name), CZ_HEADER, seed);
    let mut failed = 0;
    for i in 0..samples {
        let (f, lambda) = random_cz_pair(g, &mut rng);
        let dec = cz_decompose(g, &f, lambda)?;
        let v = verify_decomposition(g, &f, &dec, k);
        failed += usize::from(!v.passed());
        t.push(format!(
            "{},{},{i},{},{},{},{},{},{},{},{},{},{},{},{},{}",
            lg.name,
            lg.level_field(),
            fmt_num(lambda),
            dec.bad.len(),
            dec.overlap,
            fmt_num(v.constants.c1),
            fmt_num(v.constants.c2),
            fmt_num(v.constants.c3),
            fmt_num(v.constants.c4),
            fmt_num(v.caps.c1),
            fmt_num(v.caps.c2),
            fmt_num(v.caps.c3),
            fmt_num(v.exact_error),
            fmt_num(v.max_bad_mean),
            v.passed()
        ));
    }
    Ok((t, failed))
}

pub fn czd_tails(
    lg: &LoadedGraph,
    calc: &Calculus<'_, '_>,
    center: usize,
    m: f64,
    lambdas: &[f64],
    seed: u64,
) -> Result<(Table, Vec<f64>)> {
    let g = lg.graph();
    let f = bump(g, center, 1);
    let mut t = Table::new(&format!("czd_tail_{}", lg.name), CZ_TAIL_HEADER, seed);
    let mut maxima = Vec::with_capacity(lambdas.len());
    for &lambda in lambdas {
        let dec = cz_decompose(g, &f, lambda)?;
        let tails = cz_tail_claim(calc, &dec, m)?;
        let mut best: f64 = 0.0;
        for (i, tp) in tails.iter().enumerate() {
            best = best.max(tp.tail_ratio);
            t.push(format!(
                "{},{},{},{i},{},{},{},{},{}",
                lg.name,
                lg.level_field(),
                fmt_num(lambda),
                tp.center,
                fmt_num(tp.radius),
                tp.steps,
                fmt_num(tp.b_l1),
                fmt_num(tp.tail_ratio)
            ));
        }
        maxima.push(best);
    }
    Ok((t, maxima))
}

pub fn czd(cfg: &ExperimentConfig) -> Result<CommandOutput> {
    let lg = LoadedGraph::load(cfg)?;
    let (pairs, failed) = czd_pairs(&lg, cfg.samples, cfg.seed)?;
    if failed > 0 {
        warn!("{failed} decompositions failed verification; see {}", pairs.name);
    }
    let op = make_walk(lg.graph(), cfg.alpha)?;
    let calc = Calculus::with_cap(&op, cfg.backend, cfg.dense_cap)?;
    let (tails, _) = czd_tails(&lg, &calc, lg.center(cfg)?, lg.walk_exponent(cfg), &cfg.lambda, cfg.seed)?;
    Ok(CommandOutput {
        tables: vec![pairs, tails],
        ..Default::default()
    })
}

pub fn walk_exit_table(lg: &LoadedGraph, op: &MarkovOperator<'_>, x: usize, radii: &[u32], trials: u64, seed: u64) -> Result<(Table, ScalingFit)> {
    let mut t = Table::new("walk_exit", ExitTimeStats::CSV_HEADER, seed);
    let stats: Vec<ExitTimeStats> = radii
        .iter()
        .map(|&r| simulate_exit(op, x, r, trials, seed))
        .collect::<frlab_core::Result<_>>()?;
    for s in &stats {
        t.push(s.csv_row(&lg.name, lg.level));
    }
    let fit = exit_exponent_fit(&stats)?;
    // fitted exponent in the mean column, its standard error in stderr
    t.push(format!(
        "{},{},{},{x},fit,{trials},{},{},{seed}",
        lg.name,
        lg.level_field(),
        fmt_num(op.alpha()),
        fmt_num(fit.exponent),
        fmt_num(fit.exponent_stderr)
    ));
    Ok((t, fit))
}

pub fn walk_exit(cfg: &ExperimentConfig) -> Result<CommandOutput> {
    let lg = LoadedGraph::load(cfg)?;
    let op = make_walk(lg.graph(), cfg.alpha)?;
    let (t, fit) = walk_exit_table(&lg, &op, lg.center(cfg)?, &cfg.radii, cfg.trials, cfg.seed)?;
    info!("fitted walk exponent {:.4}", fit.exponent);
    Ok(CommandOutput {
        tables: vec![t],
        ..Default::default()
    })
}

pub const GROWTH_HEADER: &str = "N,p,beta,growth_exponent,ci_low,ci_high,reverse_spread,max_forward";

pub fn counterexample(cfg: &ExperimentConfig) -> Result<CommandOutput> {
    let GraphSpec::Vicsek { dim, .. } = cfg.graph else {
        bail!("config key `graph`: the counterexample needs a Vicsek graph");
    };
    let mut rows = Table::new("counterexample", NashReport::CSV_HEADER, cfg.seed);
    let mut growth = Table::new("counterexample_growth", GROWTH_HEADER, cfg.seed);
    for &p in &cfg.p {
        for &beta in &cfg.beta {
            let reports = nash_test(dim, &cfg.levels, p, beta, cfg.backend, cfg.alpha)
                .with_context(|| format!("counterexample at p = {p}, beta = {beta}"))?;
            for r in &reports {
                rows.push(r.csv_row());
            }
            let xs: Vec<f64> = reports.iter().map(|r| r.support_size as f64).collect();
            let ys: Vec<f64> = reports.iter().map(NashReport::reverse_ratio).collect();
            let hi = ys.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let lo = ys.iter().copied().fold(f64::INFINITY, f64::min);
            let fwd = reports.iter().map(NashReport::forward_ratio).fold(f64::NEG_INFINITY, f64::max);
            let (e, a, b) = match fit_power_law(&xs, &ys) {
                Ok(fit) => {
                    let (a, b) = fit.exponent_interval(0.95);
                    (fit.exponent, a, b)
                }
                Err(_) => (f64::NAN, f64::NAN, f64::NAN),
            };
            growth.push(format!(
                "{dim},{},{},{},{},{},{},{}",
                fmt_num(p),
                fmt_num(beta),
                fmt_num(e),
                fmt_num(a),
                fmt_num(b),
                fmt_num(hi / lo),
                fmt_num(fwd)
            ));
        }
    }
    Ok(CommandOutput {
        tables: vec![rows, growth],
        ..Default::default()
    })
}

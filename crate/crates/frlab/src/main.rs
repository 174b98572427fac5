use std::path::PathBuf;

use anyhow::{Context, Result};
use clap::{Parser, ValueEnum};

use frlab::config::ExperimentConfig;

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Subcommand {
    BuildGraph,
    HeatKernel,
    FitExponents,
    RieszRatios,
    Estimates,
    Czd,
    WalkExit,
    Counterexample,
    FullSuite,
}

impl Subcommand {
    fn name(self) -> String {
        self.to_possible_value().expect("no skipped variants").get_name().to_string()
    }
}

/// Numerical experiments on random walks and Riesz transforms over fractal graphs.
#[derive(Debug, Parser)]
#[command(name = "frlab", version)]
struct Cli {
    #[arg(value_enum)]
    subcommand: Subcommand,
    /// Flat `key = value` config file.
    #[arg(long)]
    config: PathBuf,
    /// Output directory; overrides `out` in the config.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Overrides `seed` in the config.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads.
    #[arg(long)]
    jobs: Option<usize>,
}

fn main() -> Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    let mut cfg = ExperimentConfig::load(&cli.config)?;
    if let Some(out) = cli.out {
        cfg.out = out;
    }
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    if let Some(jobs) = cli.jobs {
        rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build_global()
            .context("configuring the worker pool")?;
    }
    let report = frlab::run(&cli.subcommand.name(), &cfg)?;
    for c in &report.criteria {
        println!("{}", c.line());
    }
    for f in &report.files {
        println!("wrote {}", f.display());
    }
    println!("manifest {}", report.manifest.display());
    if report.criteria.iter().any(|c| !c.pass) {
        std::process::exit(2);
    }
    Ok(())
}

//! Reproducible experiment runner: configuration, kernel caching, seeded
//! subcommands and CSV/JSON outputs.

pub mod commands;
pub mod config;
pub mod manifest;
pub mod output;
pub mod suite;

use std::path::PathBuf;

use anyhow::{bail, Result};

use crate::commands::CommandOutput;
use crate::config::ExperimentConfig;
use crate::manifest::{Manifest, Timing};
use crate::output::OutputDir;
use crate::suite::CriterionResult;

/// What a run wrote.
#[derive(Debug)]
pub struct RunReport {
    pub out_dir: PathBuf,
    pub files: Vec<PathBuf>,
    pub manifest: PathBuf,
    /// Filled by `full-suite` only.
    pub criteria: Vec<CriterionResult>,
}

pub fn run(subcommand: &str, cfg: &ExperimentConfig) -> Result<RunReport> {
    let mut criteria = Vec::new();
    let output = match subcommand {
        "build-graph" => commands::build_graph(cfg)?,
        "heat-kernel" => commands::heat_kernel(cfg)?,
        "fit-exponents" => commands::fit_exponents(cfg)?,
        "riesz-ratios" => commands::riesz_ratios(cfg)?,
        "estimates" => commands::estimates(cfg)?,
        "czd" => commands::czd(cfg)?,
        "walk-exit" => commands::walk_exit(cfg)?,
        "counterexample" => commands::counterexample(cfg)?,
        "full-suite" => {
            let s = suite::run_suite(cfg.seed, None)?;
            criteria = s.results;
            CommandOutput {
                tables: s.tables,
                ..Default::default()
            }
        }
        other => bail!(
            "unknown subcommand `{other}`; expected one of {}",
            commands::SUBCOMMANDS.join(", ")
        ),
    };
    let mut dir = OutputDir::create(&cfg.out)?;
    let mut files = Vec::new();
    for table in &output.tables {
        files.push(dir.write_table(table)?);
    }
    for (name, bytes) in &output.files {
        files.push(dir.write_bytes(name, bytes)?);
    }
    let mut manifest = Manifest::new(subcommand, cfg, dir.artifacts().to_vec(), output.cache)?;
    manifest.timings = criteria
        .iter()
        .map(|c| Timing {
            name: format!("criterion {}", c.id),
            seconds: c.seconds,
        })
        .collect();
    let manifest = manifest.write(dir.root())?;
    Ok(RunReport {
        out_dir: cfg.out.clone(),
        files,
        manifest,
        criteria,
    })
}

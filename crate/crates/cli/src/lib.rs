//! Experiment runner for the `pathgeom` command.

pub mod config;
pub mod experiment;
pub mod output;
pub mod presets;
pub mod renorm_scan;
pub mod svg;

use std::path::{Path, PathBuf};

use config::{resolve, ExperimentConfig};
use output::Manifest;

/// Result of a finished run. `manifest.run.status` tells whether every cell succeeded.
#[derive(Debug)]
pub struct RunReport {
    pub directory: PathBuf,
    pub manifest: Manifest,
}

/// Validates, runs and persists one experiment under `<out>/<experiment>/<timestamp>`.
/// `out` overrides `output.directory`.
pub fn run_experiment(
    cfg: &ExperimentConfig,
    allow_small_gamma: bool,
    out: Option<&Path>,
) -> anyhow::Result<RunReport> {
    let resolved = resolve(cfg, allow_small_gamma)?;
    let base = out.unwrap_or(&resolved.config.output.directory).to_path_buf();
    let stamp = output::timestamp();
    let dir = output::create_run_dir(&base, &resolved.config.output.experiment, &stamp)?;
    let outcome = experiment::run(&resolved);
    let manifest = output::write_run(&dir, &resolved, &outcome, allow_small_gamma, &stamp)?;
    Ok(RunReport {
        directory: dir,
        manifest,
    })
}

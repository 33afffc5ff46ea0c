//! Run configuration: defaults, optional JSON config file, flag
//! overrides. The resolved configuration is embedded verbatim in every
//! report for auditability.

use anyhow::{Context, Result};
use formsurf::reconstruction::ReconstructOpts;
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};

#[derive(Debug, Clone, Copy, Serialize)]
pub struct RunConfig {
    pub interior_margin: usize,
    pub lambda_min: f64,
    pub tol_skew: f64,
    pub frame_floor: f64,
    pub threads: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            interior_margin: 2,
            lambda_min: 1e-6,
            tol_skew: 1e-8,
            frame_floor: 1e-8,
            threads: 1,
        }
    }
}

/// Partial configuration as stored in a JSON config file.
#[derive(Debug, Clone, Copy, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    pub interior_margin: Option<usize>,
    pub lambda_min: Option<f64>,
    pub tol_skew: Option<f64>,
    pub frame_floor: Option<f64>,
    pub threads: Option<usize>,
}

#[derive(Debug, Clone, clap::Args)]
pub struct GlobalOpts {
    /// JSON config file; explicit flags override its values
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,
    /// Interior margin (node layers) excluded from residual norms
    #[arg(long, global = true, value_name = "N")]
    pub margin: Option<usize>,
    /// Nodewise lower bound demanded of the metric eigenvalues
    #[arg(long, global = true, value_name = "X")]
    pub lambda_min: Option<f64>,
    /// Relative antisymmetry-defect tolerance before a warning is raised
    #[arg(long, global = true, value_name = "X")]
    pub tol_skew: Option<f64>,
    /// Abort threshold for |f1 x f2| during reconstruction
    #[arg(long, global = true, value_name = "X")]
    pub frame_floor: Option<f64>,
    /// Upper bound on concurrent workers for independent runs
    #[arg(long, global = true, value_name = "N")]
    pub threads: Option<usize>,
}

pub fn resolve(opts: &GlobalOpts) -> Result<RunConfig> {
    let mut cfg = RunConfig::default();
    if let Some(path) = &opts.config {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))?;
        let file: ConfigFile = serde_json::from_str(&text)
            .with_context(|| format!("parsing config {}", path.display()))?;
        if let Some(v) = file.interior_margin {
            cfg.interior_margin = v;
        }
        if let Some(v) = file.lambda_min {
            cfg.lambda_min = v;
        }
        if let Some(v) = file.tol_skew {
            cfg.tol_skew = v;
        }
        if let Some(v) = file.frame_floor {
            cfg.frame_floor = v;
        }
        if let Some(v) = file.threads {
            cfg.threads = v;
        }
    }
    if let Some(v) = opts.margin {
        cfg.interior_margin = v;
    }
    if let Some(v) = opts.lambda_min {
        cfg.lambda_min = v;
    }
    if let Some(v) = opts.tol_skew {
        cfg.tol_skew = v;
    }
    if let Some(v) = opts.frame_floor {
        cfg.frame_floor = v;
    }
    if let Some(v) = opts.threads {
        cfg.threads = v;
    }
    anyhow::ensure!(cfg.lambda_min > 0.0, "lambda-min must be positive");
    anyhow::ensure!(cfg.tol_skew > 0.0, "tol-skew must be positive");
    anyhow::ensure!(cfg.frame_floor > 0.0, "frame-floor must be positive");
    anyhow::ensure!(cfg.threads >= 1, "threads must be at least 1");
    Ok(cfg)
}

impl RunConfig {
    pub fn reconstruct_opts(&self) -> ReconstructOpts {
        ReconstructOpts {
            lambda_min: self.lambda_min,
            tol_skew: self.tol_skew,
            frame_floor: self.frame_floor,
            interior_margin: self.interior_margin,
            ..ReconstructOpts::default()
        }
    }
}

/// Report envelope shared by all subcommands.
#[derive(Serialize)]
pub struct Report<T: Serialize> {
    pub command: String,
    pub config: RunConfig,
    pub payload: T,
}

pub fn write_report<T: Serialize>(
    command: &str,
    config: &RunConfig,
    payload: T,
    path: &Path,
) -> Result<()> {
    let report = Report {
        command: command.to_string(),
        config: *config,
        payload,
    };
    let mut text = serde_json::to_string_pretty(&report)?;
    text.push('\n');
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent)
                .with_context(|| format!("creating {}", parent.display()))?;
        }
    }
    std::fs::write(path, text).with_context(|| format!("writing report {}", path.display()))?;
    println!("report written to {}", path.display());
    Ok(())
}

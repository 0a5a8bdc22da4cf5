//! Verification runs over `finsler-core` with JSON reports.

pub mod commands;
pub mod config;
pub mod report;

use std::fs;
use std::path::Path;

pub use commands::{
    cmd_algebra, cmd_curvature_scan, cmd_holonomy_loop, cmd_loop_curvature, cmd_transport,
    cmd_verify_metric, Artifact, CommandOutput,
};
pub use config::{ConfigError, Overrides, RunConfig};
pub use report::{CheckRecord, Report, Status};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    VerifyMetric,
    CurvatureScan,
    Transport,
    HolonomyLoop,
    LoopCurvature,
    Algebra,
}

pub fn run(command: Command, cfg: &RunConfig, timing: bool) -> Result<CommandOutput, ConfigError> {
    match command {
        Command::VerifyMetric => cmd_verify_metric(cfg, timing),
        Command::CurvatureScan => cmd_curvature_scan(cfg, timing),
        Command::Transport => cmd_transport(cfg, timing),
        Command::HolonomyLoop => cmd_holonomy_loop(cfg, timing),
        Command::LoopCurvature => cmd_loop_curvature(cfg, timing),
        Command::Algebra => cmd_algebra(cfg, timing),
    }
}

/// Writes `report.json` and the artifacts into `dir`, creating it if needed.
pub fn write_outputs(dir: &Path, out: &CommandOutput) -> std::io::Result<()> {
    fs::create_dir_all(dir)?;
    fs::write(dir.join("report.json"), out.report.to_json())?;
    for a in &out.artifacts {
        fs::write(dir.join(&a.name), &a.bytes)?;
    }
    Ok(())
}

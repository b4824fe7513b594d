//! Config-driven experiment runner for `lyapdim-core`.
//!
//! A run reads one TOML config, computes every result table in memory,
//! refuses to write anything if a value is not finite, and then writes the
//! tables as CSV together with a `manifest.json`.

pub mod commands;
pub mod config;
pub mod error;
pub mod manifest;
pub mod table;

use std::fs;
use std::path::{Path, PathBuf};

use lyapdim_core::{ErgodicMeasure, ModelSystem};

use crate::commands::Output;
use crate::config::{Command, ExperimentConfig};
pub use crate::error::{CliError, Result};
use crate::manifest::OutputFile;

/// Command-line overrides of a config.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub out: Option<PathBuf>,
    pub seed: Option<u64>,
    pub geometric_check: bool,
}

/// Where a finished run put its files.
#[derive(Debug, Clone)]
pub struct RunSummary {
    pub out: PathBuf,
    pub files: Vec<OutputFile>,
    pub failed_checks: usize,
}

pub fn load(path: &Path, overrides: &Overrides) -> Result<ExperimentConfig> {
    let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    config::parse(&text)?.resolve(overrides.seed, overrides.geometric_check)
}

/// Runs a resolved config and returns its tables without touching the disk.
pub fn compute(config: &ExperimentConfig) -> Result<Output> {
    let system = config
        .system
        .clone()
        .map(ModelSystem::new)
        .transpose()
        .map_err(|e| CliError::schema("system", e.to_string()))?;
    let measure = config
        .measure
        .clone()
        .map(ErgodicMeasure::new)
        .transpose()
        .map_err(|e| CliError::schema("measure", e.to_string()))?;
    if let (Some(s), Some(m)) = (&system, &measure) {
        m.check_supported_on(&s.coding())
            .map_err(|e| CliError::schema("measure", e.to_string()))?;
    }
    let seed = config.seed.unwrap_or(0);
    let sys = || system.as_ref().expect("resolved configs carry a system");
    let mu = || measure.as_ref().expect("resolved configs carry a measure");
    let output = match config.command {
        Command::PressureCurve => {
            commands::pressure_curve(sys(), measure.as_ref(), config.pressure_curve.as_ref().unwrap(), seed)?
        }
        Command::Dimension => commands::dimension(sys(), measure.as_ref(), config.dimension.as_ref().unwrap(), seed)?,
        Command::Lyapunov => commands::lyapunov(sys(), mu(), config.lyapunov.as_ref().unwrap(), seed)?,
        Command::BoxCount => commands::box_count(sys(), measure.as_ref(), config.box_count.as_ref().unwrap(), seed)?,
        Command::HorseshoeApprox => commands::horseshoe_approx(sys(), mu(), config.horseshoe_approx.as_ref().unwrap())?,
        Command::VerifyIdentities => commands::verify_identities(config.verify_identities.as_ref().unwrap(), seed)?,
    };
    for t in &output.tables {
        t.check_finite()?;
    }
    Ok(output)
}

fn write(path: &Path, bytes: &[u8]) -> Result<()> {
    fs::write(path, bytes).map_err(|e| CliError::io(path, e))
}

/// Computes, then writes the tables and the manifest to the output
/// directory. A failed identity check is reported after the files are
/// written.
pub fn run(config: &ExperimentConfig, out: Option<&Path>) -> Result<RunSummary> {
    let out = out
        .map(Path::to_path_buf)
        .or_else(|| config.out.clone())
        .ok_or_else(|| CliError::schema("out", "no output directory; set `out` or pass --out"))?;
    let output = compute(config)?;
    fs::create_dir_all(&out).map_err(|e| CliError::io(&out, e))?;
    let mut files = Vec::new();
    for t in &output.tables {
        let body = t.to_csv();
        write(&out.join(t.file_name()), &body)?;
        files.push(manifest::output_file(t, &body));
    }
    let failed = (config.command == Command::VerifyIdentities).then_some(output.failed_checks);
    let m = manifest::manifest(config, &files, failed);
    let text = serde_json::to_string_pretty(&m).expect("manifest serializes") + "\n";
    write(&out.join("manifest.json"), text.as_bytes())?;
    if output.failed_checks > 0 {
        return Err(CliError::VerifyFailed {
            failed: output.failed_checks,
            total: output.tables[0].rows.len(),
        });
    }
    Ok(RunSummary {
        out,
        files,
        failed_checks: output.failed_checks,
    })
}

//! CLI driver for the density-matrix Hartree simulator: configuration
//! parsing, scene assembly, experiment execution, and artifact emission.

pub mod config;
pub mod error;
pub mod experiments;
pub mod output;
pub mod scene;

use std::path::{Path, PathBuf};

use serde_json::json;

use crate::config::{ExperimentConfig, ExperimentKind};
use crate::error::RunnerResult;

#[derive(Debug, Clone, Default)]
pub struct CliOptions {
    pub output_dir: Option<PathBuf>,
    pub seed_override: Option<u64>,
    pub quiet: bool,
}

fn report(quiet: bool, message: &str) {
    if !quiet {
        println!("{message}");
    }
}

fn report_error(message: &str) {
    eprintln!("{message}");
}

/// Loads, validates, and executes a config; writes all artifacts. Returns the
/// process exit code: 0 success, 1 configuration error, 2 numerical abort.
pub fn run_command(config_path: &Path, options: &CliOptions, campaign_only: bool) -> i32 {
    let config = match ExperimentConfig::from_path(config_path) {
        Ok(c) => c,
        Err(e) => {
            report_error(&e.to_string());
            return e.exit_code();
        }
    };
    if campaign_only && config.experiment_kind != ExperimentKind::InequalityCampaign {
        report_error("configuration error: the campaign command needs experiment_kind = inequality-campaign");
        return 1;
    }
    let out_dir = options
        .output_dir
        .clone()
        .unwrap_or_else(|| PathBuf::from("."));
    match execute_and_summarize(&config, &out_dir, options.seed_override) {
        Ok(summary) => {
            report(
                options.quiet,
                &format!(
                    "ok: {} ({} ms)",
                    summary
                        .get("experiment")
                        .and_then(|v| v.as_str())
                        .unwrap_or("run"),
                    summary
                        .get("wall_clock_ms")
                        .and_then(|v| v.as_u64())
                        .unwrap_or(0)
                ),
            );
            0
        }
        Err(e) => {
            report_error(&e.to_string());
            e.exit_code()
        }
    }
}

/// Executes the experiment and writes the summary JSON; on a numerical abort
/// the summary names the failed invariant instead of silently truncating.
pub fn execute_and_summarize(
    config: &ExperimentConfig,
    out_dir: &Path,
    seed_override: Option<u64>,
) -> RunnerResult<serde_json::Value> {
    let result = experiments::execute(config, out_dir, seed_override);
    match result {
        Ok(summary) => {
            if let Some(name) = &config.output.summary_json {
                output::write_summary(&out_dir.join(name), &summary)?;
            }
            Ok(summary)
        }
        Err(e) => {
            if let Some(name) = &config.output.summary_json {
                let failure = json!({
                    "status": "error",
                    "reason": e.to_string(),
                    "config": serde_json::to_value(config).ok(),
                });
                // Best effort: the abort reason itself takes precedence.
                let _ = std::fs::create_dir_all(out_dir);
                let _ = output::write_summary(&out_dir.join(name), &failure);
            }
            Err(e)
        }
    }
}

/// Schema check only; no artifacts.
pub fn validate_command(config_path: &Path, quiet: bool) -> i32 {
    match ExperimentConfig::from_path(config_path) {
        Ok(_) => {
            report(quiet, &format!("valid: {}", config_path.display()));
            0
        }
        Err(e) => {
            report_error(&e.to_string());
            e.exit_code()
        }
    }
}

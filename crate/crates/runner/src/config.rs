//! Experiment configuration: a single JSON document with explicit units in
//! the key names (`*_time`, `*_energy`, `*_length`).

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{RunnerError, RunnerResult};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    Evolve,
    ConserveSweep,
    InequalityCampaign,
    IntegratorCompare,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub dim: usize,
    pub box_len_length: f64,
    pub modes_per_dim: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "kebab-case", deny_unknown_fields)]
pub enum StateConfig {
    FermiSea {
        mu_energy: f64,
    },
    Fermion {
        temperature_energy: f64,
        mu_energy: f64,
    },
    Boson {
        temperature_energy: f64,
        mu_energy: f64,
    },
    Boltzon {
        temperature_energy: f64,
        mu_energy: f64,
    },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum PotentialConfig {
    Zero,
    Gaussian {
        amplitude_energy: f64,
        range_length: f64,
    },
    Yukawa {
        amplitude_energy: f64,
        range_length: f64,
    },
    /// Explicit multiplier table `W(q)` in flat-index order.
    Table { values_energy: Vec<f64> },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PerturbationConfig {
    #[serde(default)]
    pub seed: u64,
    /// Band limit: the perturbation lives on modes with `|k|^2 <=` this.
    pub bandwidth_energy: f64,
    /// Rotation angle of the admissible unitary conjugation.
    pub magnitude: f64,
    /// Optional checkpoint file overriding the random construction.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub checkpoint_path: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModeConfig {
    Frozen,
    Midpoint,
}

fn default_record_stride() -> usize {
    1
}

fn default_picard_tol() -> f64 {
    1e-9
}

fn default_picard_max_iter() -> usize {
    60
}

fn default_quadrature_nodes() -> usize {
    65
}

fn default_dyson_order() -> usize {
    8
}

fn default_mode() -> ModeConfig {
    ModeConfig::Midpoint
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PropagatorSection {
    pub tau_time: f64,
    pub t_final_time: f64,
    #[serde(default = "default_mode")]
    pub mode: ModeConfig,
    #[serde(default = "default_record_stride")]
    pub record_stride: usize,
    #[serde(default = "default_picard_tol")]
    pub picard_tol: f64,
    #[serde(default = "default_picard_max_iter")]
    pub picard_max_iter: usize,
    #[serde(default = "default_quadrature_nodes")]
    pub quadrature_nodes: usize,
    #[serde(default = "default_dyson_order")]
    pub dyson_order: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    /// Ledger CSV file name (relative to the output directory).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ledger_csv: Option<String>,
    /// Run summary JSON file name.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub summary_json: Option<String>,
    /// Final-state checkpoint file name.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub checkpoint: Option<String>,
    /// Directory for two-column plot files, one per diagnostic.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub plot_dir: Option<String>,
    /// Evaluate the full diagnostic set (quotients, norms, profiles).
    #[serde(default)]
    pub full_diagnostics: bool,
    /// Tolerance for the integral entropy cross-check; omitted = skipped.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub entropy_integral_tol: Option<f64>,
    /// High-momentum profile cutoffs (full diagnostics only).
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub cutoffs_energy: Vec<f64>,
}

fn default_samples() -> usize {
    100
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CampaignConfig {
    #[serde(default = "default_samples")]
    pub samples: usize,
    #[serde(default)]
    pub master_seed: u64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment_kind: ExperimentKind,
    pub grid: GridConfig,
    pub state: StateConfig,
    pub potential: PotentialConfig,
    pub perturbation: PerturbationConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub propagator: Option<PropagatorSection>,
    #[serde(default)]
    pub output: OutputConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub campaign: Option<CampaignConfig>,
}

impl ExperimentConfig {
    pub fn from_path(path: &Path) -> RunnerResult<Self> {
        let text = fs::read_to_string(path)
            .map_err(|e| RunnerError::Config(format!("cannot read {}: {e}", path.display())))?;
        let config: Self = serde_json::from_str(&text)
            .map_err(|e| RunnerError::Config(format!("invalid config {}: {e}", path.display())))?;
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> RunnerResult<()> {
        let g = &self.grid;
        if !(1..=3).contains(&g.dim) {
            return Err(RunnerError::Config(format!(
                "grid.dim {} outside 1..=3",
                g.dim
            )));
        }
        if !(g.box_len_length > 0.0) {
            return Err(RunnerError::Config("grid.box_len_length must be positive".into()));
        }
        if g.modes_per_dim < 2 || g.modes_per_dim % 2 != 0 {
            return Err(RunnerError::Config(
                "grid.modes_per_dim must be even and at least 2".into(),
            ));
        }
        match &self.state {
            StateConfig::FermiSea { mu_energy } => {
                if !(*mu_energy > 0.0) {
                    return Err(RunnerError::Config("fermi-sea mu_energy must be positive".into()));
                }
            }
            StateConfig::Fermion {
                temperature_energy, ..
            }
            | StateConfig::Boson {
                temperature_energy, ..
            }
            | StateConfig::Boltzon {
                temperature_energy, ..
            } => {
                if !(*temperature_energy > 0.0) {
                    return Err(RunnerError::Config(
                        "state.temperature_energy must be positive".into(),
                    ));
                }
            }
        }
        if let PotentialConfig::Table { values_energy } = &self.potential {
            let n = g.modes_per_dim.pow(g.dim as u32);
            if values_energy.len() != n {
                return Err(RunnerError::Config(format!(
                    "potential.values_energy has {} entries, grid needs {n}",
                    values_energy.len()
                )));
            }
        }
        if self.perturbation.magnitude < 0.0 {
            return Err(RunnerError::Config("perturbation.magnitude must be nonnegative".into()));
        }
        if let Some(p) = &self.propagator {
            if !(p.tau_time > 0.0) {
                return Err(RunnerError::Config("propagator.tau_time must be positive".into()));
            }
            if !p.t_final_time.is_finite() {
                return Err(RunnerError::Config("propagator.t_final_time must be finite".into()));
            }
            if p.record_stride == 0 {
                return Err(RunnerError::Config("propagator.record_stride must be >= 1".into()));
            }
            if p.quadrature_nodes < 2 {
                return Err(RunnerError::Config(
                    "propagator.quadrature_nodes must be >= 2".into(),
                ));
            }
            if p.dyson_order < 1 {
                return Err(RunnerError::Config("propagator.dyson_order must be >= 1".into()));
            }
        }
        match self.experiment_kind {
            ExperimentKind::InequalityCampaign => {
                let campaign = self.campaign.as_ref().ok_or_else(|| {
                    RunnerError::Config("inequality-campaign needs a campaign block".into())
                })?;
                if campaign.samples == 0 {
                    return Err(RunnerError::Config("campaign.samples must be >= 1".into()));
                }
            }
            ExperimentKind::Evolve
            | ExperimentKind::ConserveSweep
            | ExperimentKind::IntegratorCompare => {
                if self.propagator.is_none() {
                    return Err(RunnerError::Config(format!(
                        "{:?} needs a propagator block",
                        self.experiment_kind
                    )));
                }
            }
        }
        Ok(())
    }
}

//! Builds the simulation scene (grid, reference state, interaction
//! potential, initial perturbation) from a validated configuration.

use std::path::Path;

use hartree_dm_core::{
    build_grid, fermi_sea, make_entropy, random_admissible_perturbation, reference_state,
    EntropyFamily, Grid, HermitianOperator, InteractionPotential, ReferenceState,
};

use crate::config::{ExperimentConfig, PotentialConfig, StateConfig};
use crate::error::{RunnerError, RunnerResult};
use crate::output::read_checkpoint;

pub struct Scene {
    pub grid: Grid,
    pub state: ReferenceState,
    pub potential: InteractionPotential,
    pub initial: HermitianOperator,
}

pub fn build_state(config: &ExperimentConfig, grid: &Grid) -> RunnerResult<ReferenceState> {
    let state = match &config.state {
        StateConfig::FermiSea { mu_energy } => fermi_sea(grid.clone(), *mu_energy)?,
        StateConfig::Fermion {
            temperature_energy,
            mu_energy,
        } => reference_state(
            grid.clone(),
            make_entropy(EntropyFamily::Fermion, *temperature_energy, *mu_energy)?,
        )?,
        StateConfig::Boson {
            temperature_energy,
            mu_energy,
        } => reference_state(
            grid.clone(),
            make_entropy(EntropyFamily::Boson, *temperature_energy, *mu_energy)?,
        )?,
        StateConfig::Boltzon {
            temperature_energy,
            mu_energy,
        } => reference_state(
            grid.clone(),
            make_entropy(EntropyFamily::Boltzon, *temperature_energy, *mu_energy)?,
        )?,
    };
    Ok(state)
}

pub fn build_potential(
    config: &ExperimentConfig,
    grid: &Grid,
) -> RunnerResult<InteractionPotential> {
    let w = match &config.potential {
        PotentialConfig::Zero => InteractionPotential::zero(grid.clone()),
        PotentialConfig::Gaussian {
            amplitude_energy,
            range_length,
        } => InteractionPotential::gaussian(grid.clone(), *amplitude_energy, *range_length)?,
        PotentialConfig::Yukawa {
            amplitude_energy,
            range_length,
        } => InteractionPotential::yukawa(grid.clone(), *amplitude_energy, *range_length)?,
        PotentialConfig::Table { values_energy } => {
            InteractionPotential::from_table(grid.clone(), values_energy.clone())?
        }
    };
    Ok(w)
}

/// Builds the scene; `seed_override` replaces the perturbation seed when set.
pub fn build_scene(config: &ExperimentConfig, seed_override: Option<u64>) -> RunnerResult<Scene> {
    let grid = build_grid(
        config.grid.dim,
        config.grid.box_len_length,
        config.grid.modes_per_dim,
    )?;
    let state = build_state(config, &grid)?;
    let potential = build_potential(config, &grid)?;
    let initial = match &config.perturbation.checkpoint_path {
        Some(path) => {
            let op = read_checkpoint(Path::new(path), &grid)?;
            let violation = state.constraint_violation(&op)?;
            if violation > 1e-8 {
                return Err(RunnerError::Numerical(format!(
                    "checkpoint perturbation violates the constraint by {violation:.3e}"
                )));
            }
            op
        }
        None => {
            let seed = seed_override.unwrap_or(config.perturbation.seed);
            if config.perturbation.magnitude == 0.0 {
                HermitianOperator::zeros(grid.clone())
            } else {
                random_admissible_perturbation(
                    &state,
                    config.perturbation.bandwidth_energy,
                    config.perturbation.magnitude,
                    seed,
                )?
            }
        }
    };
    Ok(Scene {
        grid,
        state,
        potential,
        initial,
    })
}

//! Spectral simulator for the Hartree evolution of density matrices on a
//! periodic box, with the conserved relative functionals and inequality
//! diagnostics used to monitor it.
//!
//! States are represented by their perturbation `Q = gamma - gamma_f` from a
//! translation-invariant reference state `gamma_f = f(-Delta)`, expressed in
//! the truncated plane-wave basis.

pub mod dynamics;
pub mod error;
pub mod fourier;
pub mod functionals;
pub mod lattice;
pub mod mean_field;
pub mod operator;
pub mod states;

pub use dynamics::{
    dyson_wave_operator, picard_duhamel_solve, propagate, reconstruct_from_wave_operator,
    strang_step, MeanFieldMode, PicardStats, PropagatorConfig, StrangPropagator,
    TrajectoryRecord, WaveOperator,
};
pub use error::{CoreError, Result};
pub use functionals::{
    evaluate_ledger, high_momentum_profile, klein_quotient, lieb_thirring_functional, lt_quotient,
    relative_entropy, relative_entropy_integral, relative_free_energy, relative_hartree_energy,
    relative_kinetic_energy, relative_particle_number, x_mu_norm, y_mu_norm, DiagnosticLedger,
    HighMomentumTails, LedgerOptions, LtEnergyKind,
};
pub use lattice::{build_grid, Grid, MomentumGrid};
pub use mean_field::{
    convolve, density_of, interaction_energy, potential_operator, DensityField,
    InteractionPotential, PotentialField,
};
pub use operator::{
    commutator, laplacian_spectral_projectors, HermitianOperator, MatrixOperator,
    SpectralProjector,
};
pub use states::{
    fermi_sea, make_entropy, random_admissible_perturbation, reference_state, CustomEntropy,
    EntropyFamily, EntropySpec, ReferenceState,
};

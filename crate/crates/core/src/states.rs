//! Entropy specifications and the translation-invariant reference states
//! `gamma_f = f(-Delta)` they generate.
//!
//! The chemical potential is folded into the entropy density,
//! `S(x) = T S_base(x) + mu x`, so that `S'(gamma_f) = -Delta` holds exactly
//! and the linear term of the relative entropy uses dispersion weights
//! directly.

use std::fmt;
use std::sync::Arc;

use nalgebra::DMatrix;
use num_complex::Complex64 as C64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{CoreError, Result};
use crate::lattice::Grid;
use crate::operator::{clamp_to_domain, HermitianOperator, MatrixOperator};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EntropyFamily {
    Fermion,
    Boson,
    Boltzon,
    Custom,
}

type ScalarFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// User-supplied `(S, S', f)` triple for the custom family. The closures must
/// already include the temperature and chemical-potential shifts.
#[derive(Clone)]
pub struct CustomEntropy {
    pub entropy: ScalarFn,
    pub entropy_prime: ScalarFn,
    pub occupation: ScalarFn,
}

/// Entropy density `S` on `[0, 1]` together with `S'` and `f = (S')^{-1}`.
#[derive(Clone)]
pub struct EntropySpec {
    family: EntropyFamily,
    temperature: f64,
    chemical_potential: f64,
    custom: Option<CustomEntropy>,
}

impl fmt::Debug for EntropySpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("EntropySpec")
            .field("family", &self.family)
            .field("temperature", &self.temperature)
            .field("chemical_potential", &self.chemical_potential)
            .finish()
    }
}

fn xlogx(x: f64) -> f64 {
    if x <= 0.0 {
        0.0
    } else {
        x * x.ln()
    }
}

/// Builds the entropy specification for one of the physical gas families.
pub fn make_entropy(family: EntropyFamily, temperature: f64, mu: f64) -> Result<EntropySpec> {
    if !(temperature.is_finite() && temperature > 0.0) {
        return Err(CoreError::InvalidEntropy(format!(
            "temperature {temperature} must be positive"
        )));
    }
    if family == EntropyFamily::Boson && mu > -temperature * 2.0f64.ln() {
        return Err(CoreError::InvalidEntropy(format!(
            "boson family needs mu <= -T log 2 = {}, got {mu}",
            -temperature * 2.0f64.ln()
        )));
    }
    if family == EntropyFamily::Custom {
        return Err(CoreError::InvalidEntropy(
            "use EntropySpec::custom for the custom family".into(),
        ));
    }
    let spec = EntropySpec {
        family,
        temperature,
        chemical_potential: mu,
        custom: None,
    };
    spec.validate()?;
    Ok(spec)
}

impl EntropySpec {
    /// Wraps a user-supplied `(S, S', f)` triple after a validation pass over
    /// the monotonicity and round-trip invariants.
    pub fn custom(temperature: f64, mu: f64, triple: CustomEntropy) -> Result<Self> {
        let spec = Self {
            family: EntropyFamily::Custom,
            temperature,
            chemical_potential: mu,
            custom: Some(triple),
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn family(&self) -> EntropyFamily {
        self.family
    }

    pub fn temperature(&self) -> f64 {
        self.temperature
    }

    pub fn chemical_potential(&self) -> f64 {
        self.chemical_potential
    }

    /// Entropy density `S(x) = T S_base(x) + mu x` on `[0, 1]`.
    pub fn entropy(&self, x: f64) -> f64 {
        if let Some(custom) = &self.custom {
            return (custom.entropy)(x);
        }
        let base = match self.family {
            EntropyFamily::Fermion => -xlogx(x) - xlogx(1.0 - x),
            EntropyFamily::Boson => -xlogx(x) + (1.0 + x) * (1.0 + x).ln(),
            EntropyFamily::Boltzon => -xlogx(x) + x,
            EntropyFamily::Custom => unreachable!(),
        };
        self.temperature * base + self.chemical_potential * x
    }

    /// `S'(x)` on `(0, 1)`.
    pub fn entropy_prime(&self, x: f64) -> f64 {
        if let Some(custom) = &self.custom {
            return (custom.entropy_prime)(x);
        }
        let base = match self.family {
            EntropyFamily::Fermion => ((1.0 - x) / x).ln(),
            EntropyFamily::Boson => ((1.0 + x) / x).ln(),
            EntropyFamily::Boltzon => -x.ln(),
            EntropyFamily::Custom => unreachable!(),
        };
        self.temperature * base + self.chemical_potential
    }

    /// Occupation function `f(r) = (S')^{-1}(r)`, clamped into `[0, 1]`.
    pub fn occupation(&self, r: f64) -> f64 {
        if let Some(custom) = &self.custom {
            return (custom.occupation)(r);
        }
        let z = (r - self.chemical_potential) / self.temperature;
        let value = match self.family {
            EntropyFamily::Fermion => 1.0 / (z.exp() + 1.0),
            EntropyFamily::Boson => 1.0 / (z.exp() - 1.0),
            EntropyFamily::Boltzon => (-z).exp(),
            EntropyFamily::Custom => unreachable!(),
        };
        value.clamp(0.0, 1.0)
    }

    fn validate(&self) -> Result<()> {
        // Sampled invariants: S' strictly decreasing and f a right inverse of
        // S', away from the boundary bands.
        let samples = 41;
        let mut prev = f64::INFINITY;
        for i in 0..samples {
            let x = 1e-6 + (1.0 - 2e-6) * i as f64 / (samples - 1) as f64;
            let sp = self.entropy_prime(x);
            if !(sp < prev) {
                return Err(CoreError::InvalidEntropy(format!(
                    "S' is not strictly decreasing at x = {x}"
                )));
            }
            prev = sp;
            let back = self.occupation(sp);
            if (back - x).abs() > 1e-10 {
                return Err(CoreError::InvalidEntropy(format!(
                    "f(S'(x)) = {back} differs from x = {x}"
                )));
            }
        }
        Ok(())
    }
}

/// Stationary reference state: diagonal occupations `g_k = f(|k|^2)`.
#[derive(Debug, Clone)]
pub struct ReferenceState {
    grid: Grid,
    spec: Option<EntropySpec>,
    fermi_mu: Option<f64>,
    occupations: Vec<f64>,
    density: f64,
}

/// Zero-temperature Fermi sea `gamma_f = 1(-Delta <= mu)`.
pub fn fermi_sea(grid: Grid, mu: f64) -> Result<ReferenceState> {
    if !(mu.is_finite() && mu > 0.0) {
        return Err(CoreError::Invalid(format!(
            "Fermi sea chemical potential {mu} must be positive"
        )));
    }
    let occupations: Vec<f64> = (0..grid.mode_count())
        .map(|i| if grid.dispersion(i) <= mu { 1.0 } else { 0.0 })
        .collect();
    let density = occupations.iter().sum::<f64>() / grid.volume();
    Ok(ReferenceState {
        grid,
        spec: None,
        fermi_mu: Some(mu),
        occupations,
        density,
    })
}

/// Positive-temperature reference state from an entropy specification.
pub fn reference_state(grid: Grid, spec: EntropySpec) -> Result<ReferenceState> {
    let mut occupations = Vec::with_capacity(grid.mode_count());
    for i in 0..grid.mode_count() {
        let g = spec.occupation(grid.dispersion(i));
        occupations.push(clamp_to_domain(g, 0.0, 1.0)?);
    }
    let density = occupations.iter().sum::<f64>() / grid.volume();
    Ok(ReferenceState {
        grid,
        spec: Some(spec),
        fermi_mu: None,
        occupations,
        density,
    })
}

impl ReferenceState {
    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn entropy_spec(&self) -> Option<&EntropySpec> {
        self.spec.as_ref()
    }

    pub fn is_zero_temperature(&self) -> bool {
        self.spec.is_none()
    }

    /// Chemical potential: the Fermi-sea cutoff at zero temperature, the
    /// entropy's mu otherwise.
    pub fn mu(&self) -> f64 {
        self.fermi_mu
            .or_else(|| self.spec.as_ref().map(|s| s.chemical_potential()))
            .expect("either branch is set")
    }

    pub fn occupations(&self) -> &[f64] {
        &self.occupations
    }

    pub fn occupation(&self, index: usize) -> f64 {
        self.occupations[index]
    }

    /// Uniform density of the reference state, `L^{-d} sum_k g_k`.
    pub fn density(&self) -> f64 {
        self.density
    }

    pub fn as_operator(&self) -> HermitianOperator {
        HermitianOperator::from_real_diagonal(self.grid.clone(), &self.occupations)
            .expect("occupation vector matches the grid")
    }

    /// Full state `gamma = gamma_f + Q`.
    pub fn gamma_with(&self, q: &HermitianOperator) -> Result<HermitianOperator> {
        self.as_operator().add(q)
    }

    /// How far `gamma_f + Q` strays outside `0 <= gamma <= 1`.
    pub fn constraint_violation(&self, q: &HermitianOperator) -> Result<f64> {
        let values = self.gamma_with(q)?.eigenvalues()?;
        let mut violation = 0.0f64;
        for v in values {
            violation = violation.max(-v).max(v - 1.0);
        }
        Ok(violation.max(0.0))
    }
}

/// Seeded Hermitian perturbation supported on modes with `|k|^2 <= bandwidth`,
/// built so that `0 <= gamma_f + Q <= 1` holds by construction: `Q` is the
/// difference `U gamma_f U* - gamma_f` for a unitary `U = exp(i eps H)` acting
/// inside the band.
pub fn random_admissible_perturbation(
    state: &ReferenceState,
    bandwidth: f64,
    magnitude: f64,
    seed: u64,
) -> Result<HermitianOperator> {
    if magnitude < 0.0 {
        return Err(CoreError::Invalid(format!(
            "magnitude {magnitude} must be nonnegative"
        )));
    }
    let grid = state.grid().clone();
    if magnitude == 0.0 {
        return Ok(HermitianOperator::zeros(grid));
    }
    let band: Vec<usize> = (0..grid.mode_count())
        .filter(|&i| grid.dispersion(i) <= bandwidth)
        .collect();
    if band.len() < 2 {
        return Err(CoreError::Invalid(format!(
            "bandwidth {bandwidth} selects fewer than two modes"
        )));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let b = band.len();
    let mut h = DMatrix::<C64>::zeros(b, b);
    for i in 0..b {
        h[(i, i)] = C64::new(rng.gen_range(-1.0..1.0), 0.0);
        for j in (i + 1)..b {
            let z = C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
            h[(i, j)] = z;
            h[(j, i)] = z.conj();
        }
    }
    let se = h
        .try_symmetric_eigen(1e-13, 10_000)
        .ok_or(CoreError::EigenFailure)?;
    let norm = se.eigenvalues.iter().fold(0.0f64, |m, &v| m.max(v.abs()));
    if norm == 0.0 {
        return Ok(HermitianOperator::zeros(grid));
    }
    // U_block = exp(i (magnitude / ||H||) H)
    let phases: Vec<C64> = se
        .eigenvalues
        .iter()
        .map(|&v| C64::from_polar(1.0, magnitude * v / norm))
        .collect();
    let u_block = &se.eigenvectors
        * DMatrix::from_diagonal(&nalgebra::DVector::from_vec(phases))
        * se.eigenvectors.adjoint();

    // Q = U gamma_f U* - gamma_f, nonzero only inside the band.
    let mut q = MatrixOperator::zeros(grid.clone());
    for (bi, &i) in band.iter().enumerate() {
        for (bj, &j) in band.iter().enumerate() {
            let mut acc = C64::new(0.0, 0.0);
            for (bk, &k) in band.iter().enumerate() {
                acc += u_block[(bi, bk)] * state.occupation(k) * u_block[(bj, bk)].conj();
            }
            if i == j {
                acc -= state.occupation(i);
            }
            q.data_mut()[(i, j)] = acc;
        }
    }
    let q = HermitianOperator::symmetrize(q);
    let violation = state.constraint_violation(&q)?;
    if violation > 1e-10 {
        return Err(CoreError::Inadmissible(violation));
    }
    Ok(q)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::build_grid;
    use approx::assert_relative_eq;

    const TWO_PI: f64 = 2.0 * std::f64::consts::PI;

    #[test]
    fn closed_form_occupations() {
        let fermion = make_entropy(EntropyFamily::Fermion, 1.0, 0.0).unwrap();
        assert_relative_eq!(fermion.occupation(0.0), 0.5, max_relative = 1e-14);
        let boltzon = make_entropy(EntropyFamily::Boltzon, 1.0, 0.0).unwrap();
        assert_relative_eq!(
            boltzon.occupation(1.0),
            (-1.0f64).exp(),
            max_relative = 1e-12
        );
        let boson = make_entropy(EntropyFamily::Boson, 1.0, -1.0).unwrap();
        assert_relative_eq!(
            boson.occupation(0.0),
            1.0 / (1.0f64.exp() - 1.0),
            max_relative = 1e-12
        );
    }

    #[test]
    fn entropy_rejects_bad_parameters() {
        assert!(make_entropy(EntropyFamily::Fermion, 0.0, 0.0).is_err());
        assert!(make_entropy(EntropyFamily::Fermion, -1.0, 0.0).is_err());
        // boson needs mu <= -T log 2
        assert!(make_entropy(EntropyFamily::Boson, 1.0, 0.0).is_err());
        assert!(make_entropy(EntropyFamily::Boson, 1.0, -0.5).is_err());
        assert!(make_entropy(EntropyFamily::Boson, 1.0, -0.8).is_ok());
    }

    #[test]
    fn roundtrip_and_monotonicity() {
        for spec in [
            make_entropy(EntropyFamily::Fermion, 0.7, 0.3).unwrap(),
            make_entropy(EntropyFamily::Boson, 2.0, -3.0).unwrap(),
            make_entropy(EntropyFamily::Boltzon, 1.3, -0.2).unwrap(),
        ] {
            for i in 1..40 {
                let x = i as f64 / 40.0;
                let back = spec.occupation(spec.entropy_prime(x));
                assert!((back - x).abs() < 1e-10);
            }
            // f nonincreasing in |k|^2
            let mut prev = f64::INFINITY;
            for i in 0..50 {
                let g = spec.occupation(i as f64 * 0.3);
                assert!(g <= prev + 1e-14);
                prev = g;
            }
        }
    }

    #[test]
    fn custom_triple_is_validated() {
        // A valid custom triple: the boltzon forms spelled out by hand.
        let ok = EntropySpec::custom(
            1.0,
            0.0,
            CustomEntropy {
                entropy: Arc::new(|x: f64| if x > 0.0 { -x * x.ln() + x } else { 0.0 }),
                entropy_prime: Arc::new(|x: f64| -x.ln()),
                occupation: Arc::new(|r: f64| (-r).exp().min(1.0)),
            },
        );
        assert!(ok.is_ok());
        // S' not decreasing: rejected.
        let bad = EntropySpec::custom(
            1.0,
            0.0,
            CustomEntropy {
                entropy: Arc::new(|x: f64| x),
                entropy_prime: Arc::new(|x: f64| x),
                occupation: Arc::new(|r: f64| r),
            },
        );
        assert!(bad.is_err());
    }

    #[test]
    fn fermi_sea_cases() {
        let grid = build_grid(1, TWO_PI, 4).unwrap();
        assert!(fermi_sea(grid.clone(), 0.0).is_err());
        // mu below the smallest nonzero dispersion: only mode 0 occupied.
        let tiny = fermi_sea(grid.clone(), 0.5).unwrap();
        assert_eq!(tiny.occupations().iter().sum::<f64>(), 1.0);
        assert_relative_eq!(tiny.density(), 1.0 / TWO_PI, max_relative = 1e-14);
        // mu above the maximum dispersion: everything occupied.
        let full = fermi_sea(grid.clone(), 100.0).unwrap();
        assert_eq!(full.occupations().iter().sum::<f64>(), 4.0);
        // mu = 1.5 occupies modes {-1, 0, 1}.
        let sea = fermi_sea(grid, 1.5).unwrap();
        assert_eq!(sea.occupations().iter().sum::<f64>(), 3.0);
        assert_relative_eq!(sea.density(), 3.0 / TWO_PI, max_relative = 1e-14);
        assert!(sea.is_zero_temperature());
        assert_eq!(sea.mu(), 1.5);
    }

    #[test]
    fn reference_state_occupations() {
        let grid = build_grid(1, TWO_PI, 8).unwrap();
        // Very large temperature pushes fermion occupations to 1/2.
        let hot = reference_state(
            grid.clone(),
            make_entropy(EntropyFamily::Fermion, 1e6, 0.0).unwrap(),
        )
        .unwrap();
        for i in 0..grid.mode_count() {
            if grid.dispersion(i) <= 1.0 {
                assert!((hot.occupation(i) - 0.5).abs() < 1e-5);
            }
        }
        // Boltzon at mode 0 clamps to 1.
        let bol = reference_state(
            grid.clone(),
            make_entropy(EntropyFamily::Boltzon, 1.0, 0.0).unwrap(),
        )
        .unwrap();
        let zero_idx = grid.flat_index(&[0]).unwrap();
        assert_eq!(bol.occupation(zero_idx), 1.0);
        // Fermion at |k|^2 = 1.
        let fer = reference_state(
            grid.clone(),
            make_entropy(EntropyFamily::Fermion, 1.0, 0.0).unwrap(),
        )
        .unwrap();
        let one_idx = grid.flat_index(&[1]).unwrap();
        assert_relative_eq!(
            fer.occupation(one_idx),
            1.0 / (1.0f64.exp() + 1.0),
            max_relative = 1e-12
        );
        // Radial symmetry: paired modes share their occupation.
        for i in 0..grid.mode_count() {
            if let Some(j) = grid.negation_index(i) {
                assert_eq!(fer.occupation(i), fer.occupation(j));
            }
        }
    }

    #[test]
    fn admissible_perturbation_properties() {
        let grid = build_grid(1, TWO_PI, 8).unwrap();
        let state = reference_state(
            grid.clone(),
            make_entropy(EntropyFamily::Fermion, 1.0, 0.0).unwrap(),
        )
        .unwrap();

        let zero = random_admissible_perturbation(&state, 4.0, 0.0, 3).unwrap();
        assert_eq!(zero.as_matrix().max_entry(), 0.0);

        let q = random_admissible_perturbation(&state, 4.0, 0.4, 7).unwrap();
        assert!(q.as_matrix().max_entry() > 0.0);
        assert!(state.constraint_violation(&q).unwrap() <= 1e-10);
        // Supported inside the band.
        for i in 0..grid.mode_count() {
            if grid.dispersion(i) > 4.0 {
                for j in 0..grid.mode_count() {
                    assert_eq!(q.as_matrix().entry(i, j), C64::new(0.0, 0.0));
                    assert_eq!(q.as_matrix().entry(j, i), C64::new(0.0, 0.0));
                }
            }
        }
        // Unitary construction leaves the trace at zero.
        assert!(q.as_matrix().trace().norm() < 1e-12);

        // Determinism under a fixed seed.
        let q2 = random_admissible_perturbation(&state, 4.0, 0.4, 7).unwrap();
        assert_eq!(
            q.as_matrix().sub(q2.as_matrix()).unwrap().max_entry(),
            0.0
        );
        let q3 = random_admissible_perturbation(&state, 4.0, 0.4, 8).unwrap();
        assert!(q.as_matrix().sub(q3.as_matrix()).unwrap().max_entry() > 0.0);
    }
}

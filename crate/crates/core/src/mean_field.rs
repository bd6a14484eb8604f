//! Densities, interaction potentials, and the mean-field multiplication
//! operator `V = w * rho_Q`.
//!
//! Interaction potentials are specified through their Fourier multiplier
//! `W(q)`, so convolution is a pointwise product of lattice coefficients.

use num_complex::Complex64 as C64;

use crate::error::{CoreError, Result};
use crate::lattice::Grid;
use crate::operator::{HermitianOperator, MatrixOperator};

const SYMMETRY_TOL: f64 = 1e-12;

/// Fourier coefficients `rho_hat(q)` of a real density on the box.
#[derive(Debug, Clone)]
pub struct DensityField {
    grid: Grid,
    coeffs: Vec<C64>,
}

/// Even real interaction potential, given by its multiplier `W(q)`.
#[derive(Debug, Clone)]
pub struct InteractionPotential {
    grid: Grid,
    multiplier: Vec<f64>,
    nonnegative: bool,
}

/// Fourier coefficients `V_hat(q)` of a real potential on the box.
#[derive(Debug, Clone)]
pub struct PotentialField {
    grid: Grid,
    coeffs: Vec<C64>,
}

fn check_hermitian_symmetry(grid: &Grid, coeffs: &[C64]) -> Result<()> {
    let scale = 1.0 + coeffs.iter().fold(0.0f64, |m, c| m.max(c.norm()));
    for q in 0..grid.mode_count() {
        match grid.negation_index(q) {
            Some(nq) => {
                if (coeffs[q].conj() - coeffs[nq]).norm() > SYMMETRY_TOL * scale {
                    return Err(CoreError::Invalid(format!(
                        "coefficients are not Hermitian-symmetric at mode {q}"
                    )));
                }
            }
            // Unpaired Nyquist modes cannot satisfy a reality constraint, so
            // real fields carry no weight there.
            None => {
                if coeffs[q].norm() > SYMMETRY_TOL * scale {
                    return Err(CoreError::Invalid(format!(
                        "real field has weight on the unpaired Nyquist mode {q}"
                    )));
                }
            }
        }
    }
    Ok(())
}

impl DensityField {
    /// Wraps raw coefficients after checking the reality symmetry
    /// `rho_hat(-q) = conj(rho_hat(q))`.
    pub fn new(grid: Grid, coeffs: Vec<C64>) -> Result<Self> {
        if coeffs.len() != grid.mode_count() {
            return Err(CoreError::GridMismatch);
        }
        check_hermitian_symmetry(&grid, &coeffs)?;
        Ok(Self { grid, coeffs })
    }

    pub fn zeros(grid: Grid) -> Self {
        let n = grid.mode_count();
        Self {
            grid,
            coeffs: vec![C64::new(0.0, 0.0); n],
        }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn coeffs(&self) -> &[C64] {
        &self.coeffs
    }

    /// Coefficient at the integer mode vector `q`, zero outside the lattice.
    pub fn coeff_at(&self, q: &[i64]) -> C64 {
        self.grid
            .flat_index(q)
            .map_or(C64::new(0.0, 0.0), |i| self.coeffs[i])
    }

    /// Mean value `rho_hat(0)`; equals `L^{-d} tr Q` when built from `Q`.
    pub fn mean(&self) -> f64 {
        let zero = vec![0i64; self.grid.dim()];
        self.coeff_at(&zero).re
    }

    /// Position samples `rho(x_j) = sum_q rho_hat(q) e^{i q x_j}` on the
    /// row-major sample lattice; imaginary parts are discarded (they vanish up
    /// to the unpaired Nyquist modes).
    pub fn position_values(&self) -> Vec<f64> {
        position_samples(&self.grid, &self.coeffs)
    }
}

fn position_samples(grid: &Grid, coeffs: &[C64]) -> Vec<f64> {
    let n = grid.mode_count();
    (0..n)
        .map(|j| {
            let x = grid.position(j);
            let mut acc = C64::new(0.0, 0.0);
            for (idx, c) in coeffs.iter().enumerate() {
                if *c == C64::new(0.0, 0.0) {
                    continue;
                }
                let k = grid.momentum(idx);
                let phase: f64 = (0..grid.dim()).map(|a| k[a] * x[a]).sum();
                acc += c * C64::from_polar(1.0, phase);
            }
            acc.re
        })
        .collect()
}

impl InteractionPotential {
    /// Wraps an explicit multiplier table after checking evenness.
    pub fn from_table(grid: Grid, multiplier: Vec<f64>) -> Result<Self> {
        if multiplier.len() != grid.mode_count() {
            return Err(CoreError::GridMismatch);
        }
        let scale = 1.0 + multiplier.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        for q in 0..grid.mode_count() {
            if let Some(nq) = grid.negation_index(q) {
                if (multiplier[q] - multiplier[nq]).abs() > SYMMETRY_TOL * scale {
                    return Err(CoreError::Invalid(format!(
                        "multiplier is not even at mode {q}"
                    )));
                }
            }
        }
        let nonnegative = multiplier.iter().all(|&v| v >= 0.0);
        Ok(Self {
            grid,
            multiplier,
            nonnegative,
        })
    }

    fn from_radial(grid: Grid, f: impl Fn(f64) -> f64) -> Self {
        let multiplier: Vec<f64> = grid.dispersion_values().iter().map(|&k2| f(k2)).collect();
        let nonnegative = multiplier.iter().all(|&v| v >= 0.0);
        Self {
            grid,
            multiplier,
            nonnegative,
        }
    }

    /// Gaussian multiplier `W(q) = a exp(-r^2 |q|^2 / 2)`.
    pub fn gaussian(grid: Grid, amplitude: f64, range: f64) -> Result<Self> {
        if !(range.is_finite() && range > 0.0) {
            return Err(CoreError::Invalid(format!(
                "gaussian range {range} must be positive"
            )));
        }
        Ok(Self::from_radial(grid, |k2| {
            amplitude * (-0.5 * range * range * k2).exp()
        }))
    }

    /// Yukawa-type multiplier `W(q) = a / (|q|^2 + r^{-2})`.
    pub fn yukawa(grid: Grid, amplitude: f64, range: f64) -> Result<Self> {
        if !(range.is_finite() && range > 0.0) {
            return Err(CoreError::Invalid(format!(
                "yukawa range {range} must be positive"
            )));
        }
        let inv2 = 1.0 / (range * range);
        Ok(Self::from_radial(grid, |k2| amplitude / (k2 + inv2)))
    }

    pub fn zero(grid: Grid) -> Self {
        Self::from_radial(grid, |_| 0.0)
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn multiplier(&self) -> &[f64] {
        &self.multiplier
    }

    /// Whether `W(q) >= 0` everywhere (the defocusing sign certificate).
    pub fn is_nonnegative(&self) -> bool {
        self.nonnegative
    }

    /// Largest magnitude among the negative multiplier values; zero in the
    /// defocusing case.
    pub fn negative_part_sup(&self) -> f64 {
        self.multiplier.iter().fold(0.0f64, |m, &v| m.max(-v))
    }

    pub fn is_zero(&self) -> bool {
        self.multiplier.iter().all(|&v| v == 0.0)
    }

    /// Returns a copy with the zero mode shifted by `c`. Adding a constant to
    /// the potential must not change the dynamics; diagnostics use this to
    /// verify gauge invariance.
    pub fn with_zero_mode_shift(&self, c: f64) -> Self {
        let mut out = self.clone();
        let zero = vec![0i64; self.grid.dim()];
        let idx = self.grid.flat_index(&zero).expect("zero mode exists");
        out.multiplier[idx] += c;
        out.nonnegative = out.multiplier.iter().all(|&v| v >= 0.0);
        out
    }
}

/// Density of a Hermitian perturbation:
/// `rho_hat(q) = L^{-d} sum_n Q_{n+q, n}`, dropping terms where `n + q`
/// leaves the lattice.
pub fn density_of(q_op: &HermitianOperator) -> DensityField {
    let grid = q_op.as_matrix().grid().clone();
    let n = grid.mode_count();
    let inv_vol = 1.0 / grid.volume();
    let mut coeffs = vec![C64::new(0.0, 0.0); n];
    for (q, coeff) in coeffs.iter_mut().enumerate() {
        // Unpaired Nyquist modes carry no reality constraint; a real density
        // has no weight there, so those coefficients stay zero.
        if grid.negation_index(q).is_none() {
            continue;
        }
        let mut acc = C64::new(0.0, 0.0);
        for row in 0..n {
            if let Some(shifted) = grid.shift_index(row, q).expect("indices in range") {
                acc += q_op.as_matrix().entry(shifted, row);
            }
        }
        *coeff = acc * inv_vol;
    }
    DensityField { grid, coeffs }
}

/// Pointwise product `V_hat(q) = W(q) rho_hat(q)`.
pub fn convolve(w: &InteractionPotential, rho: &DensityField) -> Result<PotentialField> {
    if !w.grid.same_grid(&rho.grid) {
        return Err(CoreError::GridMismatch);
    }
    let coeffs = w
        .multiplier
        .iter()
        .zip(&rho.coeffs)
        .map(|(&wq, &rq)| wq * rq)
        .collect();
    Ok(PotentialField {
        grid: rho.grid.clone(),
        coeffs,
    })
}

impl PotentialField {
    /// Wraps raw coefficients after checking the reality symmetry.
    pub fn new(grid: Grid, coeffs: Vec<C64>) -> Result<Self> {
        if coeffs.len() != grid.mode_count() {
            return Err(CoreError::GridMismatch);
        }
        check_hermitian_symmetry(&grid, &coeffs)?;
        Ok(Self { grid, coeffs })
    }

    pub fn zeros(grid: Grid) -> Self {
        let n = grid.mode_count();
        Self {
            grid,
            coeffs: vec![C64::new(0.0, 0.0); n],
        }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn coeffs(&self) -> &[C64] {
        &self.coeffs
    }

    pub fn coeff_at(&self, q: &[i64]) -> C64 {
        self.grid
            .flat_index(q)
            .map_or(C64::new(0.0, 0.0), |i| self.coeffs[i])
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.iter().all(|&c| c == C64::new(0.0, 0.0))
    }

    /// Position samples `V(x_j)` on the row-major sample lattice.
    pub fn position_values(&self) -> Vec<f64> {
        position_samples(&self.grid, &self.coeffs)
    }
}

/// Multiplication operator with matrix elements `V_{k,k'} = V_hat(k - k')`,
/// zero when the difference leaves the lattice.
pub fn potential_operator(v: &PotentialField) -> HermitianOperator {
    let grid = v.grid.clone();
    let n = grid.mode_count();
    let mut op = MatrixOperator::zeros(grid.clone());
    for row in 0..n {
        for col in 0..n {
            let diff: Vec<i64> = (0..grid.dim())
                .map(|a| grid.mode(row)[a] - grid.mode(col)[a])
                .collect();
            if let Some(q) = grid.flat_index(&diff) {
                op.data_mut()[(row, col)] = v.coeffs[q];
            }
        }
    }
    HermitianOperator::symmetrize(op)
}

/// Quadratic interaction energy `(L^d / 2) sum_q W(q) |rho_hat(q)|^2`.
pub fn interaction_energy(w: &InteractionPotential, rho: &DensityField) -> Result<f64> {
    if !w.grid.same_grid(&rho.grid) {
        return Err(CoreError::GridMismatch);
    }
    let sum: f64 = w
        .multiplier
        .iter()
        .zip(&rho.coeffs)
        .map(|(&wq, &rq)| wq * rq.norm_sqr())
        .sum();
    Ok(0.5 * rho.grid.volume() * sum)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::build_grid;
    use crate::operator::MatrixOperator;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    const TWO_PI: f64 = 2.0 * std::f64::consts::PI;

    fn random_hermitian(grid: &Grid, seed: u64) -> HermitianOperator {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = grid.mode_count();
        let mut m = MatrixOperator::zeros(grid.clone());
        for i in 0..n {
            m.data_mut()[(i, i)] = C64::new(rng.gen_range(-1.0..1.0), 0.0);
            for j in (i + 1)..n {
                let z = C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
                m.data_mut()[(i, j)] = z;
                m.data_mut()[(j, i)] = z.conj();
            }
        }
        HermitianOperator::symmetrize(m)
    }

    fn random_potential(grid: &Grid, seed: u64) -> PotentialField {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut coeffs = vec![C64::new(0.0, 0.0); grid.mode_count()];
        for q in 0..grid.mode_count() {
            match grid.negation_index(q) {
                Some(nq) if nq < q => coeffs[q] = coeffs[nq].conj(),
                Some(nq) if nq == q => coeffs[q] = C64::new(rng.gen_range(-1.0..1.0), 0.0),
                Some(_) => {
                    coeffs[q] = C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
                }
                None => {} // unpaired Nyquist modes stay empty
            }
        }
        PotentialField::new(grid.clone(), coeffs).unwrap()
    }

    #[test]
    fn density_of_simple_operators() {
        let grid = build_grid(1, TWO_PI, 4).unwrap();
        let zero = HermitianOperator::zeros(grid.clone());
        assert!(density_of(&zero).coeffs().iter().all(|&c| c.norm() == 0.0));

        // Rank-one plane-wave projector: uniform density.
        let k = grid.flat_index(&[1]).unwrap();
        let proj =
            HermitianOperator::symmetrize(MatrixOperator::basis_pair(grid.clone(), k, k).unwrap());
        let rho = density_of(&proj);
        assert_relative_eq!(rho.mean(), 1.0 / TWO_PI, max_relative = 1e-14);
        for (q, c) in rho.coeffs().iter().enumerate() {
            if q != grid.flat_index(&[0]).unwrap() {
                assert_eq!(c.norm(), 0.0);
            }
        }

        // |e_k><e_k'| + |e_k'><e_k| puts L^{-d} at +-(k - k').
        let kp = grid.flat_index(&[0]).unwrap();
        let pair = MatrixOperator::basis_pair(grid.clone(), k, kp)
            .unwrap()
            .add(&MatrixOperator::basis_pair(grid.clone(), kp, k).unwrap())
            .unwrap();
        let rho = density_of(&HermitianOperator::symmetrize(pair));
        assert_relative_eq!(rho.coeff_at(&[1]).re, 1.0 / TWO_PI, max_relative = 1e-14);
        assert_relative_eq!(rho.coeff_at(&[-1]).re, 1.0 / TWO_PI, max_relative = 1e-14);
        assert_eq!(rho.coeff_at(&[0]).norm(), 0.0);
        // Position values trace out (2 / L) cos(x).
        let values = rho.position_values();
        for (j, v) in values.iter().enumerate() {
            let x = grid.position(j)[0];
            assert_relative_eq!(*v, 2.0 / TWO_PI * x.cos(), epsilon = 1e-12);
        }
    }

    #[test]
    fn convolve_cases() {
        let grid = build_grid(1, TWO_PI, 4).unwrap();
        let mut coeffs = vec![C64::new(0.0, 0.0); grid.mode_count()];
        coeffs[grid.flat_index(&[1]).unwrap()] = C64::new(0.3, 0.0);
        coeffs[grid.flat_index(&[-1]).unwrap()] = C64::new(0.3, 0.0);
        let rho = DensityField::new(grid.clone(), coeffs).unwrap();

        let zero_w = InteractionPotential::zero(grid.clone());
        assert!(convolve(&zero_w, &rho).unwrap().is_zero());

        let const_w =
            InteractionPotential::from_table(grid.clone(), vec![2.5; grid.mode_count()]).unwrap();
        let v = convolve(&const_w, &rho).unwrap();
        assert_relative_eq!(v.coeff_at(&[1]).re, 0.75, max_relative = 1e-14);

        // Yukawa-type 1/(1 + |q|^2) at q0 = 1.
        let yuk = InteractionPotential::yukawa(grid.clone(), 1.0, 1.0).unwrap();
        let v = convolve(&yuk, &rho).unwrap();
        assert_relative_eq!(v.coeff_at(&[1]).re, 0.15, max_relative = 1e-12);
        assert_relative_eq!(v.coeff_at(&[-1]).re, 0.15, max_relative = 1e-12);

        let other = build_grid(1, TWO_PI, 6).unwrap();
        assert!(convolve(&InteractionPotential::zero(other), &rho).is_err());
    }

    #[test]
    fn potential_operator_assembly() {
        let grid = build_grid(1, TWO_PI, 4).unwrap();
        // Constant potential: c times the identity.
        let mut coeffs = vec![C64::new(0.0, 0.0); grid.mode_count()];
        coeffs[grid.flat_index(&[0]).unwrap()] = C64::new(1.7, 0.0);
        let v = PotentialField::new(grid.clone(), coeffs).unwrap();
        let op = potential_operator(&v);
        let ident = MatrixOperator::identity(grid.clone()).scaled(C64::new(1.7, 0.0));
        assert!(op.as_matrix().sub(&ident).unwrap().max_entry() < 1e-14);

        // V_hat(+-1) = 1/2: symmetric shift matrix.
        let mut coeffs = vec![C64::new(0.0, 0.0); grid.mode_count()];
        coeffs[grid.flat_index(&[1]).unwrap()] = C64::new(0.5, 0.0);
        coeffs[grid.flat_index(&[-1]).unwrap()] = C64::new(0.5, 0.0);
        let v = PotentialField::new(grid.clone(), coeffs).unwrap();
        let op = potential_operator(&v);
        for row in 0..4usize {
            for col in 0..4usize {
                let expected = if row.abs_diff(col) == 1 { 0.5 } else { 0.0 };
                assert!(
                    (op.as_matrix().entry(row, col) - C64::new(expected, 0.0)).norm() < 1e-14,
                    "entry ({row},{col})"
                );
            }
        }
    }

    #[test]
    fn duality_identity() {
        // tr(Q V) = L^d sum_q conj(rho_hat_Q(q)) V_hat(q) for random data.
        for (d, m, seed) in [(1usize, 6usize, 11u64), (2, 4, 12), (1, 4, 13)] {
            let grid = build_grid(d, 1.9, m).unwrap();
            let q = random_hermitian(&grid, seed);
            let v = random_potential(&grid, seed + 100);
            let v_op = potential_operator(&v);
            let lhs = q.as_matrix().mul(v_op.as_matrix()).unwrap().trace();
            let rho = density_of(&q);
            let mut rhs = C64::new(0.0, 0.0);
            for (rq, vq) in rho.coeffs().iter().zip(v.coeffs()) {
                rhs += rq.conj() * vq;
            }
            rhs *= grid.volume();
            assert!(
                (lhs - rhs).norm() <= 1e-10 * (1.0 + rhs.norm()),
                "d={d} m={m}: {lhs} vs {rhs}"
            );
        }
    }

    #[test]
    fn interaction_energy_cases() {
        let grid = build_grid(1, TWO_PI, 4).unwrap();
        let w = InteractionPotential::gaussian(grid.clone(), 1.0, 0.7).unwrap();
        assert!(w.is_nonnegative());
        assert_eq!(interaction_energy(&w, &DensityField::zeros(grid.clone())).unwrap(), 0.0);

        // Single pair rho_hat(+-q0) = a, W(+-q0) = w0: L^d w0 a^2.
        let a = 0.4;
        let mut coeffs = vec![C64::new(0.0, 0.0); grid.mode_count()];
        coeffs[grid.flat_index(&[1]).unwrap()] = C64::new(a, 0.0);
        coeffs[grid.flat_index(&[-1]).unwrap()] = C64::new(a, 0.0);
        let rho = DensityField::new(grid.clone(), coeffs).unwrap();
        let w0 = w.multiplier()[grid.flat_index(&[1]).unwrap()];
        assert_relative_eq!(
            interaction_energy(&w, &rho).unwrap(),
            TWO_PI * w0 * a * a,
            max_relative = 1e-13
        );

        // Nonnegative multiplier gives nonnegative energy for random densities.
        let q = random_hermitian(&grid, 21);
        let rho = density_of(&q);
        assert!(interaction_energy(&w, &rho).unwrap() >= 0.0);

        // Translation invariance: a phase on rho_hat leaves the energy alone.
        let shifted: Vec<C64> = rho
            .coeffs()
            .iter()
            .enumerate()
            .map(|(i, c)| {
                let k = grid.momentum(i)[0];
                c * C64::from_polar(1.0, k * 0.37)
            })
            .collect();
        let rho_shift = DensityField::new(grid.clone(), shifted).unwrap();
        assert_relative_eq!(
            interaction_energy(&w, &rho).unwrap(),
            interaction_energy(&w, &rho_shift).unwrap(),
            max_relative = 1e-12
        );
    }

    #[test]
    fn density_mean_is_free_flow_invariant() {
        let grid = build_grid(1, TWO_PI, 6).unwrap();
        let q = random_hermitian(&grid, 31);
        let before = density_of(&q).mean();
        let after = density_of(&q.free_evolve(0.83)).mean();
        assert_relative_eq!(before, after, epsilon = 1e-13);
    }

    #[test]
    fn sign_certificate_and_zero_shift() {
        let grid = build_grid(1, TWO_PI, 4).unwrap();
        let focusing = InteractionPotential::gaussian(grid.clone(), -1.0, 0.7).unwrap();
        assert!(!focusing.is_nonnegative());
        assert!(focusing.negative_part_sup() > 0.0);
        let shifted = focusing.with_zero_mode_shift(10.0);
        let zero_idx = grid.flat_index(&[0]).unwrap();
        assert_relative_eq!(
            shifted.multiplier()[zero_idx],
            focusing.multiplier()[zero_idx] + 10.0,
            max_relative = 1e-14
        );

        // Uneven table rejected.
        let mut table = vec![0.0; grid.mode_count()];
        table[grid.flat_index(&[1]).unwrap()] = 1.0;
        assert!(InteractionPotential::from_table(grid, table).is_err());
    }
}

//! Conserved relative functionals and inequality diagnostics for a
//! perturbation `Q = gamma - gamma_f`: relative particle number, kinetic and
//! Hartree energy, relative entropy (direct and integral forms), free energy,
//! Klein and Lieb-Thirring quotients, the `X_mu`/`Y_mu` norms, and
//! high-momentum density tails.

use num_complex::Complex64 as C64;

use crate::error::{CoreError, Result};
use crate::lattice::Grid;
use crate::mean_field::{density_of, interaction_energy, DensityField, InteractionPotential};
use crate::operator::{clamp_to_domain, HermitianOperator, MatrixOperator, CLAMP_TOL};
use crate::states::ReferenceState;

/// Trace of `Q`; the imaginary part must vanish to roundoff.
pub fn relative_particle_number(q: &HermitianOperator) -> Result<f64> {
    let tr = q.as_matrix().trace();
    let scale = 1.0 + q.as_matrix().max_entry() * q.as_matrix().dim() as f64;
    if tr.im.abs() > 1e-12 * scale {
        return Err(CoreError::Invalid(format!(
            "trace has imaginary part {:.3e}",
            tr.im
        )));
    }
    Ok(tr.re)
}

/// Relative kinetic energy at chemical potential `mu`:
/// the particle part `sum_{|k|^2 >= mu} (|k|^2 - mu) Q_kk` plus the hole part
/// `sum_{|k|^2 < mu} (mu - |k|^2)(-Q_kk)`. Nonnegative whenever `Q` respects
/// the two-sided constraint relative to the Fermi sea at `mu`; for other
/// inputs the value may be negative and is reported as computed.
pub fn relative_kinetic_energy(q: &HermitianOperator, mu: f64) -> f64 {
    let grid = q.as_matrix().grid();
    let mut acc = 0.0;
    for k in 0..grid.mode_count() {
        let d = grid.dispersion(k);
        let diag = q.as_matrix().entry(k, k).re;
        if d >= mu {
            acc += (d - mu) * diag;
        } else {
            acc += (mu - d) * (-diag);
        }
    }
    acc
}

/// Relative Hartree energy: relative kinetic energy plus the quadratic
/// interaction term of the density of `Q`.
pub fn relative_hartree_energy(
    q: &HermitianOperator,
    mu: f64,
    w: &InteractionPotential,
) -> Result<f64> {
    Ok(relative_kinetic_energy(q, mu) + interaction_energy(w, &density_of(q))?)
}

fn positive_temperature_spec(state: &ReferenceState) -> Result<&crate::states::EntropySpec> {
    state.entropy_spec().ok_or_else(|| {
        CoreError::InvalidEntropy(
            "relative entropy needs a positive-temperature reference state".into(),
        )
    })
}

fn checked_gamma_eigen(
    state: &ReferenceState,
    q: &HermitianOperator,
) -> Result<(Vec<f64>, nalgebra::DMatrix<C64>)> {
    let violation = state.constraint_violation(q)?;
    if violation > CLAMP_TOL {
        return Err(CoreError::ConstraintViolation(violation));
    }
    let (values, vectors) = state.gamma_with(q)?.eigen()?;
    let clamped = values
        .into_iter()
        .map(|v| clamp_to_domain(v, 0.0, 1.0))
        .collect::<Result<Vec<f64>>>()?;
    Ok((clamped, vectors))
}

/// Relative entropy `H(gamma_f + Q, gamma_f)` evaluated from the
/// eigendecomposition of `gamma = gamma_f + Q`:
/// `H = -tr S(gamma) + sum_k S(g_k) + sum_k |k|^2 Q_kk`.
pub fn relative_entropy(state: &ReferenceState, q: &HermitianOperator) -> Result<f64> {
    let spec = positive_temperature_spec(state)?;
    let (values, _) = checked_gamma_eigen(state, q)?;
    let grid = q.as_matrix().grid();
    let mut h = 0.0;
    for v in &values {
        h -= spec.entropy(*v);
    }
    for k in 0..grid.mode_count() {
        h += spec.entropy(state.occupation(k));
        h += grid.dispersion(k) * q.as_matrix().entry(k, k).re;
    }
    Ok(h)
}

/// Gauss-Legendre nodes and weights on `[-1, 1]`, computed by Newton
/// iteration on the Legendre recurrence.
fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n {
        // Initial guess (Chebyshev-like), refined by Newton.
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        for _ in 0..100 {
            let (p, dp) = legendre_with_derivative(n, x);
            let dx = p / dp;
            x -= dx;
            if dx.abs() < 1e-15 {
                break;
            }
        }
        let (_, dp) = legendre_with_derivative(n, x);
        nodes[i] = x;
        weights[i] = 2.0 / ((1.0 - x * x) * dp * dp);
    }
    (nodes, weights)
}

fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, dp)
}

struct AdaptiveGauss {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl AdaptiveGauss {
    fn new() -> Self {
        let (nodes, weights) = gauss_legendre(16);
        Self { nodes, weights }
    }

    fn fixed(&self, f: &impl Fn(f64) -> f64, a: f64, b: f64) -> f64 {
        let mid = 0.5 * (a + b);
        let half = 0.5 * (b - a);
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(&x, &w)| w * f(mid + half * x))
            .sum::<f64>()
            * half
    }

    fn adaptive(&self, f: &impl Fn(f64) -> f64, a: f64, b: f64, tol: f64, depth: usize) -> Result<f64> {
        let whole = self.fixed(f, a, b);
        let mid = 0.5 * (a + b);
        let halves = self.fixed(f, a, mid) + self.fixed(f, mid, b);
        if (whole - halves).abs() <= tol.max(1e-15 * (1.0 + halves.abs())) {
            return Ok(halves);
        }
        if depth == 0 {
            return Err(CoreError::QuadratureFailure(format!(
                "interval [{a}, {b}] did not converge; residual {:.3e}",
                (whole - halves).abs()
            )));
        }
        Ok(self.adaptive(f, a, mid, 0.5 * tol, depth - 1)?
            + self.adaptive(f, mid, b, 0.5 * tol, depth - 1)?)
    }
}

/// Relative entropy via the spectral integral representation
/// `int_0^1 tr |S'(gamma_f) - S'(lambda)| (1(gamma >= lambda) - 1(gamma_f >= lambda))^2 dlambda`.
///
/// The unit interval is subdivided at every eigenvalue of `gamma` and every
/// occupation `g_k`; between breakpoints the projector difference is constant
/// and only the scalar weight `|.|` varies, so adaptive Gauss quadrature per
/// subinterval converges rapidly. The integrand vanishes identically outside
/// the breakpoint hull, so the divergent endpoints of `S'` are never touched.
pub fn relative_entropy_integral(
    state: &ReferenceState,
    q: &HermitianOperator,
    tol: f64,
) -> Result<f64> {
    let spec = positive_temperature_spec(state)?;
    let (values, vectors) = checked_gamma_eigen(state, q)?;
    let grid = q.as_matrix().grid().clone();
    let n = grid.mode_count();

    let mut breakpoints: Vec<f64> = values
        .iter()
        .copied()
        .chain(state.occupations().iter().copied())
        .filter(|v| (0.0..=1.0).contains(v))
        .collect();
    breakpoints.sort_by(f64::total_cmp);
    breakpoints.dedup_by(|a, b| (*a - *b).abs() < 1e-14);
    if breakpoints.len() < 2 {
        return Ok(0.0);
    }

    let quad = AdaptiveGauss::new();
    let mut total = 0.0;
    let interval_tol = tol / breakpoints.len() as f64;
    for pair in breakpoints.windows(2) {
        let (a, b) = (pair[0], pair[1]);
        if b - a < 1e-14 {
            continue;
        }
        let mid = 0.5 * (a + b);
        // Diagonal of (P_gamma - P_f)^2 for lambda in (a, b): with
        // p_k = (P_gamma)_kk = sum_{lambda_i >= lambda} |v_i[k]|^2 and
        // f_k = 1(g_k >= lambda), the diagonal is p_k + f_k (1 - 2 p_k).
        let mut weight = vec![0.0f64; n];
        for (i, &lam) in values.iter().enumerate() {
            if lam >= mid {
                for k in 0..n {
                    weight[k] += vectors[(k, i)].norm_sqr();
                }
            }
        }
        let mut coeff = vec![0.0f64; n];
        for k in 0..n {
            let f_k = if state.occupation(k) >= mid { 1.0 } else { 0.0 };
            coeff[k] = weight[k] + f_k * (1.0 - 2.0 * weight[k]);
        }
        if coeff.iter().all(|&c| c.abs() < 1e-15) {
            continue;
        }
        let dispersion = grid.dispersion_values().to_vec();
        let integrand = move |lam: f64| {
            let sp = spec.entropy_prime(lam);
            coeff
                .iter()
                .zip(&dispersion)
                .map(|(&c, &d)| c * (d - sp).abs())
                .sum::<f64>()
        };
        total += quad.adaptive(&integrand, a, b, interval_tol, 40)?;
    }
    Ok(total)
}

/// Relative free energy: relative entropy plus the interaction term.
pub fn relative_free_energy(
    state: &ReferenceState,
    q: &HermitianOperator,
    w: &InteractionPotential,
) -> Result<f64> {
    Ok(relative_entropy(state, q)? + interaction_energy(w, &density_of(q))?)
}

/// Klein quotient `H(gamma_f + Q, gamma_f) / tr((1 - Delta) Q^2)`, the
/// empirical constant of the Klein-type coercivity bound.
pub fn klein_quotient(state: &ReferenceState, q: &HermitianOperator) -> Result<f64> {
    let numerator = relative_entropy(state, q)?;
    let grid = q.as_matrix().grid();
    let n = grid.mode_count();
    let mut denom = 0.0;
    for k in 0..n {
        let weight = 1.0 + grid.dispersion(k);
        for kp in 0..n {
            denom += weight * q.as_matrix().entry(k, kp).norm_sqr();
        }
    }
    if denom <= f64::MIN_POSITIVE {
        return Err(CoreError::ZeroDenominator);
    }
    Ok(numerator / denom)
}

/// Lieb-Thirring functional
/// `int_box [(rho_bg + rho_Q)^{1+2/d} - rho_bg^{1+2/d} - ((2+d)/d) rho_bg^{2/d} rho_Q] dx`,
/// evaluated on the position samples with the periodic trapezoid rule.
pub fn lieb_thirring_functional(rho: &DensityField, rho_bg: f64) -> Result<f64> {
    if !(rho_bg >= 0.0) {
        return Err(CoreError::Invalid(format!(
            "background density {rho_bg} must be nonnegative"
        )));
    }
    let grid = rho.grid();
    let d = grid.dim() as f64;
    let p = 1.0 + 2.0 / d;
    let values = rho.position_values();
    let mut acc = 0.0;
    for &rq in &values {
        let total = rho_bg + rq;
        if total < -1e-9 {
            return Err(CoreError::Invalid(format!(
                "total density {total:.3e} is negative beyond tolerance"
            )));
        }
        let clamped = total.max(0.0);
        acc += clamped.powf(p) - rho_bg.powf(p) - p * rho_bg.powf(2.0 / d) * rq;
    }
    Ok(acc * grid.volume() / values.len() as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LtEnergyKind {
    Kinetic,
    Entropy,
}

/// Lieb-Thirring quotient: the chosen coercive functional divided by the
/// Lieb-Thirring functional with the reference density as background.
pub fn lt_quotient(
    state: &ReferenceState,
    q: &HermitianOperator,
    kind: LtEnergyKind,
) -> Result<f64> {
    let numerator = match kind {
        LtEnergyKind::Kinetic => relative_kinetic_energy(q, state.mu()),
        LtEnergyKind::Entropy => relative_entropy(state, q)?,
    };
    let denominator = lieb_thirring_functional(&density_of(q), state.density())?;
    if denominator <= f64::MIN_POSITIVE {
        return Err(CoreError::ZeroDenominator);
    }
    Ok(numerator / denominator)
}

fn masked(q: &MatrixOperator, row_mask: &[bool], col_mask: &[bool]) -> MatrixOperator {
    let grid = q.grid().clone();
    let n = grid.mode_count();
    let mut out = MatrixOperator::zeros(grid);
    for i in 0..n {
        if !row_mask[i] {
            continue;
        }
        for j in 0..n {
            if col_mask[j] {
                out.data_mut()[(i, j)] = q.entry(i, j);
            }
        }
    }
    out
}

fn above_mask(grid: &Grid, cutoff: f64) -> Vec<bool> {
    (0..grid.mode_count())
        .map(|k| grid.dispersion(k) >= cutoff)
        .collect()
}

fn below_mask(grid: &Grid, cutoff: f64) -> Vec<bool> {
    (0..grid.mode_count())
        .map(|k| grid.dispersion(k) <= cutoff)
        .collect()
}

/// `X_mu` norm: operator norm, weighted Hilbert-Schmidt norm, and the two
/// weighted trace norms of the `++` and `--` blocks, with the diagonal weight
/// `||k|^2 - mu|^{1/2}`.
pub fn x_mu_norm(q: &HermitianOperator, mu: f64) -> Result<f64> {
    let grid = q.as_matrix().grid().clone();
    let n = grid.mode_count();
    let weight: Vec<f64> = (0..n)
        .map(|k| (grid.dispersion(k) - mu).abs().sqrt())
        .collect();

    let op_norm = q.as_matrix().schatten_norm(f64::INFINITY)?;

    // ||Q |Delta + mu|^{1/2}||_{S^2}: scale columns.
    let mut right = q.as_matrix().clone();
    for j in 0..n {
        for i in 0..n {
            right.data_mut()[(i, j)] *= C64::new(weight[j], 0.0);
        }
    }
    let hs = right.schatten_norm(2.0)?;

    let above = above_mask(&grid, mu);
    let below = below_mask(&grid, mu);
    let mut s1 = 0.0;
    for mask in [&above, &below] {
        let mut block = masked(q.as_matrix(), mask, mask);
        for i in 0..n {
            for j in 0..n {
                block.data_mut()[(i, j)] *= C64::new(weight[i] * weight[j], 0.0);
            }
        }
        s1 += block.schatten_norm(1.0)?;
    }
    Ok(op_norm + hs + s1)
}

fn density_l2_norm(rho: &DensityField) -> f64 {
    let sum: f64 = rho.coeffs().iter().map(|c| c.norm_sqr()).sum();
    (rho.grid().volume() * sum).sqrt()
}

fn density_of_matrix(m: &MatrixOperator) -> DensityField {
    density_of(&HermitianOperator::symmetrize(m.clone()))
}

/// `Y_mu` norm: operator norm, cross-block Hilbert-Schmidt norm, high-block
/// trace norm, and the `L^2` norm of the low-block density, all at the
/// momentum cutoff `2 mu`.
pub fn y_mu_norm(q: &HermitianOperator, mu: f64) -> Result<f64> {
    let grid = q.as_matrix().grid().clone();
    let cutoff = 2.0 * mu;
    let above = above_mask(&grid, cutoff);
    let below = below_mask(&grid, cutoff);

    let op_norm = q.as_matrix().schatten_norm(f64::INFINITY)?;
    let cross = masked(q.as_matrix(), &above, &below).schatten_norm(2.0)?;
    let high = masked(q.as_matrix(), &above, &above).schatten_norm(1.0)?;
    let low_density = density_of_matrix(&masked(q.as_matrix(), &below, &below));
    Ok(op_norm + cross + high + density_l2_norm(&low_density))
}

/// Split norm of a density: Fourier modes with `|q|^2 <= cutoff` are measured
/// in `L^2` (Plancherel), the remainder in `L^1` by the position trapezoid.
fn split_density_norm(rho: &DensityField, cutoff: f64) -> f64 {
    let grid = rho.grid().clone();
    let n = grid.mode_count();
    let mut low = vec![C64::new(0.0, 0.0); n];
    let mut high = vec![C64::new(0.0, 0.0); n];
    for q in 0..n {
        if grid.dispersion(q) <= cutoff {
            low[q] = rho.coeffs()[q];
        } else {
            high[q] = rho.coeffs()[q];
        }
    }
    let l2 = (grid.volume() * low.iter().map(|c| c.norm_sqr()).sum::<f64>()).sqrt();
    // L^1 of the high part via position samples. The high part alone need not
    // be real, so measure its modulus.
    let mut l1 = 0.0;
    for j in 0..n {
        let x = grid.position(j);
        let mut acc = C64::new(0.0, 0.0);
        for (idx, c) in high.iter().enumerate() {
            if *c == C64::new(0.0, 0.0) {
                continue;
            }
            let k = grid.momentum(idx);
            let phase: f64 = (0..grid.dim()).map(|a| k[a] * x[a]).sum();
            acc += c * C64::from_polar(1.0, phase);
        }
        l1 += acc.norm();
    }
    l2 + l1 * grid.volume() / n as f64
}

#[derive(Debug, Clone, Copy)]
pub struct HighMomentumTails {
    /// Split norm of the density of the `++` block above the cutoff.
    pub plus_plus: f64,
    /// Split norm of the density of the `+-` block.
    pub plus_minus: f64,
    /// Split norm of the density of the `-+` block.
    pub minus_plus: f64,
}

/// High-momentum density tails `rho[Pi_A^+ Q Pi_A^{+/-}]` for each cutoff.
pub fn high_momentum_profile(
    q: &HermitianOperator,
    cutoffs: &[f64],
) -> Result<Vec<(f64, HighMomentumTails)>> {
    let mut prev = 0.0;
    for &a in cutoffs {
        if !(a > 0.0) || a < prev {
            return Err(CoreError::Invalid(format!(
                "cutoffs must be positive and nondecreasing, found {a}"
            )));
        }
        prev = a;
    }
    let grid = q.as_matrix().grid().clone();
    let mut out = Vec::with_capacity(cutoffs.len());
    for &a in cutoffs {
        // Strict high projector: modes with |k|^2 > A.
        let above: Vec<bool> = (0..grid.mode_count())
            .map(|k| grid.dispersion(k) > a)
            .collect();
        let below: Vec<bool> = above.iter().map(|&b| !b).collect();
        let pp = density_of_matrix(&masked(q.as_matrix(), &above, &above));
        let pm = density_of_matrix(&masked(q.as_matrix(), &above, &below));
        let mp = density_of_matrix(&masked(q.as_matrix(), &below, &above));
        out.push((
            a,
            HighMomentumTails {
                plus_plus: split_density_norm(&pp, a),
                plus_minus: split_density_norm(&pm, a),
                minus_plus: split_density_norm(&mp, a),
            },
        ));
    }
    Ok(out)
}

/// Controls which diagnostics `evaluate_ledger` computes.
#[derive(Debug, Clone)]
pub struct LedgerOptions {
    /// Include the more expensive quotient and profile diagnostics.
    pub full: bool,
    /// Tolerance for the integral form of the relative entropy; `None`
    /// skips the cross-check entirely.
    pub entropy_integral_tol: Option<f64>,
    /// Cutoffs for the high-momentum profile (full mode only).
    pub cutoffs: Vec<f64>,
}

impl LedgerOptions {
    pub fn basic() -> Self {
        Self {
            full: false,
            entropy_integral_tol: None,
            cutoffs: Vec::new(),
        }
    }

    pub fn full() -> Self {
        Self {
            full: true,
            entropy_integral_tol: None,
            cutoffs: Vec::new(),
        }
    }
}

/// One snapshot's worth of diagnostics. Entries are `None` when not
/// applicable (zero-temperature states have no entropy, positive-temperature
/// ledgers skip the quotient whose numerator is undefined, etc.).
#[derive(Debug, Clone, Default)]
pub struct DiagnosticLedger {
    pub relative_particle_number: Option<f64>,
    pub relative_kinetic: Option<f64>,
    pub relative_hartree: Option<f64>,
    pub relative_entropy: Option<f64>,
    pub relative_entropy_integral: Option<f64>,
    pub relative_free_energy: Option<f64>,
    pub interaction: Option<f64>,
    pub klein_quotient: Option<f64>,
    pub lt_quotient: Option<f64>,
    pub x_mu_norm: Option<f64>,
    pub y_mu_norm: Option<f64>,
    pub constraint_violation: Option<f64>,
    pub high_momentum: Vec<(f64, HighMomentumTails)>,
}

impl DiagnosticLedger {
    /// Scalar entries in a fixed order, for tabular serialization.
    pub fn entries(&self) -> Vec<(&'static str, Option<f64>)> {
        vec![
            ("relative_particle_number", self.relative_particle_number),
            ("relative_kinetic", self.relative_kinetic),
            ("relative_hartree", self.relative_hartree),
            ("relative_entropy", self.relative_entropy),
            ("relative_entropy_integral", self.relative_entropy_integral),
            ("relative_free_energy", self.relative_free_energy),
            ("interaction", self.interaction),
            ("klein_quotient", self.klein_quotient),
            ("lt_quotient", self.lt_quotient),
            ("x_mu_norm", self.x_mu_norm),
            ("y_mu_norm", self.y_mu_norm),
            ("constraint_violation", self.constraint_violation),
        ]
    }
}

/// Evaluates the diagnostic ledger for one snapshot.
pub fn evaluate_ledger(
    state: &ReferenceState,
    q: &HermitianOperator,
    w: &InteractionPotential,
    options: &LedgerOptions,
) -> Result<DiagnosticLedger> {
    let mu = state.mu();
    let mut ledger = DiagnosticLedger {
        relative_particle_number: Some(relative_particle_number(q)?),
        interaction: Some(interaction_energy(w, &density_of(q))?),
        constraint_violation: Some(state.constraint_violation(q)?),
        ..DiagnosticLedger::default()
    };
    if state.is_zero_temperature() {
        ledger.relative_kinetic = Some(relative_kinetic_energy(q, mu));
        ledger.relative_hartree = Some(relative_hartree_energy(q, mu, w)?);
    } else {
        ledger.relative_entropy = Some(relative_entropy(state, q)?);
        ledger.relative_free_energy = Some(relative_free_energy(state, q, w)?);
        if let Some(tol) = options.entropy_integral_tol {
            ledger.relative_entropy_integral = Some(relative_entropy_integral(state, q, tol)?);
        }
    }
    if options.full {
        ledger.x_mu_norm = Some(x_mu_norm(q, mu)?);
        ledger.y_mu_norm = Some(y_mu_norm(q, mu)?);
        let nonzero = q.as_matrix().max_entry() > 0.0;
        if nonzero {
            if state.is_zero_temperature() {
                if let Ok(v) = lt_quotient(state, q, LtEnergyKind::Kinetic) {
                    ledger.lt_quotient = Some(v);
                }
            } else {
                if let Ok(v) = klein_quotient(state, q) {
                    ledger.klein_quotient = Some(v);
                }
                if let Ok(v) = lt_quotient(state, q, LtEnergyKind::Entropy) {
                    ledger.lt_quotient = Some(v);
                }
            }
        }
        if !options.cutoffs.is_empty() {
            ledger.high_momentum = high_momentum_profile(q, &options.cutoffs)?;
        }
    }
    for (name, value) in ledger.entries() {
        if let Some(v) = value {
            if !v.is_finite() {
                return Err(CoreError::Invalid(format!("ledger entry {name} is not finite")));
            }
        }
    }
    Ok(ledger)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::build_grid;
    use crate::mean_field::InteractionPotential;
    use crate::states::{
        fermi_sea, make_entropy, random_admissible_perturbation, reference_state, EntropyFamily,
    };
    use approx::assert_relative_eq;

    const TWO_PI: f64 = 2.0 * std::f64::consts::PI;

    fn basis_proj(grid: &Grid, k: usize, scale: f64) -> HermitianOperator {
        let m = MatrixOperator::basis_pair(grid.clone(), k, k)
            .unwrap()
            .scaled(C64::new(scale, 0.0));
        HermitianOperator::symmetrize(m)
    }

    #[test]
    fn particle_number_cases() {
        let grid = build_grid(1, TWO_PI, 4).unwrap();
        let zero = HermitianOperator::zeros(grid.clone());
        assert_eq!(relative_particle_number(&zero).unwrap(), 0.0);
        let k = grid.flat_index(&[1]).unwrap();
        let proj = basis_proj(&grid, k, 1.0);
        assert_relative_eq!(relative_particle_number(&proj).unwrap(), 1.0);
        // Invariance under the free flow.
        let state = reference_state(
            grid.clone(),
            make_entropy(EntropyFamily::Fermion, 1.0, 0.0).unwrap(),
        )
        .unwrap();
        let q = random_admissible_perturbation(&state, 4.0, 0.3, 5).unwrap();
        let before = relative_particle_number(&q).unwrap();
        let after = relative_particle_number(&q.free_evolve(0.71)).unwrap();
        assert_relative_eq!(before, after, epsilon = 1e-12);
    }

    #[test]
    fn kinetic_energy_single_modes() {
        let grid = build_grid(1, TWO_PI, 6).unwrap();
        let mu = 1.5;
        assert_eq!(
            relative_kinetic_energy(&HermitianOperator::zeros(grid.clone()), mu),
            0.0
        );
        // Particle above the sea: |k|^2 - mu.
        let k2 = grid.flat_index(&[2]).unwrap();
        assert_relative_eq!(
            relative_kinetic_energy(&basis_proj(&grid, k2, 1.0), mu),
            4.0 - mu,
            max_relative = 1e-14
        );
        // Hole below the sea: mu - |k|^2.
        let k1 = grid.flat_index(&[1]).unwrap();
        assert_relative_eq!(
            relative_kinetic_energy(&basis_proj(&grid, k1, -1.0), mu),
            mu - 1.0,
            max_relative = 1e-14
        );
    }

    #[test]
    fn hartree_energy_cases() {
        let grid = build_grid(1, TWO_PI, 6).unwrap();
        let sea = fermi_sea(grid.clone(), 1.5).unwrap();
        let q = random_admissible_perturbation(&sea, 4.0, 0.3, 9).unwrap();
        let zero_w = InteractionPotential::zero(grid.clone());
        assert_relative_eq!(
            relative_hartree_energy(&q, 1.5, &zero_w).unwrap(),
            relative_kinetic_energy(&q, 1.5),
            epsilon = 1e-14
        );
        let gauss = InteractionPotential::gaussian(grid.clone(), 0.8, 0.6).unwrap();
        assert!(
            relative_hartree_energy(&q, 1.5, &gauss).unwrap()
                >= relative_kinetic_energy(&q, 1.5) - 1e-12
        );
    }

    #[test]
    fn relative_entropy_commuting_oracle() {
        let grid = build_grid(1, TWO_PI, 6).unwrap();
        let spec = make_entropy(EntropyFamily::Fermion, 0.8, 0.2).unwrap();
        let state = reference_state(grid.clone(), spec.clone()).unwrap();
        let zero = HermitianOperator::zeros(grid.clone());
        assert!(relative_entropy(&state, &zero).unwrap().abs() < 1e-12);

        // Q = delta |e_k><e_k|: H = -(S(g+delta) - S(g) - S'(g) delta).
        let k = grid.flat_index(&[1]).unwrap();
        let g = state.occupation(k);
        let delta = 0.07;
        let q = basis_proj(&grid, k, delta);
        let expected = -(spec.entropy(g + delta) - spec.entropy(g) - spec.entropy_prime(g) * delta);
        assert_relative_eq!(
            relative_entropy(&state, &q).unwrap(),
            expected,
            max_relative = 1e-10
        );

        // Nonnegativity on random admissible states.
        for seed in 0..5 {
            let q = random_admissible_perturbation(&state, 4.0, 0.5, seed).unwrap();
            assert!(relative_entropy(&state, &q).unwrap() >= -1e-9);
        }
    }

    #[test]
    fn entropy_integral_matches_direct() {
        let grid = build_grid(1, TWO_PI, 4).unwrap();
        for family in [EntropyFamily::Fermion, EntropyFamily::Boltzon] {
            let spec = make_entropy(family, 0.9, -0.3).unwrap();
            let state = reference_state(grid.clone(), spec).unwrap();
            let zero = HermitianOperator::zeros(grid.clone());
            assert!(relative_entropy_integral(&state, &zero, 1e-10)
                .unwrap()
                .abs()
                < 1e-10);

            // Diagonal perturbation: commuting case.
            let k = grid.flat_index(&[1]).unwrap();
            let q = basis_proj(&grid, k, 0.12);
            let direct = relative_entropy(&state, &q).unwrap();
            let integral = relative_entropy_integral(&state, &q, 1e-10).unwrap();
            assert_relative_eq!(integral, direct, max_relative = 1e-7);

            // Random admissible perturbations: finite-dimensional identity.
            for seed in [2u64, 3, 4] {
                let q = random_admissible_perturbation(&state, 2.0, 0.4, seed).unwrap();
                let direct = relative_entropy(&state, &q).unwrap();
                let integral = relative_entropy_integral(&state, &q, 1e-9).unwrap();
                assert!(
                    (integral - direct).abs() <= 1e-6 * (1.0 + direct.abs()),
                    "{family:?} seed {seed}: {integral} vs {direct}"
                );
            }
        }
    }

    #[test]
    fn free_energy_cases() {
        let grid = build_grid(1, TWO_PI, 6).unwrap();
        let state = reference_state(
            grid.clone(),
            make_entropy(EntropyFamily::Fermion, 1.2, 0.1).unwrap(),
        )
        .unwrap();
        let q = random_admissible_perturbation(&state, 4.0, 0.4, 17).unwrap();
        let zero_w = InteractionPotential::zero(grid.clone());
        assert_relative_eq!(
            relative_free_energy(&state, &q, &zero_w).unwrap(),
            relative_entropy(&state, &q).unwrap(),
            epsilon = 1e-14
        );
        let gauss = InteractionPotential::gaussian(grid.clone(), 0.5, 0.8).unwrap();
        assert!(
            relative_free_energy(&state, &q, &gauss).unwrap()
                >= relative_entropy(&state, &q).unwrap() - 1e-12
        );
    }

    #[test]
    fn klein_quotient_taylor_oracle() {
        let grid = build_grid(1, TWO_PI, 4).unwrap();
        let temperature = 0.8;
        let state = reference_state(
            grid.clone(),
            make_entropy(EntropyFamily::Fermion, temperature, 0.0).unwrap(),
        )
        .unwrap();
        let k0 = grid.flat_index(&[0]).unwrap();
        let g0 = state.occupation(k0);
        // -S''(g0)/2 with S'' = -T (1/x + 1/(1-x)) for the fermion family.
        let expected = 0.5 * temperature * (1.0 / g0 + 1.0 / (1.0 - g0));
        let delta = 1e-4;
        let q = basis_proj(&grid, k0, delta);
        let quotient = klein_quotient(&state, &q).unwrap();
        assert_relative_eq!(quotient, expected, max_relative = 1e-3);

        // Positive on sampled admissible states.
        for seed in 0..10 {
            let q = random_admissible_perturbation(&state, 4.0, 0.5, seed).unwrap();
            assert!(klein_quotient(&state, &q).unwrap() > 0.0);
        }
        assert!(matches!(
            klein_quotient(&state, &HermitianOperator::zeros(grid)),
            Err(CoreError::ZeroDenominator)
        ));
    }

    #[test]
    fn lieb_thirring_functional_cases() {
        // rho_bg = 1, d = 2, rho_Q constant c: L^2 c^2.
        let grid = build_grid(2, 3.0, 4).unwrap();
        let c = 0.3;
        let mut coeffs = vec![C64::new(0.0, 0.0); grid.mode_count()];
        coeffs[grid.flat_index(&[0, 0]).unwrap()] = C64::new(c, 0.0);
        let rho = DensityField::new(grid.clone(), coeffs).unwrap();
        assert_relative_eq!(
            lieb_thirring_functional(&rho, 1.0).unwrap(),
            9.0 * c * c,
            max_relative = 1e-12
        );
        // Zero density.
        assert_eq!(
            lieb_thirring_functional(&DensityField::zeros(grid.clone()), 1.0).unwrap(),
            0.0
        );
        // rho_bg = 0 reduces to the plain power integral.
        let rho2 = {
            let mut coeffs = vec![C64::new(0.0, 0.0); grid.mode_count()];
            coeffs[grid.flat_index(&[0, 0]).unwrap()] = C64::new(0.5, 0.0);
            DensityField::new(grid.clone(), coeffs).unwrap()
        };
        assert_relative_eq!(
            lieb_thirring_functional(&rho2, 0.0).unwrap(),
            9.0 * 0.5f64.powi(2),
            max_relative = 1e-12
        );
        assert!(lieb_thirring_functional(&rho, -0.1).is_err());
    }

    #[test]
    fn lt_quotient_positive_on_samples() {
        let grid = build_grid(2, TWO_PI, 4).unwrap();
        let sea = fermi_sea(grid.clone(), 1.5).unwrap();
        for seed in 0..10 {
            let q = random_admissible_perturbation(&sea, 3.0, 0.4, seed).unwrap();
            let quotient = lt_quotient(&sea, &q, LtEnergyKind::Kinetic).unwrap();
            assert!(quotient > 0.0, "seed {seed}: {quotient}");
        }
    }

    #[test]
    fn x_mu_norm_single_mode() {
        let grid = build_grid(1, TWO_PI, 6).unwrap();
        let mu = 1.5;
        assert_eq!(x_mu_norm(&HermitianOperator::zeros(grid.clone()), mu).unwrap(), 0.0);
        // |e_k><e_k| with |k|^2 = 4 > mu: 1 + sqrt(4 - mu) + (4 - mu).
        let k = grid.flat_index(&[2]).unwrap();
        let q = basis_proj(&grid, k, 1.0);
        assert_relative_eq!(
            x_mu_norm(&q, mu).unwrap(),
            1.0 + (4.0 - mu).sqrt() + (4.0 - mu),
            max_relative = 1e-12
        );
        // Norm dominates the operator norm.
        let state = fermi_sea(grid.clone(), mu).unwrap();
        let q = random_admissible_perturbation(&state, 4.0, 0.5, 23).unwrap();
        assert!(
            x_mu_norm(&q, mu).unwrap()
                >= q.as_matrix().schatten_norm(f64::INFINITY).unwrap() - 1e-12
        );
    }

    #[test]
    fn y_mu_norm_cases() {
        let grid = build_grid(1, TWO_PI, 8).unwrap();
        let mu = 1.0;
        assert_eq!(y_mu_norm(&HermitianOperator::zeros(grid.clone()), mu).unwrap(), 0.0);
        // Supported entirely above 2 mu: low-momentum density term vanishes,
        // leaving operator + trace norm of the rank-one block.
        let k = grid.flat_index(&[3]).unwrap();
        let q = basis_proj(&grid, k, 1.0);
        assert_relative_eq!(y_mu_norm(&q, mu).unwrap(), 2.0, max_relative = 1e-12);
    }

    #[test]
    fn high_momentum_profile_cases() {
        let grid = build_grid(1, TWO_PI, 8).unwrap();
        let state = reference_state(
            grid.clone(),
            make_entropy(EntropyFamily::Fermion, 1.0, 0.0).unwrap(),
        )
        .unwrap();
        let q = random_admissible_perturbation(&state, 2.0, 0.5, 31).unwrap();
        // Cutoff above the support bandwidth: all tails vanish.
        let profile = high_momentum_profile(&q, &[2.0, 20.0]).unwrap();
        let (_, tails) = profile[1];
        assert!(tails.plus_plus < 1e-14);
        assert!(tails.plus_minus < 1e-14);
        assert!(tails.minus_plus < 1e-14);
        // At the support edge the tails may be nonzero but finite.
        let (_, tails0) = profile[0];
        assert!(tails0.plus_plus.is_finite());
        assert!(high_momentum_profile(&q, &[4.0, 2.0]).is_err());
        assert!(high_momentum_profile(&q, &[-1.0]).is_err());
    }

    #[test]
    fn ledger_evaluation() {
        let grid = build_grid(1, TWO_PI, 6).unwrap();
        let w = InteractionPotential::gaussian(grid.clone(), 0.4, 0.7).unwrap();

        // Positive temperature: entropy-side entries filled.
        let warm = reference_state(
            grid.clone(),
            make_entropy(EntropyFamily::Fermion, 1.0, 0.0).unwrap(),
        )
        .unwrap();
        let q = random_admissible_perturbation(&warm, 4.0, 0.4, 41).unwrap();
        let mut options = LedgerOptions::full();
        options.entropy_integral_tol = Some(1e-9);
        options.cutoffs = vec![1.0, 4.0];
        let ledger = evaluate_ledger(&warm, &q, &w, &options).unwrap();
        assert!(ledger.relative_entropy.unwrap() >= -1e-9);
        assert!(ledger.relative_free_energy.unwrap() >= ledger.relative_entropy.unwrap() - 1e-12);
        assert!(ledger.relative_kinetic.is_none());
        assert!(ledger.klein_quotient.unwrap() > 0.0);
        assert_eq!(ledger.high_momentum.len(), 2);

        // Zero temperature: kinetic-side entries filled.
        let sea = fermi_sea(grid.clone(), 1.5).unwrap();
        let q = random_admissible_perturbation(&sea, 4.0, 0.4, 42).unwrap();
        let ledger = evaluate_ledger(&sea, &q, &w, &LedgerOptions::basic()).unwrap();
        assert!(ledger.relative_kinetic.unwrap() >= -1e-9);
        assert!(ledger.relative_entropy.is_none());
        assert!(ledger.constraint_violation.unwrap() <= 1e-10);
    }
}

//! Time evolution of the perturbation `Q(t)` by three routes: unitary Strang
//! split-stepping, Picard iteration on the Duhamel formula, and Dyson-series
//! wave-operator reconstruction.

use nalgebra::DMatrix;
use num_complex::Complex64 as C64;

use crate::error::{CoreError, Result};
use crate::functionals::{evaluate_ledger, DiagnosticLedger, LedgerOptions};
use crate::lattice::Grid;
use crate::mean_field::{convolve, density_of, potential_operator, InteractionPotential, PotentialField};
use crate::operator::{commutator, complex_gemm, HermitianOperator, MatrixOperator, CLAMP_TOL};
use crate::states::ReferenceState;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MeanFieldMode {
    /// Potential frozen at the step start.
    Frozen,
    /// Potential from a half free-step predictor (default; second order).
    Midpoint,
}

#[derive(Debug, Clone)]
pub struct PropagatorConfig {
    /// Step size.
    pub tau: f64,
    /// Mean-field evaluation mode within a step.
    pub mode: MeanFieldMode,
    /// Record every `record_stride` steps (plus the initial and final states).
    pub record_stride: usize,
    /// Picard stopping tolerance on the S^2 increment.
    pub picard_tol: f64,
    /// Maximum Picard iterations before reporting divergence.
    pub picard_max_iter: usize,
    /// Quadrature nodes for the Picard horizon.
    pub quadrature_nodes: usize,
    /// Dyson series truncation order.
    pub dyson_order: usize,
}

impl Default for PropagatorConfig {
    fn default() -> Self {
        Self {
            tau: 1e-2,
            mode: MeanFieldMode::Midpoint,
            record_stride: 1,
            picard_tol: 1e-10,
            picard_max_iter: 60,
            quadrature_nodes: 33,
            dyson_order: 8,
        }
    }
}

impl PropagatorConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.tau > 0.0 && self.tau.is_finite()) {
            return Err(CoreError::Invalid(format!(
                "step size {} must be positive",
                self.tau
            )));
        }
        if !(self.picard_tol > 0.0) {
            return Err(CoreError::Invalid("Picard tolerance must be positive".into()));
        }
        if self.dyson_order < 1 {
            return Err(CoreError::Invalid("Dyson order must be at least 1".into()));
        }
        if self.record_stride == 0 {
            return Err(CoreError::Invalid("record stride must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Default)]
pub struct PicardStats {
    pub iterations: usize,
    /// S^2 increments per iteration; their ratios are the observed
    /// contraction factors.
    pub increments: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct TrajectoryRecord {
    pub times: Vec<f64>,
    pub snapshots: Vec<HermitianOperator>,
    /// Self-consistent potential `w * rho_Q` at each recorded time.
    pub potentials: Vec<PotentialField>,
    pub ledgers: Vec<DiagnosticLedger>,
    pub integrator: &'static str,
    pub steps_taken: usize,
    pub picard: Option<PicardStats>,
}

impl TrajectoryRecord {
    fn push(
        &mut self,
        t: f64,
        state: &ReferenceState,
        q: &HermitianOperator,
        w: &InteractionPotential,
        ledger_options: &LedgerOptions,
    ) -> Result<()> {
        if let Some(&last) = self.times.last() {
            if (t - last).abs() <= 0.0 {
                return Ok(()); // duplicate time stamp (e.g. zero-length run)
            }
        }
        self.times.push(t);
        self.potentials.push(convolve(w, &density_of(q))?);
        self.ledgers.push(evaluate_ledger(state, q, w, ledger_options)?);
        self.snapshots.push(q.clone());
        Ok(())
    }

    pub fn final_snapshot(&self) -> &HermitianOperator {
        self.snapshots.last().expect("record is never empty")
    }

    pub fn final_time(&self) -> f64 {
        *self.times.last().expect("record is never empty")
    }
}

/// Reusable split-step workspace.
pub struct StrangPropagator {
    grid: Grid,
}

impl StrangPropagator {
    pub fn new(grid: Grid) -> Self {
        Self { grid }
    }

    /// One split step of signed size `tau`:
    /// `U = e^{-i tau V / 2} e^{i tau Delta} e^{-i tau V / 2}` applied as
    /// `Q -> U (gamma_f + Q) U* - gamma_f`. The potential factor is the exact
    /// unitary exponential of the (lattice-truncated) multiplication
    /// operator, built from its eigendecomposition, so the step preserves the
    /// spectrum of `gamma`, the constraint, and `tr Q` to roundoff. Using the
    /// same truncated operator as the Duhamel and Dyson solvers keeps all
    /// three formulations consistent generators of the discrete flow.
    pub fn step(
        &self,
        q: &HermitianOperator,
        state: &ReferenceState,
        w: &InteractionPotential,
        tau: f64,
        mode: MeanFieldMode,
    ) -> Result<HermitianOperator> {
        if !q.as_matrix().grid().same_grid(&self.grid) {
            return Err(CoreError::GridMismatch);
        }
        let v = match mode {
            MeanFieldMode::Frozen => convolve(w, &density_of(q))?,
            MeanFieldMode::Midpoint => {
                let predictor = q.free_evolve(0.5 * tau);
                convolve(w, &density_of(&predictor))?
            }
        };
        if v.is_zero() {
            // No potential: the step is the exact free flow.
            return Ok(q.free_evolve(tau));
        }
        let v_op = potential_operator(&v);
        // half = exp(-i tau V / 2), computed by a Taylor series with
        // scaling and squaring.  The generator -i tau V / 2 is tiny for
        // practical step sizes, so this needs only a handful of matrix
        // products and is accurate (and unitary) to near machine precision.
        let generator = v_op.as_matrix().data().map(|z| z * C64::new(0.0, -0.5 * tau));
        let half = matrix_exponential(&generator);

        // The whole step is conjugation by B = half * E * half with
        // E = diag(e^{-i tau |k|^2}) the free-flow phases, so only two large
        // products are needed beyond forming B.
        let disp = self.grid.dispersion_values();
        let mut phased = half.clone();
        for row in 0..phased.nrows() {
            let phase = C64::from_polar(1.0, -tau * disp[row]);
            for col in 0..phased.ncols() {
                phased[(row, col)] *= phase;
            }
        }
        let composite = complex_gemm(&half, &phased);

        let mut gamma = q.as_matrix().data().clone();
        for (k, &g) in state.occupations().iter().enumerate() {
            gamma[(k, k)] += C64::new(g, 0.0);
        }
        let mut data = complex_gemm(&complex_gemm(&composite, &gamma), &composite.adjoint());
        for (k, &g) in state.occupations().iter().enumerate() {
            data[(k, k)] -= C64::new(g, 0.0);
        }
        Ok(HermitianOperator::symmetrize(MatrixOperator::new(
            self.grid.clone(),
            data,
        )?))
    }
}

/// Dense matrix exponential by Horner-evaluated Taylor series with scaling
/// and squaring.  The term count is chosen so the truncation error of the
/// scaled series is below 1e-16 in operator norm.
fn matrix_exponential(a: &DMatrix<C64>) -> DMatrix<C64> {
    let n = a.nrows();
    // Infinity norm (max absolute row sum) bounds the spectral radius.
    let norm = (0..n)
        .map(|i| (0..n).map(|j| a[(i, j)].norm()).sum::<f64>())
        .fold(0.0_f64, f64::max);
    let squarings = if norm > 0.5 {
        (norm / 0.5).log2().ceil() as u32
    } else {
        0
    };
    let scaled = a.map(|z| z / 2.0_f64.powi(squarings as i32));
    let theta = norm / 2.0_f64.powi(squarings as i32);
    // Smallest m with theta^(m+1)/(m+1)! <= 1e-16.
    let mut terms = 1usize;
    let mut tail = theta;
    while tail > 1e-16 && terms < 24 {
        terms += 1;
        tail *= theta / terms as f64;
    }
    let identity = DMatrix::<C64>::identity(n, n);
    let mut result = identity.clone();
    for k in (1..=terms).rev() {
        result = &identity + complex_gemm(&scaled, &result) / C64::new(k as f64, 0.0);
    }
    for _ in 0..squarings {
        result = complex_gemm(&result, &result);
    }
    result
}

/// One Strang split step (convenience wrapper; reuse [`StrangPropagator`]
/// when stepping repeatedly).
pub fn strang_step(
    q: &HermitianOperator,
    state: &ReferenceState,
    w: &InteractionPotential,
    tau: f64,
    mode: MeanFieldMode,
) -> Result<HermitianOperator> {
    if !(tau > 0.0) {
        return Err(CoreError::Invalid(format!("step size {tau} must be positive")));
    }
    StrangPropagator::new(q.as_matrix().grid().clone()).step(q, state, w, tau, mode)
}

/// Propagates `Q` to `t_final` (either sign) by repeated split steps,
/// recording the diagnostic ledger at the configured stride. A trailing
/// partial step covers any remainder of `t_final` that is not a whole
/// multiple of the step size.
pub fn propagate(
    q0: &HermitianOperator,
    state: &ReferenceState,
    w: &InteractionPotential,
    config: &PropagatorConfig,
    t_final: f64,
    ledger_options: &LedgerOptions,
) -> Result<TrajectoryRecord> {
    config.validate()?;
    if !t_final.is_finite() {
        return Err(CoreError::Invalid("final time must be finite".into()));
    }
    let grid = q0.as_matrix().grid().clone();
    let propagator = StrangPropagator::new(grid);

    let mut record = TrajectoryRecord {
        times: Vec::new(),
        snapshots: Vec::new(),
        potentials: Vec::new(),
        ledgers: Vec::new(),
        integrator: "strang",
        steps_taken: 0,
        picard: None,
    };
    record.push(0.0, state, q0, w, ledger_options)?;
    if t_final == 0.0 {
        return Ok(record);
    }

    let direction = t_final.signum();
    let total = t_final.abs();
    let whole_steps = (total / config.tau + 1e-12).floor() as usize;
    let remainder = total - whole_steps as f64 * config.tau;
    let has_partial = remainder > 1e-12 * config.tau.max(1.0);

    let mut q = q0.clone();
    let mut t = 0.0f64;
    let mut steps = 0usize;
    let total_steps = whole_steps + usize::from(has_partial);
    for step_idx in 0..total_steps {
        let dt = if step_idx < whole_steps {
            config.tau
        } else {
            remainder
        };
        q = propagator.step(&q, state, w, direction * dt, config.mode)?;
        t += direction * dt;
        steps += 1;
        if !q.as_matrix().max_entry().is_finite() {
            return Err(CoreError::BlowUp(format!("non-finite entries at t = {t}")));
        }
        let last = step_idx + 1 == total_steps;
        if last || steps % config.record_stride == 0 {
            let violation = state.constraint_violation(&q)?;
            if violation > CLAMP_TOL {
                return Err(CoreError::BlowUp(format!(
                    "constraint violation {violation:.3e} at t = {t}"
                )));
            }
            record.push(t, state, &q, w, ledger_options)?;
        }
    }
    record.steps_taken = steps;
    Ok(record)
}

fn s2_distance_max(a: &[HermitianOperator], b: &[HermitianOperator]) -> Result<f64> {
    let mut worst = 0.0f64;
    for (x, y) in a.iter().zip(b) {
        worst = worst.max(x.as_matrix().s2_distance(y.as_matrix())?);
    }
    Ok(worst)
}

/// Picard iteration on the Duhamel formula over a short horizon:
/// `Q^{m+1}(t) = e^{it Delta} Q0 e^{-it Delta}
///   - i int_0^t e^{i(t-s) Delta} [V^m(s), gamma_f + Q^m(s)] e^{-i(t-s) Delta} ds`
/// on equispaced nodes with cumulative composite Simpson quadrature, iterated
/// until the maximum S^2 increment over the nodes drops below `tol`.
pub fn picard_duhamel_solve(
    q0: &HermitianOperator,
    state: &ReferenceState,
    w: &InteractionPotential,
    horizon: f64,
    nodes: usize,
    tol: f64,
    max_iter: usize,
    ledger_options: &LedgerOptions,
) -> Result<TrajectoryRecord> {
    if !(horizon > 0.0) {
        return Err(CoreError::Invalid(format!("horizon {horizon} must be positive")));
    }
    if nodes < 2 {
        return Err(CoreError::InsufficientNodes(format!(
            "Picard needs at least 2 nodes, got {nodes}"
        )));
    }
    if !(tol > 0.0) {
        return Err(CoreError::Invalid("tolerance must be positive".into()));
    }
    let grid = q0.as_matrix().grid().clone();
    let h = horizon / (nodes - 1) as f64;
    let times: Vec<f64> = (0..nodes).map(|i| i as f64 * h).collect();

    // Q^0: the free flow of Q0.
    let mut iterate: Vec<HermitianOperator> =
        times.iter().map(|&t| q0.free_evolve(t)).collect();

    let mut stats = PicardStats::default();
    let mut converged = false;
    for _ in 0..max_iter {
        // Interaction-picture integrand at each node:
        // X(s) = e^{-is Delta} [V(s), gamma_f + Q(s)] e^{is Delta}.
        let mut integrand: Vec<MatrixOperator> = Vec::with_capacity(nodes);
        for (i, q) in iterate.iter().enumerate() {
            let v = convolve(w, &density_of(q))?;
            let v_op = potential_operator(&v);
            let gamma = state.gamma_with(q)?;
            let c = commutator(v_op.as_matrix(), gamma.as_matrix())?;
            integrand.push(c.free_evolve(-times[i]));
        }
        let integrals = cumulative_simpson(&grid, &integrand, h)?;
        let mut next: Vec<HermitianOperator> = Vec::with_capacity(nodes);
        for (i, integral) in integrals.iter().enumerate() {
            let x = q0
                .as_matrix()
                .add(&integral.scaled(C64::new(0.0, -1.0)))?;
            next.push(HermitianOperator::symmetrize(x.free_evolve(times[i])));
        }
        let increment = s2_distance_max(&next, &iterate)?;
        stats.increments.push(increment);
        stats.iterations += 1;
        iterate = next;
        if increment < tol {
            converged = true;
            break;
        }
    }
    if !converged {
        let last = *stats.increments.last().unwrap_or(&f64::NAN);
        return Err(CoreError::PicardDiverged {
            increment: last,
            iterations: stats.iterations,
        });
    }

    let mut record = TrajectoryRecord {
        times: Vec::new(),
        snapshots: Vec::new(),
        potentials: Vec::new(),
        ledgers: Vec::new(),
        integrator: "picard",
        steps_taken: nodes - 1,
        picard: Some(stats),
    };
    for (t, q) in times.iter().zip(&iterate) {
        record.push(*t, state, q, w, ledger_options)?;
    }
    Ok(record)
}

/// Cumulative integrals `I_i = int_0^{t_i} g(s) ds` of matrix-valued node
/// samples on an equispaced mesh, by composite Simpson rules. The segment
/// ending at an odd node is integrated with the parabola through its three
/// nearest nodes.
fn cumulative_simpson(
    grid: &Grid,
    g: &[MatrixOperator],
    h: f64,
) -> Result<Vec<MatrixOperator>> {
    let n = g.len();
    let mut out = Vec::with_capacity(n);
    out.push(MatrixOperator::zeros(grid.clone()));
    for i in 1..n {
        let segment = if i % 2 == 1 {
            if i + 1 < n {
                // int_{t_{i-1}}^{t_i} via the parabola through i-1, i, i+1.
                g[i - 1]
                    .scaled(C64::new(5.0 * h / 12.0, 0.0))
                    .add(&g[i].scaled(C64::new(8.0 * h / 12.0, 0.0)))?
                    .add(&g[i + 1].scaled(C64::new(-h / 12.0, 0.0)))?
            } else {
                // Final odd segment: parabola through i-2, i-1, i.
                g[i]
                    .scaled(C64::new(5.0 * h / 12.0, 0.0))
                    .add(&g[i - 1].scaled(C64::new(8.0 * h / 12.0, 0.0)))?
                    .add(&g[i - 2].scaled(C64::new(-h / 12.0, 0.0)))?
            }
        } else {
            // int_{t_{i-1}}^{t_i} as the second half of Simpson on
            // [t_{i-2}, t_i] minus the first half already accumulated; use
            // the equivalent direct parabola through i-2, i-1, i.
            g[i]
                .scaled(C64::new(5.0 * h / 12.0, 0.0))
                .add(&g[i - 1].scaled(C64::new(8.0 * h / 12.0, 0.0)))?
                .add(&g[i - 2].scaled(C64::new(-h / 12.0, 0.0)))?
        };
        out.push(out[i - 1].add(&segment)?);
    }
    Ok(out)
}

#[derive(Debug, Clone)]
pub struct WaveOperator {
    value: MatrixOperator,
    order: usize,
    unitarity_defect: f64,
    last_term_magnitude: f64,
}

impl WaveOperator {
    pub fn value(&self) -> &MatrixOperator {
        &self.value
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn unitarity_defect(&self) -> f64 {
        self.unitarity_defect
    }

    pub fn last_term_magnitude(&self) -> f64 {
        self.last_term_magnitude
    }
}

/// Truncated Dyson series for the wave operator on `[t0, t]`:
/// `W = 1 + sum_{n=1}^{n_max} W^(n)` with
/// `W^(n)(t) = -i int_{t0}^t e^{i(t0-s) Delta} V(s) e^{-i(t0-s) Delta} W^(n-1)(s) ds`
/// by cumulative trapezoid quadrature on the supplied potential nodes.
pub fn dyson_wave_operator(
    v_path: &[(f64, PotentialField)],
    t: f64,
    t0: f64,
    n_max: usize,
    tail_tol: Option<f64>,
) -> Result<WaveOperator> {
    if n_max < 1 {
        return Err(CoreError::Invalid("Dyson order must be at least 1".into()));
    }
    if v_path.len() < 2 {
        return Err(CoreError::InsufficientNodes(
            "Dyson quadrature needs at least 2 potential nodes".into(),
        ));
    }
    let grid = v_path[0].1.grid().clone();
    let first = v_path[0].0;
    let last = v_path[v_path.len() - 1].0;
    let eps = 1e-9 * (1.0 + (t - t0).abs());
    if (first - t0).abs() > eps || (last - t).abs() > eps {
        return Err(CoreError::InsufficientNodes(format!(
            "potential path [{first}, {last}] does not cover [{t0}, {t}]"
        )));
    }

    // Interaction-picture potentials at the nodes.
    let v_tilde: Vec<MatrixOperator> = v_path
        .iter()
        .map(|(s, v)| {
            potential_operator(v)
                .as_matrix()
                .free_evolve(t0 - *s)
        })
        .collect();
    let times: Vec<f64> = v_path.iter().map(|(s, _)| *s).collect();

    let nodes = v_path.len();
    let identity = MatrixOperator::identity(grid.clone());
    // W^(n-1) at each node, starting from the identity.
    let mut prev: Vec<MatrixOperator> = vec![identity.clone(); nodes];
    let mut total = identity.clone();
    let mut last_term = 0.0;
    for _order in 1..=n_max {
        // g(s) = -i V~(s) W^(n-1)(s); cumulative trapezoid.
        let mut current: Vec<MatrixOperator> = Vec::with_capacity(nodes);
        current.push(MatrixOperator::zeros(grid.clone()));
        let mut g_prev = v_tilde[0].mul(&prev[0])?.scaled(C64::new(0.0, -1.0));
        for i in 1..nodes {
            let g_i = v_tilde[i].mul(&prev[i])?.scaled(C64::new(0.0, -1.0));
            let h = times[i] - times[i - 1];
            let segment = g_prev
                .add(&g_i)?
                .scaled(C64::new(0.5 * h, 0.0));
            current.push(current[i - 1].add(&segment)?);
            g_prev = g_i;
        }
        total = total.add(&current[nodes - 1])?;
        last_term = current[nodes - 1].schatten_norm(2.0)?;
        prev = current;
    }
    if let Some(tol) = tail_tol {
        if last_term > tol {
            return Err(CoreError::DysonTail {
                tail: last_term,
                tol,
            });
        }
    }
    let defect = total
        .adjoint()
        .mul(&total)?
        .sub(&identity)?
        .schatten_norm(2.0)?;
    Ok(WaveOperator {
        value: total,
        order: n_max,
        unitarity_defect: defect,
        last_term_magnitude: last_term,
    })
}

/// Rebuilds the perturbation from a wave operator:
/// `Q(t) = e^{it Delta} W (gamma_f + Q0) W* e^{-it Delta} - gamma_f`.
pub fn reconstruct_from_wave_operator(
    w_op: &WaveOperator,
    state: &ReferenceState,
    q0: &HermitianOperator,
    t: f64,
) -> Result<HermitianOperator> {
    if !w_op.value.grid().same_grid(state.grid()) {
        return Err(CoreError::GridMismatch);
    }
    let gamma = state.gamma_with(q0)?;
    let conjugated = w_op
        .value
        .mul(gamma.as_matrix())?
        .mul(&w_op.value.adjoint())?
        .free_evolve(t);
    let mut data = conjugated.into_data();
    for (k, &g) in state.occupations().iter().enumerate() {
        data[(k, k)] -= C64::new(g, 0.0);
    }
    Ok(HermitianOperator::symmetrize(MatrixOperator::new(
        state.grid().clone(),
        data,
    )?))
}

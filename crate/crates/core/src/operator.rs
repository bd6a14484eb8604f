//! Dense operator algebra in the plane-wave basis.

use nalgebra::DMatrix;
use num_complex::Complex64 as C64;

use crate::error::{CoreError, Result};
use crate::lattice::Grid;

/// Relative entrywise tolerance for declaring a matrix Hermitian.
pub const HERMITICITY_TOL: f64 = 1e-12;

/// Complex matrix product assembled from four real products.  The real
/// kernel is far better optimized than the complex one, so this is the
/// preferred path for large dense products in the propagators.
pub(crate) fn complex_gemm(a: &DMatrix<C64>, b: &DMatrix<C64>) -> DMatrix<C64> {
    let (m, k) = a.shape();
    let (k2, n) = b.shape();
    debug_assert_eq!(k, k2);
    let ar = DMatrix::<f64>::from_fn(m, k, |i, j| a[(i, j)].re);
    let ai = DMatrix::<f64>::from_fn(m, k, |i, j| a[(i, j)].im);
    let br = DMatrix::<f64>::from_fn(k, n, |i, j| b[(i, j)].re);
    let bi = DMatrix::<f64>::from_fn(k, n, |i, j| b[(i, j)].im);
    let cr = &ar * &br - &ai * &bi;
    let ci = &ar * &bi + &ai * &br;
    DMatrix::<C64>::from_fn(m, n, |i, j| C64::new(cr[(i, j)], ci[(i, j)]))
}
/// Absolute tolerance (scaled by N) on the S^2 idempotency defect of projectors.
pub const PROJECTOR_TOL: f64 = 1e-10;
/// Eigenvalues of density matrices may stray this far outside their domain
/// before evaluation becomes a hard error; smaller excursions are clamped.
pub const CLAMP_TOL: f64 = 1e-8;

const EIGEN_EPS: f64 = 1e-13;
const EIGEN_MAX_ITER: usize = 10_000;

/// Dense complex operator `A_{k,k'}` in the orthonormal plane-wave basis.
#[derive(Debug, Clone)]
pub struct MatrixOperator {
    grid: Grid,
    data: DMatrix<C64>,
}

impl MatrixOperator {
    pub fn new(grid: Grid, data: DMatrix<C64>) -> Result<Self> {
        let n = grid.mode_count();
        if data.nrows() != n || data.ncols() != n {
            return Err(CoreError::Invalid(format!(
                "matrix is {}x{} but the grid has {} modes",
                data.nrows(),
                data.ncols(),
                n
            )));
        }
        Ok(Self { grid, data })
    }

    pub fn zeros(grid: Grid) -> Self {
        let n = grid.mode_count();
        Self {
            grid,
            data: DMatrix::zeros(n, n),
        }
    }

    pub fn identity(grid: Grid) -> Self {
        let n = grid.mode_count();
        Self {
            grid,
            data: DMatrix::identity(n, n),
        }
    }

    /// Rank-one matrix unit `|e_row><e_col|`.
    pub fn basis_pair(grid: Grid, row: usize, col: usize) -> Result<Self> {
        let n = grid.mode_count();
        for index in [row, col] {
            if index >= n {
                return Err(CoreError::IndexOutOfRange { index, count: n });
            }
        }
        let mut op = Self::zeros(grid);
        op.data[(row, col)] = C64::new(1.0, 0.0);
        Ok(op)
    }

    pub fn from_real_diagonal(grid: Grid, diag: &[f64]) -> Result<Self> {
        let n = grid.mode_count();
        if diag.len() != n {
            return Err(CoreError::Invalid(format!(
                "diagonal has {} entries, grid has {} modes",
                diag.len(),
                n
            )));
        }
        let mut op = Self::zeros(grid);
        for (i, &v) in diag.iter().enumerate() {
            op.data[(i, i)] = C64::new(v, 0.0);
        }
        Ok(op)
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn data(&self) -> &DMatrix<C64> {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut DMatrix<C64> {
        &mut self.data
    }

    pub fn into_data(self) -> DMatrix<C64> {
        self.data
    }

    pub fn dim(&self) -> usize {
        self.data.nrows()
    }

    pub fn entry(&self, row: usize, col: usize) -> C64 {
        self.data[(row, col)]
    }

    pub fn trace(&self) -> C64 {
        self.data.trace()
    }

    pub fn adjoint(&self) -> Self {
        Self {
            grid: self.grid.clone(),
            data: self.data.adjoint(),
        }
    }

    pub fn scaled(&self, factor: C64) -> Self {
        Self {
            grid: self.grid.clone(),
            data: &self.data * factor,
        }
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.check_grid(other)?;
        Ok(Self {
            grid: self.grid.clone(),
            data: &self.data + &other.data,
        })
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.check_grid(other)?;
        Ok(Self {
            grid: self.grid.clone(),
            data: &self.data - &other.data,
        })
    }

    pub fn mul(&self, other: &Self) -> Result<Self> {
        self.check_grid(other)?;
        Ok(Self {
            grid: self.grid.clone(),
            data: &self.data * &other.data,
        })
    }

    pub fn check_grid(&self, other: &Self) -> Result<()> {
        if self.grid.same_grid(&other.grid) {
            Ok(())
        } else {
            Err(CoreError::GridMismatch)
        }
    }

    /// Largest entry magnitude; the scale used by tolerance checks.
    pub fn max_entry(&self) -> f64 {
        self.data.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    /// Entrywise Hermiticity defect `max |A_{k,k'} - conj(A_{k',k})|`.
    pub fn hermiticity_defect(&self) -> f64 {
        let n = self.dim();
        let mut defect = 0.0f64;
        for i in 0..n {
            for j in i..n {
                defect = defect.max((self.data[(i, j)] - self.data[(j, i)].conj()).norm());
            }
        }
        defect
    }

    /// Free evolution `e^{it Delta} A e^{-it Delta}`: the entrywise phase
    /// `e^{-it(|k|^2 - |k'|^2)}`.
    pub fn free_evolve(&self, t: f64) -> Self {
        let disp = self.grid.dispersion_values();
        let mut data = self.data.clone();
        for col in 0..data.ncols() {
            for row in 0..data.nrows() {
                let delta = disp[row] - disp[col];
                if delta != 0.0 {
                    data[(row, col)] *= C64::from_polar(1.0, -t * delta);
                }
            }
        }
        Self {
            grid: self.grid.clone(),
            data,
        }
    }

    pub fn singular_values(&self) -> Vec<f64> {
        self.data.clone().singular_values().iter().cloned().collect()
    }

    /// Schatten norm `(tr |A|^p)^{1/p}`; `p = inf` gives the operator norm.
    pub fn schatten_norm(&self, p: f64) -> Result<f64> {
        if p.is_nan() || p < 1.0 {
            return Err(CoreError::InvalidSchattenExponent(p));
        }
        if p == 2.0 {
            // Frobenius route avoids an SVD for the most common exponent.
            return Ok(self.data.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt());
        }
        let sv = self.singular_values();
        if p.is_infinite() {
            return Ok(sv.into_iter().fold(0.0, f64::max));
        }
        Ok(sv.into_iter().map(|s| s.powf(p)).sum::<f64>().powf(1.0 / p))
    }

    /// Schatten-Sobolev norm `|| A (1 - Delta)^{s/2} ||_{S^p}`, realized by
    /// scaling column k' with `(1 + |k'|^2)^{s/2}`.
    pub fn sobolev_schatten_norm(&self, p: f64, s: f64) -> Result<f64> {
        if s < 0.0 {
            return Err(CoreError::Invalid(format!(
                "Sobolev exponent s = {s} must be nonnegative"
            )));
        }
        if s == 0.0 {
            return self.schatten_norm(p);
        }
        let disp = self.grid.dispersion_values();
        let mut scaled = self.clone();
        for (col, &k2) in disp.iter().enumerate() {
            let w = C64::new((1.0 + k2).powf(s / 2.0), 0.0);
            for row in 0..scaled.data.nrows() {
                scaled.data[(row, col)] *= w;
            }
        }
        scaled.schatten_norm(p)
    }

    /// Distance in S^2; the workhorse metric of the cross-checks.
    pub fn s2_distance(&self, other: &Self) -> Result<f64> {
        self.sub(other)?.schatten_norm(2.0)
    }
}

/// Commutator `[A, B] = AB - BA`.
pub fn commutator(a: &MatrixOperator, b: &MatrixOperator) -> Result<MatrixOperator> {
    a.check_grid(b)?;
    let data = &a.data * &b.data - &b.data * &a.data;
    Ok(MatrixOperator {
        grid: a.grid.clone(),
        data,
    })
}

/// Hermitian refinement; construction verifies the entrywise defect.
#[derive(Debug, Clone)]
pub struct HermitianOperator(MatrixOperator);

impl HermitianOperator {
    pub fn new(op: MatrixOperator) -> Result<Self> {
        let tol = HERMITICITY_TOL * (1.0 + op.max_entry());
        let defect = op.hermiticity_defect();
        if defect > tol {
            return Err(CoreError::NotHermitian { defect, tol });
        }
        Ok(Self(op))
    }

    /// Wraps without checking; for operators Hermitian by construction.
    pub fn new_unchecked(op: MatrixOperator) -> Self {
        Self(op)
    }

    /// Symmetrizes `(A + A*)/2` and wraps; for results that are Hermitian up
    /// to roundoff.
    pub fn symmetrize(op: MatrixOperator) -> Self {
        let sym = (&op.data + op.data.adjoint()) * C64::new(0.5, 0.0);
        Self(MatrixOperator {
            grid: op.grid,
            data: sym,
        })
    }

    pub fn zeros(grid: Grid) -> Self {
        Self(MatrixOperator::zeros(grid))
    }

    pub fn from_real_diagonal(grid: Grid, diag: &[f64]) -> Result<Self> {
        MatrixOperator::from_real_diagonal(grid, diag).map(Self)
    }

    pub fn as_matrix(&self) -> &MatrixOperator {
        &self.0
    }

    pub fn into_matrix(self) -> MatrixOperator {
        self.0
    }

    pub fn free_evolve(&self, t: f64) -> Self {
        Self(self.0.free_evolve(t))
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.0.add(&other.0).map(Self)
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.0.sub(&other.0).map(Self)
    }

    pub fn scaled_real(&self, factor: f64) -> Self {
        Self(self.0.scaled(C64::new(factor, 0.0)))
    }

    /// Eigendecomposition into ascending eigenvalues and the unitary of
    /// eigenvectors (columns).
    pub fn eigen(&self) -> Result<(Vec<f64>, DMatrix<C64>)> {
        // Flush entries that are negligible relative to the largest one.
        // They perturb the spectrum far below machine precision, but their
        // extreme dynamic range (e.g. 1e-120 next to 0.5) can break the QR
        // iteration of the solver.
        let scale = self.0.max_entry();
        let flush = scale * 1e-20;
        let mut data = self.0.data.clone();
        if flush > 0.0 {
            for z in data.iter_mut() {
                if z.norm() < flush {
                    *z = C64::new(0.0, 0.0);
                }
            }
        }
        let se = data
            .try_symmetric_eigen(EIGEN_EPS, EIGEN_MAX_ITER)
            .ok_or(CoreError::EigenFailure)?;
        let mut order: Vec<usize> = (0..se.eigenvalues.len()).collect();
        order.sort_by(|&a, &b| se.eigenvalues[a].total_cmp(&se.eigenvalues[b]));
        let values: Vec<f64> = order.iter().map(|&i| se.eigenvalues[i]).collect();
        let n = self.0.dim();
        let mut vectors = DMatrix::zeros(n, n);
        for (col, &src) in order.iter().enumerate() {
            vectors.set_column(col, &se.eigenvectors.column(src));
        }
        Ok((values, vectors))
    }

    pub fn eigenvalues(&self) -> Result<Vec<f64>> {
        self.eigen().map(|(v, _)| v)
    }

    /// Functional calculus `g(A)` over the closed interval `domain`.
    /// Eigenvalues outside the domain by at most the clamp tolerance are
    /// clamped to the boundary; larger excursions are errors.
    pub fn apply_scalar_function(
        &self,
        domain: (f64, f64),
        g: impl Fn(f64) -> f64,
    ) -> Result<HermitianOperator> {
        let (lo, hi) = domain;
        let (values, vectors) = self.eigen()?;
        let mut mapped = Vec::with_capacity(values.len());
        for &v in &values {
            mapped.push(C64::new(g(clamp_to_domain(v, lo, hi)?), 0.0));
        }
        let diag = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(mapped));
        let data = &vectors * diag * vectors.adjoint();
        Ok(Self::symmetrize(MatrixOperator {
            grid: self.0.grid.clone(),
            data,
        }))
    }

    /// Orthogonal projector onto the eigenspaces with eigenvalue >= lambda.
    pub fn spectral_projector_above(&self, lambda: f64) -> Result<SpectralProjector> {
        let (values, vectors) = self.eigen()?;
        let n = self.0.dim();
        let mut data = DMatrix::zeros(n, n);
        for (i, &v) in values.iter().enumerate() {
            if v >= lambda {
                let col = vectors.column(i);
                // data += v v^*
                for r in 0..n {
                    for c in 0..n {
                        data[(r, c)] += col[r] * col[c].conj();
                    }
                }
            }
        }
        let rank = values.iter().filter(|&&v| v >= lambda).count();
        SpectralProjector::new(
            Self::symmetrize(MatrixOperator {
                grid: self.0.grid.clone(),
                data,
            }),
            rank,
        )
    }
}

pub(crate) fn clamp_to_domain(value: f64, lo: f64, hi: f64) -> Result<f64> {
    if value < lo - CLAMP_TOL || value > hi + CLAMP_TOL {
        return Err(CoreError::DomainViolation { value, lo, hi });
    }
    Ok(value.clamp(lo, hi))
}

/// Orthogonal projector with a verified idempotency defect.
#[derive(Debug, Clone)]
pub struct SpectralProjector {
    op: HermitianOperator,
    rank: usize,
}

impl SpectralProjector {
    pub fn new(op: HermitianOperator, rank: usize) -> Result<Self> {
        let sq = op.as_matrix().mul(op.as_matrix())?;
        let defect = sq.sub(op.as_matrix())?.schatten_norm(2.0)?;
        let tol = PROJECTOR_TOL * op.as_matrix().dim() as f64;
        if defect > tol {
            return Err(CoreError::NotIdempotent { defect, tol });
        }
        Ok(Self { op, rank })
    }

    /// Diagonal 0/1 projector from an indicator over modes.
    pub fn from_indicator(grid: Grid, keep: impl Fn(usize) -> bool) -> Self {
        let n = grid.mode_count();
        let diag: Vec<f64> = (0..n).map(|i| if keep(i) { 1.0 } else { 0.0 }).collect();
        let rank = diag.iter().filter(|&&v| v == 1.0).count();
        let op = HermitianOperator::from_real_diagonal(grid, &diag)
            .expect("diagonal length matches grid");
        Self { op, rank }
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn as_hermitian(&self) -> &HermitianOperator {
        &self.op
    }

    pub fn as_matrix(&self) -> &MatrixOperator {
        self.op.as_matrix()
    }

    /// Two-sided compression `P A P`.
    pub fn compress(&self, a: &MatrixOperator) -> Result<MatrixOperator> {
        self.as_matrix().mul(a)?.mul(self.as_matrix())
    }
}

/// Sharp momentum cutoffs `Pi_mu^- = 1(|k|^2 <= mu)` and `Pi_mu^+ = 1(|k|^2 >= mu)`.
pub fn laplacian_spectral_projectors(grid: &Grid, mu: f64) -> (SpectralProjector, SpectralProjector) {
    let below = SpectralProjector::from_indicator(grid.clone(), |i| grid.dispersion(i) <= mu);
    let above = SpectralProjector::from_indicator(grid.clone(), |i| grid.dispersion(i) >= mu);
    (below, above)
}

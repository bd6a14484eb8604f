//! Momentum lattice of a d-dimensional periodic box.
//!
//! Modes are `k_n = (2 pi / L) n` with `n` ranging over `{-M/2, ..., M/2 - 1}`
//! in every dimension. The flat index enumerates the shifted integer vector
//! `n + M/2` in row-major order, which makes the index map a bijection.

use std::sync::Arc;

use crate::error::{CoreError, Result};

pub const MAX_DIM: usize = 3;

/// Shared handle to an immutable momentum grid.
pub type Grid = Arc<MomentumGrid>;

#[derive(Debug, Clone)]
pub struct MomentumGrid {
    dim: usize,
    box_len: f64,
    modes_per_dim: usize,
    modes: Vec<[i64; MAX_DIM]>,
    dispersion: Vec<f64>,
}

/// Builds the truncated plane-wave lattice for a periodic box of side `box_len`
/// with `modes_per_dim` modes per dimension.
pub fn build_grid(dim: usize, box_len: f64, modes_per_dim: usize) -> Result<Grid> {
    MomentumGrid::new(dim, box_len, modes_per_dim).map(Arc::new)
}

impl MomentumGrid {
    pub fn new(dim: usize, box_len: f64, modes_per_dim: usize) -> Result<Self> {
        if !(1..=MAX_DIM).contains(&dim) {
            return Err(CoreError::InvalidGrid(format!(
                "dimension {dim} outside {{1, 2, 3}}"
            )));
        }
        if !(box_len.is_finite() && box_len > 0.0) {
            return Err(CoreError::InvalidGrid(format!(
                "box side {box_len} must be positive"
            )));
        }
        if modes_per_dim < 2 || modes_per_dim % 2 != 0 {
            return Err(CoreError::InvalidGrid(format!(
                "modes per dimension {modes_per_dim} must be even and >= 2"
            )));
        }
        let m = modes_per_dim as i64;
        let count = modes_per_dim.pow(dim as u32);
        let unit = 2.0 * std::f64::consts::PI / box_len;
        let mut modes = Vec::with_capacity(count);
        let mut dispersion = Vec::with_capacity(count);
        for flat in 0..count {
            let mut n = [0i64; MAX_DIM];
            let mut rest = flat;
            for axis in (0..dim).rev() {
                n[axis] = (rest % modes_per_dim) as i64 - m / 2;
                rest /= modes_per_dim;
            }
            let k2 = n[..dim]
                .iter()
                .map(|&ni| {
                    let k = unit * ni as f64;
                    k * k
                })
                .sum();
            modes.push(n);
            dispersion.push(k2);
        }
        Ok(Self {
            dim,
            box_len,
            modes_per_dim,
            modes,
            dispersion,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn box_len(&self) -> f64 {
        self.box_len
    }

    pub fn modes_per_dim(&self) -> usize {
        self.modes_per_dim
    }

    /// Total mode count `N = M^d`.
    pub fn mode_count(&self) -> usize {
        self.modes.len()
    }

    /// Box volume `L^d`.
    pub fn volume(&self) -> f64 {
        self.box_len.powi(self.dim as i32)
    }

    /// Integer mode vector at a flat index.
    pub fn mode(&self, index: usize) -> &[i64] {
        &self.modes[index][..self.dim]
    }

    /// Momentum vector `(2 pi / L) n` at a flat index.
    pub fn momentum(&self, index: usize) -> [f64; MAX_DIM] {
        let unit = 2.0 * std::f64::consts::PI / self.box_len;
        let mut k = [0.0; MAX_DIM];
        for (axis, ki) in k.iter_mut().enumerate().take(self.dim) {
            *ki = unit * self.modes[index][axis] as f64;
        }
        k
    }

    /// Dispersion symbol `|k|^2` at a flat index.
    pub fn dispersion(&self, index: usize) -> f64 {
        self.dispersion[index]
    }

    pub fn dispersion_values(&self) -> &[f64] {
        &self.dispersion
    }

    pub fn max_dispersion(&self) -> f64 {
        self.dispersion.iter().cloned().fold(0.0, f64::max)
    }

    /// Flat index of an integer mode vector, `None` when outside the box.
    pub fn flat_index(&self, n: &[i64]) -> Option<usize> {
        debug_assert_eq!(n.len(), self.dim);
        let m = self.modes_per_dim as i64;
        let mut flat = 0usize;
        for &ni in n {
            if ni < -m / 2 || ni >= m / 2 {
                return None;
            }
            flat = flat * self.modes_per_dim + (ni + m / 2) as usize;
        }
        Some(flat)
    }

    /// Flat index of `n + q` for two valid flat indices, `None` when the sum
    /// leaves the box. Out-of-box sums are dropped, never wrapped.
    pub fn shift_index(&self, n: usize, q: usize) -> Result<Option<usize>> {
        let count = self.mode_count();
        for index in [n, q] {
            if index >= count {
                return Err(CoreError::IndexOutOfRange { index, count });
            }
        }
        let mut sum = [0i64; MAX_DIM];
        for axis in 0..self.dim {
            sum[axis] = self.modes[n][axis] + self.modes[q][axis];
        }
        Ok(self.flat_index(&sum[..self.dim]))
    }

    /// Flat index of `-n`, `None` for the unpaired Nyquist modes.
    pub fn negation_index(&self, index: usize) -> Option<usize> {
        let mut neg = [0i64; MAX_DIM];
        for axis in 0..self.dim {
            neg[axis] = -self.modes[index][axis];
        }
        self.flat_index(&neg[..self.dim])
    }

    /// Position sample `x_j = j L / M` for the row-major position index.
    pub fn position(&self, index: usize) -> [f64; MAX_DIM] {
        let h = self.box_len / self.modes_per_dim as f64;
        let mut x = [0.0; MAX_DIM];
        let mut rest = index;
        for axis in (0..self.dim).rev() {
            x[axis] = h * (rest % self.modes_per_dim) as f64;
            rest /= self.modes_per_dim;
        }
        x
    }

    pub fn same_grid(&self, other: &MomentumGrid) -> bool {
        self.dim == other.dim
            && self.modes_per_dim == other.modes_per_dim
            && self.box_len == other.box_len
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_bad_parameters() {
        assert!(MomentumGrid::new(0, 1.0, 4).is_err());
        assert!(MomentumGrid::new(4, 1.0, 4).is_err());
        assert!(MomentumGrid::new(1, -1.0, 4).is_err());
        assert!(MomentumGrid::new(1, 1.0, 3).is_err());
        assert!(MomentumGrid::new(1, 1.0, 0).is_err());
    }

    #[test]
    fn unit_box_modes() {
        // L = 2 pi makes k_n = n.
        let g = MomentumGrid::new(1, 2.0 * std::f64::consts::PI, 4).unwrap();
        let modes: Vec<i64> = (0..4).map(|i| g.mode(i)[0]).collect();
        assert_eq!(modes, vec![-2, -1, 0, 1]);
        for i in 0..4 {
            let k = g.momentum(i)[0];
            assert!((k - g.mode(i)[0] as f64).abs() < 1e-14);
        }
    }

    #[test]
    fn two_dim_dispersion() {
        let g = MomentumGrid::new(2, 2.0 * std::f64::consts::PI, 2).unwrap();
        assert_eq!(g.mode_count(), 4);
        let mut disp: Vec<f64> = g.dispersion_values().to_vec();
        disp.sort_by(f64::total_cmp);
        assert_eq!(disp, vec![0.0, 1.0, 1.0, 2.0]);
    }

    #[test]
    fn small_box_dispersion() {
        // Hand evaluation of k_n = 2 pi n / L with L = 1, M = 2.
        let g = MomentumGrid::new(1, 1.0, 2).unwrap();
        let pi2 = 2.0 * std::f64::consts::PI;
        assert_eq!(g.mode(0)[0], -1);
        assert_eq!(g.mode(1)[0], 0);
        assert!((g.momentum(0)[0] + pi2).abs() < 1e-14);
        assert!((g.dispersion(0) - pi2 * pi2).abs() < 1e-10);
        assert_eq!(g.dispersion(1), 0.0);
    }

    #[test]
    fn shift_index_cases() {
        let g = MomentumGrid::new(1, 2.0 * std::f64::consts::PI, 4).unwrap();
        let idx = |n: i64| g.flat_index(&[n]).unwrap();
        assert_eq!(g.shift_index(idx(0), idx(1)).unwrap(), Some(idx(1)));
        // Mode 2 lies outside {-2..1}.
        assert_eq!(g.shift_index(idx(1), idx(1)).unwrap(), None);
        assert!(g.shift_index(7, 0).is_err());

        let g2 = MomentumGrid::new(2, 2.0 * std::f64::consts::PI, 2).unwrap();
        let a = g2.flat_index(&[-1, 0]).unwrap();
        let b = g2.flat_index(&[1, 0]);
        assert!(b.is_none()); // 1 is outside {-1, 0}
        let q = g2.flat_index(&[0, 0]).unwrap();
        assert_eq!(g2.shift_index(a, q).unwrap(), Some(a));
    }

    #[test]
    fn shift_recovers_difference() {
        let g = MomentumGrid::new(2, 1.7, 4).unwrap();
        for a in 0..g.mode_count() {
            for b in 0..g.mode_count() {
                let diff = [g.mode(b)[0] - g.mode(a)[0], g.mode(b)[1] - g.mode(a)[1]];
                if let Some(q) = g.flat_index(&diff) {
                    assert_eq!(g.shift_index(a, q).unwrap(), Some(b));
                }
            }
        }
    }

    #[test]
    fn dispersion_even_under_negation() {
        let g = MomentumGrid::new(3, 2.5, 4).unwrap();
        for i in 0..g.mode_count() {
            if let Some(j) = g.negation_index(i) {
                assert_eq!(g.dispersion(i), g.dispersion(j));
            }
        }
    }
}

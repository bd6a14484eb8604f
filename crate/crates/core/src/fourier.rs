//! Unitary transforms between the plane-wave coefficient basis and the
//! position samples `x_j = j L / M`.
//!
//! The mode axis is ordered by the shifted integer `n + M/2`, so a transform
//! along one axis is an FFT followed by the alternating-sign twist coming from
//! the half-spectrum shift.

use std::sync::Arc;

use num_complex::Complex64 as C64;
use rustfft::{Fft, FftPlanner};

use crate::lattice::MomentumGrid;

pub struct Dft {
    dim: usize,
    m: usize,
    n: usize,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl Dft {
    pub fn new(grid: &MomentumGrid) -> Self {
        let mut planner = FftPlanner::new();
        let m = grid.modes_per_dim();
        Self {
            dim: grid.dim(),
            m,
            n: grid.mode_count(),
            forward: planner.plan_fft_forward(m),
            inverse: planner.plan_fft_inverse(m),
        }
    }

    pub fn len(&self) -> usize {
        self.n
    }

    /// Coefficients -> position samples: `psi_j = N^{-1/2} sum_n c_n e^{i k_n x_j}`.
    pub fn momentum_to_position(&self, data: &mut [C64]) {
        assert_eq!(data.len(), self.n);
        self.apply_axes(data, false);
        let scale = 1.0 / (self.n as f64).sqrt();
        for (j, v) in data.iter_mut().enumerate() {
            *v *= sign(self.digit_sum(j)) * scale;
        }
    }

    /// Position samples -> coefficients; exact inverse of `momentum_to_position`.
    pub fn position_to_momentum(&self, data: &mut [C64]) {
        assert_eq!(data.len(), self.n);
        let scale = 1.0 / (self.n as f64).sqrt();
        for (j, v) in data.iter_mut().enumerate() {
            *v *= sign(self.digit_sum(j)) * scale;
        }
        self.apply_axes(data, true);
    }

    fn digit_sum(&self, mut index: usize) -> usize {
        let mut s = 0;
        for _ in 0..self.dim {
            s += index % self.m;
            index /= self.m;
        }
        s
    }

    fn apply_axes(&self, data: &mut [C64], forward: bool) {
        let fft = if forward { &self.forward } else { &self.inverse };
        let m = self.m;
        let mut line = vec![C64::new(0.0, 0.0); m];
        for axis in 0..self.dim {
            // Row-major layout: stride of `axis` is m^(dim-1-axis).
            let stride = m.pow((self.dim - 1 - axis) as u32);
            let block = stride * m;
            for base in 0..self.n / block {
                for offset in 0..stride {
                    let start = base * block + offset;
                    for (i, slot) in line.iter_mut().enumerate() {
                        *slot = data[start + i * stride];
                    }
                    fft.process(&mut line);
                    for (i, slot) in line.iter().enumerate() {
                        data[start + i * stride] = *slot;
                    }
                }
            }
        }
    }
}

fn sign(parity: usize) -> f64 {
    if parity % 2 == 0 {
        1.0
    } else {
        -1.0
    }
}

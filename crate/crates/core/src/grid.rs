use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{PensError, Result};

/// Uniform periodic grid on the d-torus `[0, L)^d` with `N` points per axis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    dim: usize,
    n: usize,
    length: f64,
}

impl Grid {
    pub fn new(dim: usize, n: usize, length: f64) -> Result<Self> {
        if dim != 2 && dim != 3 {
            return Err(PensError::InvalidGrid(format!("d must be 2 or 3, got {dim}")));
        }
        if n < 8 || !n.is_power_of_two() {
            return Err(PensError::InvalidGrid(format!(
                "N must be a power of two >= 8, got {n}"
            )));
        }
        if !(length.is_finite() && length > 0.0) {
            return Err(PensError::InvalidGrid(format!("L must be positive, got {length}")));
        }
        Ok(Self { dim, n, length })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn length(&self) -> f64 {
        self.length
    }

    /// Physical spacing `L/N`.
    pub fn dx(&self) -> f64 {
        self.length / self.n as f64
    }

    /// Mode spacing `2π/L`.
    pub fn dxi(&self) -> f64 {
        2.0 * PI / self.length
    }

    /// Number of points (and modes) per component.
    pub fn len(&self) -> usize {
        self.n.pow(self.dim as u32)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Quadrature weight `(Δx)^d`.
    pub fn cell_volume(&self) -> f64 {
        self.dx().powi(self.dim as i32)
    }

    /// Spectral quadrature weight `(Δξ)^d`.
    pub fn mode_volume(&self) -> f64 {
        self.dxi().powi(self.dim as i32)
    }

    /// Box volume `L^d`.
    pub fn volume(&self) -> f64 {
        self.length.powi(self.dim as i32)
    }

    /// Largest retained integer index under the 2/3 rule.
    pub fn dealias_cutoff(&self) -> usize {
        self.n / 3
    }

    /// Integer frequency of FFT slot `i`: `0, 1, …, N/2-1, -N/2, …, -1`.
    pub fn frequency_index(&self, i: usize) -> i64 {
        let n = self.n as i64;
        let i = i as i64;
        if i < n / 2 {
            i
        } else {
            i - n
        }
    }

    /// Per-axis wavenumbers `(2π/L)·{0, 1, …, N/2-1, -N/2, …, -1}`.
    pub fn axis_wavenumbers(&self) -> Vec<f64> {
        let dxi = self.dxi();
        (0..self.n).map(|i| self.frequency_index(i) as f64 * dxi).collect()
    }

    /// Multi-index of flat (row-major, last axis fastest) position `flat`.
    pub fn unravel(&self, flat: usize) -> [usize; 3] {
        let mut idx = [0usize; 3];
        let mut rem = flat;
        for axis in (0..self.dim).rev() {
            idx[axis] = rem % self.n;
            rem /= self.n;
        }
        idx
    }

    pub fn ravel(&self, idx: [usize; 3]) -> usize {
        idx[..self.dim].iter().fold(0, |acc, &i| acc * self.n + i)
    }

    /// Flat position of the mode `-ξ` paired with `flat`.
    pub fn mirror(&self, flat: usize) -> usize {
        let idx = self.unravel(flat);
        let mut out = [0usize; 3];
        for axis in 0..self.dim {
            out[axis] = (self.n - idx[axis]) % self.n;
        }
        self.ravel(out)
    }

    /// Physical coordinates of grid point `flat`, `x_j = j·Δx`.
    pub fn point(&self, flat: usize) -> [f64; 3] {
        let idx = self.unravel(flat);
        let dx = self.dx();
        let mut x = [0.0; 3];
        for axis in 0..self.dim {
            x[axis] = idx[axis] as f64 * dx;
        }
        x
    }

    /// Mode vector ξ at flat spectral position `flat`.
    pub fn mode(&self, flat: usize) -> [f64; 3] {
        let idx = self.unravel(flat);
        let dxi = self.dxi();
        let mut xi = [0.0; 3];
        for axis in 0..self.dim {
            xi[axis] = self.frequency_index(idx[axis]) as f64 * dxi;
        }
        xi
    }

    /// Integer multi-index of the mode at `flat`.
    pub fn mode_index(&self, flat: usize) -> [i64; 3] {
        let idx = self.unravel(flat);
        let mut k = [0i64; 3];
        for axis in 0..self.dim {
            k[axis] = self.frequency_index(idx[axis]);
        }
        k
    }

    /// True when some axis sits on the Nyquist slot `-N/2`.
    pub fn is_nyquist(&self, flat: usize) -> bool {
        let idx = self.unravel(flat);
        idx[..self.dim].iter().any(|&i| i == self.n / 2)
    }
}

/// Mode vectors for every spectral slot, in flat FFT order.
pub fn wavenumber_grid(grid: &Grid) -> Vec<[f64; 3]> {
    (0..grid.len()).map(|flat| grid.mode(flat)).collect()
}

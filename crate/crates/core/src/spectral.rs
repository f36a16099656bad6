//! Fourier multipliers, spectral differentiation, Leray projection and
//! 2/3-rule dealiasing.
//!
//! Odd-order derivative symbols vanish on the Nyquist slot `-N/2` of each
//! axis; that mode has no conjugate partner, so `iξ` there would break the
//! real-field symmetry.

use num_complex::Complex64;

use crate::error::{PensError, Result};
use crate::field::SpectralField;
use crate::grid::Grid;

const I: Complex64 = Complex64::new(0.0, 1.0);

/// Precomputed per-mode tables for one grid.
#[derive(Debug, Clone)]
pub struct ModeTables {
    grid: Grid,
    /// ξ_j per axis, with the Nyquist slot zeroed (derivative wavenumbers).
    pub(crate) deriv: Vec<Vec<f64>>,
    /// |ξ|² per mode.
    pub(crate) k2: Vec<f64>,
    /// 1 where all |n_j| ≤ N/3, else 0.
    pub(crate) keep: Vec<bool>,
}

impl ModeTables {
    pub fn new(grid: &Grid) -> Self {
        let n = grid.len();
        let cutoff = grid.dealias_cutoff() as i64;
        let mut deriv = vec![vec![0.0; n]; grid.dim()];
        let mut k2 = vec![0.0; n];
        let mut keep = vec![true; n];
        for flat in 0..n {
            let m = grid.mode(flat);
            let idx = grid.mode_index(flat);
            let raw = grid.unravel(flat);
            for a in 0..grid.dim() {
                deriv[a][flat] = if raw[a] == grid.n() / 2 { 0.0 } else { m[a] };
                k2[flat] += m[a] * m[a];
                if idx[a].abs() > cutoff {
                    keep[flat] = false;
                }
            }
        }
        Self { grid: *grid, deriv, k2, keep }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn k2(&self) -> &[f64] {
        &self.k2
    }

    pub(crate) fn gradient_into(&self, f: &[Complex64], out: &mut [Complex64]) {
        let n = self.grid.len();
        for a in 0..self.grid.dim() {
            let d = &self.deriv[a];
            for (o, (z, k)) in out[a * n..(a + 1) * n].iter_mut().zip(f.iter().zip(d)) {
                *o = I * k * z;
            }
        }
    }

    pub(crate) fn divergence_into(&self, w: &[Complex64], out: &mut [Complex64]) {
        let n = self.grid.len();
        out.iter_mut().for_each(|z| *z = Complex64::new(0.0, 0.0));
        for a in 0..self.grid.dim() {
            let d = &self.deriv[a];
            for (o, (z, k)) in out.iter_mut().zip(w[a * n..(a + 1) * n].iter().zip(d)) {
                *o += I * k * z;
            }
        }
    }

    /// Projects onto the kernel of the discrete divergence, so modes with a
    /// Nyquist index are projected along the derivative wavenumber.
    pub(crate) fn project_in_place(&self, w: &mut [Complex64]) {
        let n = self.grid.len();
        let dim = self.grid.dim();
        for flat in 1..n {
            let k2: f64 = (0..dim).map(|a| self.deriv[a][flat].powi(2)).sum();
            if k2 == 0.0 {
                continue;
            }
            let mut dot = Complex64::new(0.0, 0.0);
            for a in 0..dim {
                dot += w[a * n + flat] * self.deriv[a][flat];
            }
            let s = dot / k2;
            for a in 0..dim {
                w[a * n + flat] -= s * self.deriv[a][flat];
            }
        }
    }

    pub(crate) fn dealias_in_place(&self, f: &mut [Complex64]) {
        let n = self.grid.len();
        for chunk in f.chunks_mut(n) {
            for (z, &k) in chunk.iter_mut().zip(&self.keep) {
                if !k {
                    *z = Complex64::new(0.0, 0.0);
                }
            }
        }
    }
}

/// Coefficientwise product `m(ξ)·f̂(ξ)`.
///
/// A symbol that is non-finite at ξ = 0 (such as `|ξ|^{-α}`) is accepted only
/// when every component of `f` has an exactly zero mean mode; the output mean
/// mode is then zero.
pub fn apply_multiplier(
    f: &SpectralField,
    symbol: impl Fn([f64; 3]) -> Complex64,
) -> Result<SpectralField> {
    let grid = *f.grid();
    let n = grid.len();
    let mut out = f.clone();
    for flat in 0..n {
        let m = symbol(grid.mode(flat));
        let finite = m.re.is_finite() && m.im.is_finite();
        if !finite {
            if flat != 0 {
                return Err(PensError::NonFiniteSymbol { index: flat });
            }
            if (0..f.components()).any(|c| f.mean_mode(c) != Complex64::new(0.0, 0.0)) {
                return Err(PensError::ZeroFrequencySingularity);
            }
        }
        for c in 0..f.components() {
            let z = &mut out.component_mut(c)[flat];
            *z = if finite { m * *z } else { Complex64::new(0.0, 0.0) };
        }
    }
    Ok(out)
}

/// Real-valued symbol convenience wrapper around [`apply_multiplier`].
pub fn apply_real_multiplier(
    f: &SpectralField,
    symbol: impl Fn([f64; 3]) -> f64,
) -> Result<SpectralField> {
    apply_multiplier(f, |xi| Complex64::new(symbol(xi), 0.0))
}

pub fn norm2(xi: [f64; 3]) -> f64 {
    xi[0] * xi[0] + xi[1] * xi[1] + xi[2] * xi[2]
}

/// `∇f`: component j is `iξ_j f̂`.
pub fn gradient(f: &SpectralField) -> Result<SpectralField> {
    if f.components() != 1 {
        return Err(PensError::ComponentMismatch { expected: 1, found: f.components() });
    }
    let tables = ModeTables::new(f.grid());
    let d = f.grid().dim();
    let mut out = SpectralField::zeros(*f.grid(), d);
    tables.gradient_into(f.coeffs(), out.coeffs_mut());
    Ok(out)
}

/// `∇·w = Σ_j iξ_j ŵ_j`.
pub fn divergence(w: &SpectralField) -> Result<SpectralField> {
    let d = w.grid().dim();
    if w.components() != d {
        return Err(PensError::ComponentMismatch { expected: d, found: w.components() });
    }
    let tables = ModeTables::new(w.grid());
    let mut out = SpectralField::zeros(*w.grid(), 1);
    tables.divergence_into(w.coeffs(), out.coeffs_mut());
    Ok(out)
}

/// Applies `P(ξ) = I - ξ⊗ξ/|ξ|²` mode by mode, with `P(0) = I`. Along a
/// Nyquist axis ξ_j is taken as 0, matching [`divergence`].
pub fn leray_project(w: &SpectralField) -> Result<SpectralField> {
    let d = w.grid().dim();
    if w.components() != d {
        return Err(PensError::ComponentMismatch { expected: d, found: w.components() });
    }
    let tables = ModeTables::new(w.grid());
    let mut out = w.clone();
    tables.project_in_place(out.coeffs_mut());
    Ok(out)
}

/// Zeroes every mode with some axis index `|n_j| > N/3`.
pub fn dealias(f: &SpectralField) -> SpectralField {
    let tables = ModeTables::new(f.grid());
    let mut out = f.clone();
    tables.dealias_in_place(out.coeffs_mut());
    out
}

/// `Δf`, symbol `-|ξ|²`.
pub fn laplacian(f: &SpectralField) -> SpectralField {
    apply_real_multiplier(f, |xi| -norm2(xi)).expect("laplacian symbol is finite")
}

use num_complex::Complex64;

use crate::error::{PensError, Result};
use crate::fft::{forward_values, inverse_values};
use crate::grid::Grid;

/// Real samples of a scalar (`c = 1`) or vector (`c = d`) field.
///
/// Components are stored one after another; within a component the layout is
/// row-major with the last axis fastest.
#[derive(Debug, Clone, PartialEq)]
pub struct RealField {
    grid: Grid,
    components: usize,
    values: Vec<f64>,
}

impl RealField {
    pub fn new(grid: Grid, components: usize, values: Vec<f64>) -> Result<Self> {
        check_components(&grid, components)?;
        if values.len() != components * grid.len() {
            return Err(PensError::GridMismatch(format!(
                "expected {} values, got {}",
                components * grid.len(),
                values.len()
            )));
        }
        if let Some(index) = values.iter().position(|v| !v.is_finite()) {
            return Err(PensError::NonFinite { index });
        }
        Ok(Self { grid, components, values })
    }

    pub fn zeros(grid: Grid, components: usize) -> Self {
        Self { grid, components, values: vec![0.0; components * grid.len()] }
    }

    /// Samples `f(x, component)` at every grid point.
    pub fn from_fn(
        grid: Grid,
        components: usize,
        mut f: impl FnMut([f64; 3], usize) -> f64,
    ) -> Result<Self> {
        let mut values = Vec::with_capacity(components * grid.len());
        for c in 0..components {
            for flat in 0..grid.len() {
                values.push(f(grid.point(flat), c));
            }
        }
        Self::new(grid, components, values)
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn components(&self) -> usize {
        self.components
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn component(&self, c: usize) -> &[f64] {
        let n = self.grid.len();
        &self.values[c * n..(c + 1) * n]
    }

    /// Forward transform into normalized Fourier coefficients.
    pub fn to_spectral(&self) -> SpectralField {
        SpectralField {
            grid: self.grid,
            components: self.components,
            coeffs: forward_values(&self.grid, &self.values),
        }
    }

    /// Pointwise linear combination `a·self + b·other`.
    pub fn axpby(&self, a: f64, other: &RealField, b: f64) -> Result<RealField> {
        same_shape(&self.grid, self.components, &other.grid, other.components)?;
        let values = self.values.iter().zip(&other.values).map(|(x, y)| a * x + b * y).collect();
        RealField::new(self.grid, self.components, values)
    }

    /// Pointwise Euclidean magnitude of the component vector at each point.
    pub fn magnitudes(&self) -> Vec<f64> {
        let n = self.grid.len();
        (0..n)
            .map(|i| {
                (0..self.components)
                    .map(|c| self.values[c * n + i].powi(2))
                    .sum::<f64>()
                    .sqrt()
            })
            .collect()
    }
}

/// Complex Fourier coefficients of a scalar or vector field, FFT ordered.
///
/// Normalized so that `Σ_x |f|² (Δx)^d = Σ_ξ |f̂|² (Δξ)^d`.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralField {
    grid: Grid,
    components: usize,
    coeffs: Vec<Complex64>,
}

impl SpectralField {
    pub fn new(grid: Grid, components: usize, coeffs: Vec<Complex64>) -> Result<Self> {
        check_components(&grid, components)?;
        if coeffs.len() != components * grid.len() {
            return Err(PensError::GridMismatch(format!(
                "expected {} coefficients, got {}",
                components * grid.len(),
                coeffs.len()
            )));
        }
        if let Some(index) = coeffs.iter().position(|z| !(z.re.is_finite() && z.im.is_finite())) {
            return Err(PensError::NonFinite { index });
        }
        Ok(Self { grid, components, coeffs })
    }

    pub fn zeros(grid: Grid, components: usize) -> Self {
        Self {
            grid,
            components,
            coeffs: vec![Complex64::new(0.0, 0.0); components * grid.len()],
        }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn components(&self) -> usize {
        self.components
    }

    pub fn coeffs(&self) -> &[Complex64] {
        &self.coeffs
    }

    pub fn coeffs_mut(&mut self) -> &mut [Complex64] {
        &mut self.coeffs
    }

    pub fn component(&self, c: usize) -> &[Complex64] {
        let n = self.grid.len();
        &self.coeffs[c * n..(c + 1) * n]
    }

    pub fn component_mut(&mut self, c: usize) -> &mut [Complex64] {
        let n = self.grid.len();
        &mut self.coeffs[c * n..(c + 1) * n]
    }

    /// Scalar field holding component `c`.
    pub fn extract(&self, c: usize) -> SpectralField {
        SpectralField { grid: self.grid, components: 1, coeffs: self.component(c).to_vec() }
    }

    /// Stacks scalar fields into a vector field.
    pub fn stack(parts: &[SpectralField]) -> Result<SpectralField> {
        let first = parts.first().ok_or_else(|| {
            PensError::InvalidArgument("cannot stack zero components".into())
        })?;
        let mut coeffs = Vec::with_capacity(parts.len() * first.grid.len());
        for p in parts {
            same_shape(&first.grid, 1, &p.grid, p.components)?;
            coeffs.extend_from_slice(&p.coeffs);
        }
        SpectralField::new(first.grid, parts.len(), coeffs)
    }

    /// Largest relative defect `max|f̂(ξ) - conj f̂(-ξ)| / max|f̂|`.
    pub fn symmetry_defect(&self) -> f64 {
        let n = self.grid.len();
        let scale = self.coeffs.iter().map(|z| z.norm()).fold(0.0, f64::max);
        if scale == 0.0 {
            return 0.0;
        }
        let mut worst: f64 = 0.0;
        for c in 0..self.components {
            let comp = &self.coeffs[c * n..(c + 1) * n];
            for i in 0..n {
                let j = self.grid.mirror(i);
                worst = worst.max((comp[i] - comp[j].conj()).norm());
            }
        }
        worst / scale
    }

    /// Inverse transform; rejects inputs that are not the spectrum of a real field.
    pub fn to_real(&self) -> Result<RealField> {
        let defect = self.symmetry_defect();
        if defect > 1e-10 {
            return Err(PensError::SymmetryViolation { defect });
        }
        RealField::new(self.grid, self.components, self.inverse_values())
    }

    /// Inverse transform without the symmetry check (the imaginary part is dropped).
    pub(crate) fn to_real_unchecked(&self) -> RealField {
        RealField {
            grid: self.grid,
            components: self.components,
            values: self.inverse_values(),
        }
    }

    fn inverse_values(&self) -> Vec<f64> {
        inverse_values(&self.grid, &self.coeffs)
    }

    /// Coefficientwise `a·self + b·other`.
    pub fn axpby(&self, a: f64, other: &SpectralField, b: f64) -> Result<SpectralField> {
        same_shape(&self.grid, self.components, &other.grid, other.components)?;
        let coeffs = self.coeffs.iter().zip(&other.coeffs).map(|(x, y)| x * a + y * b).collect();
        Ok(SpectralField { grid: self.grid, components: self.components, coeffs })
    }

    pub fn scale(&self, a: f64) -> SpectralField {
        SpectralField {
            grid: self.grid,
            components: self.components,
            coeffs: self.coeffs.iter().map(|z| z * a).collect(),
        }
    }

    /// Coefficient of the ξ = 0 mode for component `c`.
    pub fn mean_mode(&self, c: usize) -> Complex64 {
        self.coeffs[c * self.grid.len()]
    }

    pub fn zero_mean_mode(&mut self) {
        let n = self.grid.len();
        for c in 0..self.components {
            self.coeffs[c * n] = Complex64::new(0.0, 0.0);
        }
    }

    /// `Σ_ξ w(ξ)·|f̂(ξ)|² (Δξ)^d` summed over components.
    pub fn weighted_energy(&self, weight: impl Fn([f64; 3]) -> f64) -> f64 {
        let n = self.grid.len();
        let mut acc = 0.0;
        for flat in 0..n {
            let w = weight(self.grid.mode(flat));
            if w == 0.0 {
                continue;
            }
            let s: f64 = (0..self.components).map(|c| self.coeffs[c * n + flat].norm_sqr()).sum();
            acc += w * s;
        }
        acc * self.grid.mode_volume()
    }
}

fn check_components(grid: &Grid, components: usize) -> Result<()> {
    if components == 1 || components == grid.dim() {
        Ok(())
    } else {
        Err(PensError::ComponentMismatch { expected: grid.dim(), found: components })
    }
}

pub(crate) fn same_shape(g1: &Grid, c1: usize, g2: &Grid, c2: usize) -> Result<()> {
    if g1 != g2 {
        return Err(PensError::GridMismatch(format!("{g1:?} vs {g2:?}")));
    }
    if c1 != c2 {
        return Err(PensError::ComponentMismatch { expected: c1, found: c2 });
    }
    Ok(())
}

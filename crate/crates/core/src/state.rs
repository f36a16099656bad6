use serde::{Deserialize, Serialize};

use crate::error::{PensError, Result};
use crate::field::RealField;
use crate::grid::Grid;

/// Density, Euler velocity and Navier–Stokes velocity at one instant.
#[derive(Debug, Clone, PartialEq)]
pub struct SimState {
    pub rho: RealField,
    pub u: RealField,
    pub v: RealField,
    pub t: f64,
}

impl SimState {
    pub fn new(rho: RealField, u: RealField, v: RealField, t: f64) -> Result<Self> {
        let grid = *rho.grid();
        if u.grid() != &grid || v.grid() != &grid {
            return Err(PensError::GridMismatch("rho, u, v must share one grid".into()));
        }
        if rho.components() != 1 {
            return Err(PensError::ComponentMismatch { expected: 1, found: rho.components() });
        }
        for f in [&u, &v] {
            if f.components() != grid.dim() {
                return Err(PensError::ComponentMismatch {
                    expected: grid.dim(),
                    found: f.components(),
                });
            }
        }
        if !t.is_finite() {
            return Err(PensError::InvalidArgument(format!("time must be finite, got {t}")));
        }
        Ok(Self { rho, u, v, t })
    }

    pub fn grid(&self) -> &Grid {
        self.rho.grid()
    }

    pub fn min_rho(&self) -> f64 {
        self.rho.values().iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// `∫ρ dx` by grid quadrature.
    pub fn mass(&self) -> f64 {
        self.rho.values().iter().sum::<f64>() * self.grid().cell_volume()
    }

    /// Largest pointwise speed over both velocity fields.
    pub fn max_speed(&self) -> f64 {
        self.u
            .magnitudes()
            .into_iter()
            .chain(self.v.magnitudes())
            .fold(0.0, f64::max)
    }
}

/// Everything needed to reproduce one solver run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    pub grid: Grid,
    pub dt_max: f64,
    pub cfl_safety: f64,
    pub t_end: f64,
    pub sample_every: f64,
    pub preset: String,
    pub epsilon: f64,
    pub seed: u64,
}

pub const DEFAULT_DT_MAX: f64 = 0.05;
pub const DEFAULT_CFL_SAFETY: f64 = 0.4;

impl SolverConfig {
    pub fn new(grid: Grid, preset: &str, epsilon: f64, t_end: f64) -> Self {
        Self {
            grid,
            dt_max: DEFAULT_DT_MAX,
            cfl_safety: DEFAULT_CFL_SAFETY,
            t_end,
            sample_every: (t_end / 10.0).min(1.0),
            preset: preset.to_string(),
            epsilon,
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(PensError::InvalidConfig(m));
        if !(self.t_end.is_finite() && self.t_end > 0.0) {
            return bad(format!("t_end must be > 0, got {}", self.t_end));
        }
        if !(self.epsilon.is_finite() && self.epsilon > 0.0) {
            return bad(format!("epsilon must be > 0, got {}", self.epsilon));
        }
        if !(self.cfl_safety > 0.0 && self.cfl_safety <= 1.0) {
            return bad(format!("cfl_safety must lie in (0, 1], got {}", self.cfl_safety));
        }
        if !(self.dt_max.is_finite() && self.dt_max > 0.0) {
            return bad(format!("dt_max must be > 0, got {}", self.dt_max));
        }
        if !(self.sample_every.is_finite() && self.sample_every > 0.0) {
            return bad(format!("sample_every must be > 0, got {}", self.sample_every));
        }
        Ok(())
    }
}

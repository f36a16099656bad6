//! Initial-data presets, registered by name and selected at run time.
//!
//! Every built-in preset produces fields band-limited below the 2/3 cutoff,
//! a strictly positive density and a divergence-free `v` with zero mean mode.

use std::collections::BTreeMap;
use std::sync::OnceLock;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{PensError, Result};
use crate::field::{RealField, SpectralField};
use crate::grid::Grid;
use crate::spectral::{apply_real_multiplier, dealias, leray_project, norm2};
use crate::state::SimState;

/// Background density as a fraction of the amplitude.
pub const FLOOR_FRACTION: f64 = 0.1;
/// Width of the density bump (length units).
pub const RHO_WIDTH: f64 = 5.0;
/// Width of the Gaussian envelope on the velocities.
pub const VELOCITY_WIDTH: f64 = 2.5;
/// Wavenumber of the Taylor–Green cell pattern.
pub const CELL_WAVENUMBER: f64 = 0.5;

pub trait InitialData: Send + Sync {
    fn name(&self) -> &'static str;
    fn description(&self) -> &'static str;
    fn build(&self, grid: &Grid, amplitude: f64, seed: u64) -> Result<SimState>;
}

pub struct PresetRegistry {
    presets: BTreeMap<&'static str, Box<dyn InitialData>>,
}

impl PresetRegistry {
    pub fn empty() -> Self {
        Self { presets: BTreeMap::new() }
    }

    pub fn with_builtins() -> Self {
        let mut reg = Self::empty();
        reg.register(Box::new(ZeroVelocity));
        reg.register(Box::new(HeatOnly));
        reg.register(Box::new(CoupledSmall));
        reg.register(Box::new(RandomSmall));
        reg
    }

    /// Adds `preset`, replacing any earlier entry of the same name.
    pub fn register(&mut self, preset: Box<dyn InitialData>) {
        self.presets.insert(preset.name(), preset);
    }

    pub fn get(&self, name: &str) -> Result<&dyn InitialData> {
        self.presets
            .get(name)
            .map(|p| p.as_ref())
            .ok_or_else(|| PensError::UnknownPreset(name.to_string()))
    }

    pub fn names(&self) -> Vec<&'static str> {
        self.presets.keys().copied().collect()
    }
}

pub fn builtin_presets() -> &'static PresetRegistry {
    static REG: OnceLock<PresetRegistry> = OnceLock::new();
    REG.get_or_init(PresetRegistry::with_builtins)
}

/// Builds the initial state of the named built-in preset.
pub fn initial_data(preset: &str, grid: &Grid, amplitude: f64, seed: u64) -> Result<SimState> {
    if !(amplitude.is_finite() && amplitude > 0.0) {
        return Err(PensError::InvalidArgument(format!("amplitude must be > 0, got {amplitude}")));
    }
    builtin_presets().get(preset)?.build(grid, amplitude, seed)
}

fn centered(grid: &Grid, x: [f64; 3]) -> [f64; 3] {
    let c = 0.5 * grid.length();
    let mut y = [0.0; 3];
    for a in 0..grid.dim() {
        y[a] = x[a] - c;
    }
    y
}

fn gaussian(y: [f64; 3], width: f64) -> f64 {
    (-norm2(y) / (2.0 * width * width)).exp()
}

/// Taylor–Green cell pattern; odd under `y -> -y`.
fn taylor_green(dim: usize, y: [f64; 3], k: f64, c: usize) -> f64 {
    let (s0, c0) = ((k * y[0]).sin(), (k * y[0]).cos());
    let (s1, c1) = ((k * y[1]).sin(), (k * y[1]).cos());
    let c2 = if dim == 3 { (k * y[2]).cos() } else { 1.0 };
    match c {
        0 => s0 * c1 * c2,
        1 => -c0 * s1 * c2,
        _ => 0.0,
    }
}

fn band_limit(f: &RealField) -> Result<RealField> {
    dealias(&f.to_spectral()).to_real()
}

/// `ε·(floor + bump)` with the band-limited bump lifted so it stays ≥ 0.
fn density(grid: &Grid, amplitude: f64, with_bump: bool) -> Result<RealField> {
    if !with_bump {
        return RealField::from_fn(*grid, 1, |_, _| amplitude * FLOOR_FRACTION);
    }
    let bump = band_limit(&RealField::from_fn(*grid, 1, |x, _| {
        gaussian(centered(grid, x), RHO_WIDTH)
    })?)?;
    let lift = (-bump.values().iter().copied().fold(f64::INFINITY, f64::min)).max(0.0);
    let values = bump.values().iter().map(|b| amplitude * (FLOOR_FRACTION + b + lift)).collect();
    RealField::new(*grid, 1, values)
}

fn solenoidal(raw: &RealField) -> Result<RealField> {
    let mut s = leray_project(&dealias(&raw.to_spectral()))?;
    s.zero_mean_mode();
    s.to_real()
}

/// `ε·P[G(y)(e₁ + TG(κy))]` with zero mean.
fn modulated_cells(grid: &Grid, amplitude: f64) -> Result<RealField> {
    let dim = grid.dim();
    let raw = RealField::from_fn(*grid, dim, |x, c| {
        let y = centered(grid, x);
        let drift = if c == 0 { 1.0 } else { 0.0 };
        amplitude * gaussian(y, VELOCITY_WIDTH) * (drift + taylor_green(dim, y, CELL_WAVENUMBER, c))
    })?;
    solenoidal(&raw)
}

/// `ε·G(y)·TG(κy)`, odd about the box center so `∫ρ₀u₀ = 0`.
fn euler_velocity(grid: &Grid, amplitude: f64) -> Result<RealField> {
    let dim = grid.dim();
    band_limit(&RealField::from_fn(*grid, dim, |x, c| {
        let y = centered(grid, x);
        amplitude * gaussian(y, VELOCITY_WIDTH) * taylor_green(dim, y, CELL_WAVENUMBER, c)
    })?)
}

pub struct ZeroVelocity;

impl InitialData for ZeroVelocity {
    fn name(&self) -> &'static str {
        "zero-velocity"
    }
    fn description(&self) -> &'static str {
        "positive density bump, u = v = 0 (stationary)"
    }
    fn build(&self, grid: &Grid, amplitude: f64, _seed: u64) -> Result<SimState> {
        let dim = grid.dim();
        SimState::new(
            density(grid, amplitude, true)?,
            RealField::zeros(*grid, dim),
            RealField::zeros(*grid, dim),
            0.0,
        )
    }
}

pub struct HeatOnly;

impl InitialData for HeatOnly {
    fn name(&self) -> &'static str {
        "heat-only"
    }
    fn description(&self) -> &'static str {
        "density floor only, u = 0, Gaussian-modulated solenoidal v"
    }
    fn build(&self, grid: &Grid, amplitude: f64, _seed: u64) -> Result<SimState> {
        SimState::new(
            density(grid, amplitude, false)?,
            RealField::zeros(*grid, grid.dim()),
            modulated_cells(grid, amplitude)?,
            0.0,
        )
    }
}

pub struct CoupledSmall;

impl InitialData for CoupledSmall {
    fn name(&self) -> &'static str {
        "coupled-small"
    }
    fn description(&self) -> &'static str {
        "density bump on a floor, Taylor-Green u, Gaussian-modulated solenoidal v"
    }
    fn build(&self, grid: &Grid, amplitude: f64, _seed: u64) -> Result<SimState> {
        SimState::new(
            density(grid, amplitude, true)?,
            euler_velocity(grid, amplitude)?,
            modulated_cells(grid, amplitude)?,
            0.0,
        )
    }
}

/// Seeded random band-limited data with a Gaussian spectral envelope.
pub struct RandomSmall;

fn smooth_noise(grid: &Grid, components: usize, rng: &mut ChaCha8Rng) -> Result<SpectralField> {
    let noise = RealField::from_fn(*grid, components, |_, _| rng.gen_range(-1.0..1.0))?;
    let w2 = VELOCITY_WIDTH * VELOCITY_WIDTH;
    let s = apply_real_multiplier(&noise.to_spectral(), |xi| (-0.5 * w2 * norm2(xi)).exp())?;
    Ok(dealias(&s))
}

fn normalized(f: RealField, amplitude: f64) -> Result<RealField> {
    let peak = f.values().iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let scale = if peak > 0.0 { amplitude / peak } else { 0.0 };
    let grid = *f.grid();
    let c = f.components();
    RealField::new(grid, c, f.into_values().into_iter().map(|v| v * scale).collect())
}

impl InitialData for RandomSmall {
    fn name(&self) -> &'static str {
        "random-small"
    }
    fn description(&self) -> &'static str {
        "seeded random band-limited density, u and solenoidal v"
    }
    fn build(&self, grid: &Grid, amplitude: f64, seed: u64) -> Result<SimState> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let dim = grid.dim();
        let r = smooth_noise(grid, 1, &mut rng)?.to_real()?;
        let (lo, hi) = r
            .values()
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
        let span = if hi > lo { hi - lo } else { 1.0 };
        let rho = RealField::new(
            *grid,
            1,
            r.values().iter().map(|v| amplitude * (FLOOR_FRACTION + (v - lo) / span)).collect(),
        )?;
        let u = normalized(smooth_noise(grid, dim, &mut rng)?.to_real()?, amplitude)?;
        let v = normalized(solenoidal(&smooth_noise(grid, dim, &mut rng)?.to_real()?)?, amplitude)?;
        SimState::new(rho, u, v, 0.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::divergence;
    use std::f64::consts::PI;

    fn h1(f: &RealField) -> f64 {
        f.to_spectral().weighted_energy(|xi| 1.0 + norm2(xi)).sqrt()
    }

    #[test]
    fn registry_lists_builtins_and_rejects_unknown() {
        let names = builtin_presets().names();
        for n in ["coupled-small", "heat-only", "random-small", "zero-velocity"] {
            assert!(names.contains(&n));
        }
        let g = Grid::new(2, 16, 2.0 * PI).unwrap();
        assert!(matches!(initial_data("nope", &g, 0.1, 0), Err(PensError::UnknownPreset(_))));
    }

    #[test]
    fn heat_only_is_solenoidal() {
        let g = Grid::new(2, 64, 32.0 * PI).unwrap();
        let s = initial_data("heat-only", &g, 1e-2, 0).unwrap();
        let div = divergence(&s.v.to_spectral()).unwrap();
        let div_l2 = div.weighted_energy(|_| 1.0).sqrt();
        assert!(div_l2 <= 1e-12 * h1(&s.v), "{div_l2}");
        assert!(s.u.values().iter().all(|&x| x == 0.0));
        assert!(s.rho.values().iter().all(|&r| r == 1e-2 * FLOOR_FRACTION));
    }

    #[test]
    fn coupled_small_density_floor() {
        for (dim, n, l) in [(2, 64, 32.0 * PI), (3, 16, 8.0 * PI)] {
            let g = Grid::new(dim, n, l).unwrap();
            let s = initial_data("coupled-small", &g, 1e-2, 0).unwrap();
            assert!(s.min_rho() >= 1e-2 * FLOOR_FRACTION, "{}", s.min_rho());
            // band-limited
            let cutoff = g.dealias_cutoff() as i64;
            let rs = s.rho.to_spectral();
            for (flat, z) in rs.coeffs().iter().enumerate() {
                if g.mode_index(flat).iter().any(|k| k.abs() > cutoff) {
                    assert!(z.norm() < 1e-15 * rs.coeffs()[0].norm());
                }
            }
            // zero mean mode on v
            let vs = s.v.to_spectral();
            for c in 0..dim {
                assert!(vs.mean_mode(c).norm() < 1e-14);
            }
        }
    }

    #[test]
    fn euler_momentum_vanishes_by_parity() {
        let g = Grid::new(2, 64, 32.0 * PI).unwrap();
        let s = initial_data("coupled-small", &g, 1e-2, 0).unwrap();
        let n = g.len();
        for c in 0..2 {
            let m: f64 = (0..n).map(|i| s.rho.values()[i] * s.u.values()[c * n + i]).sum();
            assert!(m.abs() < 1e-15, "{m}");
        }
    }

    #[test]
    fn random_preset_is_seeded() {
        let g = Grid::new(2, 16, 2.0 * PI).unwrap();
        let a = initial_data("random-small", &g, 0.1, 7).unwrap();
        let b = initial_data("random-small", &g, 0.1, 7).unwrap();
        let c = initial_data("random-small", &g, 0.1, 8).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
        assert!(a.min_rho() > 0.0);
    }
}

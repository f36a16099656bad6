//! Time integration of the coupled density / Euler / Navier–Stokes system.
//!
//! The stiff linear parts are integrated exactly: `v̂` decays with
//! `e^{-|ξ|²t}` and `u` relaxes toward `v` at unit rate. The remaining terms
//! are advanced with the two-stage exponential Runge–Kutta scheme
//!
//! ```text
//! y_a     = e^{-λh} y_n + h φ₁(-λh) g(y_n)
//! y_{n+1} = y_a + h φ₂(-λh) (g(y_a) - g(y_n))
//! ```
//!
//! per mode, with `λ = |ξ|²` for `v`, `λ = 1` for `u` (forcing `g = v - (u·∇)u`)
//! and `λ = 0` for `ρ`. The scheme is second order and exact whenever the
//! forcing is linear in time, which keeps `u - v` free of the O(h) relaxation
//! bias an integrating-factor Heun step would leave behind.

use num_complex::Complex64;

use crate::diagnostics::{sample_channels, DiagnosticSettings};
use crate::error::{PensError, Result};
use crate::fft::{forward_values, inverse_symmetric};
use crate::field::{RealField, SpectralField};
use crate::grid::Grid;
use crate::presets::initial_data;
use crate::spectral::ModeTables;
use crate::state::{SimState, SolverConfig, DEFAULT_CFL_SAFETY};
use crate::timeseries::{SeriesMeta, TimeSeries};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// `φ₁(z) = (e^z - 1)/z`.
pub(crate) fn phi1(z: f64) -> f64 {
    if z.abs() < 1e-5 {
        1.0 + z / 2.0 + z * z / 6.0
    } else {
        z.exp_m1() / z
    }
}

/// `φ₂(z) = (e^z - 1 - z)/z²`.
pub(crate) fn phi2(z: f64) -> f64 {
    if z.abs() < 0.1 {
        // Σ z^k/(k+2)!
        let mut term = 0.5;
        let mut acc = 0.0;
        for k in 0..12 {
            acc += term;
            term *= z / (k as f64 + 3.0);
        }
        acc
    } else {
        (z.exp_m1() - z) / (z * z)
    }
}

/// Spectral coefficients of `(ρ, u, v)` stacked component-wise.
#[derive(Debug, Clone)]
pub(crate) struct SpectralState {
    pub rho: Vec<Complex64>,
    pub u: Vec<Complex64>,
    pub v: Vec<Complex64>,
    pub t: f64,
}

/// Stiff-free tendencies at one state plus the pointwise bookkeeping the
/// stepper needs.
pub(crate) struct Evaluation {
    /// `-∇·(ρu)`, dealiased.
    pub drho: Vec<Complex64>,
    /// `-(u·∇)u`, dealiased.
    pub adv_u: Vec<Complex64>,
    /// `P[-(v·∇)v + ρ(u - v)]`, dealiased.
    pub force_v: Vec<Complex64>,
    pub max_speed: f64,
    /// `∫|∇v|² + ∫ρ|u - v|²` by grid quadrature.
    pub dissipation: f64,
}

/// The coupled-system stepper for one grid.
#[derive(Debug, Clone)]
pub struct PensSolver {
    grid: Grid,
    tables: ModeTables,
    cfl_safety: f64,
}

impl PensSolver {
    pub fn new(grid: Grid, cfl_safety: f64) -> Result<Self> {
        if !(cfl_safety > 0.0 && cfl_safety <= 1.0) {
            return Err(PensError::InvalidArgument(format!(
                "cfl_safety must lie in (0, 1], got {cfl_safety}"
            )));
        }
        Ok(Self { tables: ModeTables::new(&grid), grid, cfl_safety })
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub(crate) fn tables(&self) -> &ModeTables {
        &self.tables
    }

    /// Largest admissible step `cfl_safety·Δx / max(1e-12, max|u|, max|v|)`.
    pub fn cfl_limit(&self, max_speed: f64) -> f64 {
        self.cfl_safety * self.grid.dx() / max_speed.max(1e-12)
    }

    pub(crate) fn check_grid(&self, state: &SimState) -> Result<()> {
        if state.grid() != &self.grid {
            return Err(PensError::GridMismatch(format!(
                "solver grid {:?} vs state grid {:?}",
                self.grid,
                state.grid()
            )));
        }
        Ok(())
    }

    pub(crate) fn to_spectral(&self, state: &SimState) -> SpectralState {
        SpectralState {
            rho: forward_values(&self.grid, state.rho.values()),
            u: forward_values(&self.grid, state.u.values()),
            v: forward_values(&self.grid, state.v.values()),
            t: state.t,
        }
    }

    pub(crate) fn to_state(&self, y: &SpectralState) -> Result<SimState> {
        let d = self.grid.dim();
        let rho = RealField::new(self.grid, 1, inverse_symmetric(&self.grid, &y.rho))
            .map_err(|_| PensError::NumericalBlowUp { t: y.t })?;
        let u = RealField::new(self.grid, d, inverse_symmetric(&self.grid, &y.u))
            .map_err(|_| PensError::NumericalBlowUp { t: y.t })?;
        let v = RealField::new(self.grid, d, inverse_symmetric(&self.grid, &y.v))
            .map_err(|_| PensError::NumericalBlowUp { t: y.t })?;
        SimState::new(rho, u, v, y.t)
    }

    fn gradient_real(&self, f: &[Complex64]) -> Vec<f64> {
        // component i, derivative j stored at (i·d + j)
        let n = self.grid.len();
        let d = self.grid.dim();
        let mut spec = vec![ZERO; d * d * n];
        for i in 0..d {
            self.tables.gradient_into(&f[i * n..(i + 1) * n], &mut spec[i * d * n..(i + 1) * d * n]);
        }
        inverse_symmetric(&self.grid, &spec)
    }

    pub(crate) fn evaluate(&self, y: &SpectralState) -> Result<Evaluation> {
        let n = self.grid.len();
        let d = self.grid.dim();
        let rho = inverse_symmetric(&self.grid, &y.rho);
        let u = inverse_symmetric(&self.grid, &y.u);
        let v = inverse_symmetric(&self.grid, &y.v);
        if rho.iter().chain(&u).chain(&v).any(|x| !x.is_finite()) {
            return Err(PensError::NumericalBlowUp { t: y.t });
        }
        let min_rho = rho.iter().copied().fold(f64::INFINITY, f64::min);
        if min_rho <= 0.0 {
            return Err(PensError::Vacuum { min: min_rho, t: y.t });
        }
        let grad_u = self.gradient_real(&y.u);
        let grad_v = self.gradient_real(&y.v);

        let mut flux = vec![0.0; d * n];
        let mut adv = vec![0.0; d * n];
        let mut force = vec![0.0; d * n];
        let mut max_speed: f64 = 0.0;
        let mut drag = 0.0;
        let mut shear = 0.0;
        for p in 0..n {
            let mut su = 0.0;
            let mut sv = 0.0;
            for i in 0..d {
                let ui = u[i * n + p];
                let vi = v[i * n + p];
                su += ui * ui;
                sv += vi * vi;
                flux[i * n + p] = rho[p] * ui;
                let mut a_u = 0.0;
                let mut a_v = 0.0;
                for j in 0..d {
                    a_u += u[j * n + p] * grad_u[(i * d + j) * n + p];
                    let gv = grad_v[(i * d + j) * n + p];
                    a_v += v[j * n + p] * gv;
                    shear += gv * gv;
                }
                adv[i * n + p] = -a_u;
                force[i * n + p] = -a_v + rho[p] * (ui - vi);
                drag += rho[p] * (ui - vi) * (ui - vi);
            }
            max_speed = max_speed.max(su.sqrt()).max(sv.sqrt());
        }

        let flux_hat = forward_values(&self.grid, &flux);
        let mut drho = vec![ZERO; n];
        self.tables.divergence_into(&flux_hat, &mut drho);
        drho.iter_mut().for_each(|z| *z = -*z);
        self.tables.dealias_in_place(&mut drho);

        let mut adv_u = forward_values(&self.grid, &adv);
        self.tables.dealias_in_place(&mut adv_u);

        let mut force_v = forward_values(&self.grid, &force);
        self.tables.dealias_in_place(&mut force_v);
        self.tables.project_in_place(&mut force_v);

        Ok(Evaluation {
            drho,
            adv_u,
            force_v,
            max_speed,
            dissipation: (shear + drag) * self.grid.cell_volume(),
        })
    }

    /// `(dρ/dt, du/dt)` without the linear relaxation `-(u - v)`:
    /// `-∇·(ρu)` and `-(u·∇)u`, both dealiased.
    pub fn euler_tendency(&self, state: &SimState) -> Result<(SpectralField, SpectralField)> {
        self.check_grid(state)?;
        let e = self.evaluate(&self.to_spectral(state))?;
        Ok((
            SpectralField::new(self.grid, 1, e.drho)?,
            SpectralField::new(self.grid, self.grid.dim(), e.adv_u)?,
        ))
    }

    /// `P[-(v·∇)v + ρ(u - v)]`, dealiased; the viscous term is excluded.
    pub fn ns_tendency(&self, state: &SimState) -> Result<SpectralField> {
        self.check_grid(state)?;
        let e = self.evaluate(&self.to_spectral(state))?;
        SpectralField::new(self.grid, self.grid.dim(), e.force_v)
    }

    /// One exponential RK2 step of size `h` from `y` whose evaluation is `e0`.
    pub(crate) fn advance(
        &self,
        y: &SpectralState,
        e0: &Evaluation,
        h: f64,
    ) -> Result<SpectralState> {
        let n = self.grid.len();
        let d = self.grid.dim();
        let k2 = self.tables.k2();
        let decay_v: Vec<f64> = k2.iter().map(|k| (-k * h).exp()).collect();
        let w1_v: Vec<f64> = k2.iter().map(|k| h * phi1(-k * h)).collect();
        let w2_v: Vec<f64> = k2.iter().map(|k| h * phi2(-k * h)).collect();
        let decay_u = (-h).exp();
        let w1_u = h * phi1(-h);
        let w2_u = h * phi2(-h);

        let mut a = SpectralState {
            rho: y.rho.iter().zip(&e0.drho).map(|(r, f)| r + f * h).collect(),
            u: vec![ZERO; d * n],
            v: vec![ZERO; d * n],
            t: y.t + h,
        };
        for c in 0..d {
            for p in 0..n {
                let q = c * n + p;
                a.u[q] = y.u[q] * decay_u + (y.v[q] + e0.adv_u[q]) * w1_u;
                a.v[q] = y.v[q] * decay_v[p] + e0.force_v[q] * w1_v[p];
            }
        }
        let ea = self.evaluate(&a)?;

        let mut next = a.clone();
        for (r, (fa, f0)) in next.rho.iter_mut().zip(ea.drho.iter().zip(&e0.drho)) {
            *r += (fa - f0) * (0.5 * h);
        }
        for c in 0..d {
            for p in 0..n {
                let q = c * n + p;
                let g_a = a.v[q] + ea.adv_u[q];
                let g_0 = y.v[q] + e0.adv_u[q];
                next.u[q] += (g_a - g_0) * w2_u;
                next.v[q] += (ea.force_v[q] - e0.force_v[q]) * w2_v[p];
            }
        }
        self.tables.project_in_place(&mut next.v);
        Ok(next)
    }

    /// Advances `state` by `dt` and re-checks positivity, finiteness and the
    /// discrete divergence constraint on `v`.
    pub fn step(&self, state: &SimState, dt: f64) -> Result<SimState> {
        self.check_grid(state)?;
        if !(dt.is_finite() && dt > 0.0) {
            return Err(PensError::InvalidTimeStep(format!("dt must be > 0, got {dt}")));
        }
        let y = self.to_spectral(state);
        let e0 = self.evaluate(&y)?;
        let limit = self.cfl_limit(e0.max_speed);
        if dt > limit {
            return Err(PensError::CflViolation { dt, limit });
        }
        let next = self.advance(&y, &e0, dt)?;
        let out = self.to_state(&next)?;
        let min = out.min_rho();
        if min <= 0.0 {
            return Err(PensError::Vacuum { min, t: out.t });
        }
        self.check_divergence(&next)?;
        Ok(out)
    }

    fn check_divergence(&self, y: &SpectralState) -> Result<()> {
        let n = self.grid.len();
        let mut div = vec![ZERO; n];
        self.tables.divergence_into(&y.v, &mut div);
        let div2: f64 = div.iter().map(|z| z.norm_sqr()).sum();
        let mut h1 = 0.0;
        for c in 0..self.grid.dim() {
            for p in 0..n {
                h1 += (1.0 + self.tables.k2[p]) * y.v[c * n + p].norm_sqr();
            }
        }
        if div2.sqrt() > 1e-8 * h1.sqrt() {
            return Err(PensError::InvalidArgument(format!(
                "divergence constraint lost at t = {}",
                y.t
            )));
        }
        Ok(())
    }
}

/// Default-safety convenience wrappers.
pub fn euler_tendency(state: &SimState) -> Result<(SpectralField, SpectralField)> {
    PensSolver::new(*state.grid(), DEFAULT_CFL_SAFETY)?.euler_tendency(state)
}

pub fn ns_tendency(state: &SimState) -> Result<SpectralField> {
    PensSolver::new(*state.grid(), DEFAULT_CFL_SAFETY)?.ns_tendency(state)
}

pub fn step(state: &SimState, dt: f64) -> Result<SimState> {
    PensSolver::new(*state.grid(), DEFAULT_CFL_SAFETY)?.step(state, dt)
}

/// Sample times of a run: every multiple of `sample_every` below `t_end`,
/// then `t_end` itself.
pub fn sample_times(config: &SolverConfig) -> Vec<f64> {
    let mut out = vec![0.0];
    let mut k = 1u64;
    loop {
        let t = (k as f64 * config.sample_every).min(config.t_end);
        out.push(t);
        if t >= config.t_end {
            return out;
        }
        k += 1;
    }
}

/// Result of [`run`].
#[derive(Debug, Clone)]
pub struct RunOutput {
    pub series: TimeSeries,
    pub initial: SimState,
    pub final_state: SimState,
    pub steps: usize,
}

/// Integrates `config` from its preset to `t_end`, sampling diagnostics at
/// every multiple of `sample_every` (and at `t_end`).
pub fn run(config: &SolverConfig, settings: &DiagnosticSettings) -> Result<RunOutput> {
    config.validate()?;
    let initial = initial_data(&config.preset, &config.grid, config.epsilon, config.seed)?;
    run_from(config, settings, initial)
}

/// Same as [`run`] starting from an explicit initial state.
pub fn run_from(
    config: &SolverConfig,
    settings: &DiagnosticSettings,
    initial: SimState,
) -> Result<RunOutput> {
    run_observed(config, settings, initial, |_| Ok(()))
}

/// [`run_from`] with a callback receiving the state at every sample time.
pub fn run_observed(
    config: &SolverConfig,
    settings: &DiagnosticSettings,
    initial: SimState,
    mut observe: impl FnMut(&SimState) -> Result<()>,
) -> Result<RunOutput> {
    config.validate()?;
    let solver = PensSolver::new(config.grid, config.cfl_safety)?;
    solver.check_grid(&initial)?;
    let meta = SeriesMeta { d: config.grid.dim(), m: settings.m, s: settings.s };
    let mut series = TimeSeries::new(meta);

    let mut y = solver.to_spectral(&initial);
    let mut eval = solver.evaluate(&y)?;
    let mut dissipated = 0.0;

    let mut record = |y: &SpectralState, dissipated: f64, series: &mut TimeSeries| -> Result<()> {
        let state = solver.to_state(y)?;
        let mut channels = sample_channels(&state, settings)?;
        channels.insert("D_int".into(), dissipated);
        channels.insert("mass".into(), state.mass());
        series.push(state.t, channels)?;
        observe(&state)
    };
    record(&y, dissipated, &mut series)?;

    let mut steps = 0usize;
    let mut sample_index = 1u64;
    loop {
        let target = (sample_index as f64 * config.sample_every).min(config.t_end);
        let remaining = target - y.t;
        let mut h = config.dt_max.min(solver.cfl_limit(eval.max_speed));
        let landing = remaining <= h * (1.0 + 1e-9);
        if landing {
            h = remaining;
        }
        let mut next = solver.advance(&y, &eval, h)?;
        if landing {
            next.t = target;
        }
        let next_eval = solver.evaluate(&next)?;
        dissipated += 0.5 * h * (eval.dissipation + next_eval.dissipation);
        y = next;
        eval = next_eval;
        steps += 1;
        if landing {
            solver.check_divergence(&y)?;
            record(&y, dissipated, &mut series)?;
            if target >= config.t_end {
                break;
            }
            sample_index += 1;
        }
    }
    let final_state = solver.to_state(&y)?;
    Ok(RunOutput { series, initial, final_state, steps })
}

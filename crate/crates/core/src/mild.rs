//! Mild-form reference solutions.
//!
//! The Navier–Stokes velocity is rebuilt from its Duhamel formula and the
//! Euler velocity from the relaxation formula
//! `u(t) = e^{-t}u₀ + ∫₀ᵗ e^{-(t-τ)}[v - (u·∇)u](τ) dτ`, iterating on whole
//! trajectories. The forcing is reconstructed piecewise-linearly between
//! τ-nodes and integrated against the exponential exactly, so the result
//! is independent of the time stepper's scheme.

use num_complex::Complex64;

use crate::diagnostics::{lp_norm, DiagnosticSettings, Lp};
use crate::error::{PensError, Result};
use crate::field::SpectralField;
use crate::presets::initial_data;
use crate::solver::{run_observed, sample_times, PensSolver, SpectralState};
use crate::spectral::ModeTables;
use crate::state::{SimState, SolverConfig};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// Weights `(w_a, w_b)` with `∫₀¹ e^{-z(1-σ)}[(1-σ)f_a + σf_b] dσ = w_a f_a + w_b f_b`.
fn segment_weights(z: f64) -> (f64, f64) {
    if z.abs() < 0.2 {
        // w_a = Σ (-z)^j (j+1)/(j+2)!,  w_b = Σ (-z)^j/(j+2)!
        let (mut wa, mut wb) = (0.0, 0.0);
        let mut inv_fact = 0.5; // 1/(j+2)!
        let mut pow = 1.0;
        for j in 0..16 {
            wa += pow * (j as f64 + 1.0) * inv_fact;
            wb += pow * inv_fact;
            pow *= -z;
            inv_fact /= j as f64 + 3.0;
        }
        (wa, wb)
    } else {
        let e = (-z).exp();
        let wb = (e - 1.0 + z) / (z * z);
        let wa = (1.0 - e) / z - wb;
        (wa, wb)
    }
}

/// Runs `I_{j+1} = e^{-λh}I_j + h(w_a f_j + w_b f_{j+1})` per mode for a
/// stacked multi-component forcing; `rates[p]` is λ for mode `p` of each
/// component. Returns the integral at every node.
fn duhamel_nodes(times: &[f64], forcing: &[Vec<Complex64>], rates: &[f64]) -> Vec<Vec<Complex64>> {
    let n = rates.len();
    let len = forcing[0].len();
    let mut out = Vec::with_capacity(times.len());
    let mut acc = vec![ZERO; len];
    out.push(acc.clone());
    let mut decay = vec![0.0; n];
    let mut wa = vec![0.0; n];
    let mut wb = vec![0.0; n];
    for j in 0..times.len() - 1 {
        let h = times[j + 1] - times[j];
        for p in 0..n {
            let z = rates[p] * h;
            decay[p] = (-z).exp();
            let (a, b) = segment_weights(z);
            wa[p] = h * a;
            wb[p] = h * b;
        }
        let (fa, fb) = (&forcing[j], &forcing[j + 1]);
        for q in 0..len {
            let p = q % n;
            acc[q] = acc[q] * decay[p] + fa[q] * wa[p] + fb[q] * wb[p];
        }
        out.push(acc.clone());
    }
    out
}

fn check_nodes(times: &[f64]) -> Result<()> {
    if times.first() != Some(&0.0) || times.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(PensError::InvalidArgument(
            "forcing nodes must start at 0 and increase strictly".into(),
        ));
    }
    Ok(())
}

/// `∫₀ᵗ e^{-|ξ|²(t-τ)} P(ξ) f̂(τ) dτ` for forcing sampled at `times`
/// (starting at 0), linear in τ between nodes.
pub fn duhamel_integral(times: &[f64], forcing: &[SpectralField], t: f64) -> Result<SpectralField> {
    check_nodes(times)?;
    if forcing.len() != times.len() {
        return Err(PensError::InvalidArgument(format!(
            "{} forcing samples for {} nodes",
            forcing.len(),
            times.len()
        )));
    }
    let end = *times.last().unwrap();
    if !(0.0..=end).contains(&t) {
        return Err(PensError::OutsideSampledRange { t, start: 0.0, end });
    }
    let grid = *forcing[0].grid();
    let components = forcing[0].components();
    for f in forcing {
        crate::field::same_shape(&grid, components, f.grid(), f.components())?;
    }
    let tables = ModeTables::new(&grid);

    // nodes up to t, with a linearly interpolated forcing value at t
    let k = times.partition_point(|&s| s < t);
    let mut nodes: Vec<f64> = times[..k].to_vec();
    let mut values: Vec<Vec<Complex64>> = forcing[..k].iter().map(|f| f.coeffs().to_vec()).collect();
    if k == times.len() || times[k] != t {
        let (a, b) = (times[k - 1], times[k]);
        let w = (t - a) / (b - a);
        let interp = forcing[k - 1].axpby(1.0 - w, &forcing[k], w)?;
        if t > 0.0 {
            nodes.push(t);
            values.push(interp.coeffs().to_vec());
        }
    } else {
        nodes.push(t);
        values.push(forcing[k].coeffs().to_vec());
    }
    if nodes.len() == 1 {
        return Ok(SpectralField::zeros(grid, components));
    }
    let mut coeffs = duhamel_nodes(&nodes, &values, tables.k2()).pop().unwrap();
    if components == grid.dim() {
        tables.project_in_place(&mut coeffs);
    }
    SpectralField::new(grid, components, coeffs)
}

/// Converged Picard trajectory and its convergence record.
#[derive(Debug, Clone)]
pub struct PicardSolution {
    pub times: Vec<f64>,
    pub states: Vec<SimState>,
    /// Sup-in-time `L²` distance between iterates `k` and `k-1`, from `k = 1`.
    pub history: Vec<f64>,
    /// Distance between the returned trajectory and its image under one more
    /// application of the mild map.
    pub residual: f64,
}

impl PicardSolution {
    /// `history[k] / history[k-1]`.
    pub fn contraction_ratios(&self) -> Vec<f64> {
        self.history.windows(2).map(|w| w[1] / w[0]).collect()
    }

    pub fn final_state(&self) -> &SimState {
        self.states.last().expect("trajectory has at least one node")
    }
}

struct Trajectory {
    rho: Vec<Vec<Complex64>>,
    u: Vec<Vec<Complex64>>,
    v: Vec<Vec<Complex64>>,
}

struct MildMap<'a> {
    solver: PensSolver,
    times: &'a [f64],
    u0: Vec<Complex64>,
    v0: Vec<Complex64>,
    rho0: Vec<Complex64>,
}

impl MildMap<'_> {
    fn state(&self, tr: &Trajectory, j: usize) -> SpectralState {
        SpectralState { rho: tr.rho[j].clone(), u: tr.u[j].clone(), v: tr.v[j].clone(), t: self.times[j] }
    }

    /// `e^{-λt}y₀` at every node.
    fn free(&self, y0: &[Complex64], rates: &[f64]) -> Vec<Vec<Complex64>> {
        let n = rates.len();
        self.times
            .iter()
            .map(|&t| y0.iter().enumerate().map(|(q, y)| y * (-rates[q % n] * t).exp()).collect())
            .collect()
    }

    fn relax(&self, v: &[Vec<Complex64>], adv: Option<&[Vec<Complex64>]>) -> Vec<Vec<Complex64>> {
        let ones = vec![1.0; self.solver.grid().len()];
        let forcing: Vec<Vec<Complex64>> = match adv {
            Some(adv) => v.iter().zip(adv).map(|(a, b)| a.iter().zip(b).map(|(x, y)| x + y).collect()).collect(),
            None => v.to_vec(),
        };
        let integral = duhamel_nodes(self.times, &forcing, &ones);
        self.free(&self.u0, &ones)
            .into_iter()
            .zip(integral)
            .map(|(a, b)| a.iter().zip(&b).map(|(x, y)| x + y).collect())
            .collect()
    }

    /// Conservative Heun stepping of `ρ_t = -∇·(ρu)` across the nodes.
    fn density(&self, u: &[Vec<Complex64>]) -> Result<Vec<Vec<Complex64>>> {
        let zero_v = vec![ZERO; self.v0.len()];
        let mut rho = vec![self.rho0.clone()];
        for j in 0..self.times.len() - 1 {
            let h = self.times[j + 1] - self.times[j];
            let at = |r: &[Complex64], k: usize| SpectralState {
                rho: r.to_vec(),
                u: u[k].clone(),
                v: zero_v.clone(),
                t: self.times[k],
            };
            let f0 = self.solver.evaluate(&at(&rho[j], j))?.drho;
            let pred: Vec<Complex64> = rho[j].iter().zip(&f0).map(|(r, f)| r + f * h).collect();
            let f1 = self.solver.evaluate(&at(&pred, j + 1))?.drho;
            let next = rho[j].iter().zip(f0.iter().zip(&f1)).map(|(r, (a, b))| r + (a + b) * (0.5 * h)).collect();
            rho.push(next);
        }
        Ok(rho)
    }

    fn initial(&self) -> Result<Trajectory> {
        let v = self.free(&self.v0, self.solver.tables().k2());
        let u = self.relax(&v, None);
        let rho = self.density(&u)?;
        Ok(Trajectory { rho, u, v })
    }

    /// `v` from the old iterate, then `u` from the new `v`, then `ρ`.
    fn apply(&self, tr: &Trajectory) -> Result<Trajectory> {
        let k2 = self.solver.tables().k2();
        let mut force_v = Vec::with_capacity(self.times.len());
        let mut adv_u = Vec::with_capacity(self.times.len());
        for j in 0..self.times.len() {
            let e = self.solver.evaluate(&self.state(tr, j))?;
            force_v.push(e.force_v);
            adv_u.push(e.adv_u);
        }
        let free_v = self.free(&self.v0, k2);
        let v: Vec<Vec<Complex64>> = duhamel_nodes(self.times, &force_v, k2)
            .into_iter()
            .zip(free_v)
            .map(|(mut i, f)| {
                self.solver.tables().project_in_place(&mut i);
                i.iter().zip(&f).map(|(x, y)| x + y).collect()
            })
            .collect();
        let u = self.relax(&v, Some(&adv_u));
        let rho = self.density(&u)?;
        Ok(Trajectory { rho, u, v })
    }

    fn distance(&self, a: &Trajectory, b: &Trajectory) -> f64 {
        let dv = self.solver.grid().mode_volume();
        let sq = |x: &[Complex64], y: &[Complex64]| x.iter().zip(y).map(|(p, q)| (p - q).norm_sqr()).sum::<f64>();
        (0..self.times.len())
            .map(|j| ((sq(&a.u[j], &b.u[j]) + sq(&a.v[j], &b.v[j])) * dv).sqrt())
            .fold(0.0, f64::max)
    }
}

/// Fixed-point iteration of the mild formulation on the sample grid of
/// `config`, starting from the free linear evolution.
pub fn picard_solve(config: &SolverConfig, tol: f64, max_iter: usize) -> Result<PicardSolution> {
    config.validate()?;
    let initial = initial_data(&config.preset, &config.grid, config.epsilon, config.seed)?;
    picard_solve_from(config, &initial, tol, max_iter)
}

pub fn picard_solve_from(
    config: &SolverConfig,
    initial: &SimState,
    tol: f64,
    max_iter: usize,
) -> Result<PicardSolution> {
    if !(tol > 0.0) || max_iter == 0 {
        return Err(PensError::InvalidArgument("tol must be > 0 and max_iter >= 1".into()));
    }
    let solver = PensSolver::new(config.grid, config.cfl_safety)?;
    solver.check_grid(initial)?;
    let times = sample_times(config);
    let y0 = solver.to_spectral(initial);
    let map = MildMap { solver, times: &times, u0: y0.u, v0: y0.v, rho0: y0.rho };

    let mut current = map.initial()?;
    let mut history: Vec<f64> = Vec::new();
    loop {
        let next = map.apply(&current)?;
        let dist = map.distance(&current, &next);
        history.push(dist);
        current = next;
        let k = history.len();
        if k >= 3 && history[k - 1] > history[k - 2] && history[k - 2] > history[k - 3] {
            return Err(PensError::OutsideContractionRegime { iterate: k });
        }
        if dist < tol {
            break;
        }
        if k >= max_iter {
            return Err(PensError::NotConverged { max_iter, distance: dist });
        }
    }
    let residual = map.distance(&current, &map.apply(&current)?);
    let states = (0..times.len())
        .map(|j| map.solver.to_state(&map.state(&current, j)))
        .collect::<Result<Vec<_>>>()?;
    Ok(PicardSolution { times, states, history, residual })
}

/// Stepper-versus-oracle comparison on one configuration.
#[derive(Debug, Clone)]
pub struct MildComparison {
    /// `‖v_step - v_mild‖ / ‖v_mild‖` at `t_end`.
    pub final_relative_v: f64,
    /// Largest of the same ratio over all sample times after 0.
    pub max_relative_v: f64,
    pub picard: PicardSolution,
}

pub fn compare_with_stepper(config: &SolverConfig, tol: f64, max_iter: usize) -> Result<MildComparison> {
    let picard = picard_solve(config, tol, max_iter)?;
    let settings = DiagnosticSettings::for_dim(config.grid.dim());
    let mut stepped = Vec::new();
    run_observed(config, &settings, picard.states[0].clone(), |s| {
        stepped.push(s.v.clone());
        Ok(())
    })?;
    let mut worst: f64 = 0.0;
    let mut last = 0.0;
    for (a, b) in stepped.iter().zip(&picard.states).skip(1) {
        let scale = lp_norm(&b.v, Lp::Two);
        let diff = lp_norm(&a.axpby(1.0, &b.v, -1.0)?, Lp::Two);
        last = if scale > 0.0 { diff / scale } else { diff };
        worst = worst.max(last);
    }
    Ok(MildComparison { final_relative_v: last, max_relative_v: worst, picard })
}

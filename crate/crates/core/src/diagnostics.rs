//! Norms, energy bookkeeping, the a-priori functionals and the stability
//! metric, all evaluated on grid data.
//!
//! Spectral norms use the normalized transform, so `Σ|f̂|²(Δξ)^d` is the
//! grid `L²` norm exactly.

use std::collections::BTreeMap;

use crate::error::{PensError, Result};
use crate::field::{RealField, SpectralField};
use crate::spectral::{apply_real_multiplier, norm2, ModeTables};
use crate::state::SimState;
use crate::timeseries::TimeSeries;

/// Lebesgue exponents supported by [`lp_norm`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Lp {
    One,
    Two,
    Inf,
}

/// Grid quadrature of `‖f‖_{L^p}`; vector fields use the pointwise
/// Euclidean magnitude.
pub fn lp_norm(f: &RealField, p: Lp) -> f64 {
    let mags = f.magnitudes();
    let dv = f.grid().cell_volume();
    match p {
        Lp::One => mags.iter().sum::<f64>() * dv,
        Lp::Two => (mags.iter().map(|m| m * m).sum::<f64>() * dv).sqrt(),
        Lp::Inf => mags.iter().copied().fold(0.0, f64::max),
    }
}

/// `‖(1+|ξ|²)^{s/2} f̂‖` or, if `homogeneous`, `‖|ξ|^s f̂‖`.
///
/// The homogeneous norm with `s < 0` requires a vanishing mean mode (up to
/// 1e-12 of the `L²` norm, which admits transform roundoff).
pub fn sobolev_norm(f: &SpectralField, s: f64, homogeneous: bool) -> Result<f64> {
    if homogeneous && s < 0.0 {
        let mean2: f64 = (0..f.components()).map(|c| f.mean_mode(c).norm_sqr()).sum();
        let total = f.weighted_energy(|_| 1.0);
        if mean2 * f.grid().mode_volume() > 1e-24 * total {
            return Err(PensError::ZeroFrequencySingularity);
        }
    }
    let e = if homogeneous {
        f.weighted_energy(|xi| {
            let k2 = norm2(xi);
            if k2 == 0.0 {
                if s == 0.0 { 1.0 } else { 0.0 }
            } else {
                k2.powf(s)
            }
        })
    } else {
        f.weighted_energy(|xi| (1.0 + norm2(xi)).powf(s))
    };
    Ok(e.sqrt())
}

/// `Σ_ξ |ξ|^k |f̂(ξ)| (Δξ)^d`, with `|f̂|` the Euclidean norm over components.
pub fn fourier_l1(f: &SpectralField, k: f64) -> Result<f64> {
    if !(k >= 0.0 && k.is_finite()) {
        return Err(PensError::InvalidArgument(format!("fourier_l1 order must be >= 0, got {k}")));
    }
    let grid = f.grid();
    let n = grid.len();
    let mut acc = 0.0;
    for flat in 0..n {
        let w = if k == 0.0 { 1.0 } else { norm2(grid.mode(flat)).powf(k / 2.0) };
        if w == 0.0 {
            continue;
        }
        let m2: f64 = (0..f.components()).map(|c| f.component(c)[flat].norm_sqr()).sum();
        acc += w * m2.sqrt();
    }
    Ok(acc * grid.mode_volume())
}

/// `E = ½∫ρ|u|² + ½∫|v|²`.
pub fn energy(state: &SimState) -> f64 {
    let n = state.grid().len();
    let rho = state.rho.values();
    let u = state.u.values();
    let mut kinetic = 0.0;
    for p in 0..n {
        let u2: f64 = (0..state.grid().dim()).map(|c| u[c * n + p].powi(2)).sum();
        kinetic += rho[p] * u2;
    }
    let v2: f64 = state.v.values().iter().map(|x| x * x).sum();
    0.5 * (kinetic + v2) * state.grid().cell_volume()
}

/// `D = ∫|∇v|² + ∫ρ|u - v|²`.
pub fn dissipation(state: &SimState) -> f64 {
    let shear = state.v.to_spectral().weighted_energy(norm2);
    let n = state.grid().len();
    let rho = state.rho.values();
    let (u, v) = (state.u.values(), state.v.values());
    let mut drag = 0.0;
    for p in 0..n {
        let w2: f64 = (0..state.grid().dim()).map(|c| (u[c * n + p] - v[c * n + p]).powi(2)).sum();
        drag += rho[p] * w2;
    }
    shear + drag * state.grid().cell_volume()
}

/// Regularity indices and derivative orders used when sampling a run.
#[derive(Debug, Clone, PartialEq)]
pub struct DiagnosticSettings {
    pub m: f64,
    pub s: f64,
    /// Integer orders `k` for the `hk_u_k` / `hk_v_k` channels.
    pub k_orders: Vec<u32>,
    /// Fractional orders `θ` for the `htheta_umv_θ` channels.
    pub theta_orders: Vec<f64>,
}

impl DiagnosticSettings {
    /// `m = d/2 + 1.5`, `s = m - 1.25`.
    pub fn for_dim(d: usize) -> Self {
        let m = d as f64 / 2.0 + 1.5;
        Self { m, s: m - 1.25, k_orders: vec![1, 2], theta_orders: vec![0.5] }
    }

    /// Checks `m > d/2 + 1` and `s ∈ (m-2, m-1]`.
    pub fn validate(&self, d: usize) -> Result<()> {
        let half = d as f64 / 2.0;
        if !(self.m.is_finite() && self.m > half + 1.0) {
            return Err(PensError::InvalidConfig(format!("m must exceed d/2+1 = {}, got {}", half + 1.0, self.m)));
        }
        if !(self.s > self.m - 2.0 && self.s <= self.m - 1.0) {
            return Err(PensError::InvalidConfig("s must lie in (m-2, m-1]".into()));
        }
        if self.theta_orders.iter().any(|t| !(t.is_finite() && *t >= 0.0)) {
            return Err(PensError::InvalidConfig("theta orders must be >= 0".into()));
        }
        Ok(())
    }
}

pub fn hk_channel(field: &str, k: u32) -> String {
    format!("hk_{field}_{k}")
}

pub fn htheta_channel(theta: f64) -> String {
    format!("htheta_umv_{theta}")
}

fn max_magnitude(values: &[f64], n: usize, components: usize) -> f64 {
    (0..n)
        .map(|p| (0..components).map(|c| values[c * n + p].powi(2)).sum::<f64>().sqrt())
        .fold(0.0, f64::max)
}

/// Every per-sample channel of a run (see the crate README for the list).
pub fn sample_channels(state: &SimState, settings: &DiagnosticSettings) -> Result<BTreeMap<String, f64>> {
    let grid = *state.grid();
    let d = grid.dim();
    let n = grid.len();
    let tables = ModeTables::new(&grid);
    let rs = state.rho.to_spectral();
    let us = state.u.to_spectral();
    let vs = state.v.to_spectral();
    let ws = us.axpby(1.0, &vs, -1.0)?;
    let (m, s) = (settings.m, settings.s);

    let mut out = BTreeMap::new();
    let mut put = |k: &str, v: f64| {
        out.insert(k.to_string(), v);
    };
    put("E", energy(state));
    put("D", dissipation(state));
    put("l1_v", lp_norm(&state.v, Lp::One));
    put("l2_u", lp_norm(&state.u, Lp::Two));
    put("l2_v", lp_norm(&state.v, Lp::Two));
    let w_real = state.u.axpby(1.0, &state.v, -1.0)?;
    put("l2_umv", lp_norm(&w_real, Lp::Two));
    put("linf_umv", lp_norm(&w_real, Lp::Inf));
    for &k in &settings.k_orders {
        put(&hk_channel("u", k), sobolev_norm(&us, k as f64, true)?);
        put(&hk_channel("v", k), sobolev_norm(&vs, k as f64, true)?);
    }
    for &theta in &settings.theta_orders {
        put(&htheta_channel(theta), sobolev_norm(&ws, theta, true)?);
    }
    let lap_v = apply_real_multiplier(&vs, |xi| -norm2(xi))?.to_real_unchecked();
    put("linf_dv", lp_norm(&lap_v, Lp::Inf));
    put("xi_l1_v", fourier_l1(&vs, 1.0)?);
    put("xi2_l1_v", fourier_l1(&vs, 2.0)?);
    put("l1hat_umv", fourier_l1(&ws, 0.0)?);
    put("hs_rho", sobolev_norm(&rs, s, false)?);
    put("hm_u", sobolev_norm(&us, m, false)?);
    put("hs_v", sobolev_norm(&vs, s, false)?);
    let d2 = |xi: [f64; 3]| {
        let k2 = norm2(xi);
        k2 * k2 * (1.0 + k2).powf(m - 2.0)
    };
    put("hm2_d2u", us.weighted_energy(d2).sqrt());
    put("hm2_d2v", vs.weighted_energy(d2).sqrt());

    let mut grad = SpectralField::zeros(grid, d * d);
    for c in 0..d {
        tables.gradient_into(us.component(c), &mut grad.coeffs_mut()[c * d * n..(c + 1) * d * n]);
    }
    let grad = grad.to_real_unchecked();
    put("linf_grad_u", max_magnitude(grad.values(), n, d * d));
    Ok(out)
}

/// Composite trapezoid `∫ f dt` over the sample grid.
pub fn trapezoid(times: &[f64], values: &[f64]) -> f64 {
    times
        .windows(2)
        .zip(values.windows(2))
        .map(|(t, f)| 0.5 * (t[1] - t[0]) * (f[0] + f[1]))
        .sum()
}

/// Running trapezoid: entry `i` is `∫_{t_0}^{t_i} f dt`.
pub fn cumulative_trapezoid(times: &[f64], values: &[f64]) -> Vec<f64> {
    let mut acc = 0.0;
    let mut out = Vec::with_capacity(times.len());
    out.push(0.0);
    for (t, f) in times.windows(2).zip(values.windows(2)) {
        acc += 0.5 * (t[1] - t[0]) * (f[0] + f[1]);
        out.push(acc);
    }
    out.truncate(times.len());
    out
}

/// `R_n = E(t_{n+1}) - E(t_n) + ∫_{t_n}^{t_{n+1}} D dt`.
///
/// When the series carries a `D_int` channel (the solver's running
/// per-step trapezoid of `D`) its increments are used; otherwise the
/// trapezoid is taken over the samples.
pub fn energy_residual(series: &TimeSeries) -> Result<Vec<f64>> {
    let e = series.channel("E")?;
    let dissipated: Vec<f64> = if series.has_channel("D_int") {
        series.channel("D_int")?.to_vec()
    } else {
        cumulative_trapezoid(series.times(), series.channel("D")?)
    };
    Ok((1..e.len())
        .map(|i| e[i] - e[i - 1] + (dissipated[i] - dissipated[i - 1]))
        .collect())
}

fn check_meta(series: &TimeSeries, s: f64, m: f64) -> Result<()> {
    let meta = series.meta;
    if meta.s != s || meta.m != m {
        return Err(PensError::RegularityMismatch(format!(
            "series sampled with (s, m) = ({}, {}), requested ({s}, {m})",
            meta.s, meta.m
        )));
    }
    Ok(())
}

/// `‖v‖_{L^p(0,T;L²)}` with `p = (d+4)/2`.
fn bochner_l2_v(series: &TimeSeries) -> Result<f64> {
    let p = (series.meta.d as f64 + 4.0) / 2.0;
    let pow: Vec<f64> = series.channel("l2_v")?.iter().map(|x| x.powf(p)).collect();
    Ok(trapezoid(series.times(), &pow).powf(1.0 / p))
}

/// `sup_t(‖ρ‖²_{H^s} + ‖u‖²_{H^m} + ‖v‖²_{H^s}) + ‖v‖²_{L^{(d+4)/2}(0,T;L²)}`.
pub fn functional_x(series: &TimeSeries, s: f64, m: f64) -> Result<f64> {
    check_meta(series, s, m)?;
    let (r, u, v) = (series.channel("hs_rho")?, series.channel("hm_u")?, series.channel("hs_v")?);
    let sup = (0..series.len()).map(|i| r[i] * r[i] + u[i] * u[i] + v[i] * v[i]).fold(0.0, f64::max);
    Ok(sup + bochner_l2_v(series)?.powi(2))
}

/// `∫‖∇u‖_∞ + ∫‖|ξ|v̂‖_{L¹} + ∫‖∇²u‖_{H^{m-2}} + ∫‖∇²v‖_{H^{m-2}} + ∫‖u-v‖ +
/// ‖v‖_{L^{(d+4)/2}(0,T;L²)}`.
pub fn functional_d(series: &TimeSeries, s: f64, m: f64) -> Result<f64> {
    check_meta(series, s, m)?;
    let t = series.times();
    let mut acc = 0.0;
    for name in ["linf_grad_u", "xi_l1_v", "hm2_d2u", "hm2_d2v", "l2_umv"] {
        acc += trapezoid(t, series.channel(name)?);
    }
    Ok(acc + bochner_l2_v(series)?)
}

/// `‖ρ_a - ρ_b‖²_{Ḣ^{-α}} + ‖u_a - u_b‖²_{H¹} + ‖v_a - v_b‖²_{L²}`.
///
/// The density difference must be mean-free to 1e-10 relative to the mass
/// of `a`; the residual roundoff mean is then discarded.
pub fn stability_metric(a: &SimState, b: &SimState, alpha: f64) -> Result<f64> {
    if !(alpha > 0.0 && alpha < 0.5) {
        return Err(PensError::InvalidArgument(format!("alpha must lie in (0, 1/2), got {alpha}")));
    }
    if a.grid() != b.grid() {
        return Err(PensError::GridMismatch("stability_metric needs states on one grid".into()));
    }
    let mut dr = a.rho.axpby(1.0, &b.rho, -1.0)?.to_spectral();
    let scale = a.rho.to_spectral().mean_mode(0).norm();
    let relative = if scale > 0.0 { dr.mean_mode(0).norm() / scale } else { dr.mean_mode(0).norm() };
    if relative > 1e-10 {
        return Err(PensError::MeanMismatch { relative });
    }
    dr.zero_mean_mode();
    let du = a.u.axpby(1.0, &b.u, -1.0)?.to_spectral();
    let dv = a.v.axpby(1.0, &b.v, -1.0)?;
    Ok(sobolev_norm(&dr, -alpha, true)?.powi(2)
        + sobolev_norm(&du, 1.0, false)?.powi(2)
        + lp_norm(&dv, Lp::Two).powi(2))
}

/// Pressure `p` with zero mean solving `-Δp = ∇·[(v·∇)v - ρ(u - v)]`.
pub fn recover_pressure(state: &SimState) -> Result<RealField> {
    let grid = *state.grid();
    let d = grid.dim();
    let n = grid.len();
    let tables = ModeTables::new(&grid);
    let vs = state.v.to_spectral();
    let mut grad = SpectralField::zeros(grid, d * d);
    for c in 0..d {
        tables.gradient_into(vs.component(c), &mut grad.coeffs_mut()[c * d * n..(c + 1) * d * n]);
    }
    let gv = grad.to_real_unchecked();
    let (gv, rho, u, v) = (gv.values(), state.rho.values(), state.u.values(), state.v.values());
    let mut q = vec![0.0; d * n];
    for p in 0..n {
        for i in 0..d {
            let adv: f64 = (0..d).map(|j| v[j * n + p] * gv[(i * d + j) * n + p]).sum();
            q[i * n + p] = adv - rho[p] * (u[i * n + p] - v[i * n + p]);
        }
    }
    let q = RealField::new(grid, d, q)?.to_spectral();
    let mut div = SpectralField::zeros(grid, 1);
    tables.divergence_into(q.coeffs(), div.coeffs_mut());
    let mut p = apply_real_multiplier(&div, |xi| {
        let k2 = norm2(xi);
        if k2 == 0.0 { 0.0 } else { 1.0 / k2 }
    })?;
    p.zero_mean_mode();
    Ok(p.to_real_unchecked())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Grid;
    use crate::timeseries::SeriesMeta;
    use std::f64::consts::PI;

    fn torus() -> Grid {
        Grid::new(2, 16, 2.0 * PI).unwrap()
    }

    fn sine(g: Grid) -> RealField {
        RealField::from_fn(g, 1, |x, _| x[0].sin()).unwrap()
    }

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol * b.abs().max(1.0)
    }

    #[test]
    fn lp_norm_cases() {
        let g = torus();
        let z = RealField::zeros(g, 2);
        for p in [Lp::One, Lp::Two, Lp::Inf] {
            assert_eq!(lp_norm(&z, p), 0.0);
        }
        assert!(close(lp_norm(&sine(g), Lp::Two), PI * 2f64.sqrt(), 1e-13));
        assert!(close(lp_norm(&sine(g), Lp::Inf), 1.0, 1e-15));
    }

    #[test]
    fn sobolev_norm_cases() {
        let g = torus();
        let f = sine(g).to_spectral();
        let l2 = lp_norm(&sine(g), Lp::Two);
        for s in [-1.5, -0.3, 0.0, 0.5, 2.0] {
            assert!(close(sobolev_norm(&f, s, true).unwrap(), l2, 1e-13), "{s}");
        }
        assert!(close(sobolev_norm(&f, 0.0, false).unwrap(), l2, 1e-13));
        assert!(close(sobolev_norm(&f, 1.0, false).unwrap(), 2.0 * PI, 1e-13));
        let c = RealField::from_fn(g, 1, |_, _| 1.0).unwrap().to_spectral();
        assert!(matches!(sobolev_norm(&c, -0.5, true), Err(PensError::ZeroFrequencySingularity)));
    }

    #[test]
    fn fourier_l1_cases() {
        let g = torus();
        assert_eq!(fourier_l1(&SpectralField::zeros(g, 1), 0.0).unwrap(), 0.0);
        // each mode has |f̂| = π (see field tests); Δξ = 1
        assert!(close(fourier_l1(&sine(g).to_spectral(), 0.0).unwrap(), 2.0 * PI, 1e-13));
    }

    fn state(g: Grid, rho: f64, u: impl Fn([f64; 3], usize) -> f64, v: impl Fn([f64; 3], usize) -> f64) -> SimState {
        SimState::new(
            RealField::from_fn(g, 1, |_, _| rho).unwrap(),
            RealField::from_fn(g, 2, u).unwrap(),
            RealField::from_fn(g, 2, v).unwrap(),
            0.0,
        )
        .unwrap()
    }

    #[test]
    fn energy_and_dissipation_cases() {
        let g = torus();
        let zero = state(g, 1.0, |_, _| 0.0, |_, _| 0.0);
        assert_eq!((energy(&zero), dissipation(&zero)), (0.0, 0.0));
        let a = 0.3;
        let s = state(g, 0.0, |_, _| 0.0, |x, c| if c == 1 { a * x[0].sin() } else { 0.0 });
        assert!(close(energy(&s), PI * PI * a * a, 1e-13));
        assert!(close(dissipation(&s), 2.0 * PI * PI * a * a, 1e-13));
        let tg = |x: [f64; 3], c: usize| [x[0].sin() * x[1].cos(), -x[0].cos() * x[1].sin()][c];
        let same = state(g, 2.0, tg, tg);
        assert!(close(dissipation(&same), state(g, 0.0, tg, tg).v.to_spectral().weighted_energy(norm2), 1e-14));
    }

    fn series(times: &[f64], e: &[f64], d: &[f64]) -> TimeSeries {
        let mut cols = BTreeMap::new();
        cols.insert("E".to_string(), e.to_vec());
        cols.insert("D".to_string(), d.to_vec());
        TimeSeries::from_columns(SeriesMeta { d: 2, m: 2.5, s: 1.25 }, times.to_vec(), cols).unwrap()
    }

    #[test]
    fn energy_residual_cases() {
        let t = [0.0, 1.0, 2.0];
        let r = energy_residual(&series(&t, &[1.0; 3], &[0.0; 3])).unwrap();
        assert_eq!(r, vec![0.0, 0.0]);

        // E = e^{-2t}, D = 2e^{-2t}: local trapezoid error is h³/12·|D''| = h³·8/12·E
        let residual_max = |h: f64| {
            let t: Vec<f64> = (0..=20).map(|i| i as f64 * h).collect();
            let e: Vec<f64> = t.iter().map(|t| (-2.0 * t).exp()).collect();
            let d: Vec<f64> = e.iter().map(|e| 2.0 * e).collect();
            energy_residual(&series(&t, &e, &d)).unwrap().iter().fold(0.0f64, |m, r| m.max(r.abs()))
        };
        let (r1, r2) = (residual_max(0.1), residual_max(0.05));
        assert!(r1 < 0.1f64.powi(3));
        assert!((r1 / r2 - 8.0).abs() < 0.5, "{}", r1 / r2);

        let missing = TimeSeries::from_columns(SeriesMeta { d: 2, m: 2.5, s: 1.25 }, vec![0.0], BTreeMap::new()).unwrap();
        assert!(matches!(energy_residual(&missing), Err(PensError::MissingChannel(_))));
    }

    #[test]
    fn functionals_on_static_density() {
        let meta = SeriesMeta { d: 2, m: 2.5, s: 1.25 };
        let names = ["hs_rho", "hm_u", "hs_v", "l2_v", "linf_grad_u", "xi_l1_v", "hm2_d2u", "hm2_d2v", "l2_umv"];
        let times = vec![0.0, 0.5, 1.0];
        let cols = names
            .iter()
            .map(|n| (n.to_string(), if *n == "hs_rho" { vec![3.0, 2.0, 1.0] } else { vec![0.0; 3] }))
            .collect();
        let ts = TimeSeries::from_columns(meta, times, cols).unwrap();
        assert_eq!(functional_x(&ts, 1.25, 2.5).unwrap(), 9.0);
        assert_eq!(functional_d(&ts, 1.25, 2.5).unwrap(), 0.0);
        assert!(matches!(functional_x(&ts, 1.0, 2.5), Err(PensError::RegularityMismatch(_))));
    }

    #[test]
    fn stability_metric_cases() {
        let g = torus();
        let base = state(g, 1.0, |_, _| 0.0, |_, _| 0.0);
        assert_eq!(stability_metric(&base, &base, 0.25).unwrap(), 0.0);

        let c = 0.01;
        let mut b = base.clone();
        b.rho = RealField::from_fn(g, 1, |x, _| 1.0 + c * x[0].sin()).unwrap();
        let l2 = lp_norm(&sine(g), Lp::Two);
        let m1 = stability_metric(&base, &b, 0.25).unwrap();
        assert!(close(m1, c * c * l2 * l2, 1e-12));

        let mut b2 = base.clone();
        b2.rho = RealField::from_fn(g, 1, |x, _| 1.0 + 2.0 * c * x[0].sin()).unwrap();
        assert!(close(stability_metric(&base, &b2, 0.25).unwrap(), 4.0 * m1, 1e-12));

        let mut shifted = base.clone();
        shifted.rho = RealField::from_fn(g, 1, |_, _| 1.001).unwrap();
        assert!(matches!(stability_metric(&base, &shifted, 0.25), Err(PensError::MeanMismatch { .. })));
        assert!(stability_metric(&base, &b, 0.5).is_err());
    }

    #[test]
    fn pressure_cases() {
        let g = torus();
        let zero = state(g, 1.0, |_, _| 0.0, |_, _| 0.0);
        assert!(lp_norm(&recover_pressure(&zero).unwrap(), Lp::Inf) == 0.0);

        // Taylor–Green: (v·∇)v = ∇(-¼(cos2x₁ + cos2x₂)), so p = +¼(cos2x₁ + cos2x₂)
        let tg = |x: [f64; 3], c: usize| [x[0].sin() * x[1].cos(), -x[0].cos() * x[1].sin()][c];
        let s = state(g, 1.0, tg, tg);
        let p = recover_pressure(&s).unwrap();
        let expect = RealField::from_fn(g, 1, |x, _| 0.25 * ((2.0 * x[0]).cos() + (2.0 * x[1]).cos())).unwrap();
        assert!(lp_norm(&p.axpby(1.0, &expect, -1.0).unwrap(), Lp::Inf) < 1e-14);

        // a constant drag force ρ(u - v) has no divergence
        let drift = state(g, 1.0, |_, c| [0.5, -0.25][c], |_, _| 0.0);
        assert!(lp_norm(&recover_pressure(&drift).unwrap(), Lp::Inf) < 1e-15);
    }
}

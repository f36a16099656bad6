//! Power-law decay experiments in the pre-saturation window of the torus.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use num_rational::Rational64;
use serde::Serialize;

use crate::diagnostics::{hk_channel, htheta_channel, trapezoid, DiagnosticSettings};
use crate::error::{PensError, Result};
use crate::solver::run;
use crate::state::SolverConfig;
use crate::timeseries::TimeSeries;

/// Quantities with a decay rate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Quantity {
    /// `‖∇^k u‖_{L²}`
    U,
    /// `‖∇^k v‖_{L²}`
    V,
    /// `‖∇^θ(u - v)‖_{L²}`
    UmV,
    /// `‖Δv‖_{L^∞}`
    LapVInf,
    /// `‖u - v‖_{L^∞}`
    UmvInf,
    /// `E(t)`
    Energy,
}

impl FromStr for Quantity {
    type Err = PensError;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "u" => Quantity::U,
            "v" => Quantity::V,
            "u-v" | "umv" => Quantity::UmV,
            "lapv_inf" | "dv_inf" => Quantity::LapVInf,
            "umv_inf" => Quantity::UmvInf,
            "E" | "energy" => Quantity::Energy,
            _ => return Err(PensError::InvalidArgument(format!("unknown quantity '{s}'"))),
        })
    }
}

impl fmt::Display for Quantity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Quantity::U => "u",
            Quantity::V => "v",
            Quantity::UmV => "u-v",
            Quantity::LapVInf => "lapv_inf",
            Quantity::UmvInf => "umv_inf",
            Quantity::Energy => "E",
        })
    }
}

pub fn rational_to_f64(r: Rational64) -> f64 {
    *r.numer() as f64 / *r.denom() as f64
}

fn rational(x: f64) -> Result<Rational64> {
    Rational64::approximate_float(x)
        .filter(|r| (rational_to_f64(*r) - x).abs() <= 1e-12 * x.abs().max(1.0))
        .ok_or_else(|| PensError::OrderOutOfRange(format!("order {x} is not representable")))
}

/// Theoretical decay exponent of `quantity` at derivative order `order` in
/// dimension `d` for Euler regularity `m`.
///
/// Admissible orders: `k ≤ min{m, d/2+2}` for `u`, `v`; `θ ≤ min{m-2, d/2}`
/// for `u - v`; order 0 for the remaining quantities.
pub fn expected_exponent(quantity: Quantity, order: f64, d: usize, m: f64) -> Result<Rational64> {
    if !(order >= 0.0 && order.is_finite()) {
        return Err(PensError::OrderOutOfRange(format!("order must be >= 0, got {order}")));
    }
    if d == 0 {
        return Err(PensError::InvalidArgument("dimension must be >= 1".into()));
    }
    let half = Rational64::new(d as i64, 2);
    let quarter = Rational64::new(d as i64, 4);
    let one = Rational64::from_integer(1);
    let out_of_range = |limit: f64| {
        Err(PensError::OrderOutOfRange(format!(
            "order {order} exceeds {limit} for {quantity} (d = {d}, m = {m})"
        )))
    };
    match quantity {
        Quantity::U | Quantity::V => {
            let limit = m.min(d as f64 / 2.0 + 2.0);
            if order > limit {
                return out_of_range(limit);
            }
            Ok(-quarter - rational(order)? / 2)
        }
        Quantity::UmV => {
            let limit = (m - 2.0).min(d as f64 / 2.0);
            if order > limit {
                return out_of_range(limit);
            }
            Ok(-quarter - rational(order)? / 2 - one)
        }
        Quantity::LapVInf | Quantity::UmvInf => {
            if order != 0.0 {
                return out_of_range(0.0);
            }
            Ok(-half - one)
        }
        Quantity::Energy => {
            if order != 0.0 {
                return out_of_range(0.0);
            }
            Ok(-half)
        }
    }
}

/// Quantity and order measured by a channel, if it has a decay rate.
pub fn channel_quantity(name: &str) -> Option<(Quantity, f64)> {
    let q = match name {
        "l2_u" => (Quantity::U, 0.0),
        "l2_v" => (Quantity::V, 0.0),
        "l2_umv" => (Quantity::UmV, 0.0),
        "linf_dv" => (Quantity::LapVInf, 0.0),
        "linf_umv" => (Quantity::UmvInf, 0.0),
        "E" => (Quantity::Energy, 0.0),
        _ => {
            if let Some(k) = name.strip_prefix("hk_u_") {
                (Quantity::U, k.parse().ok()?)
            } else if let Some(k) = name.strip_prefix("hk_v_") {
                (Quantity::V, k.parse().ok()?)
            } else if let Some(t) = name.strip_prefix("htheta_umv_") {
                (Quantity::UmV, t.parse().ok()?)
            } else {
                return None;
            }
        }
    };
    Some(q)
}

/// Fit tolerance: 0.15 for second derivatives, differences and `L^∞`
/// quantities, 0.1 otherwise.
pub fn tolerance(quantity: Quantity, order: f64) -> f64 {
    match quantity {
        Quantity::UmV | Quantity::LapVInf | Quantity::UmvInf => 0.15,
        _ if order >= 2.0 => 0.15,
        _ => 0.1,
    }
}

/// Least-squares line through `(log t, log value)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PowerLawFit {
    pub exponent: f64,
    pub prefactor: f64,
    /// Largest `|value/fit - 1|` inside the window.
    pub residual: f64,
    pub points: usize,
}

pub const MIN_FIT_POINTS: usize = 10;

pub fn fit_power_law(times: &[f64], values: &[f64], window: (f64, f64)) -> Result<PowerLawFit> {
    if times.len() != values.len() {
        return Err(PensError::InvalidArgument("times and values differ in length".into()));
    }
    let (t0, t1) = window;
    if !(t0 > 0.0 && t1 > t0) {
        return Err(PensError::WindowCollapse(format!("window [{t0}, {t1}] is empty or not positive")));
    }
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for (&t, &v) in times.iter().zip(values) {
        if t < t0 || t > t1 {
            continue;
        }
        if !(v > 0.0) {
            return Err(PensError::NonPositiveValue { value: v, t });
        }
        xs.push(t.ln());
        ys.push(v.ln());
    }
    if xs.len() < MIN_FIT_POINTS {
        return Err(PensError::TooFewPoints { found: xs.len(), needed: MIN_FIT_POINTS });
    }
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let exponent = sxy / sxx;
    let intercept = my - exponent * mx;
    let residual = xs
        .iter()
        .zip(&ys)
        .map(|(x, y)| (y - intercept - exponent * x).exp_m1().abs())
        .fold(0.0, f64::max);
    Ok(PowerLawFit { exponent, prefactor: intercept.exp(), residual, points: xs.len() })
}

/// Running sups of time-weighted norms.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct DecayFunctionals {
    pub horizon: f64,
    /// `sup τ^{d/4+k/2}‖∇^k u‖`, keyed by `k`.
    pub m_u: BTreeMap<String, f64>,
    pub m_v: BTreeMap<String, f64>,
    /// `sup τ^{d/4+θ/2+1}‖∇^θ(u-v)‖`, keyed by `θ`.
    pub d_theta: BTreeMap<String, f64>,
    /// `sup τ^{d/2+1}‖|ξ|²v̂‖_{L¹}`
    pub mtilde_v: f64,
    /// `sup τ^{d/2+1}‖(u-v)^‖_{L¹}`
    pub dtilde: f64,
}

impl DecayFunctionals {
    /// Functionals of `series` up to horizon `t` (inclusive).
    pub fn at_horizon(series: &TimeSeries, settings: &DiagnosticSettings, t: f64) -> Result<Self> {
        let d = series.meta.d as f64;
        let times = series.times();
        let last = times.partition_point(|&s| s <= t);
        let sup = |name: &str, power: f64| -> Result<f64> {
            let vals = series.channel(name)?;
            Ok((0..last).map(|i| times[i].powf(power) * vals[i]).fold(0.0, f64::max))
        };
        let mut out = DecayFunctionals { horizon: t, ..Default::default() };
        let mut orders = vec![0u32];
        orders.extend(settings.k_orders.iter().copied().filter(|&k| k > 0));
        for k in orders {
            let power = d / 4.0 + k as f64 / 2.0;
            let (cu, cv) = if k == 0 {
                ("l2_u".to_string(), "l2_v".to_string())
            } else {
                (hk_channel("u", k), hk_channel("v", k))
            };
            out.m_u.insert(k.to_string(), sup(&cu, power)?);
            out.m_v.insert(k.to_string(), sup(&cv, power)?);
        }
        let mut thetas = vec![0.0];
        thetas.extend(settings.theta_orders.iter().copied().filter(|&t| t > 0.0));
        for theta in thetas {
            let name = if theta == 0.0 { "l2_umv".to_string() } else { htheta_channel(theta) };
            out.d_theta.insert(theta.to_string(), sup(&name, d / 4.0 + theta / 2.0 + 1.0)?);
        }
        out.mtilde_v = sup("xi2_l1_v", d / 2.0 + 1.0)?;
        out.dtilde = sup("l1hat_umv", d / 2.0 + 1.0)?;
        Ok(out)
    }
}

/// `0.1·(L/2π)²`: beyond this the lowest torus mode dominates.
pub fn saturation_time(length: f64) -> f64 {
    0.1 * (length / (2.0 * std::f64::consts::PI)).powi(2)
}

/// How the fit window is chosen.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum WindowPolicy {
    /// `[max(1, 50·dt_max), min(t_sat, t_end)]`
    Default,
    Explicit(f64, f64),
}

impl WindowPolicy {
    pub fn resolve(&self, dt_max: f64, t_sat: f64, t_end: f64) -> Result<(f64, f64)> {
        let (t0, t1) = match *self {
            WindowPolicy::Default => ((50.0 * dt_max).max(1.0), t_sat.min(t_end)),
            WindowPolicy::Explicit(a, b) => (a, b),
        };
        if !(t1 > t0) {
            return Err(PensError::WindowCollapse(format!(
                "window [{t0}, {t1}] is empty (t_end = {t_end}, t_sat = {t_sat})"
            )));
        }
        Ok((t0, t1))
    }
}

pub const ZERO_FLAG: &str = "identically zero, no fit";
pub const HYPOTHESIS_FLAG: &str = "outside stated hypothesis";

/// One fitted channel.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ChannelFit {
    pub channel: String,
    pub exponent: Option<f64>,
    pub expected: f64,
    pub window: [f64; 2],
    pub residual: Option<f64>,
    pub tolerance: f64,
    pub pass: bool,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub flags: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DecayReport {
    pub t_sat: f64,
    pub window: [f64; 2],
    pub channels: Vec<ChannelFit>,
    /// Absent when the series lacks a constituent channel.
    pub functionals: Option<DecayFunctionals>,
}

impl DecayReport {
    pub fn channel(&self, name: &str) -> Option<&ChannelFit> {
        self.channels.iter().find(|c| c.channel == name)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

/// Channels fitted when none are requested.
pub fn default_fit_channels(settings: &DiagnosticSettings) -> Vec<String> {
    let mut out: Vec<String> = vec!["E".into(), "l2_u".into(), "l2_v".into(), "l2_umv".into()];
    for &k in &settings.k_orders {
        out.push(hk_channel("u", k));
        out.push(hk_channel("v", k));
    }
    for &t in &settings.theta_orders {
        out.push(htheta_channel(t));
    }
    out.push("linf_dv".into());
    out.push("linf_umv".into());
    out
}

/// Fits `channels` of an existing series.
pub fn report_from_series(
    series: &TimeSeries,
    settings: &DiagnosticSettings,
    channels: &[String],
    window: (f64, f64),
    t_sat: f64,
) -> Result<DecayReport> {
    let (d, m) = (series.meta.d, series.meta.m);
    let times = series.times();
    let mut fits = Vec::new();
    for name in channels {
        let (quantity, order) = channel_quantity(name)
            .ok_or_else(|| PensError::InvalidArgument(format!("channel '{name}' has no decay rate")))?;
        let expected = rational_to_f64(expected_exponent(quantity, order, d, m)?);
        let tolerance = tolerance(quantity, order);
        let values = series.channel(name)?;
        let mut flags = Vec::new();
        if matches!(quantity, Quantity::LapVInf | Quantity::UmvInf) && m < d as f64 / 2.0 + 2.0 {
            flags.push(HYPOTHESIS_FLAG.to_string());
        }
        let in_window = times.iter().zip(values).filter(|(t, _)| **t >= window.0 && **t <= window.1);
        let fit = if in_window.clone().all(|(_, v)| *v == 0.0) {
            flags.push(ZERO_FLAG.to_string());
            None
        } else {
            Some(fit_power_law(times, values, window)?)
        };
        fits.push(ChannelFit {
            channel: name.clone(),
            exponent: fit.map(|f| f.exponent),
            expected,
            window: [window.0, window.1],
            residual: fit.map(|f| f.residual),
            tolerance,
            pass: fit.is_some_and(|f| (f.exponent - expected).abs() <= tolerance),
            flags,
        });
    }
    let horizon = *times.last().ok_or_else(|| PensError::InvalidSeries("empty series".into()))?;
    Ok(DecayReport {
        t_sat,
        window: [window.0, window.1],
        channels: fits,
        functionals: match DecayFunctionals::at_horizon(series, settings, horizon) {
            Ok(f) => Some(f),
            Err(PensError::MissingChannel(_)) => None,
            Err(e) => return Err(e),
        },
    })
}

/// Runs `config` and fits `channels` (all rate-bearing channels if empty).
pub fn run_decay_experiment(
    config: &SolverConfig,
    settings: &DiagnosticSettings,
    channels: &[String],
    policy: WindowPolicy,
) -> Result<(DecayReport, TimeSeries)> {
    let t_sat = saturation_time(config.grid.length());
    let window = policy.resolve(config.dt_max, t_sat, config.t_end)?;
    let output = run(config, settings)?;
    let channels = if channels.is_empty() { default_fit_channels(settings) } else { channels.to_vec() };
    let report = report_from_series(&output.series, settings, &channels, window, t_sat)?;
    Ok((report, output.series))
}

/// `E(t)(1+t)^α + ∫₀ᵗ(1+τ)^α D dτ`, running max over samples, divided by
/// `E(0) + ‖v₀‖²_{L¹}`.
pub fn weighted_energy_profile(series: &TimeSeries, alpha: f64) -> Result<Vec<f64>> {
    let d = series.meta.d as f64;
    if !(alpha > 0.0 && alpha < d / 2.0) {
        return Err(PensError::InvalidArgument(format!("alpha must lie in (0, d/2), got {alpha}")));
    }
    let times = series.times();
    let e = series.channel("E")?;
    let dis = series.channel("D")?;
    let l1 = series.channel("l1_v")?;
    if times.is_empty() {
        return Err(PensError::InvalidSeries("empty series".into()));
    }
    let denom = e[0] + l1[0] * l1[0];
    if !(denom > 0.0) {
        return Err(PensError::InvalidSeries("E(0) + |v0|_L1^2 must be positive".into()));
    }
    let weighted: Vec<f64> = times.iter().zip(dis).map(|(t, d)| (1.0 + t).powf(alpha) * d).collect();
    let mut out = Vec::with_capacity(times.len());
    let mut best: f64 = 0.0;
    for i in 0..times.len() {
        let q = e[i] * (1.0 + times[i]).powf(alpha) + trapezoid(&times[..=i], &weighted[..=i]);
        best = best.max(q / denom);
        out.push(best);
    }
    Ok(out)
}

/// Final value of [`weighted_energy_profile`].
pub fn check_weighted_energy(series: &TimeSeries, alpha: f64) -> Result<f64> {
    Ok(*weighted_energy_profile(series, alpha)?.last().unwrap())
}

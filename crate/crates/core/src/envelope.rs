//! Continuous heat envelopes on ℝ^d from radial spectral profiles.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::sync::OnceLock;

use crate::error::{PensError, Result};

/// A radial spectral profile `p(|ξ|)`.
pub trait RadialProfile: Send + Sync {
    fn name(&self) -> &'static str;
    fn description(&self) -> &'static str;
    fn value(&self, r: f64) -> f64;
}

struct Gaussian;
struct Exponential;
struct Lorentzian;

impl RadialProfile for Gaussian {
    fn name(&self) -> &'static str {
        "gaussian"
    }
    fn description(&self) -> &'static str {
        "exp(-r^2/2)"
    }
    fn value(&self, r: f64) -> f64 {
        (-0.5 * r * r).exp()
    }
}

impl RadialProfile for Exponential {
    fn name(&self) -> &'static str {
        "exponential"
    }
    fn description(&self) -> &'static str {
        "exp(-r)"
    }
    fn value(&self, r: f64) -> f64 {
        (-r).exp()
    }
}

impl RadialProfile for Lorentzian {
    fn name(&self) -> &'static str {
        "lorentzian"
    }
    fn description(&self) -> &'static str {
        "1/(1+r^2)"
    }
    fn value(&self, r: f64) -> f64 {
        1.0 / (1.0 + r * r)
    }
}

/// Named radial profiles.
#[derive(Default)]
pub struct ProfileRegistry {
    profiles: BTreeMap<&'static str, Box<dyn RadialProfile>>,
}

impl ProfileRegistry {
    pub fn empty() -> Self {
        Self::default()
    }

    pub fn with_builtins() -> Self {
        let mut r = Self::empty();
        r.register(Box::new(Gaussian));
        r.register(Box::new(Exponential));
        r.register(Box::new(Lorentzian));
        r
    }

    pub fn register(&mut self, profile: Box<dyn RadialProfile>) {
        self.profiles.insert(profile.name(), profile);
    }

    pub fn get(&self, name: &str) -> Result<&dyn RadialProfile> {
        self.profiles
            .get(name)
            .map(|p| p.as_ref())
            .ok_or_else(|| PensError::UnknownProfile(name.to_string()))
    }

    pub fn names(&self) -> Vec<&'static str> {
        self.profiles.keys().copied().collect()
    }
}

pub fn builtin_profiles() -> &'static ProfileRegistry {
    static REGISTRY: OnceLock<ProfileRegistry> = OnceLock::new();
    REGISTRY.get_or_init(ProfileRegistry::with_builtins)
}

/// `|S^{d-1}| = 2π^{d/2}/Γ(d/2)`.
pub fn sphere_area(d: usize) -> f64 {
    // Γ(d/2) from Γ(1/2) = √π, Γ(1) = 1 and Γ(x+1) = xΓ(x)
    let mut gamma = if d % 2 == 0 { 1.0 } else { PI.sqrt() };
    let mut x = if d % 2 == 0 { 1.0 } else { 0.5 };
    while x < d as f64 / 2.0 {
        gamma *= x;
        x += 1.0;
    }
    2.0 * PI.powf(d as f64 / 2.0) / gamma
}

// Gauss–Kronrod 7/15 on [-1, 1].
const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_728_0,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

fn gk15(f: &impl Fn(f64) -> f64, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut kronrod = fc * WGK[7];
    let mut gauss = fc * WG[3];
    for i in 0..7 {
        let s = f(c - h * XGK[i]) + f(c + h * XGK[i]);
        kronrod += WGK[i] * s;
        if i % 2 == 1 {
            gauss += WG[i / 2] * s;
        }
    }
    (kronrod * h, ((kronrod - gauss) * h).abs())
}

/// Adaptive Gauss–Kronrod on `[a, b]` to relative accuracy `rel`.
pub(crate) fn integrate(f: impl Fn(f64) -> f64, a: f64, b: f64, rel: f64) -> Result<f64> {
    let mut pieces = vec![(a, b, gk15(&f, a, b))];
    for _ in 0..5000 {
        let total: f64 = pieces.iter().map(|p| p.2 .0).sum();
        let err: f64 = pieces.iter().map(|p| p.2 .1).sum();
        if !total.is_finite() || !err.is_finite() {
            return Err(PensError::DivergentIntegral("integrand is not finite".into()));
        }
        if err <= rel * total.abs() || err < 1e-300 {
            return Ok(total);
        }
        let worst = (0..pieces.len())
            .max_by(|&i, &j| pieces[i].2 .1.total_cmp(&pieces[j].2 .1))
            .unwrap();
        let (lo, hi, _) = pieces.swap_remove(worst);
        let mid = 0.5 * (lo + hi);
        pieces.push((lo, mid, gk15(&f, lo, mid)));
        pieces.push((mid, hi, gk15(&f, mid, hi)));
    }
    Err(PensError::DivergentIntegral("adaptive quadrature did not settle".into()))
}

/// `∫_{ℝ^d} f(|ξ|) dξ = |S^{d-1}| ∫₀^∞ r^{d-1} f(r) dr`, with the radius
/// measured in units of `scale`.
pub fn radial_integral(d: usize, scale: f64, f: impl Fn(f64) -> f64) -> Result<f64> {
    if d == 0 {
        return Err(PensError::InvalidArgument("dimension must be >= 1".into()));
    }
    let g = |r: f64| r.powi(d as i32 - 1) * f(r);
    // an integrable tail has r·g(r) → 0
    let (near, far) = (scale * 1e4, scale * 1e8);
    let (tn, tf) = ((near * g(near)).abs(), (far * g(far)).abs());
    if !tf.is_finite() || (tf > 0.0 && tf >= 1e-3 * tn) {
        return Err(PensError::DivergentIntegral(format!(
            "integrand tail does not decay (r·f(r) = {tf:e} at r = {far:e})"
        )));
    }
    // r = scale·x/(1-x) maps [0, 1) onto [0, ∞)
    let mapped = |x: f64| {
        let y = x / (1.0 - x);
        let jac = scale / ((1.0 - x) * (1.0 - x));
        let v = g(scale * y) * jac;
        if v.is_finite() { v } else { 0.0 }
    };
    Ok(sphere_area(d) * integrate(mapped, 0.0, 1.0, 1e-9)?)
}

/// `(∫_{ℝ^d} |ξ|^{2k} e^{-2|ξ|²t} |p(|ξ|)|² dξ)^{1/2}`.
pub fn heat_envelope(profile: &str, d: usize, k: f64, t: f64) -> Result<f64> {
    let p = builtin_profiles().get(profile)?;
    envelope_with(p, d, k, t)
}

pub fn envelope_with(p: &dyn RadialProfile, d: usize, k: f64, t: f64) -> Result<f64> {
    if !(k >= 0.0 && k.is_finite()) {
        return Err(PensError::InvalidArgument(format!("k must be >= 0, got {k}")));
    }
    if !(t >= 0.0 && t.is_finite()) {
        return Err(PensError::InvalidArgument(format!("t must be >= 0, got {t}")));
    }
    // for large t the heat factor confines the integrand to r ~ 1/√(2t)
    let scale = if 2.0 * t > 1.0 { 1.0 / (2.0 * t).sqrt() } else { 1.0 };
    let integrand = |r: f64| {
        let pr = p.value(r);
        let w = if k == 0.0 { 1.0 } else { r.powf(2.0 * k) };
        w * (-2.0 * r * r * t).exp() * pr * pr
    };
    Ok(radial_integral(d, scale, integrand)?.sqrt())
}

/// Heat envelope at `points` log-spaced times in `[t0, t1]`.
pub fn envelope_series(profile: &str, d: usize, k: f64, t0: f64, t1: f64, points: usize) -> Result<(Vec<f64>, Vec<f64>)> {
    if !(t0 > 0.0 && t1 > t0) || points < 2 {
        return Err(PensError::InvalidArgument("need 0 < t0 < t1 and at least 2 points".into()));
    }
    let ratio = (t1 / t0).ln() / (points - 1) as f64;
    let times: Vec<f64> = (0..points).map(|i| t0 * (ratio * i as f64).exp()).collect();
    let values = times.iter().map(|&t| heat_envelope(profile, d, k, t)).collect::<Result<Vec<_>>>()?;
    Ok((times, values))
}

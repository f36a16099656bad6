//! N-dimensional complex FFT on row-major grids built from 1-D `rustfft` plans.
//!
//! Non-contiguous axes are handled by transposing each outer block so the
//! active axis becomes the fastest one, running the batched 1-D transform,
//! and transposing back. All loops are serial so results are bit-reproducible.

use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::grid::Grid;

#[derive(Clone)]
struct Plans {
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

fn plans(n: usize) -> Plans {
    static CACHE: OnceLock<Mutex<HashMap<usize, Plans>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    let mut guard = cache.lock().expect("fft plan cache poisoned");
    guard
        .entry(n)
        .or_insert_with(|| {
            let mut planner = FftPlanner::new();
            Plans {
                forward: planner.plan_fft_forward(n),
                inverse: planner.plan_fft_inverse(n),
            }
        })
        .clone()
}

/// Unnormalized in-place transform of one component (`N^d` values).
pub(crate) fn fft_component(grid: &Grid, data: &mut [Complex64], inverse: bool) {
    let n = grid.n();
    let total = grid.len();
    debug_assert_eq!(data.len(), total);
    let p = plans(n);
    let fft = if inverse { &p.inverse } else { &p.forward };
    let mut scratch = vec![Complex64::new(0.0, 0.0); fft.get_inplace_scratch_len()];

    // last axis: contiguous lines
    fft.process_with_scratch(data, &mut scratch);

    let mut tmp = vec![Complex64::new(0.0, 0.0); total];
    for axis in (0..grid.dim() - 1).rev() {
        let stride = n.pow((grid.dim() - 1 - axis) as u32);
        let block = n * stride;
        for (src, dst) in data.chunks_mut(block).zip(tmp.chunks_mut(block)) {
            transpose::transpose(src, dst, stride, n);
            fft.process_with_scratch(dst, &mut scratch);
            transpose::transpose(dst, src, n, stride);
        }
    }
}

/// Forward normalization `(Δx/√(2π))^d`, making the discrete transform unitary
/// between `(Δx)^d`-weighted point sums and `(Δξ)^d`-weighted mode sums.
pub(crate) fn forward_scale(grid: &Grid) -> f64 {
    (grid.dx() / (2.0 * std::f64::consts::PI).sqrt()).powi(grid.dim() as i32)
}

pub(crate) fn inverse_scale(grid: &Grid) -> f64 {
    1.0 / (grid.len() as f64 * forward_scale(grid))
}


/// Flat index of `-ξ` for every mode, cached per grid shape.
fn mirror_table(grid: &Grid) -> Arc<Vec<usize>> {
    static CACHE: OnceLock<Mutex<HashMap<(usize, usize), Arc<Vec<usize>>>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    let mut guard = cache.lock().expect("mirror cache poisoned");
    guard
        .entry((grid.dim(), grid.n()))
        .or_insert_with(|| Arc::new((0..grid.len()).map(|i| grid.mirror(i)).collect()))
        .clone()
}

/// Normalized forward transform of stacked real components.
///
/// Components are transformed two at a time as `a + ib`; the spectra are
/// separated with `â(ξ) = (Z(ξ) + conj Z(-ξ))/2`, `b̂(ξ) = (Z(ξ) - conj Z(-ξ))/2i`,
/// which are conjugate-symmetric by construction.
pub(crate) fn forward_values(grid: &Grid, values: &[f64]) -> Vec<Complex64> {
    let n = grid.len();
    let scale = forward_scale(grid);
    let count = values.len() / n;
    let mirror = mirror_table(grid);
    let mut out = vec![Complex64::new(0.0, 0.0); values.len()];
    let mut work = vec![Complex64::new(0.0, 0.0); n];
    let mut c = 0;
    while c < count {
        let a = &values[c * n..(c + 1) * n];
        if c + 1 < count {
            let b = &values[(c + 1) * n..(c + 2) * n];
            for (w, (x, y)) in work.iter_mut().zip(a.iter().zip(b)) {
                *w = Complex64::new(*x, *y);
            }
            fft_component(grid, &mut work, false);
            let (lo, hi) = out[c * n..(c + 2) * n].split_at_mut(n);
            let half = 0.5 * scale;
            for k in 0..n {
                let z = work[k];
                let zm = work[mirror[k]].conj();
                lo[k] = (z + zm) * half;
                let diff = (z - zm) * half;
                hi[k] = Complex64::new(diff.im, -diff.re);
            }
            c += 2;
        } else {
            for (w, x) in work.iter_mut().zip(a) {
                *w = Complex64::new(*x, 0.0);
            }
            fft_component(grid, &mut work, false);
            let (_, tail) = out.split_at_mut(c * n);
            for k in 0..n {
                tail[k] = (work[k] + work[mirror[k]].conj()) * (0.5 * scale);
            }
            c += 1;
        }
    }
    out
}

/// Normalized inverse transform of stacked components, keeping the real part.
///
/// Each spectrum is first replaced by its conjugate-symmetric part (whose
/// inverse is the real part of the original's), then pairs are inverted
/// together as `â + ib̂`.
pub(crate) fn inverse_values(grid: &Grid, coeffs: &[Complex64]) -> Vec<f64> {
    inverse_impl(grid, coeffs, true)
}

/// [`inverse_values`] for spectra already known to be exactly
/// conjugate-symmetric (everything produced by [`forward_values`] and real
/// even/odd multipliers).
pub(crate) fn inverse_symmetric(grid: &Grid, coeffs: &[Complex64]) -> Vec<f64> {
    inverse_impl(grid, coeffs, false)
}

fn inverse_impl(grid: &Grid, coeffs: &[Complex64], symmetrize: bool) -> Vec<f64> {
    let n = grid.len();
    let scale = inverse_scale(grid);
    let count = coeffs.len() / n;
    let mut out = vec![0.0; coeffs.len()];
    let mirror = mirror_table(grid);
    let mut work = vec![Complex64::new(0.0, 0.0); n];
    let i = Complex64::new(0.0, 1.0);
    let sym = |f: &[Complex64], k: usize| {
        if symmetrize {
            (f[k] + f[mirror[k]].conj()) * 0.5
        } else {
            f[k]
        }
    };
    let mut c = 0;
    while c < count {
        let a = &coeffs[c * n..(c + 1) * n];
        if c + 1 < count {
            let b = &coeffs[(c + 1) * n..(c + 2) * n];
            for (k, w) in work.iter_mut().enumerate() {
                *w = sym(a, k) + i * sym(b, k);
            }
            fft_component(grid, &mut work, true);
            let (lo, hi) = out[c * n..(c + 2) * n].split_at_mut(n);
            for k in 0..n {
                lo[k] = work[k].re * scale;
                hi[k] = work[k].im * scale;
            }
            c += 2;
        } else {
            for (k, w) in work.iter_mut().enumerate() {
                *w = sym(a, k);
            }
            fft_component(grid, &mut work, true);
            for (o, z) in out[c * n..(c + 1) * n].iter_mut().zip(&work) {
                *o = z.re * scale;
            }
            c += 1;
        }
    }
    out
}

//! Independent oracles shared by the integration suites. Nothing here goes
//! through the kernels or optimizers under test.

#![allow(dead_code)]

use std::f64::consts::PI;

use qwfs::configurations::{coincidence_probability, MacroPixelMap, PhaseMask, ShapingConfiguration};
use qwfs::media::TransmissionMatrix;
use qwfs::numerics::{Complex64, RngStream};

pub const FD_STEP: f64 = 1e-5;

/// Central finite differences of the direct chain evaluation.
pub fn fd_gradient(t: &TransmissionMatrix, config: &ShapingConfiguration, mask: &PhaseMask) -> Vec<f64> {
    let base = mask.phases().to_vec();
    (0..base.len())
        .map(|k| {
            let mut plus = base.clone();
            let mut minus = base.clone();
            plus[k] += FD_STEP;
            minus[k] -= FD_STEP;
            let p = |ph: Vec<f64>| {
                let m = PhaseMask::new(ph, mask.control().clone()).unwrap();
                coincidence_probability(config, t, &m).unwrap()
            };
            (p(plus) - p(minus)) / (2.0 * FD_STEP)
        })
        .collect()
}

/// Componentwise relative disagreement. The denominator is floored at a
/// thousandth of the largest component and at `1e-4·objective`, well above
/// the `ε·P/h` rounding noise of central differences, so components that
/// vanish by symmetry do not compare noise against noise.
pub fn max_relative_error(analytic: &[f64], reference: &[f64], objective: f64) -> f64 {
    let scale = reference.iter().fold(0.0_f64, |m, x| m.max(x.abs()));
    let floor = (1e-3 * scale).max(1e-4 * objective).max(f64::MIN_POSITIVE);
    analytic
        .iter()
        .zip(reference)
        .map(|(a, r)| (a - r).abs() / r.abs().max(floor))
        .fold(0.0, f64::max)
}

/// Exhaustive search over `levels` equally spaced phases per macro-pixel,
/// with the first phase pinned to zero (every objective here is invariant
/// under a global shift). Returns the best value and its phases.
pub fn grid_search(m: usize, levels: usize, mut value: impl FnMut(&[f64]) -> f64) -> (f64, Vec<f64>) {
    let step = 2.0 * PI / levels as f64;
    let free = m - 1;
    let total = levels.pow(free as u32);
    let mut phases = vec![0.0; m];
    let mut best = (f64::NEG_INFINITY, phases.clone());
    for idx in 0..total {
        let mut k = idx;
        for p in phases.iter_mut().skip(1) {
            *p = (k % levels) as f64 * step;
            k /= levels;
        }
        let v = value(&phases);
        if v > best.0 {
            best = (v, phases.clone());
        }
    }
    best
}

/// DFT entries straight from the definition.
pub fn dft_entry(n: usize, j: usize, k: usize) -> Complex64 {
    Complex64::from_polar(1.0 / (n as f64).sqrt(), -2.0 * PI * (j * k) as f64 / n as f64)
}

pub fn random_mask(control: &MacroPixelMap, stream: RngStream) -> PhaseMask {
    let mut g = stream.rng();
    PhaseMask::new((0..control.macro_count()).map(|_| g.phase()).collect(), control.clone()).unwrap()
}

/// `(1 + (N−1)·ρ)/N`, the ensemble-mean pre-factor of a closed-form
/// layout whose per-term mean-modulus ratio is `ρ`.
pub fn linear_prefactor(n: usize, rho: f64) -> f64 {
    (1.0 + (n as f64 - 1.0) * rho) / n as f64
}

//! Closed-form optimal masks for the configurations where every term of the
//! coincidence sum can be brought into phase.

use num_complex::Complex64;

use crate::configurations::{MacroPixelMap, PhaseMask};
use crate::error::Result;
use crate::media::TransmissionMatrix;

fn conjugating_phase(x: Complex64) -> f64 {
    // zero-modulus terms contribute nothing; any phase is optimal
    if x.norm() == 0.0 {
        0.0
    } else {
        -x.arg()
    }
}

/// One-photon shaping at full control: `Φ_m = −arg(f_αm) − arg(t'_βm)`.
pub fn analytic_phases_1ps(t: &TransmissionMatrix, alpha: usize, beta: usize) -> Result<PhaseMask> {
    analytic_phases_1ps_with(t, alpha, beta, MacroPixelMap::full(t.n())?)
}

/// One-photon shaping with macro-pixels: each block's summed contribution
/// `x_i = Σ_{n∈i} f_αn t'_βn` is rotated onto the positive real axis.
pub fn analytic_phases_1ps_with(
    t: &TransmissionMatrix,
    alpha: usize,
    beta: usize,
    control: MacroPixelMap,
) -> Result<PhaseMask> {
    let f_alpha = t.dft().row(alpha);
    let t_prime = t.t_prime_row(beta);
    let terms: Vec<Complex64> = f_alpha.iter().zip(&t_prime).map(|(f, tp)| f * tp).collect();
    let phases = control.reduce(&terms).into_iter().map(conjugating_phase).collect();
    PhaseMask::new(phases, control)
}

/// Illumination shaping at full control: `Φ_n = −½[arg t̃_αn + arg t̃_βn]`.
///
/// With `alpha == beta` this is the phase-conjugation solution.
pub fn analytic_phases_2pis(t: &TransmissionMatrix, alpha: usize, beta: usize) -> Result<PhaseMask> {
    analytic_phases_2pis_with(t, alpha, beta, MacroPixelMap::full(t.n())?)
}

/// Illumination shaping with macro-pixels; the doubled phase `2Φ_i` cancels
/// the argument of `x_i = Σ_{n∈i} t̃_αn t̃_βn`.
pub fn analytic_phases_2pis_with(
    t: &TransmissionMatrix,
    alpha: usize,
    beta: usize,
    control: MacroPixelMap,
) -> Result<PhaseMask> {
    let ta = t.t_tilde_row(alpha);
    let tb = t.t_tilde_row(beta);
    let terms: Vec<Complex64> = ta.iter().zip(&tb).map(|(a, b)| a * b).collect();
    let phases = control
        .reduce(&terms)
        .into_iter()
        .map(|x| 0.5 * conjugating_phase(x))
        .collect();
    PhaseMask::new(phases, control)
}

//! Two-photon coincidence amplitudes for each SLM/detector layout.
//!
//! Every amplitude is the `(β, α)` element of an operator chain ending in a
//! far-field DFT. Chains are evaluated as matrix–vector products starting
//! from the basis vector `e_α`, so one evaluation costs O(N²).

use std::f64::consts::TAU;
use std::fmt;
use std::ops::Range;
use std::sync::Arc;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::media::TransmissionMatrix;
use crate::numerics::{dot, ComplexMatrix};

/// Assignment of the `n` modes to `macro_count` contiguous SLM macro-pixels.
///
/// Macro-pixel `i` covers modes `⌊i·n/M⌋ .. ⌊(i+1)·n/M⌋`; when `M` divides
/// `n` these are blocks of exactly `n/M` modes.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MacroPixelMap {
    n: usize,
    starts: Vec<usize>,
    assignment: Vec<usize>,
}

impl MacroPixelMap {
    pub fn new(n: usize, macro_count: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidControl("zero modes".into()));
        }
        if macro_count == 0 || macro_count > n {
            return Err(Error::InvalidControl(format!(
                "{macro_count} macro-pixels for {n} modes (need 1..={n})"
            )));
        }
        let starts: Vec<usize> = (0..=macro_count).map(|i| i * n / macro_count).collect();
        let mut assignment = vec![0; n];
        for (i, w) in starts.windows(2).enumerate() {
            assignment[w[0]..w[1]].iter_mut().for_each(|a| *a = i);
        }
        Ok(Self {
            n,
            starts,
            assignment,
        })
    }

    /// One macro-pixel per mode.
    pub fn full(n: usize) -> Result<Self> {
        Self::new(n, n)
    }

    /// Map for a degree of control `doc = M/n`; `doc·n` must be an integer.
    pub fn from_doc(n: usize, doc: f64) -> Result<Self> {
        let macro_count = macros_for_doc(n, doc)?;
        Self::new(n, macro_count)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn macro_count(&self) -> usize {
        self.starts.len() - 1
    }

    pub fn doc(&self) -> f64 {
        self.macro_count() as f64 / self.n as f64
    }

    pub fn is_full(&self) -> bool {
        self.macro_count() == self.n
    }

    pub fn macro_of(&self, mode: usize) -> usize {
        self.assignment[mode]
    }

    pub fn block(&self, macro_index: usize) -> Range<usize> {
        self.starts[macro_index]..self.starts[macro_index + 1]
    }

    pub fn blocks(&self) -> impl Iterator<Item = Range<usize>> + '_ {
        self.starts.windows(2).map(|w| w[0]..w[1])
    }

    /// Per-mode values from per-macro-pixel values.
    pub fn expand<T: Copy>(&self, per_macro: &[T]) -> Vec<T> {
        assert_eq!(per_macro.len(), self.macro_count());
        self.assignment.iter().map(|&i| per_macro[i]).collect()
    }

    /// Sums per-mode values over each macro-pixel.
    pub fn reduce(&self, per_mode: &[Complex64]) -> Vec<Complex64> {
        assert_eq!(per_mode.len(), self.n);
        self.blocks().map(|b| per_mode[b].iter().sum()).collect()
    }
}

/// Number of macro-pixels for a degree of control, rejecting non-integral `doc·n`.
pub fn macros_for_doc(n: usize, doc: f64) -> Result<usize> {
    if !(doc > 0.0 && doc <= 1.0) {
        return Err(Error::InvalidControl(format!("degree of control {doc} outside (0, 1]")));
    }
    let m = doc * n as f64;
    let rounded = m.round();
    if (m - rounded).abs() > 1e-9 * n.max(1) as f64 || rounded < 1.0 {
        return Err(Error::InvalidControl(format!(
            "degree of control {doc} times {n} modes = {m} is not a whole number of macro-pixels"
        )));
    }
    Ok(rounded as usize)
}

/// SLM phase pattern: one phase per macro-pixel, stored in `[0, 2π)`.
#[derive(Clone, Debug, PartialEq)]
pub struct PhaseMask {
    phases: Vec<f64>,
    control: MacroPixelMap,
}

pub(crate) fn wrap_phase(phi: f64) -> f64 {
    let w = phi.rem_euclid(TAU);
    if w >= TAU {
        0.0
    } else {
        w
    }
}

impl PhaseMask {
    pub fn new(phases: Vec<f64>, control: MacroPixelMap) -> Result<Self> {
        if phases.len() != control.macro_count() {
            return Err(Error::InvalidInput(format!(
                "{} phases for {} macro-pixels",
                phases.len(),
                control.macro_count()
            )));
        }
        if phases.iter().any(|p| !p.is_finite()) {
            return Err(Error::InvalidInput("non-finite SLM phase".into()));
        }
        Ok(Self {
            phases: phases.into_iter().map(wrap_phase).collect(),
            control,
        })
    }

    /// Flat mask (S = I).
    pub fn flat(control: MacroPixelMap) -> Self {
        Self {
            phases: vec![0.0; control.macro_count()],
            control,
        }
    }

    pub fn phases(&self) -> &[f64] {
        &self.phases
    }

    pub fn control(&self) -> &MacroPixelMap {
        &self.control
    }

    pub fn n(&self) -> usize {
        self.control.n()
    }

    /// Diagonal of S, one phasor per mode.
    pub fn mode_phasors(&self) -> Vec<Complex64> {
        self.control
            .expand(&self.phases)
            .into_iter()
            .map(|p| Complex64::from_polar(1.0, p))
            .collect()
    }
}

/// The SLM as an explicit N×N diagonal matrix.
pub fn slm_diagonal(mask: &PhaseMask) -> ComplexMatrix {
    ComplexMatrix::from_diagonal(&mask.mode_phasors())
}

/// Propagation between the two SLM passes of the displaced layout.
#[derive(Clone, Debug)]
pub enum Propagator {
    /// Strong mode mixing, `P = 𝓕`.
    Fourier,
    /// No propagation; reduces to ordinary illumination shaping.
    Identity,
    /// Arbitrary `P`.
    Custom(Arc<ComplexMatrix>),
}

impl PartialEq for Propagator {
    fn eq(&self, other: &Self) -> bool {
        match (self, other) {
            (Propagator::Fourier, Propagator::Fourier) | (Propagator::Identity, Propagator::Identity) => true,
            (Propagator::Custom(a), Propagator::Custom(b)) => a == b,
            _ => false,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Layout {
    /// `𝓕 T Tᵀ S 𝓕`: SLM after the medium on one photon.
    OnePhotonShaping,
    /// `𝓕 T S S Tᵀ 𝓕`: SLM imaged on the crystal, both photons.
    TwoPhotonIlluminationShaping,
    /// `𝓕 T S P S Tᵀ 𝓕`: SLM displaced from the crystal image plane.
    TwoPhotonIlluminationShapingDisplaced(Propagator),
    /// `𝓕 S T Tᵀ S 𝓕`: SLM after the medium on both photons.
    TwoPhotonDetectionShaping,
}

impl Layout {
    pub fn label(&self) -> &'static str {
        match self {
            Layout::OnePhotonShaping => "1p-s",
            Layout::TwoPhotonIlluminationShaping => "2p-is",
            Layout::TwoPhotonIlluminationShapingDisplaced(_) => "2p-is-displaced",
            Layout::TwoPhotonDetectionShaping => "2p-ds",
        }
    }
}

impl fmt::Display for Layout {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

/// A layout plus the detected output pair `(α, β)`.
#[derive(Clone, Debug, PartialEq)]
pub struct ShapingConfiguration {
    pub layout: Layout,
    pub alpha: usize,
    pub beta: usize,
}

impl ShapingConfiguration {
    pub fn new(layout: Layout, alpha: usize, beta: usize) -> Self {
        Self { layout, alpha, beta }
    }

    /// Both photons detected in the same mode (the OPC case).
    pub fn symmetric(&self) -> bool {
        self.alpha == self.beta
    }

    pub fn validate(&self, n: usize) -> Result<()> {
        if self.alpha >= n || self.beta >= n {
            return Err(Error::InvalidInput(format!(
                "detector modes ({}, {}) outside 0..{n}",
                self.alpha, self.beta
            )));
        }
        if let Layout::TwoPhotonIlluminationShapingDisplaced(Propagator::Custom(p)) = &self.layout {
            if p.shape() != (n, n) {
                return Err(Error::DimensionMismatch {
                    context: "displaced propagator",
                    left: p.shape(),
                    right: (n, n),
                });
            }
        }
        Ok(())
    }
}

fn check_dims(config: &ShapingConfiguration, t: &TransmissionMatrix, mask: &PhaseMask) -> Result<()> {
    if mask.n() != t.n() {
        return Err(Error::DimensionMismatch {
            context: "phase mask vs medium",
            left: (mask.n(), 1),
            right: (t.n(), t.n()),
        });
    }
    config.validate(t.n())
}

fn hadamard(v: &mut [Complex64], s: &[Complex64]) {
    v.iter_mut().zip(s).for_each(|(x, &y)| *x *= y);
}

/// Field just before the final far-field DFT, so that the amplitude at β is
/// `Σ_k f_βk w_k`.
fn pre_fourier_field(config: &ShapingConfiguration, t: &TransmissionMatrix, s: &[Complex64]) -> Vec<Complex64> {
    let m = t.matrix();
    let f = t.dft();
    let mut v = f.row(config.alpha).to_vec();
    let ok = "dimensions checked";
    match &config.layout {
        Layout::OnePhotonShaping => {
            hadamard(&mut v, s);
            v = m.matvec_transpose(&v).expect(ok);
            v = m.matvec(&v).expect(ok);
        }
        Layout::TwoPhotonIlluminationShaping => {
            v = m.matvec_transpose(&v).expect(ok);
            hadamard(&mut v, s);
            hadamard(&mut v, s);
            v = m.matvec(&v).expect(ok);
        }
        Layout::TwoPhotonIlluminationShapingDisplaced(p) => {
            v = m.matvec_transpose(&v).expect(ok);
            hadamard(&mut v, s);
            v = match p {
                Propagator::Fourier => f.apply(&v).expect(ok),
                Propagator::Identity => v,
                Propagator::Custom(p) => p.matvec(&v).expect(ok),
            };
            hadamard(&mut v, s);
            v = m.matvec(&v).expect(ok);
        }
        Layout::TwoPhotonDetectionShaping => {
            hadamard(&mut v, s);
            v = m.matvec_transpose(&v).expect(ok);
            v = m.matvec(&v).expect(ok);
            hadamard(&mut v, s);
        }
    }
    v
}

pub fn coincidence_amplitude(
    config: &ShapingConfiguration,
    t: &TransmissionMatrix,
    mask: &PhaseMask,
) -> Result<Complex64> {
    check_dims(config, t, mask)?;
    let w = pre_fourier_field(config, t, &mask.mode_phasors());
    Ok(dot(t.dft().row(config.beta), &w))
}

/// `P_αβ = |amplitude|² / 2N`.
pub fn coincidence_probability(
    config: &ShapingConfiguration,
    t: &TransmissionMatrix,
    mask: &PhaseMask,
) -> Result<f64> {
    let a = coincidence_amplitude(config, t, mask)?;
    Ok(a.norm_sqr() / (2.0 * t.n() as f64))
}

/// All `P_αβ` for the configuration's fixed α.
#[derive(Clone, Debug, PartialEq)]
pub struct CoincidenceMap {
    pub alpha: usize,
    pub values: Vec<f64>,
}

impl CoincidenceMap {
    pub fn total(&self) -> f64 {
        self.values.iter().sum()
    }
}

pub fn coincidence_map(
    config: &ShapingConfiguration,
    t: &TransmissionMatrix,
    mask: &PhaseMask,
) -> Result<CoincidenceMap> {
    check_dims(config, t, mask)?;
    let w = pre_fourier_field(config, t, &mask.mode_phasors());
    let out = t.dft().apply(&w)?;
    let norm = 2.0 * t.n() as f64;
    Ok(CoincidenceMap {
        alpha: config.alpha,
        values: out.iter().map(|z| z.norm_sqr() / norm).collect(),
    })
}

/// Advanced-wave field at the crystal (mirror) plane for detection shaping,
/// `u = Tᵀ S 𝓕 e_α`.
pub fn mirror_plane_field(t: &TransmissionMatrix, mask: &PhaseMask, alpha: usize) -> Result<Vec<Complex64>> {
    if mask.n() != t.n() {
        return Err(Error::DimensionMismatch {
            context: "phase mask vs medium",
            left: (mask.n(), 1),
            right: (t.n(), t.n()),
        });
    }
    if alpha >= t.n() {
        return Err(Error::InvalidInput(format!("mode {alpha} outside 0..{}", t.n())));
    }
    let mut v = t.dft().row(alpha).to_vec();
    hadamard(&mut v, &mask.mode_phasors());
    t.matrix().matvec_transpose(&v)
}

//! Coincidence probability as a smooth function of the controlled phases.
//!
//! Every layout's amplitude is a polynomial in the SLM phasors `s_n = e^{iΦ_n}`:
//! linear for one-photon shaping, a diagonal quadratic (`s_n²`) for imaged
//! illumination shaping and a full quadratic form for detection shaping and
//! displaced illumination shaping. Collapsing the coefficients onto
//! macro-pixels once up front makes each evaluation cost O(M) or O(M²).

use num_complex::Complex64;

use crate::configurations::{
    coincidence_amplitude, Layout, MacroPixelMap, PhaseMask, Propagator, ShapingConfiguration,
};
use crate::error::{Error, Result};
use crate::media::TransmissionMatrix;
use crate::numerics::{ComplexMatrix, RngStream};

const KERNEL_CHECK_TOLERANCE: f64 = 1e-10;

/// Quadratic coupling `Amp(s) = Σ_nm a_nm s_n s_m` for one detected pair.
#[derive(Clone, Debug)]
pub struct QuadraticKernel {
    pub a: ComplexMatrix,
    pub alpha: usize,
    pub beta: usize,
}

/// Builds the kernel for detection shaping (`a_nm = f_βn J_nm f_mα`) or for
/// displaced illumination shaping (`a_nm = t̃_βn P_nm t̃_αm`) and checks it
/// against the direct chain on a fixed random mask.
pub fn build_kernel(t: &TransmissionMatrix, config: &ShapingConfiguration) -> Result<QuadraticKernel> {
    config.validate(t.n())?;
    let n = t.n();
    let (alpha, beta) = (config.alpha, config.beta);
    let a = match &config.layout {
        Layout::TwoPhotonDetectionShaping => {
            let f = t.dft();
            let j = t.j();
            let (fb, fa) = (f.row(beta), f.row(alpha));
            ComplexMatrix::from_fn(n, n, |r, c| fb[r] * j[(r, c)] * fa[c])
        }
        Layout::TwoPhotonIlluminationShapingDisplaced(p) => {
            let tb = t.t_tilde_row(beta);
            let ta = t.t_tilde_row(alpha);
            match p {
                Propagator::Fourier => {
                    let f = t.dft();
                    ComplexMatrix::from_fn(n, n, |r, c| tb[r] * f[(r, c)] * ta[c])
                }
                Propagator::Identity => {
                    ComplexMatrix::from_fn(n, n, |r, c| if r == c { tb[r] * ta[c] } else { Complex64::new(0.0, 0.0) })
                }
                Propagator::Custom(p) => ComplexMatrix::from_fn(n, n, |r, c| tb[r] * p[(r, c)] * ta[c]),
            }
        }
        other => {
            return Err(Error::LayoutMismatch(format!(
                "no quadratic kernel for layout {other}; it has a closed-form optimum"
            )))
        }
    };
    if !a.is_finite() {
        return Err(Error::NonFinite("coupling kernel"));
    }
    let kernel = QuadraticKernel { a, alpha, beta };
    kernel.check_against_chain(t, config)?;
    Ok(kernel)
}

impl QuadraticKernel {
    pub fn n(&self) -> usize {
        self.a.rows()
    }

    pub fn amplitude(&self, s: &[Complex64]) -> Complex64 {
        let a_s = self.a.matvec(s).expect("phasor length matches kernel");
        s.iter().zip(&a_s).map(|(x, y)| x * y).sum()
    }

    fn check_against_chain(&self, t: &TransmissionMatrix, config: &ShapingConfiguration) -> Result<()> {
        let n = self.n();
        let mut rng = RngStream::new(0x6b65_726e_656c, n as u64).rng();
        let phases = (0..n).map(|_| rng.phase()).collect();
        let mask = PhaseMask::new(phases, MacroPixelMap::full(n)?)?;
        let direct = coincidence_amplitude(config, t, &mask)?;
        let via_kernel = self.amplitude(&mask.mode_phasors());
        let scale = direct.norm().max(self.a.frobenius_norm()).max(f64::MIN_POSITIVE);
        let rel = (direct - via_kernel).norm() / scale;
        if rel > KERNEL_CHECK_TOLERANCE {
            return Err(Error::KernelMismatch(rel));
        }
        Ok(())
    }

    /// `P = |Amp|²/2N` and its gradient with respect to the mask's
    /// macro-pixel phases, via `(a + aᵀ) s` in O(N²).
    pub fn objective_and_gradient(&self, mask: &PhaseMask) -> Result<(f64, Vec<f64>)> {
        if mask.n() != self.n() {
            return Err(Error::DimensionMismatch {
                context: "phase mask vs kernel",
                left: (mask.n(), 1),
                right: self.a.shape(),
            });
        }
        let s = mask.mode_phasors();
        let a_s = self.a.matvec(&s)?;
        let at_s = self.a.matvec_transpose(&s)?;
        let amp: Complex64 = s.iter().zip(&a_s).map(|(x, y)| x * y).sum();
        let n = self.n() as f64;
        let per_mode: Vec<Complex64> = s
            .iter()
            .zip(a_s.iter().zip(&at_s))
            .map(|(sn, (u, v))| Complex64::i() * sn * (u + v))
            .collect();
        let conj = amp.conj();
        let grad = mask
            .control()
            .reduce(&per_mode)
            .into_iter()
            .map(|d| (conj * d).re / n)
            .collect();
        Ok((amp.norm_sqr() / (2.0 * n), grad))
    }
}

#[derive(Clone, Debug)]
enum Form {
    /// `Amp = Σ c_i σ_i`
    Linear(Vec<Complex64>),
    /// `Amp = Σ c_i σ_i²`
    Doubled(Vec<Complex64>),
    /// `Amp = σᵀ B σ` with `B` symmetric
    Quadratic(ComplexMatrix),
}

/// Coincidence probability of one configuration over macro-pixel phases,
/// with coefficients already summed over each block.
#[derive(Clone, Debug)]
pub struct PhaseObjective {
    form: Form,
    control: MacroPixelMap,
    n: usize,
}

impl PhaseObjective {
    pub fn for_configuration(
        t: &TransmissionMatrix,
        config: &ShapingConfiguration,
        control: &MacroPixelMap,
    ) -> Result<Self> {
        config.validate(t.n())?;
        if control.n() != t.n() {
            return Err(Error::DimensionMismatch {
                context: "macro-pixel map vs medium",
                left: (control.n(), 1),
                right: (t.n(), t.n()),
            });
        }
        let form = match &config.layout {
            Layout::OnePhotonShaping => {
                let fa = t.dft().row(config.alpha);
                let tp = t.t_prime_row(config.beta);
                let c: Vec<Complex64> = fa.iter().zip(&tp).map(|(f, x)| f * x).collect();
                Form::Linear(control.reduce(&c))
            }
            Layout::TwoPhotonIlluminationShaping => {
                let ta = t.t_tilde_row(config.alpha);
                let tb = t.t_tilde_row(config.beta);
                let c: Vec<Complex64> = ta.iter().zip(&tb).map(|(a, b)| a * b).collect();
                Form::Doubled(control.reduce(&c))
            }
            _ => return Ok(Self::from_kernel(&build_kernel(t, config)?, control)),
        };
        Ok(Self {
            form,
            control: control.clone(),
            n: t.n(),
        })
    }

    /// Symmetrizes the kernel and sums it over macro-pixel blocks.
    pub fn from_kernel(kernel: &QuadraticKernel, control: &MacroPixelMap) -> Self {
        let m = control.macro_count();
        let a = &kernel.a;
        let mut b = ComplexMatrix::zeros(m, m);
        for r in 0..a.rows() {
            let i = control.macro_of(r);
            for (c, &v) in a.row(r).iter().enumerate() {
                let j = control.macro_of(c);
                b[(i, j)] += v * 0.5;
                b[(j, i)] += v * 0.5;
            }
        }
        let diagonal = (0..m).all(|i| (0..m).all(|j| i == j || b[(i, j)] == Complex64::new(0.0, 0.0)));
        // uncoupled macro-pixels (e.g. a thin diffuser): Amp = Σ b_ii σ_i²
        let form = if diagonal { Form::Doubled(b.diagonal()) } else { Form::Quadratic(b) };
        Self {
            form,
            control: control.clone(),
            n: kernel.n(),
        }
    }

    /// Global optimum when every term can be phased independently.
    pub fn closed_form(&self) -> Option<Vec<f64>> {
        let conj = |x: &Complex64| if x.norm() == 0.0 { 0.0 } else { -x.arg() };
        match &self.form {
            Form::Linear(c) => Some(c.iter().map(conj).collect()),
            Form::Doubled(c) => Some(c.iter().map(|x| 0.5 * conj(x)).collect()),
            Form::Quadratic(_) => None,
        }
    }

    pub fn control(&self) -> &MacroPixelMap {
        &self.control
    }

    /// Number of free phases (macro-pixels).
    pub fn dimension(&self) -> usize {
        self.control.macro_count()
    }

    pub fn amplitude(&self, phases: &[f64]) -> Complex64 {
        let sigma = phasors(phases);
        match &self.form {
            Form::Linear(c) => c.iter().zip(&sigma).map(|(c, s)| c * s).sum(),
            Form::Doubled(c) => c.iter().zip(&sigma).map(|(c, s)| c * s * s).sum(),
            Form::Quadratic(b) => {
                let w = b.matvec(&sigma).expect("dimension");
                sigma.iter().zip(&w).map(|(s, w)| s * w).sum()
            }
        }
    }

    pub fn value(&self, phases: &[f64]) -> f64 {
        self.amplitude(phases).norm_sqr() / (2.0 * self.n as f64)
    }

    /// Objective and its gradient, written into `grad`.
    pub fn value_and_gradient(&self, phases: &[f64], grad: &mut [f64]) -> f64 {
        let sigma = phasors(phases);
        let i = Complex64::i();
        let (amp, d_amp): (Complex64, Vec<Complex64>) = match &self.form {
            Form::Linear(c) => {
                let terms: Vec<Complex64> = c.iter().zip(&sigma).map(|(c, s)| c * s).collect();
                (terms.iter().sum(), terms.iter().map(|x| i * x).collect())
            }
            Form::Doubled(c) => {
                let terms: Vec<Complex64> = c.iter().zip(&sigma).map(|(c, s)| c * s * s).collect();
                (terms.iter().sum(), terms.iter().map(|x| i * x * 2.0).collect())
            }
            Form::Quadratic(b) => {
                let w = b.matvec(&sigma).expect("dimension");
                let terms: Vec<Complex64> = sigma.iter().zip(&w).map(|(s, w)| s * w).collect();
                (terms.iter().sum(), terms.iter().map(|x| i * x * 2.0).collect())
            }
        };
        let n = self.n as f64;
        let conj = amp.conj();
        for (g, d) in grad.iter_mut().zip(&d_amp) {
            *g = (conj * d).re / n;
        }
        amp.norm_sqr() / (2.0 * n)
    }

    /// Phase symmetry of the landscape: 1 when a global shift is the only
    /// degeneracy, 2 when each phase is only defined modulo π.
    pub(crate) fn phase_multiplicity(&self) -> u32 {
        match self.form {
            Form::Doubled(_) => 2,
            _ => 1,
        }
    }
}

fn phasors(phases: &[f64]) -> Vec<Complex64> {
    phases.iter().map(|&p| Complex64::from_polar(1.0, p)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::configurations::coincidence_probability;
    use crate::media::{generate, MediumKind, MediumModel};

    fn medium(kind: MediumKind, n: usize, seed: u64) -> TransmissionMatrix {
        generate(MediumModel::new(kind, n, RngStream::new(seed, 0))).unwrap()
    }

    fn random_phases(m: usize, seed: u64) -> Vec<f64> {
        let mut rng = RngStream::new(seed, 99).rng();
        (0..m).map(|_| rng.phase()).collect()
    }

    #[test]
    fn kernel_rejects_closed_form_layouts() {
        let t = medium(MediumKind::HaarUnitary, 4, 1);
        for layout in [Layout::OnePhotonShaping, Layout::TwoPhotonIlluminationShaping] {
            let cfg = ShapingConfiguration::new(layout, 0, 2);
            assert!(matches!(build_kernel(&t, &cfg), Err(Error::LayoutMismatch(_))));
        }
    }

    #[test]
    fn identity_medium_kernel_is_diagonal_fourier_product() {
        let t = TransmissionMatrix::from_matrix(
            MediumModel::new(MediumKind::ThinDiffuser, 2, RngStream::new(0, 0)),
            ComplexMatrix::identity(2),
        )
        .unwrap();
        let cfg = ShapingConfiguration::new(Layout::TwoPhotonDetectionShaping, 0, 0);
        let k = build_kernel(&t, &cfg).unwrap();
        assert!(k.a[(0, 1)].norm() < 1e-15 && k.a[(1, 0)].norm() < 1e-15);
        let flat = vec![Complex64::new(1.0, 0.0); 2];
        // 𝓕² is the index flip, which fixes mode 0
        assert!((k.amplitude(&flat) - Complex64::new(1.0, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn symmetrized_kernel_gives_same_amplitude() {
        let t = medium(MediumKind::HaarUnitary, 4, 2);
        let cfg = ShapingConfiguration::new(Layout::TwoPhotonDetectionShaping, 0, 2);
        let k = build_kernel(&t, &cfg).unwrap();
        let sym = QuadraticKernel {
            a: ComplexMatrix::from_fn(4, 4, |r, c| (k.a[(r, c)] + k.a[(c, r)]) * 0.5),
            ..k.clone()
        };
        let s = phasors(&random_phases(4, 3));
        assert!((k.amplitude(&s) - sym.amplitude(&s)).norm() < 1e-15);
    }

    #[test]
    fn displaced_kernels_match_chain() {
        let t = medium(MediumKind::GaussianIID, 6, 3);
        for p in [Propagator::Fourier, Propagator::Identity] {
            let cfg = ShapingConfiguration::new(Layout::TwoPhotonIlluminationShapingDisplaced(p), 1, 4);
            build_kernel(&t, &cfg).unwrap();
        }
    }

    #[test]
    fn reduced_objective_matches_chain_for_every_layout() {
        let t = medium(MediumKind::GaussianIID, 12, 5);
        let control = MacroPixelMap::new(12, 5).unwrap();
        let phases = random_phases(5, 8);
        let mask = PhaseMask::new(phases.clone(), control.clone()).unwrap();
        for layout in [
            Layout::OnePhotonShaping,
            Layout::TwoPhotonIlluminationShaping,
            Layout::TwoPhotonIlluminationShapingDisplaced(Propagator::Fourier),
            Layout::TwoPhotonDetectionShaping,
        ] {
            let cfg = ShapingConfiguration::new(layout, 0, 6);
            let obj = PhaseObjective::for_configuration(&t, &cfg, &control).unwrap();
            let direct = coincidence_probability(&cfg, &t, &mask).unwrap();
            assert!((obj.value(&phases) - direct).abs() < 1e-15, "{}", cfg.layout);
        }
    }

    #[test]
    fn kernel_gradient_matches_reduced_gradient() {
        let t = medium(MediumKind::HaarUnitary, 10, 6);
        let cfg = ShapingConfiguration::new(Layout::TwoPhotonDetectionShaping, 0, 5);
        let control = MacroPixelMap::new(10, 4).unwrap();
        let k = build_kernel(&t, &cfg).unwrap();
        let phases = random_phases(4, 1);
        let mask = PhaseMask::new(phases.clone(), control.clone()).unwrap();
        let (p, g) = k.objective_and_gradient(&mask).unwrap();
        let obj = PhaseObjective::from_kernel(&k, &control);
        let mut g2 = vec![0.0; 4];
        let p2 = obj.value_and_gradient(&phases, &mut g2);
        assert!((p - p2).abs() < 1e-15);
        for (a, b) in g.iter().zip(&g2) {
            assert!((a - b).abs() < 1e-14);
        }
    }

    #[test]
    fn global_shift_leaves_detection_objective_unchanged() {
        let t = medium(MediumKind::HaarUnitary, 8, 7);
        let cfg = ShapingConfiguration::new(Layout::TwoPhotonDetectionShaping, 0, 0);
        let k = build_kernel(&t, &cfg).unwrap();
        let full = MacroPixelMap::full(8).unwrap();
        let phases = random_phases(8, 2);
        let shifted: Vec<f64> = phases.iter().map(|p| p + 1.234).collect();
        let (p1, g) = k.objective_and_gradient(&PhaseMask::new(phases, full.clone()).unwrap()).unwrap();
        let (p2, _) = k.objective_and_gradient(&PhaseMask::new(shifted, full).unwrap()).unwrap();
        assert!((p1 - p2).abs() < 1e-12);
        assert!(g.iter().sum::<f64>().abs() < 1e-8);
    }

    #[test]
    fn closed_form_exists_only_without_coupling() {
        let thin = medium(MediumKind::ThinDiffuser, 8, 2);
        let thick = medium(MediumKind::HaarUnitary, 8, 2);
        let control = MacroPixelMap::new(8, 4).unwrap();
        let cfg = ShapingConfiguration::new(Layout::TwoPhotonDetectionShaping, 0, 4);
        let obj = PhaseObjective::for_configuration(&thin, &cfg, &control).unwrap();
        let best = obj.closed_form().unwrap();
        let mut g = vec![0.0; 4];
        obj.value_and_gradient(&best, &mut g);
        assert!(g.iter().all(|x| x.abs() < 1e-12));
        let obj = PhaseObjective::for_configuration(&thick, &cfg, &control).unwrap();
        assert!(obj.closed_form().is_none());
    }

    #[test]
    fn mask_size_must_match_kernel() {
        let t = medium(MediumKind::HaarUnitary, 4, 1);
        let cfg = ShapingConfiguration::new(Layout::TwoPhotonDetectionShaping, 0, 2);
        let k = build_kernel(&t, &cfg).unwrap();
        let mask = PhaseMask::flat(MacroPixelMap::full(5).unwrap());
        assert!(matches!(k.objective_and_gradient(&mask), Err(Error::DimensionMismatch { .. })));
    }
}

//! Ensembles of disorder realizations: per-realization enhancement records,
//! summaries, degree-of-control and system-size sweeps, and diagnostics of
//! optimized masks.

mod baseline;
mod diagnostics;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use baseline::{baseline_probability, BaselineMode};
pub use diagnostics::{phase_cluster_score, transmission_excess, transmission_excess_with, ClusterScore, EXCESS_SAMPLES};

use crate::configurations::{
    coincidence_map, coincidence_probability, macros_for_doc, Layout, MacroPixelMap, PhaseMask, Propagator,
    ShapingConfiguration,
};
use crate::error::{Error, Result};
use crate::media::{generate, MediumKind, MediumModel, TransmissionMatrix};
use crate::numerics::{largest_singular_value_sq_with, PowerIteration, RngStream};
use crate::shaping::{analytic_phases_1ps_with, analytic_phases_2pis_with, optimize_objective, OptimizerSpec, PhaseObjective};

/// Sub-stream tags under each realization's stream.
const MEDIUM_STREAM: u64 = 0;
const OPTIMIZER_STREAM: u64 = 1;
/// Stream reserved for per-realization diagnostics (random reference masks).
pub const DIAGNOSTIC_STREAM: u64 = 2;

/// A layout together with the choice of detected pair.
#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentSetup {
    pub layout: Layout,
    /// Detect both photons in the same mode (`α = β`).
    pub symmetric: bool,
}

impl ExperimentSetup {
    pub fn new(layout: Layout, symmetric: bool) -> Self {
        Self { layout, symmetric }
    }

    /// Parses `1p-s`, `2p-is`, `2p-is-displaced` or `2p-ds`; the displaced
    /// layout uses Fourier propagation between the two passes.
    pub fn from_label(configuration: &str, symmetric: bool) -> Result<Self> {
        let layout = match configuration {
            "1p-s" => Layout::OnePhotonShaping,
            "2p-is" => Layout::TwoPhotonIlluminationShaping,
            "2p-is-displaced" => Layout::TwoPhotonIlluminationShapingDisplaced(Propagator::Fourier),
            "2p-ds" => Layout::TwoPhotonDetectionShaping,
            other => {
                return Err(Error::InvalidInput(format!(
                    "unknown configuration {other:?}; expected 1p-s, 2p-is, 2p-is-displaced or 2p-ds"
                )))
            }
        };
        Ok(Self::new(layout, symmetric))
    }

    /// E.g. `2p-ds` or `2p-ds-opc`.
    pub fn label(&self) -> String {
        if self.symmetric {
            format!("{}-opc", self.layout.label())
        } else {
            self.layout.label().to_string()
        }
    }

    /// `α = 0`; `β = α` when symmetric, otherwise `⌊N/2⌋`.
    pub fn configuration(&self, n: usize) -> ShapingConfiguration {
        let beta = if self.symmetric { 0 } else { n / 2 };
        ShapingConfiguration::new(self.layout.clone(), 0, beta)
    }
}

/// Everything that defines one ensemble except the seed and its size.
#[derive(Clone, Debug, PartialEq)]
pub struct RunSpec {
    pub setup: ExperimentSetup,
    pub model: MediumKind,
    pub n: usize,
    /// Degree of control `M/N`.
    pub doc: f64,
    pub optimizer: OptimizerSpec,
    pub baseline: BaselineMode,
}

impl RunSpec {
    /// Full control, default optimizer and the model's default baseline.
    pub fn new(setup: ExperimentSetup, model: MediumKind, n: usize) -> Self {
        Self {
            setup,
            model,
            n,
            doc: 1.0,
            optimizer: OptimizerSpec::default(),
            baseline: BaselineMode::default_for(model),
        }
    }

    pub fn with_doc(mut self, doc: f64) -> Self {
        self.doc = doc;
        self
    }

    pub fn with_optimizer(mut self, optimizer: OptimizerSpec) -> Self {
        self.optimizer = optimizer;
        self
    }

    pub fn with_baseline(mut self, baseline: BaselineMode) -> Self {
        self.baseline = baseline;
        self
    }

    pub fn control(&self) -> Result<MacroPixelMap> {
        MacroPixelMap::new(self.n, macros_for_doc(self.n, self.doc)?)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n < 2 {
            return Err(Error::InvalidDimension(format!("need at least 2 modes, got {}", self.n)));
        }
        self.control()?;
        self.optimizer.validate()?;
        if self.baseline == BaselineMode::AnalyticUnitary && !self.model.is_unitary() {
            return Err(Error::InvalidMode(format!(
                "analytic-unitary baseline is undefined for a {} medium",
                self.model
            )));
        }
        Ok(())
    }
}

/// One realization's outcome.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnhancementRecord {
    pub config: String,
    pub model: MediumKind,
    pub n: usize,
    pub doc: f64,
    pub realization: u64,
    pub seed: u64,
    pub p_opt: f64,
    pub p0: f64,
    pub eta: f64,
    pub eta_over_n: f64,
    /// σ₁² of `T Tᵀ`, detection shaping only.
    pub sigma1_sq: Option<f64>,
    pub converged: bool,
    pub iterations: usize,
    pub baseline_mode: BaselineMode,
    /// Every optimizer restart diverged; the numeric fields are NaN.
    pub failed: bool,
    /// `Σ_β P_αβ` with the optimized mask.
    pub total_coincidence: f64,
}

/// A record together with what produced it.
#[derive(Debug)]
pub struct Solution {
    pub record: EnhancementRecord,
    pub transmission: TransmissionMatrix,
    pub configuration: ShapingConfiguration,
    /// `None` when the optimizer failed.
    pub mask: Option<PhaseMask>,
}

/// Optimal mask for a realization: closed form where one exists, numeric
/// otherwise. Returns `(mask, converged, iterations)`.
fn optimal_mask(
    t: &TransmissionMatrix,
    config: &ShapingConfiguration,
    control: &MacroPixelMap,
    optimizer: &OptimizerSpec,
    stream: RngStream,
) -> Result<(PhaseMask, bool, usize)> {
    match config.layout {
        Layout::OnePhotonShaping => {
            Ok((analytic_phases_1ps_with(t, config.alpha, config.beta, control.clone())?, true, 0))
        }
        Layout::TwoPhotonIlluminationShaping => {
            Ok((analytic_phases_2pis_with(t, config.alpha, config.beta, control.clone())?, true, 0))
        }
        _ => {
            let objective = PhaseObjective::for_configuration(t, config, control)?;
            if let Some(phases) = objective.closed_form() {
                return Ok((PhaseMask::new(phases, control.clone())?, true, 0));
            }
            let res = optimize_objective(&objective, optimizer, stream)?;
            Ok((res.mask, res.converged, res.iterations))
        }
    }
}

/// The medium seen by realization `id` of the ensemble seeded by `master_seed`.
pub fn realization_medium(model: MediumKind, n: usize, master_seed: u64, id: u64) -> Result<TransmissionMatrix> {
    generate(MediumModel::new(model, n, RngStream::new(master_seed, id).child(MEDIUM_STREAM)))
}

/// Generates realization `id` of the ensemble seeded by `master_seed`, finds
/// the optimal mask and evaluates the enhancement.
pub fn solve_realization(spec: &RunSpec, master_seed: u64, id: u64) -> Result<Solution> {
    spec.validate()?;
    let stream = RngStream::new(master_seed, id);
    let t = realization_medium(spec.model, spec.n, master_seed, id)?;
    let config = spec.setup.configuration(spec.n);
    let control = spec.control()?;
    let n = spec.n as f64;

    let p0 = baseline_probability(&t, config.alpha, spec.baseline)?;
    let sigma1_sq = match config.layout {
        Layout::TwoPhotonDetectionShaping => Some(largest_singular_value_sq_with(
            t.j(),
            PowerIteration {
                tol: 1e-12,
                max_iterations: 200_000,
            },
        )?),
        _ => None,
    };

    let mut record = EnhancementRecord {
        config: spec.setup.label(),
        model: spec.model,
        n: spec.n,
        doc: spec.doc,
        realization: id,
        seed: master_seed,
        p_opt: f64::NAN,
        p0,
        eta: f64::NAN,
        eta_over_n: f64::NAN,
        sigma1_sq,
        converged: false,
        iterations: 0,
        baseline_mode: spec.baseline,
        failed: false,
        total_coincidence: f64::NAN,
    };

    let mask = match optimal_mask(&t, &config, &control, &spec.optimizer, stream.child(OPTIMIZER_STREAM)) {
        Ok((mask, converged, iterations)) => {
            let p_opt = coincidence_probability(&config, &t, &mask)?;
            record.p_opt = p_opt;
            record.eta = p_opt / p0;
            record.eta_over_n = record.eta / n;
            record.converged = converged;
            record.iterations = iterations;
            record.total_coincidence = coincidence_map(&config, &t, &mask)?.total();
            Some(mask)
        }
        Err(Error::OptimizerFailure { .. }) => {
            record.failed = true;
            None
        }
        Err(e) => return Err(e),
    };

    Ok(Solution {
        record,
        transmission: t,
        configuration: config,
        mask,
    })
}

pub fn run_realization(spec: &RunSpec, master_seed: u64, id: u64) -> Result<EnhancementRecord> {
    solve_realization(spec, master_seed, id).map(|s| s.record)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnsembleSummary {
    pub config: String,
    pub model: MediumKind,
    pub n: usize,
    pub doc: f64,
    pub realizations: usize,
    pub failed: usize,
    pub unconverged: usize,
    pub mean_eta: f64,
    pub std_eta: f64,
    pub mean_eta_over_n: f64,
    pub std_eta_over_n: f64,
    pub mean_sigma1_sq: Option<f64>,
    pub mean_total_coincidence: f64,
}

impl EnsembleSummary {
    /// Aggregates the non-failed records; standard deviations use `n − 1`.
    pub fn from_records(spec: &RunSpec, records: &[EnhancementRecord]) -> Self {
        let ok: Vec<&EnhancementRecord> = records.iter().filter(|r| !r.failed).collect();
        let (mean_eta, std_eta) = mean_std(ok.iter().map(|r| r.eta));
        let (mean_eta_over_n, std_eta_over_n) = mean_std(ok.iter().map(|r| r.eta_over_n));
        let sigmas: Vec<f64> = records.iter().filter_map(|r| r.sigma1_sq).collect();
        let mean_sigma1_sq = (!sigmas.is_empty()).then(|| mean_std(sigmas.iter().copied()).0);
        Self {
            config: spec.setup.label(),
            model: spec.model,
            n: spec.n,
            doc: spec.doc,
            realizations: records.len(),
            failed: records.len() - ok.len(),
            unconverged: ok.iter().filter(|r| !r.converged).count(),
            mean_eta,
            std_eta,
            mean_eta_over_n,
            std_eta_over_n,
            mean_sigma1_sq,
            mean_total_coincidence: mean_std(ok.iter().map(|r| r.total_coincidence)).0,
        }
    }

    /// Standard error of the mean enhancement.
    pub fn stderr_eta(&self) -> f64 {
        let k = self.realizations - self.failed;
        self.std_eta / (k as f64).sqrt()
    }
}

/// Mean and sample standard deviation; NaN mean for an empty input, zero
/// spread for a single value.
pub fn mean_std(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let v: Vec<f64> = values.collect();
    if v.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let k = v.len() as f64;
    let mean = v.iter().sum::<f64>() / k;
    if v.len() == 1 {
        return (mean, 0.0);
    }
    let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (k - 1.0);
    (mean, var.sqrt())
}

#[derive(Clone, Debug)]
pub struct Ensemble {
    pub summary: EnsembleSummary,
    /// Ordered by realization id.
    pub records: Vec<EnhancementRecord>,
}

/// Realizations `0..count`, run in parallel on the current rayon pool.
pub fn run_ensemble(spec: &RunSpec, master_seed: u64, count: usize) -> Result<Ensemble> {
    if count == 0 {
        return Err(Error::InvalidInput("an ensemble needs at least one realization".into()));
    }
    spec.validate()?;
    let records = (0..count as u64)
        .into_par_iter()
        .map(|id| run_realization(spec, master_seed, id))
        .collect::<Result<Vec<_>>>()?;
    Ok(Ensemble {
        summary: EnsembleSummary::from_records(spec, &records),
        records,
    })
}

#[derive(Clone, Debug)]
pub struct SweepPoint {
    pub value: f64,
    pub ensemble: Ensemble,
}

/// One ensemble per degree of control. Realization `i` sees the same
/// medium at every point.
pub fn sweep_doc(base: &RunSpec, docs: &[f64], master_seed: u64, count: usize) -> Result<Vec<SweepPoint>> {
    let specs: Vec<RunSpec> = docs.iter().map(|&d| base.clone().with_doc(d)).collect();
    for s in &specs {
        s.validate()?;
    }
    specs
        .iter()
        .map(|s| {
            Ok(SweepPoint {
                value: s.doc,
                ensemble: run_ensemble(s, master_seed, count)?,
            })
        })
        .collect()
}

/// One ensemble per system size at the base spec's degree of control.
pub fn sweep_n(base: &RunSpec, ns: &[usize], master_seed: u64, count: usize) -> Result<Vec<SweepPoint>> {
    let specs: Vec<RunSpec> = ns
        .iter()
        .map(|&n| RunSpec { n, ..base.clone() })
        .collect();
    for s in &specs {
        s.validate()?;
    }
    specs
        .iter()
        .map(|s| {
            Ok(SweepPoint {
                value: s.n as f64,
                ensemble: run_ensemble(s, master_seed, count)?,
            })
        })
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LinearFit {
    pub slope: f64,
    pub intercept: f64,
}

/// Ordinary least-squares line through `(x, y)`.
pub fn least_squares_slope(xs: &[f64], ys: &[f64]) -> Result<LinearFit> {
    if xs.len() != ys.len() {
        return Err(Error::DimensionMismatch {
            context: "least-squares abscissae vs ordinates",
            left: (xs.len(), 1),
            right: (ys.len(), 1),
        });
    }
    if xs.len() < 2 {
        return Err(Error::InvalidInput("a line fit needs at least two points".into()));
    }
    let k = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / k;
    let my = ys.iter().sum::<f64>() / k;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::InvalidInput("a line fit needs two distinct abscissae".into()));
    }
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    Ok(LinearFit {
        slope,
        intercept: my - slope * mx,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec(layout: Layout, symmetric: bool, model: MediumKind, n: usize) -> RunSpec {
        RunSpec::new(ExperimentSetup::new(layout, symmetric), model, n)
    }

    #[test]
    fn labels_and_target_modes() {
        let s = ExperimentSetup::from_label("2p-ds", true).unwrap();
        assert_eq!(s.label(), "2p-ds-opc");
        assert_eq!((s.configuration(64).alpha, s.configuration(64).beta), (0, 0));
        let s = ExperimentSetup::from_label("1p-s", false).unwrap();
        assert_eq!(s.label(), "1p-s");
        assert_eq!(s.configuration(65).beta, 32);
        assert!(ExperimentSetup::from_label("3p", false).is_err());
    }

    #[test]
    fn phase_conjugation_is_exactly_n() {
        let s = spec(Layout::TwoPhotonIlluminationShaping, true, MediumKind::HaarUnitary, 32);
        for id in 0..3 {
            let r = run_realization(&s, 5, id).unwrap();
            assert!((r.eta - 32.0).abs() < 1e-9 * 32.0, "{}", r.eta);
        }
    }

    #[test]
    fn thin_diffuser_one_photon_is_exactly_n() {
        let s = spec(Layout::OnePhotonShaping, false, MediumKind::ThinDiffuser, 16);
        let r = run_realization(&s, 1, 0).unwrap();
        assert!((r.eta - 16.0).abs() < 1e-9);
    }

    #[test]
    fn realizations_are_deterministic() {
        let s = spec(Layout::TwoPhotonDetectionShaping, false, MediumKind::GaussianIID, 16);
        assert_eq!(run_realization(&s, 9, 4).unwrap(), run_realization(&s, 9, 4).unwrap());
    }

    #[test]
    fn detection_rows_respect_the_singular_value_bound() {
        let s = spec(Layout::TwoPhotonDetectionShaping, true, MediumKind::GaussianIID, 16);
        for id in 0..4 {
            let sol = solve_realization(&s, 3, id).unwrap();
            let bound = sol.record.sigma1_sq.unwrap() / (2.0 * 16.0);
            assert!(sol.record.p_opt <= bound + 1e-15);
        }
    }

    #[test]
    fn incompatible_baseline_is_rejected() {
        let s = spec(Layout::OnePhotonShaping, false, MediumKind::GaussianIID, 8).with_baseline(BaselineMode::AnalyticUnitary);
        assert!(matches!(run_realization(&s, 0, 0), Err(Error::InvalidMode(_))));
    }

    #[test]
    fn fractional_macro_count_is_rejected() {
        let s = spec(Layout::OnePhotonShaping, false, MediumKind::HaarUnitary, 64).with_doc(0.3);
        assert!(matches!(run_ensemble(&s, 0, 2), Err(Error::InvalidControl(_))));
    }

    #[test]
    fn ensemble_records_are_ordered_and_summarized() {
        let s = spec(Layout::OnePhotonShaping, false, MediumKind::HaarUnitary, 16);
        let e = run_ensemble(&s, 2, 6).unwrap();
        assert!(e.records.iter().enumerate().all(|(i, r)| r.realization == i as u64));
        let (m, sd) = mean_std(e.records.iter().map(|r| r.eta_over_n));
        assert_eq!(e.summary.mean_eta_over_n, m);
        assert_eq!(e.summary.std_eta_over_n, sd);
        assert_eq!(e.summary.realizations, 6);
    }

    #[test]
    fn doc_sweep_shares_media() {
        let s = spec(Layout::OnePhotonShaping, false, MediumKind::HaarUnitary, 16);
        let pts = sweep_doc(&s, &[0.25, 1.0], 7, 3).unwrap();
        for (a, b) in pts[0].ensemble.records.iter().zip(&pts[1].ensemble.records) {
            assert_eq!(a.p0, b.p0);
            assert!(a.eta <= b.eta + 1e-9);
        }
    }

    #[test]
    fn line_fit() {
        let fit = least_squares_slope(&[1.0, 2.0, 3.0], &[3.0, 5.0, 7.0]).unwrap();
        assert!((fit.slope - 2.0).abs() < 1e-14 && (fit.intercept - 1.0).abs() < 1e-14);
        assert!(least_squares_slope(&[1.0], &[1.0]).is_err());
        assert!(least_squares_slope(&[1.0, 1.0], &[1.0, 2.0]).is_err());
    }

    #[test]
    fn mean_std_edge_cases() {
        assert!(mean_std(std::iter::empty()).0.is_nan());
        assert_eq!(mean_std([2.0].into_iter()), (2.0, 0.0));
        let (m, s) = mean_std([1.0, 2.0, 3.0].into_iter());
        assert_eq!(m, 2.0);
        assert!((s - 1.0).abs() < 1e-15);
    }
}

use std::f64::consts::PI;

use num_complex::Complex64;

use super::analytic::{analytic_phases_1ps_with, analytic_phases_2pis_with};
use super::objective::PhaseObjective;
use super::optimizer::{optimize_objective, OptimizationResult, OptimizerSpec};
use crate::configurations::{coincidence_probability, Layout, MacroPixelMap, ShapingConfiguration};
use crate::error::{Error, Result};
use crate::media::TransmissionMatrix;
use crate::numerics::RngStream;

/// Numerical optimizer versus the closed-form optimum on one realization.
#[derive(Clone, Debug)]
pub struct AnalyticComparison {
    pub analytic_objective: f64,
    pub numerical_objective: f64,
    /// `numerical / analytic`; at most 1 up to rounding.
    pub objective_ratio: f64,
    /// Largest per-pixel phase difference after removing the global shift
    /// (and the per-pixel π ambiguity of doubled phases).
    pub max_phase_residual: f64,
    pub rms_phase_residual: f64,
    pub numerical: OptimizationResult,
}

fn wrap_signed(x: f64) -> f64 {
    let y = x.rem_euclid(2.0 * PI);
    if y > PI {
        y - 2.0 * PI
    } else {
        y
    }
}

/// Residuals of `numerical − analytic` modulo a common shift. With
/// `multiplicity = 2` phases are compared on the doubled circle.
pub fn phase_residuals(numerical: &[f64], analytic: &[f64], multiplicity: u32) -> Vec<f64> {
    let k = f64::from(multiplicity);
    let diffs: Vec<f64> = numerical.iter().zip(analytic).map(|(a, b)| k * (a - b)).collect();
    let shift = diffs.iter().map(|&d| Complex64::from_polar(1.0, d)).sum::<Complex64>().arg();
    diffs.iter().map(|&d| wrap_signed(d - shift) / k).collect()
}

pub fn validate_against_analytic(
    t: &TransmissionMatrix,
    config: &ShapingConfiguration,
    spec: &OptimizerSpec,
    rng: RngStream,
) -> Result<AnalyticComparison> {
    validate_against_analytic_with(t, config, &MacroPixelMap::full(t.n())?, spec, rng)
}

pub fn validate_against_analytic_with(
    t: &TransmissionMatrix,
    config: &ShapingConfiguration,
    control: &MacroPixelMap,
    spec: &OptimizerSpec,
    rng: RngStream,
) -> Result<AnalyticComparison> {
    let analytic = match config.layout {
        Layout::OnePhotonShaping => analytic_phases_1ps_with(t, config.alpha, config.beta, control.clone())?,
        Layout::TwoPhotonIlluminationShaping => {
            analytic_phases_2pis_with(t, config.alpha, config.beta, control.clone())?
        }
        _ => {
            return Err(Error::LayoutMismatch(format!(
                "layout {} has no closed-form optimum",
                config.layout
            )))
        }
    };
    let objective = PhaseObjective::for_configuration(t, config, control)?;
    let numerical = optimize_objective(&objective, spec, rng)?;
    let analytic_objective = coincidence_probability(config, t, &analytic)?;
    let numerical_objective = numerical.objective;
    let residuals = phase_residuals(numerical.mask.phases(), analytic.phases(), objective.phase_multiplicity());
    let max_phase_residual = residuals.iter().fold(0.0_f64, |m, r| m.max(r.abs()));
    let rms_phase_residual = (residuals.iter().map(|r| r * r).sum::<f64>() / residuals.len() as f64).sqrt();
    Ok(AnalyticComparison {
        analytic_objective,
        numerical_objective,
        objective_ratio: numerical_objective / analytic_objective,
        max_phase_residual,
        rms_phase_residual,
        numerical,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::media::{generate, MediumKind, MediumModel};

    #[test]
    fn residuals_ignore_global_shift() {
        let a = [0.1, 1.0, 2.5, 6.0];
        let b: Vec<f64> = a.iter().map(|x| x + 0.7).collect();
        assert!(phase_residuals(&b, &a, 1).iter().all(|r| r.abs() < 1e-12));
    }

    #[test]
    fn doubled_residuals_ignore_pi_flips() {
        let a = [0.1, 1.0, 2.5, 6.0];
        let b = [0.4, 1.3 + PI, 2.8, 6.3 - PI];
        assert!(phase_residuals(&b, &a, 2).iter().all(|r| r.abs() < 1e-12));
        assert!(phase_residuals(&b, &a, 1).iter().any(|r| r.abs() > 1.0));
    }

    #[test]
    fn optimizer_recovers_one_photon_solution() {
        let t = generate(MediumModel::new(MediumKind::HaarUnitary, 32, RngStream::new(3, 0))).unwrap();
        let cfg = ShapingConfiguration::new(Layout::OnePhotonShaping, 0, 16);
        let cmp = validate_against_analytic(&t, &cfg, &OptimizerSpec::default(), RngStream::new(3, 1)).unwrap();
        assert!(cmp.objective_ratio > 0.999999 && cmp.objective_ratio < 1.0 + 1e-9);
        assert!(cmp.max_phase_residual < 1e-3, "{}", cmp.max_phase_residual);
    }

    #[test]
    fn optimizer_recovers_phase_conjugation() {
        let n = 32;
        let t = generate(MediumModel::new(MediumKind::HaarUnitary, n, RngStream::new(4, 0))).unwrap();
        let cfg = ShapingConfiguration::new(Layout::TwoPhotonIlluminationShaping, 3, 3);
        let cmp = validate_against_analytic(&t, &cfg, &OptimizerSpec::default(), RngStream::new(4, 1)).unwrap();
        assert!((cmp.analytic_objective * 2.0 * n as f64 - 1.0).abs() < 1e-12);
        assert!((cmp.numerical_objective * 2.0 * n as f64 - 1.0).abs() < 1e-9);
    }

    #[test]
    fn rejects_detection_shaping() {
        let t = generate(MediumModel::new(MediumKind::HaarUnitary, 4, RngStream::new(4, 0))).unwrap();
        let cfg = ShapingConfiguration::new(Layout::TwoPhotonDetectionShaping, 0, 0);
        assert!(matches!(
            validate_against_analytic(&t, &cfg, &OptimizerSpec::default(), RngStream::new(0, 0)),
            Err(Error::LayoutMismatch(_))
        ));
    }
}

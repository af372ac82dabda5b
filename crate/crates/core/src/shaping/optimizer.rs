use std::collections::VecDeque;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::objective::{PhaseObjective, QuadraticKernel};
use crate::configurations::{MacroPixelMap, PhaseMask};
use crate::error::{Error, Result};
use crate::numerics::RngStream;

const ARMIJO_C1: f64 = 1e-4;
const MAX_BACKTRACKS: usize = 60;
const MOMENTUM: f64 = 0.9;
/// Largest phase change (radians) proposed by an unscaled first step.
const FIRST_STEP: f64 = 0.5;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Algorithm {
    /// Limited-memory BFGS with backtracking line search.
    QuasiNewton,
    /// Heavy-ball gradient ascent with backtracking line search.
    MomentumGradient,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OptimizerSpec {
    pub algorithm: Algorithm,
    pub restarts: usize,
    pub max_iterations: usize,
    /// Stop when the largest gradient component falls below this.
    pub gradient_tolerance: f64,
    /// Stop when an accepted step changes the objective by less than this
    /// fraction.
    pub objective_tolerance: f64,
    pub history_size: usize,
}

impl Default for OptimizerSpec {
    fn default() -> Self {
        Self {
            algorithm: Algorithm::QuasiNewton,
            restarts: 8,
            max_iterations: 500,
            gradient_tolerance: 1e-10,
            objective_tolerance: 1e-12,
            history_size: 10,
        }
    }
}

impl OptimizerSpec {
    pub fn validate(&self) -> Result<()> {
        if self.restarts == 0 {
            return Err(Error::InvalidInput("optimizer needs at least one restart".into()));
        }
        if !(self.gradient_tolerance > 0.0 && self.gradient_tolerance.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "gradient tolerance must be positive, got {}",
                self.gradient_tolerance
            )));
        }
        if !(self.objective_tolerance > 0.0 && self.objective_tolerance.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "objective tolerance must be positive, got {}",
                self.objective_tolerance
            )));
        }
        if self.algorithm == Algorithm::QuasiNewton && self.history_size == 0 {
            return Err(Error::InvalidInput("quasi-Newton history must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug)]
pub struct OptimizationResult {
    pub mask: PhaseMask,
    /// Achieved coincidence probability.
    pub objective: f64,
    /// Objective after each accepted step, starting from the initial mask.
    pub trace: Vec<f64>,
    pub converged: bool,
    pub restart_index: usize,
    pub gradient_norm_final: f64,
    pub iterations: usize,
}

/// Maximizes a quadratic kernel over the given macro-pixel layout.
pub fn optimize(
    kernel: &QuadraticKernel,
    control: &MacroPixelMap,
    spec: &OptimizerSpec,
    rng: RngStream,
) -> Result<OptimizationResult> {
    if control.n() != kernel.n() {
        return Err(Error::DimensionMismatch {
            context: "macro-pixel map vs kernel",
            left: (control.n(), 1),
            right: kernel.a.shape(),
        });
    }
    optimize_objective(&PhaseObjective::from_kernel(kernel, control), spec, rng)
}

/// Best of `spec.restarts` local maxima, each started from i.i.d. uniform
/// phases drawn from `rng.child(restart)`. Ties go to the lowest restart.
pub fn optimize_objective(objective: &PhaseObjective, spec: &OptimizerSpec, rng: RngStream) -> Result<OptimizationResult> {
    spec.validate()?;
    let runs: Vec<Run> = (0..spec.restarts)
        .into_par_iter()
        .map(|r| {
            let mut g = rng.child(r as u64).rng();
            let x0 = (0..objective.dimension()).map(|_| g.phase()).collect();
            ascend(objective, spec, x0)
        })
        .collect();

    let mut best: Option<usize> = None;
    for (i, run) in runs.iter().enumerate() {
        if run.diverged {
            continue;
        }
        if best.is_none_or(|b| run.value > runs[b].value) {
            best = Some(i);
        }
    }
    let Some(b) = best else {
        return Err(Error::OptimizerFailure {
            traces: runs.into_iter().map(|r| r.trace).collect(),
        });
    };
    let run = runs.into_iter().nth(b).expect("index in range");
    let mask = PhaseMask::new(run.x, objective.control().clone())?;
    Ok(OptimizationResult {
        mask,
        objective: run.value,
        trace: run.trace,
        converged: run.converged,
        restart_index: b,
        gradient_norm_final: run.grad_norm,
        iterations: run.iterations,
    })
}

struct Run {
    x: Vec<f64>,
    value: f64,
    trace: Vec<f64>,
    converged: bool,
    diverged: bool,
    grad_norm: f64,
    iterations: usize,
}

fn inf_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

fn dotf(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// L-BFGS two-loop recursion on the minimization gradient `g`.
fn lbfgs_direction(g: &[f64], memory: &VecDeque<(Vec<f64>, Vec<f64>, f64)>) -> Vec<f64> {
    let mut q = g.to_vec();
    let mut alphas = Vec::with_capacity(memory.len());
    for (s, y, rho) in memory.iter().rev() {
        let a = rho * dotf(s, &q);
        q.iter_mut().zip(y).for_each(|(qi, yi)| *qi -= a * yi);
        alphas.push(a);
    }
    if let Some((s, y, _)) = memory.back() {
        let gamma = dotf(s, y) / dotf(y, y);
        q.iter_mut().for_each(|qi| *qi *= gamma);
    }
    for ((s, y, rho), a) in memory.iter().zip(alphas.iter().rev()) {
        let b = rho * dotf(y, &q);
        q.iter_mut().zip(s).for_each(|(qi, si)| *qi += (a - b) * si);
    }
    q.iter_mut().for_each(|qi| *qi = -*qi);
    q
}

/// One local ascent. Internally minimizes `f = −P`.
fn ascend(objective: &PhaseObjective, spec: &OptimizerSpec, mut x: Vec<f64>) -> Run {
    let m = x.len();
    let mut grad = vec![0.0; m];
    let p0 = objective.value_and_gradient(&x, &mut grad);
    let mut trace = vec![p0];
    if !p0.is_finite() || grad.iter().any(|g| !g.is_finite()) {
        return Run {
            x,
            value: p0,
            trace,
            converged: false,
            diverged: true,
            grad_norm: f64::NAN,
            iterations: 0,
        };
    }
    let mut f = -p0;
    let mut g: Vec<f64> = grad.iter().map(|v| -v).collect();

    let mut memory: VecDeque<(Vec<f64>, Vec<f64>, f64)> = VecDeque::new();
    let mut prev_dir: Option<Vec<f64>> = None;
    let mut prev_step: Option<f64> = None;
    let mut converged = false;
    let mut iterations = 0;
    let mut x_new = vec![0.0; m];
    let mut g_new = vec![0.0; m];

    while iterations < spec.max_iterations {
        if inf_norm(&g) <= spec.gradient_tolerance {
            converged = true;
            break;
        }
        let mut d = match spec.algorithm {
            Algorithm::QuasiNewton => lbfgs_direction(&g, &memory),
            Algorithm::MomentumGradient => match &prev_dir {
                Some(pd) => g.iter().zip(pd).map(|(gi, di)| -gi + MOMENTUM * di).collect(),
                None => g.iter().map(|v| -v).collect(),
            },
        };
        let mut slope = dotf(&g, &d);
        if !(slope < 0.0) {
            memory.clear();
            d = g.iter().map(|v| -v).collect();
            slope = -dotf(&g, &g);
        }
        let d_norm = inf_norm(&d);
        let mut step = match spec.algorithm {
            Algorithm::QuasiNewton if !memory.is_empty() => 1.0,
            Algorithm::MomentumGradient => prev_step.map_or(FIRST_STEP / d_norm, |s| 2.0 * s),
            _ => FIRST_STEP / d_norm,
        };
        // never propose more than a half turn on any phase
        step = step.min(std::f64::consts::PI / d_norm);

        let mut accepted = None;
        for _ in 0..MAX_BACKTRACKS {
            x_new.iter_mut().zip(x.iter().zip(&d)).for_each(|(xn, (xi, di))| *xn = xi + step * di);
            let p = objective.value_and_gradient(&x_new, &mut g_new);
            let fn_ = -p;
            if fn_.is_finite() && fn_ <= f + ARMIJO_C1 * step * slope {
                accepted = Some(fn_);
                break;
            }
            step *= 0.5;
        }
        let Some(f_next) = accepted else {
            if !memory.is_empty() || prev_dir.is_some() {
                memory.clear();
                prev_dir = None;
                prev_step = None;
                continue;
            }
            // steepest descent cannot make progress: numerically stationary
            converged = true;
            break;
        };
        iterations += 1;
        g_new.iter_mut().for_each(|v| *v = -*v);

        let s: Vec<f64> = x_new.iter().zip(&x).map(|(a, b)| a - b).collect();
        let y: Vec<f64> = g_new.iter().zip(&g).map(|(a, b)| a - b).collect();
        let sy = dotf(&s, &y);
        if spec.algorithm == Algorithm::QuasiNewton && sy > f64::EPSILON * dotf(&s, &s).sqrt() * dotf(&y, &y).sqrt() {
            if memory.len() == spec.history_size {
                memory.pop_front();
            }
            memory.push_back((s, y, 1.0 / sy));
        }
        prev_dir = Some(d);
        prev_step = Some(step);

        let rel = (f_next - f).abs() / f_next.abs().max(f64::MIN_POSITIVE);
        std::mem::swap(&mut x, &mut x_new);
        std::mem::swap(&mut g, &mut g_new);
        f = f_next;
        trace.push(-f);
        if rel <= spec.objective_tolerance {
            converged = true;
            break;
        }
    }
    if !converged && inf_norm(&g) <= spec.gradient_tolerance {
        converged = true;
    }

    Run {
        x,
        value: -f,
        trace,
        converged,
        diverged: false,
        grad_norm: inf_norm(&g),
        iterations,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::configurations::{coincidence_probability, Layout, ShapingConfiguration};
    use crate::media::{generate, MediumKind, MediumModel};
    use crate::shaping::objective::build_kernel;

    fn detection_setup(kind: MediumKind, n: usize, seed: u64, symmetric: bool) -> (crate::media::TransmissionMatrix, ShapingConfiguration) {
        let t = generate(MediumModel::new(kind, n, RngStream::new(seed, 0))).unwrap();
        let beta = if symmetric { 0 } else { n / 2 };
        (t, ShapingConfiguration::new(Layout::TwoPhotonDetectionShaping, 0, beta))
    }

    #[test]
    fn spec_validation() {
        assert!(OptimizerSpec::default().validate().is_ok());
        let bad = [
            OptimizerSpec { restarts: 0, ..Default::default() },
            OptimizerSpec { gradient_tolerance: 0.0, ..Default::default() },
            OptimizerSpec { objective_tolerance: -1.0, ..Default::default() },
            OptimizerSpec { history_size: 0, ..Default::default() },
        ];
        for spec in bad {
            assert!(spec.validate().is_err());
        }
    }

    #[test]
    fn thin_diffuser_reaches_perfect_enhancement() {
        let n = 32;
        let (t, cfg) = detection_setup(MediumKind::ThinDiffuser, n, 3, false);
        let k = build_kernel(&t, &cfg).unwrap();
        let control = MacroPixelMap::full(n).unwrap();
        for algorithm in [Algorithm::QuasiNewton, Algorithm::MomentumGradient] {
            let spec = OptimizerSpec {
                algorithm,
                restarts: 2,
                max_iterations: 2000,
                ..Default::default()
            };
            let res = optimize(&k, &control, &spec, RngStream::new(1, 1)).unwrap();
            assert!((res.objective - 1.0 / (2.0 * n as f64)).abs() < 1e-9, "{algorithm:?}: {}", res.objective);
        }
    }

    #[test]
    fn trace_is_monotone_and_objective_reevaluates() {
        let (t, cfg) = detection_setup(MediumKind::GaussianIID, 24, 9, false);
        let k = build_kernel(&t, &cfg).unwrap();
        let control = MacroPixelMap::new(24, 8).unwrap();
        let res = optimize(&k, &control, &OptimizerSpec::default(), RngStream::new(4, 2)).unwrap();
        assert!(res.trace.windows(2).all(|w| w[1] >= w[0]));
        assert_eq!(*res.trace.last().unwrap(), res.objective);
        let direct = coincidence_probability(&cfg, &t, &res.mask).unwrap();
        assert!((direct - res.objective).abs() < 1e-12);
        assert_eq!(res.mask.phases().len(), 8);
    }

    #[test]
    fn same_stream_same_result() {
        let (t, cfg) = detection_setup(MediumKind::HaarUnitary, 16, 5, true);
        let k = build_kernel(&t, &cfg).unwrap();
        let control = MacroPixelMap::full(16).unwrap();
        let spec = OptimizerSpec::default();
        let a = optimize(&k, &control, &spec, RngStream::new(8, 3)).unwrap();
        let b = optimize(&k, &control, &spec, RngStream::new(8, 3)).unwrap();
        assert_eq!(a.mask.phases(), b.mask.phases());
        assert_eq!(a.restart_index, b.restart_index);
    }

    #[test]
    fn more_restarts_never_hurt() {
        let (t, cfg) = detection_setup(MediumKind::GaussianIID, 16, 6, false);
        let k = build_kernel(&t, &cfg).unwrap();
        let control = MacroPixelMap::full(16).unwrap();
        let mut last = 0.0;
        for restarts in [1, 2, 4, 8] {
            let spec = OptimizerSpec { restarts, ..Default::default() };
            let res = optimize(&k, &control, &spec, RngStream::new(2, 0)).unwrap();
            assert!(res.objective >= last);
            last = res.objective;
        }
    }

    #[test]
    fn control_must_match_kernel() {
        let (t, cfg) = detection_setup(MediumKind::HaarUnitary, 8, 1, true);
        let k = build_kernel(&t, &cfg).unwrap();
        let control = MacroPixelMap::full(4).unwrap();
        assert!(optimize(&k, &control, &OptimizerSpec::default(), RngStream::new(0, 0)).is_err());
    }
}

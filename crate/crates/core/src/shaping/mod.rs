//! Optimal phase masks: closed-form solutions where they exist and a
//! gradient-based optimizer for the quadratic landscapes.

mod analytic;
mod objective;
mod optimizer;
mod validate;

pub use analytic::{analytic_phases_1ps, analytic_phases_1ps_with, analytic_phases_2pis, analytic_phases_2pis_with};
pub use objective::{build_kernel, PhaseObjective, QuadraticKernel};
pub use optimizer::{optimize, optimize_objective, Algorithm, OptimizationResult, OptimizerSpec};
pub use validate::{phase_residuals, validate_against_analytic, validate_against_analytic_with, AnalyticComparison};

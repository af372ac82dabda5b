use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::configurations::{coincidence_map, coincidence_probability, PhaseMask, ShapingConfiguration};
use crate::error::{Error, Result};
use crate::media::TransmissionMatrix;
use crate::numerics::RngStream;

/// How strongly a field's phases concentrate on two antipodal values.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClusterScore {
    /// `|Σ w_n e^{2iθ_n}| / Σ w_n` with intensity weights `w_n = |u_n|²`.
    pub score: f64,
    /// Same statistic with equal weights.
    pub unweighted_score: f64,
    /// The two antipodal phases in `[0, 2π)`.
    pub cluster_centers: [f64; 2],
}

pub fn phase_cluster_score(field: &[Complex64]) -> Result<ClusterScore> {
    let total: f64 = field.iter().map(|u| u.norm_sqr()).sum();
    if !(total > 0.0) {
        return Err(Error::InvalidInput("cluster score of an all-zero field".into()));
    }
    // u² = |u|² e^{2iθ}, so the weighted mean is just Σu² / Σ|u|²
    let weighted: Complex64 = field.iter().map(|u| u * u).sum();
    let nonzero: Vec<&Complex64> = field.iter().filter(|u| u.norm() > 0.0).collect();
    let unweighted: Complex64 = nonzero
        .iter()
        .map(|u| Complex64::from_polar(1.0, 2.0 * u.arg()))
        .sum::<Complex64>()
        / nonzero.len() as f64;
    let c = (0.5 * weighted.arg()).rem_euclid(2.0 * PI);
    Ok(ClusterScore {
        score: (weighted.norm() / total).min(1.0),
        unweighted_score: unweighted.norm().min(1.0),
        cluster_centers: [c, (c + PI).rem_euclid(2.0 * PI)],
    })
}

/// Random masks averaged by [`transmission_excess`].
pub const EXCESS_SAMPLES: usize = 1000;

/// Optimized single-pair probability relative to the mean total coincidence
/// probability `Σ_β P_αβ` over random full-resolution masks.
pub fn transmission_excess(
    t: &TransmissionMatrix,
    config: &ShapingConfiguration,
    mask: &PhaseMask,
    rng: RngStream,
) -> Result<f64> {
    transmission_excess_with(t, config, mask, rng, EXCESS_SAMPLES)
}

pub fn transmission_excess_with(
    t: &TransmissionMatrix,
    config: &ShapingConfiguration,
    mask: &PhaseMask,
    rng: RngStream,
    samples: usize,
) -> Result<f64> {
    if samples == 0 {
        return Err(Error::InvalidInput("transmission excess needs at least one random mask".into()));
    }
    let p_opt = coincidence_probability(config, t, mask)?;
    let control = crate::configurations::MacroPixelMap::full(t.n())?;
    let mut g = rng.rng();
    let mut total = 0.0;
    for _ in 0..samples {
        let phases = (0..t.n()).map(|_| g.phase()).collect();
        let random = PhaseMask::new(phases, control.clone())?;
        total += coincidence_map(config, t, &random)?.total();
    }
    Ok(p_opt / (total / samples as f64))
}

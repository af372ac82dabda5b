use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::configurations::{coincidence_map, Layout, MacroPixelMap, PhaseMask, ShapingConfiguration};
use crate::error::{Error, Result};
use crate::media::{MediumKind, TransmissionMatrix};

/// Reference probability that enhancements are measured against.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BaselineMode {
    /// Mean over β of `P_αβ` with the SLM switched off, on this realization.
    SpatialMean,
    /// The exact disorder average `1/(2N²)` of a lossless medium.
    AnalyticUnitary,
}

impl BaselineMode {
    pub fn label(self) -> &'static str {
        match self {
            BaselineMode::SpatialMean => "spatial-mean",
            BaselineMode::AnalyticUnitary => "analytic-unitary",
        }
    }

    /// Exact for lossless media, measured otherwise.
    pub fn default_for(kind: MediumKind) -> Self {
        match kind {
            MediumKind::HaarUnitary => BaselineMode::AnalyticUnitary,
            MediumKind::GaussianIID | MediumKind::ThinDiffuser => BaselineMode::SpatialMean,
        }
    }
}

impl fmt::Display for BaselineMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for BaselineMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "spatial-mean" => Ok(BaselineMode::SpatialMean),
            "analytic-unitary" => Ok(BaselineMode::AnalyticUnitary),
            other => Err(Error::InvalidMode(format!(
                "unknown baseline {other:?}; expected spatial-mean or analytic-unitary"
            ))),
        }
    }
}

/// Pre-optimization coincidence probability for photons detected around α.
///
/// Every layout reduces to the same chain `𝓕 T Tᵀ 𝓕` when `S = I`, so the
/// baseline does not depend on the layout or on any mask.
pub fn baseline_probability(t: &TransmissionMatrix, alpha: usize, mode: BaselineMode) -> Result<f64> {
    let n = t.n();
    if alpha >= n {
        return Err(Error::InvalidInput(format!("mode {alpha} outside 0..{n}")));
    }
    match mode {
        BaselineMode::AnalyticUnitary => {
            if !t.model().kind.is_unitary() {
                return Err(Error::InvalidMode(format!(
                    "analytic-unitary baseline requested for a {} medium",
                    t.model().kind
                )));
            }
            Ok(1.0 / (2.0 * (n * n) as f64))
        }
        BaselineMode::SpatialMean => {
            let cfg = ShapingConfiguration::new(Layout::OnePhotonShaping, alpha, alpha);
            let flat = PhaseMask::flat(MacroPixelMap::full(n)?);
            Ok(coincidence_map(&cfg, t, &flat)?.total() / n as f64)
        }
    }
}

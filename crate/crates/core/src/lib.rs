//! Simulation of wavefront shaping for entangled photon pairs crossing a
//! scattering medium: random transmission matrices, the coincidence
//! probability of each optical layout, optimal SLM phase masks and the
//! ensemble statistics built on top of them.

// `!(x > 0.0)` is deliberate: NaN must fail positivity checks
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod configurations;
pub mod error;
pub mod experiments;
pub mod media;
pub mod numerics;
pub mod shaping;

pub use error::{Error, Result};

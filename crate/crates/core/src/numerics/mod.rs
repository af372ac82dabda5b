//! Dense complex linear algebra, the unitary DFT, seeded sampling and
//! spectral helpers shared by every other module.

mod dft;
mod matrix;
pub mod qr;
mod rng;
mod spectral;

pub use dft::{dft, DftMatrix};
pub use matrix::{dot, gram_transpose, matmul, norm_sqr, ComplexMatrix};
pub use rng::{sample_standard_complex_gaussian, RngStream, StreamRng};
pub use spectral::{largest_singular_value_sq, largest_singular_value_sq_with, PowerIteration};

pub use num_complex::Complex64;

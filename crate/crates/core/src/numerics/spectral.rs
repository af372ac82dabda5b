use num_complex::Complex64;

use super::matrix::{norm_sqr, ComplexMatrix};
use super::rng::RngStream;
use crate::error::{Error, Result};

/// Stopping rule for [`largest_singular_value_sq_with`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PowerIteration {
    /// Relative change of the estimate between sweeps.
    pub tol: f64,
    pub max_iterations: usize,
}

impl Default for PowerIteration {
    fn default() -> Self {
        Self {
            tol: 1e-10,
            max_iterations: 10_000,
        }
    }
}

/// σ₁² of a square matrix, by power iteration on `m†m`.
pub fn largest_singular_value_sq(m: &ComplexMatrix, tol: f64) -> Result<f64> {
    largest_singular_value_sq_with(
        m,
        PowerIteration {
            tol,
            ..PowerIteration::default()
        },
    )
}

pub fn largest_singular_value_sq_with(m: &ComplexMatrix, params: PowerIteration) -> Result<f64> {
    if !m.is_square() {
        return Err(Error::InvalidDimension(format!(
            "σ₁² requires a square matrix, got {:?}",
            m.shape()
        )));
    }
    if !(params.tol > 0.0) {
        return Err(Error::InvalidInput(format!("tolerance must be positive, got {}", params.tol)));
    }
    let n = m.rows();
    if n == 0 {
        return Err(Error::InvalidDimension("empty matrix".into()));
    }

    // fixed pseudo-random start: never orthogonal to the top singular vector
    // except on a measure-zero set
    let mut rng = RngStream::new(0x05EE_D0F5_1E55, 0).rng();
    let mut v: Vec<Complex64> = (0..n).map(|_| rng.complex_gaussian()).collect();
    normalize(&mut v);

    let mut estimate = f64::NAN;
    for _ in 0..params.max_iterations {
        let mv = m.matvec(&v)?;
        let next = norm_sqr(&mv);
        if next == 0.0 {
            // v is in the kernel; with a random start this means m == 0
            if m.as_slice().iter().all(|z| *z == Complex64::new(0.0, 0.0)) {
                return Ok(0.0);
            }
        }
        let converged = (next - estimate).abs() <= params.tol * next;
        estimate = next;
        if converged {
            return Ok(estimate);
        }
        v = m.matvec_adjoint(&mv)?;
        normalize(&mut v);
    }
    Err(Error::NonConvergence {
        iterations: params.max_iterations,
        last_estimate: estimate,
    })
}

fn normalize(v: &mut [Complex64]) {
    let norm = norm_sqr(v).sqrt();
    if norm > 0.0 {
        for z in v.iter_mut() {
            *z /= norm;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_has_unit_singular_value() {
        for n in [1, 3, 17] {
            let s = largest_singular_value_sq(&ComplexMatrix::identity(n), 1e-12).unwrap();
            assert!((s - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn diagonal_picks_largest() {
        let m = ComplexMatrix::from_diagonal(&[Complex64::new(2.0, 0.0), Complex64::new(1.0, 0.0)]);
        let s = largest_singular_value_sq(&m, 1e-12).unwrap();
        assert!((s - 4.0).abs() < 1e-9, "{s}");
    }

    #[test]
    fn zero_matrix() {
        assert_eq!(largest_singular_value_sq(&ComplexMatrix::zeros(3, 3), 1e-10).unwrap(), 0.0);
    }

    #[test]
    fn rejects_bad_arguments() {
        assert!(largest_singular_value_sq(&ComplexMatrix::zeros(2, 3), 1e-10).is_err());
        assert!(largest_singular_value_sq(&ComplexMatrix::identity(2), 0.0).is_err());
    }

    #[test]
    fn iteration_cap_reports_last_iterate() {
        // nearly degenerate top pair converges slowly
        let m = ComplexMatrix::from_diagonal(&[Complex64::new(1.0, 0.0), Complex64::new(0.999_999, 0.0)]);
        let err = largest_singular_value_sq_with(
            &m,
            PowerIteration {
                tol: 1e-16,
                max_iterations: 3,
            },
        )
        .unwrap_err();
        match err {
            Error::NonConvergence {
                iterations,
                last_estimate,
            } => {
                assert_eq!(iterations, 3);
                assert!(last_estimate > 0.99 && last_estimate <= 1.0 + 1e-12);
            }
            other => panic!("unexpected {other:?}"),
        }
    }
}

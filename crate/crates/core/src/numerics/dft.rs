use std::f64::consts::PI;
use std::ops::Deref;

use num_complex::Complex64;

use super::matrix::ComplexMatrix;
use crate::error::{Error, Result};

/// Unitary discrete Fourier transform, `f_jk = n^(-1/2) exp(-2πi jk/n)`.
///
/// The matrix is symmetric by construction since the phase only depends on
/// `jk mod n`.
#[derive(Clone, Debug, PartialEq)]
pub struct DftMatrix {
    matrix: ComplexMatrix,
}

impl DftMatrix {
    pub fn n(&self) -> usize {
        self.matrix.rows()
    }

    pub fn as_matrix(&self) -> &ComplexMatrix {
        &self.matrix
    }

    pub fn into_matrix(self) -> ComplexMatrix {
        self.matrix
    }

    /// Row `k`, which equals column `k`.
    pub fn row(&self, k: usize) -> &[Complex64] {
        self.matrix.row(k)
    }

    /// `𝓕 · v`.
    pub fn apply(&self, v: &[Complex64]) -> Result<Vec<Complex64>> {
        self.matrix.matvec(v)
    }
}

impl Deref for DftMatrix {
    type Target = ComplexMatrix;

    fn deref(&self) -> &ComplexMatrix {
        &self.matrix
    }
}

pub fn dft(n: usize) -> Result<DftMatrix> {
    if n == 0 {
        return Err(Error::InvalidDimension("DFT of zero modes".into()));
    }
    let norm = 1.0 / (n as f64).sqrt();
    // one table lookup per entry keeps f_jk and f_kj bit-identical
    let table: Vec<Complex64> = (0..n)
        .map(|r| Complex64::from_polar(norm, -2.0 * PI * r as f64 / n as f64))
        .collect();
    let matrix = ComplexMatrix::from_fn(n, n, |j, k| table[(j * k) % n]);
    Ok(DftMatrix { matrix })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::matrix::matmul;

    #[test]
    fn zero_modes_rejected() {
        assert!(matches!(dft(0), Err(Error::InvalidDimension(_))));
    }

    #[test]
    fn single_mode_is_one() {
        let f = dft(1).unwrap();
        assert_eq!(f[(0, 0)], Complex64::new(1.0, 0.0));
    }

    #[test]
    fn two_point_transform() {
        let f = dft(2).unwrap();
        let h = std::f64::consts::FRAC_1_SQRT_2;
        let expected = [[h, h], [h, -h]];
        for j in 0..2 {
            for k in 0..2 {
                assert!((f[(j, k)] - Complex64::new(expected[j][k], 0.0)).norm() < 1e-15);
            }
        }
    }

    #[test]
    fn square_is_index_flip_for_four_modes() {
        let f = dft(4).unwrap();
        let f2 = matmul(&f, &f).unwrap();
        for k in 0..4 {
            let expected = if k == 3 { 1.0 } else { 0.0 };
            assert!((f2[(1, k)] - Complex64::new(expected, 0.0)).norm() < 1e-15);
        }
    }
}

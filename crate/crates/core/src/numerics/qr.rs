//! Householder QR for square complex matrices.

use num_complex::Complex64;

use super::matrix::ComplexMatrix;

/// Thin result of a Householder factorization `A = Q R`.
pub struct QrFactors {
    /// Unitary factor.
    pub q: ComplexMatrix,
    /// Diagonal of `R`; the strict upper triangle is not kept.
    pub r_diagonal: Vec<Complex64>,
}

pub fn householder_qr(a: &ComplexMatrix) -> QrFactors {
    assert!(a.is_square(), "householder_qr expects a square matrix");
    let n = a.rows();
    let zero = Complex64::new(0.0, 0.0);

    // column-major working copy; reflectors touch whole columns
    let mut cols: Vec<Vec<Complex64>> = (0..n).map(|j| a.column(j)).collect();
    let mut reflectors: Vec<Vec<Complex64>> = Vec::with_capacity(n);
    let mut r_diagonal = Vec::with_capacity(n);

    for k in 0..n {
        let x = &cols[k][k..];
        let norm = x.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        let head = x[0];
        let phase = if head.norm() > 0.0 {
            head / head.norm()
        } else {
            Complex64::new(1.0, 0.0)
        };
        let alpha = -phase * norm;
        let mut v: Vec<Complex64> = x.to_vec();
        v[0] -= alpha;
        let v_norm = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if v_norm > 0.0 {
            for z in v.iter_mut() {
                *z /= v_norm;
            }
            // H = I - 2 v v†, applied to the trailing columns
            for col in cols.iter_mut().skip(k) {
                let tail = &mut col[k..];
                let w = v
                    .iter()
                    .zip(tail.iter())
                    .fold(zero, |acc, (vi, ti)| acc + vi.conj() * ti);
                let w2 = w * 2.0;
                for (t, vi) in tail.iter_mut().zip(&v) {
                    *t -= vi * w2;
                }
            }
        } else {
            v.iter_mut().for_each(|z| *z = zero);
        }
        r_diagonal.push(cols[k][k]);
        reflectors.push(v);
    }

    // Q = H_0 H_1 ... H_{n-1} I, accumulated from the right
    let mut q: Vec<Vec<Complex64>> = (0..n)
        .map(|j| {
            let mut e = vec![zero; n];
            e[j] = Complex64::new(1.0, 0.0);
            e
        })
        .collect();
    for k in (0..n).rev() {
        let v = &reflectors[k];
        for col in q.iter_mut().skip(k) {
            let tail = &mut col[k..];
            let w = v
                .iter()
                .zip(tail.iter())
                .fold(zero, |acc, (vi, ti)| acc + vi.conj() * ti);
            let w2 = w * 2.0;
            for (t, vi) in tail.iter_mut().zip(v) {
                *t -= vi * w2;
            }
        }
    }

    QrFactors {
        q: ComplexMatrix::from_fn(n, n, |i, j| q[j][i]),
        r_diagonal,
    }
}

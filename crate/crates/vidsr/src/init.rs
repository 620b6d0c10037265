//! Orthogonal weight initialisation.

use rand::Rng;

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::tensor::{Tensor, TensorData};

/// Row-major `rows x cols` matrix whose smaller dimension is orthonormal,
/// scaled by `gain`.
///
/// A seeded Gaussian matrix is orthonormalised with two passes of modified
/// Gram-Schmidt, which keeps residual non-orthogonality near machine
/// precision. Every singular value of the result equals `gain`.
pub fn orthogonal_matrix<T: Scalar>(
    rows: usize,
    cols: usize,
    gain: f64,
    rng: &mut impl Rng,
) -> Result<Vec<T>> {
    if rows == 0 || cols == 0 {
        return Err(Error::invalid("orthogonal init requires a non-empty shape"));
    }
    // Orthonormalise along the smaller dimension; transpose back if needed.
    let transpose = rows > cols;
    let (m, n) = if transpose { (cols, rows) } else { (rows, cols) };

    let mut a: Vec<f64> = (0..m * n).map(|_| f64::standard_normal(rng)).collect();
    for _pass in 0..2 {
        for i in 0..m {
            for j in 0..i {
                let mut dot = 0.0;
                for t in 0..n {
                    dot += a[i * n + t] * a[j * n + t];
                }
                for t in 0..n {
                    a[i * n + t] -= dot * a[j * n + t];
                }
            }
            let norm: f64 = a[i * n..(i + 1) * n].iter().map(|v| v * v).sum::<f64>().sqrt();
            if norm < 1e-12 {
                return Err(Error::invalid(
                    "degenerate random matrix during orthogonalisation",
                ));
            }
            for t in 0..n {
                a[i * n + t] /= norm;
            }
        }
    }

    let mut out = vec![T::zero(); rows * cols];
    for r in 0..rows {
        for c in 0..cols {
            let v = if transpose { a[c * rows + r] } else { a[r * cols + c] };
            out[r * cols + c] = T::cast(v * gain);
        }
    }
    Ok(out)
}

/// Orthogonally initialised tensor, flattened as `shape[0] x prod(shape[1..])`.
/// Deterministic for a fixed seed.
pub fn orthogonal_init<T: Scalar>(shape: &[usize], gain: f64, seed: u64) -> Result<Tensor<T>> {
    if shape.is_empty() || shape.iter().any(|&e| e == 0) {
        return Err(Error::invalid(format!(
            "orthogonal init rejects zero-sized shape {:?}",
            shape
        )));
    }
    let rows = shape[0];
    let cols: usize = shape[1..].iter().product::<usize>().max(1);
    let mut rng = <rand_chacha::ChaCha8Rng as rand::SeedableRng>::seed_from_u64(seed);
    let data = orthogonal_matrix(rows, cols, gain, &mut rng)?;
    Ok(Tensor::leaf(TensorData::new(shape, data)?, true))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn gram(rows: usize, cols: usize, a: &[f64]) -> Vec<f64> {
        // A A^T for row-major rows x cols.
        let mut g = vec![0.0; rows * rows];
        for i in 0..rows {
            for j in 0..rows {
                let mut dot = 0.0;
                for t in 0..cols {
                    dot += a[i * cols + t] * a[j * cols + t];
                }
                g[i * rows + j] = dot;
            }
        }
        g
    }

    #[test]
    fn square_flattening_is_orthogonal() {
        let t = orthogonal_init::<f64>(&[24, 24], 1.0, 7).unwrap();
        let g = gram(24, 24, t.value().data());
        for i in 0..24 {
            for j in 0..24 {
                let want = if i == j { 1.0 } else { 0.0 };
                assert!(
                    (g[i * 24 + j] - want).abs() < 1e-6,
                    "G[{i},{j}] = {}",
                    g[i * 24 + j]
                );
            }
        }
    }

    #[test]
    fn gain_scales_every_singular_value() {
        // With orthonormal rows, A A^T = gain^2 I, i.e. all singular values
        // equal the gain.
        let gain = 2.0f64.sqrt();
        let t = orthogonal_init::<f64>(&[8, 32], gain, 11).unwrap();
        let g = gram(8, 32, t.value().data());
        for i in 0..8 {
            for j in 0..8 {
                let want = if i == j { gain * gain } else { 0.0 };
                assert!((g[i * 8 + j] - want).abs() < 1e-6);
            }
        }
    }

    #[test]
    fn tall_matrices_get_orthonormal_columns() {
        let t = orthogonal_init::<f64>(&[30, 6], 1.0, 3).unwrap();
        let a = t.value();
        // A^T A should be the 6x6 identity.
        for i in 0..6 {
            for j in 0..6 {
                let mut dot = 0.0;
                for r in 0..30 {
                    dot += a.data()[r * 6 + i] * a.data()[r * 6 + j];
                }
                let want = if i == j { 1.0 } else { 0.0 };
                assert!((dot - want).abs() < 1e-6);
            }
        }
    }

    #[test]
    fn same_seed_reproduces_exactly() {
        let a = orthogonal_init::<f64>(&[5, 9], 1.4, 42).unwrap();
        let b = orthogonal_init::<f64>(&[5, 9], 1.4, 42).unwrap();
        assert_eq!(a.value().data(), b.value().data());
    }

    #[test]
    fn zero_sized_shape_is_rejected() {
        assert!(orthogonal_init::<f64>(&[0, 4], 1.0, 1).is_err());
    }

    #[test]
    fn matrix_helper_is_deterministic_per_rng_state() {
        let mut r1 = ChaCha8Rng::seed_from_u64(5);
        let mut r2 = ChaCha8Rng::seed_from_u64(5);
        let a: Vec<f64> = orthogonal_matrix(4, 10, 1.0, &mut r1).unwrap();
        let b: Vec<f64> = orthogonal_matrix(4, 10, 1.0, &mut r2).unwrap();
        assert_eq!(a, b);
    }
}

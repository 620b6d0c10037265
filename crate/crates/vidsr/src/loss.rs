//! Training objectives: mean-squared error and the Huber-style flow
//! smoothness penalty.
//!
//! Both losses are per-element means rather than sums, so the weighting
//! coefficients keep their meaning across patch sizes.

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::tensor::{Tensor, TensorData};

/// Mean over all elements of the squared difference.
pub fn mse_loss<T: Scalar>(a: &Tensor<T>, b: &Tensor<T>) -> Result<Tensor<T>> {
    let (av, bv) = (a.value(), b.value());
    if av.shape() != bv.shape() {
        return Err(Error::shape(format!(
            "mse_loss: {:?} vs {:?}",
            av.shape(),
            bv.shape()
        )));
    }
    let n = av.numel();
    let inv_n = T::cast(1.0 / n as f64);
    let mut acc = T::zero();
    for (&x, &y) in av.data().iter().zip(bv.data()) {
        let d = x - y;
        acc += d * d;
    }
    let value = TensorData::scalar(acc * inv_n);
    Ok(Tensor::from_op(
        value,
        vec![a.clone(), b.clone()],
        Box::new(move |parents, out_grad| {
            let g = out_grad[0];
            let two = T::cast(2.0);
            let (av, bv) = (parents[0].value(), parents[1].value());
            let diff: Vec<T> = av
                .data()
                .iter()
                .zip(bv.data())
                .map(|(&x, &y)| two * (x - y) * inv_n * g)
                .collect();
            let ga = parents[0].requires_grad().then(|| diff.clone());
            let gb = parents[1]
                .requires_grad()
                .then(|| diff.iter().map(|&d| -d).collect());
            vec![ga, gb]
        }),
    ))
}

/// Smoothness penalty on a `[2, H, W]` flow field.
///
/// Forward differences (zero on the trailing row/column) feed the per-pixel
/// value `sqrt(eps + sum_c dx_c^2 + dy_c^2)`, averaged over pixels. With a
/// constant flow and `eps = 0.01` every pixel contributes `0.1`.
pub fn huber_smoothness<T: Scalar>(flow: &Tensor<T>, eps: f64) -> Result<Tensor<T>> {
    if eps <= 0.0 {
        return Err(Error::invalid("huber_smoothness requires eps > 0"));
    }
    let shape = flow.shape();
    if shape.len() != 3 || shape[0] != 2 {
        return Err(Error::shape(format!(
            "huber_smoothness expects [2,H,W], got {:?}",
            shape
        )));
    }
    let (h, w) = (shape[1], shape[2]);
    if h < 2 || w < 2 {
        return Err(Error::shape(format!(
            "huber_smoothness needs at least 2x2 flow, got {}x{}",
            h, w
        )));
    }
    let hw = h * w;
    let fv = flow.value();
    let f = fv.data();
    let eps_t = T::cast(eps);

    // Per-pixel root terms, retained for the backward pass.
    let mut roots = vec![T::zero(); hw];
    let mut acc = T::zero();
    for y in 0..h {
        for x in 0..w {
            let i = y * w + x;
            let mut s = eps_t;
            for c in 0..2 {
                let base = c * hw;
                if x + 1 < w {
                    let d = f[base + i + 1] - f[base + i];
                    s += d * d;
                }
                if y + 1 < h {
                    let d = f[base + i + w] - f[base + i];
                    s += d * d;
                }
            }
            let r = s.sqrt();
            roots[i] = r;
            acc += r;
        }
    }
    let inv_n = T::cast(1.0 / hw as f64);
    let value = TensorData::scalar(acc * inv_n);
    Ok(Tensor::from_op(
        value,
        vec![flow.clone()],
        Box::new(move |parents, out_grad| {
            if !parents[0].requires_grad() {
                return vec![None];
            }
            let g0 = out_grad[0] * inv_n;
            let fv = parents[0].value();
            let f = fv.data();
            let mut grad = vec![T::zero(); 2 * hw];
            for y in 0..h {
                for x in 0..w {
                    let i = y * w + x;
                    let scale = g0 / roots[i];
                    for c in 0..2 {
                        let base = c * hw;
                        if x + 1 < w {
                            let d = f[base + i + 1] - f[base + i];
                            grad[base + i + 1] += scale * d;
                            grad[base + i] -= scale * d;
                        }
                        if y + 1 < h {
                            let d = f[base + i + w] - f[base + i];
                            grad[base + i + w] += scale * d;
                            grad[base + i] -= scale * d;
                        }
                    }
                }
            }
            vec![Some(grad)]
        }),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn leaf(shape: &[usize], data: Vec<f64>) -> Tensor<f64> {
        Tensor::leaf(TensorData::new(shape, data).unwrap(), true)
    }

    #[test]
    fn identical_inputs_give_zero() {
        let a = leaf(&[2, 1, 1, 1], vec![0.3, 0.7]);
        let b = leaf(&[2, 1, 1, 1], vec![0.3, 0.7]);
        assert_eq!(mse_loss(&a, &b).unwrap().item(), 0.0);
    }

    #[test]
    fn mean_not_sum() {
        // a=(0,0), b=(2,0) -> (4 + 0) / 2 = 2.
        let a = leaf(&[2], vec![0.0, 0.0]);
        let b = leaf(&[2], vec![2.0, 0.0]);
        assert_eq!(mse_loss(&a, &b).unwrap().item(), 2.0);
    }

    #[test]
    fn mse_gradient_is_two_diff_over_n() {
        let a = leaf(&[4], vec![1.0, 2.0, 3.0, 4.0]);
        let b = leaf(&[4], vec![0.0, 0.0, 0.0, 0.0]);
        let l = mse_loss(&a, &b).unwrap();
        l.backward().unwrap();
        let ga = a.grad().unwrap();
        let gb = b.grad().unwrap();
        for i in 0..4 {
            let want = 2.0 * (i as f64 + 1.0) / 4.0;
            assert!((ga.data()[i] - want).abs() < 1e-12);
            assert!((gb.data()[i] + want).abs() < 1e-12);
        }
    }

    #[test]
    fn mse_shape_mismatch_rejected() {
        let a = leaf(&[2], vec![0.0; 2]);
        let b = leaf(&[3], vec![0.0; 3]);
        assert!(mse_loss(&a, &b).is_err());
    }

    #[test]
    fn constant_flow_costs_sqrt_eps() {
        let flow = leaf(&[2, 4, 4], vec![0.37; 32]);
        let l = huber_smoothness(&flow, 0.01).unwrap();
        assert!((l.item() - 0.1).abs() < 1e-12);
    }

    #[test]
    fn linear_ramp_matches_closed_form() {
        // delta_x(x, y) = x * h: forward difference h everywhere except the
        // last column; last row differences in y are zero.
        let (hh, ww) = (3usize, 5usize);
        let h = 0.2;
        let mut data = vec![0.0; 2 * hh * ww];
        for y in 0..hh {
            for x in 0..ww {
                data[y * ww + x] = x as f64 * h;
            }
        }
        let flow = leaf(&[2, hh, ww], data);
        let l = huber_smoothness(&flow, 0.01).unwrap();
        let interior = (0.01f64 + h * h).sqrt();
        let edge = 0.01f64.sqrt();
        let want = ((ww - 1) as f64 * interior + edge) * hh as f64 / (hh * ww) as f64;
        assert!((l.item() - want).abs() < 1e-12, "{} vs {}", l.item(), want);
    }

    #[test]
    fn eps_must_be_positive() {
        let flow = leaf(&[2, 2, 2], vec![0.0; 8]);
        assert!(huber_smoothness(&flow, 0.0).is_err());
        assert!(huber_smoothness(&flow, -1.0).is_err());
    }
}

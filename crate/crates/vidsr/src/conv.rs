//! Spatio-temporal convolution.
//!
//! Inputs are `[D, C_in, H, W]`, weights `[d, C_in, C_out, k, k]`. Spatial
//! padding replicates the edge so that a stride-`s` layer produces
//! `ceil(H/s) x ceil(W/s)`; the temporal axis is convolved without padding,
//! shrinking `D` to `D - d + 1`. A temporal kernel slides with one shared
//! weight set, which is the 3D-convolution / weight-sharing view; per-slice
//! weights are realised by the network layer applying separate kernels to
//! temporal slices.

use crate::error::{Error, Result};
use crate::init::orthogonal_matrix;
use crate::scalar::Scalar;
use crate::tensor::{Tensor, TensorData};

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Padding {
    /// Replicate-edge padding; output spatial size is `ceil(extent/stride)`.
    Same,
    /// No padding; output spatial size is `(extent - k)/stride + 1`.
    Valid,
}

/// One convolution kernel with its bias.
#[derive(Debug, Clone)]
pub struct ConvWeights<T: Scalar> {
    pub weights: Tensor<T>,
    pub bias: Tensor<T>,
}

impl<T: Scalar> ConvWeights<T> {
    pub fn new(weights: Tensor<T>, bias: Tensor<T>) -> Result<Self> {
        let ws = weights.shape();
        if ws.len() != 5 {
            return Err(Error::shape(format!(
                "conv weights must be [d, n_in, n_out, k, k], got {:?}",
                ws
            )));
        }
        let (d, n_out, ky, kx) = (ws[0], ws[2], ws[3], ws[4]);
        if d < 1 {
            return Err(Error::invalid("temporal kernel depth must be >= 1"));
        }
        if ky != kx || ky % 2 == 0 {
            return Err(Error::invalid(format!(
                "spatial kernels must be square and odd, got {}x{}",
                ky, kx
            )));
        }
        if bias.shape() != vec![n_out] {
            return Err(Error::shape(format!(
                "bias axis: expected [{}], got {:?}",
                n_out,
                bias.shape()
            )));
        }
        Ok(ConvWeights { weights, bias })
    }

    /// Orthogonally initialised weights (rows of the `n_out x (d n_in k^2)`
    /// flattening orthonormal, scaled by `gain`) with zero bias.
    pub fn orthogonal(
        d: usize,
        n_in: usize,
        n_out: usize,
        k: usize,
        gain: f64,
        rng: &mut impl rand::Rng,
    ) -> Result<Self> {
        let fan_in = d * n_in * k * k;
        let mat: Vec<T> = orthogonal_matrix(n_out, fan_in, gain, rng)?;
        // Permute the n_out x fan_in matrix into [d, n_in, n_out, k, k].
        let mut w = vec![T::zero(); n_out * fan_in];
        for o in 0..n_out {
            for dt in 0..d {
                for ic in 0..n_in {
                    for t in 0..k * k {
                        let col = (dt * n_in + ic) * k * k + t;
                        let dst = ((dt * n_in + ic) * n_out + o) * k * k + t;
                        w[dst] = mat[o * fan_in + col];
                    }
                }
            }
        }
        ConvWeights::new(
            Tensor::leaf(TensorData::new(&[d, n_in, n_out, k, k], w)?, true),
            Tensor::leaf(TensorData::zeros(&[n_out]), true),
        )
    }

    /// All-zero weights and bias (used for flow output heads).
    pub fn zeros(d: usize, n_in: usize, n_out: usize, k: usize) -> Result<Self> {
        ConvWeights::new(
            Tensor::leaf(TensorData::zeros(&[d, n_in, n_out, k, k]), true),
            Tensor::leaf(TensorData::zeros(&[n_out]), true),
        )
    }

    pub fn temporal_depth(&self) -> usize {
        self.weights.shape()[0]
    }

    pub fn input_features(&self) -> usize {
        self.weights.shape()[1]
    }

    pub fn output_features(&self) -> usize {
        self.weights.shape()[2]
    }

    pub fn kernel(&self) -> usize {
        self.weights.shape()[3]
    }

    pub fn parameters(&self) -> Vec<Tensor<T>> {
        vec![self.weights.clone(), self.bias.clone()]
    }
}

fn out_extent(extent: usize, k: usize, stride: usize, padding: Padding) -> Result<usize> {
    match padding {
        Padding::Same => Ok(extent.div_ceil(stride)),
        Padding::Valid => {
            if extent < k {
                return Err(Error::shape(format!(
                    "valid padding: extent {} smaller than kernel {}",
                    extent, k
                )));
            }
            Ok((extent - k) / stride + 1)
        }
    }
}

fn pad_before(extent: usize, out: usize, k: usize, stride: usize, padding: Padding) -> isize {
    match padding {
        Padding::Same => {
            let span = (out - 1) * stride + k;
            let total = span.saturating_sub(extent);
            (total / 2) as isize
        }
        Padding::Valid => 0,
    }
}

/// Clamped source indices for each (output position, kernel tap) pair.
fn tap_table(extent: usize, out: usize, k: usize, stride: usize, pb: isize) -> Vec<usize> {
    let mut taps = vec![0usize; out * k];
    for o in 0..out {
        for t in 0..k {
            let i = (o * stride) as isize - pb + t as isize;
            taps[o * k + t] = i.clamp(0, extent as isize - 1) as usize;
        }
    }
    taps
}

pub(crate) struct ConvGeometry {
    pub d_out: usize,
    pub h_out: usize,
    pub w_out: usize,
    ys: Vec<usize>,
    xs: Vec<usize>,
}

pub(crate) fn conv_geometry(
    in_shape: &[usize],
    w_shape: &[usize],
    stride: usize,
    padding: Padding,
) -> Result<ConvGeometry> {
    if in_shape.len() != 4 {
        return Err(Error::shape(format!(
            "conv input must be [D,C,H,W], got {:?}",
            in_shape
        )));
    }
    let (d_in, c_in, h, w) = (in_shape[0], in_shape[1], in_shape[2], in_shape[3]);
    let (kd, kc, k) = (w_shape[0], w_shape[1], w_shape[3]);
    if c_in != kc {
        return Err(Error::shape(format!(
            "channel axis: input has {} channels but the kernel expects {}",
            c_in, kc
        )));
    }
    if d_in < kd {
        return Err(Error::shape(format!(
            "temporal axis: input depth {} is smaller than the kernel depth {}",
            d_in, kd
        )));
    }
    if stride == 0 {
        return Err(Error::invalid("stride must be positive"));
    }
    let h_out = out_extent(h, k, stride, padding)?;
    let w_out = out_extent(w, k, stride, padding)?;
    let pb_y = pad_before(h, h_out, k, stride, padding);
    let pb_x = pad_before(w, w_out, k, stride, padding);
    Ok(ConvGeometry {
        d_out: d_in - kd + 1,
        h_out,
        w_out,
        ys: tap_table(h, h_out, k, stride, pb_y),
        xs: tap_table(w, w_out, k, stride, pb_x),
    })
}

/// Plain-data convolution used by both the graph op and steady-state
/// inference.
pub(crate) fn conv_data<T: Scalar>(
    input: &TensorData<T>,
    weights: &TensorData<T>,
    bias: &TensorData<T>,
    stride: usize,
    padding: Padding,
) -> Result<TensorData<T>> {
    let geo = conv_geometry(input.shape(), weights.shape(), stride, padding)?;
    let (c_in, h, w) = (input.shape()[1], input.shape()[2], input.shape()[3]);
    let (kd, c_out, k) = (weights.shape()[0], weights.shape()[2], weights.shape()[3]);
    let (hw, kk) = (h * w, k * k);
    let inp = input.data();
    let wts = weights.data();
    let b = bias.data();

    let mut out = vec![T::zero(); geo.d_out * c_out * geo.h_out * geo.w_out];
    let mut idx = 0usize;
    for od in 0..geo.d_out {
        for oc in 0..c_out {
            for oy in 0..geo.h_out {
                let ys = &geo.ys[oy * k..(oy + 1) * k];
                for ox in 0..geo.w_out {
                    let xs = &geo.xs[ox * k..(ox + 1) * k];
                    let mut acc = b[oc];
                    for dt in 0..kd {
                        for ic in 0..c_in {
                            let plane = &inp[((od + dt) * c_in + ic) * hw..][..hw];
                            let tile = &wts[((dt * c_in + ic) * c_out + oc) * kk..][..kk];
                            for (ky, &iy) in ys.iter().enumerate() {
                                let row = &plane[iy * w..][..w];
                                let trow = &tile[ky * k..][..k];
                                for (&wv, &ix) in trow.iter().zip(xs) {
                                    acc += wv * row[ix];
                                }
                            }
                        }
                    }
                    out[idx] = acc;
                    idx += 1;
                }
            }
        }
    }
    TensorData::new(&[geo.d_out, c_out, geo.h_out, geo.w_out], out)
}

/// Convolution with bias and the padding scheme described in the module
/// docs. Differentiable with respect to the input, weights and bias.
pub fn conv_forward<T: Scalar>(
    input: &Tensor<T>,
    w: &ConvWeights<T>,
    stride: usize,
    padding: Padding,
) -> Result<Tensor<T>> {
    let value = input.with_value(|iv| {
        w.weights
            .with_value(|wv| w.bias.with_value(|bv| conv_data(iv, wv, bv, stride, padding)))
    })?;
    Ok(Tensor::from_op(
        value,
        vec![input.clone(), w.weights.clone(), w.bias.clone()],
        Box::new(move |parents, out_grad| {
            conv_backward(&parents[0], &parents[1], &parents[2], out_grad, stride, padding)
        }),
    ))
}

fn conv_backward<T: Scalar>(
    input: &Tensor<T>,
    weights: &Tensor<T>,
    bias: &Tensor<T>,
    out_grad: &[T],
    stride: usize,
    padding: Padding,
) -> Vec<Option<Vec<T>>> {
    let in_shape = input.shape();
    let w_shape = weights.shape();
    let geo = conv_geometry(&in_shape, &w_shape, stride, padding).expect("forward validated");
    let (c_in, h, w) = (in_shape[1], in_shape[2], in_shape[3]);
    let (kd, c_out, k) = (w_shape[0], w_shape[2], w_shape[3]);
    let (hw, kk) = (h * w, k * k);

    let need_in = input.requires_grad();
    let need_w = weights.requires_grad();
    let need_b = bias.requires_grad();

    let mut g_in = need_in.then(|| vec![T::zero(); in_shape.iter().product()]);
    let mut g_w = need_w.then(|| vec![T::zero(); w_shape.iter().product()]);
    let mut g_b = need_b.then(|| vec![T::zero(); c_out]);

    input.with_value(|iv| {
        weights.with_value(|wv| {
            let inp = iv.data();
            let wts = wv.data();
            let mut idx = 0usize;
            for od in 0..geo.d_out {
                for oc in 0..c_out {
                    for oy in 0..geo.h_out {
                        let ys = &geo.ys[oy * k..(oy + 1) * k];
                        for ox in 0..geo.w_out {
                            let xs = &geo.xs[ox * k..(ox + 1) * k];
                            let g = out_grad[idx];
                            idx += 1;
                            if g == T::zero() {
                                continue;
                            }
                            if let Some(gb) = g_b.as_mut() {
                                gb[oc] += g;
                            }
                            for dt in 0..kd {
                                for ic in 0..c_in {
                                    let plane_base = ((od + dt) * c_in + ic) * hw;
                                    let tile_base = ((dt * c_in + ic) * c_out + oc) * kk;
                                    for (ky, &iy) in ys.iter().enumerate() {
                                        for (kx, &ix) in xs.iter().enumerate() {
                                            let pi = plane_base + iy * w + ix;
                                            let ti = tile_base + ky * k + kx;
                                            if let Some(gw) = g_w.as_mut() {
                                                gw[ti] += inp[pi] * g;
                                            }
                                            if let Some(gi) = g_in.as_mut() {
                                                gi[pi] += wts[ti] * g;
                                            }
                                        }
                                    }
                                }
                            }
                        }
                    }
                }
            }
        })
    });
    vec![g_in, g_w, g_b]
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::Tensor;

    fn leaf(shape: &[usize], data: Vec<f64>) -> Tensor<f64> {
        Tensor::leaf(TensorData::new(shape, data).unwrap(), false)
    }

    #[test]
    fn ones_kernel_sums_the_window() {
        // 1x1x3x3 ones, single 1x1x1x3x3 ones kernel, zero bias: the center
        // output is the sum of nine ones.
        let input = leaf(&[1, 1, 3, 3], vec![1.0; 9]);
        let w = ConvWeights::new(
            leaf(&[1, 1, 1, 3, 3], vec![1.0; 9]),
            leaf(&[1], vec![0.0]),
        )
        .unwrap();
        let out = conv_forward(&input, &w, 1, Padding::Same).unwrap();
        assert_eq!(out.shape(), vec![1, 1, 3, 3]);
        assert_eq!(out.value().data()[4], 9.0);
    }

    #[test]
    fn temporal_depth_shrinks_without_padding() {
        let input = leaf(&[5, 1, 2, 2], vec![0.0; 20]);
        let w = ConvWeights::new(
            leaf(&[2, 1, 1, 1, 1], vec![1.0, 1.0]),
            leaf(&[1], vec![0.0]),
        )
        .unwrap();
        let out = conv_forward(&input, &w, 1, Padding::Same).unwrap();
        assert_eq!(out.shape()[0], 4);
    }

    #[test]
    fn depth_chain_reduces_five_to_one() {
        // Four successive depth-2 layers: 5 -> 4 -> 3 -> 2 -> 1.
        let mut x = leaf(&[5, 1, 2, 2], vec![0.5; 20]);
        for _ in 0..4 {
            let w = ConvWeights::new(
                leaf(&[2, 1, 1, 3, 3], vec![0.1; 18]),
                leaf(&[1], vec![0.0]),
            )
            .unwrap();
            x = conv_forward(&x, &w, 1, Padding::Same).unwrap();
        }
        assert_eq!(x.shape()[0], 1);
    }

    #[test]
    fn shape_errors_name_the_axis() {
        let input = leaf(&[1, 2, 4, 4], vec![0.0; 32]);
        let w = ConvWeights::new(
            leaf(&[1, 3, 1, 3, 3], vec![0.0; 27]),
            leaf(&[1], vec![0.0]),
        )
        .unwrap();
        let err = conv_forward(&input, &w, 1, Padding::Same)
            .unwrap_err()
            .to_string();
        assert!(err.contains("channel axis"), "{err}");

        let shallow = leaf(&[1, 1, 4, 4], vec![0.0; 16]);
        let wt = ConvWeights::new(
            leaf(&[3, 1, 1, 1, 1], vec![0.0; 3]),
            leaf(&[1], vec![0.0]),
        )
        .unwrap();
        let err = conv_forward(&shallow, &wt, 1, Padding::Same)
            .unwrap_err()
            .to_string();
        assert!(err.contains("temporal axis"), "{err}");
    }

    #[test]
    fn stride_two_halves_even_extents() {
        let input = leaf(&[1, 1, 8, 6], vec![0.0; 48]);
        let w = ConvWeights::new(
            leaf(&[1, 1, 1, 5, 5], vec![0.0; 25]),
            leaf(&[1], vec![0.0]),
        )
        .unwrap();
        let out = conv_forward(&input, &w, 2, Padding::Same).unwrap();
        assert_eq!(out.shape(), vec![1, 1, 4, 3]);
    }

    #[test]
    fn depth_one_matches_plain_2d_convolution() {
        // Independent dense 2D reference on a 4x4 input with a 3x3 kernel.
        let mut rng_state = 123u64;
        let mut next = || {
            rng_state = rng_state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((rng_state >> 33) as f64 / (1u64 << 31) as f64) - 1.0
        };
        let img: Vec<f64> = (0..16).map(|_| next()).collect();
        let ker: Vec<f64> = (0..9).map(|_| next()).collect();
        let bias = 0.25;

        let input = leaf(&[1, 1, 4, 4], img.clone());
        let w = ConvWeights::new(
            leaf(&[1, 1, 1, 3, 3], ker.clone()),
            leaf(&[1], vec![bias]),
        )
        .unwrap();
        let out = conv_forward(&input, &w, 1, Padding::Same).unwrap();

        let clamp = |i: isize| i.clamp(0, 3) as usize;
        for oy in 0..4usize {
            for ox in 0..4usize {
                let mut acc = bias;
                for ky in 0..3usize {
                    for kx in 0..3usize {
                        let iy = clamp(oy as isize + ky as isize - 1);
                        let ix = clamp(ox as isize + kx as isize - 1);
                        acc += ker[ky * 3 + kx] * img[iy * 4 + ix];
                    }
                }
                let got = out.value().data()[oy * 4 + ox];
                assert!((got - acc).abs() < 1e-12, "({oy},{ox}): {got} vs {acc}");
            }
        }
    }
}

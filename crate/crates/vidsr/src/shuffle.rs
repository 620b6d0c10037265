//! Sub-pixel rearrangement between channel and spatial axes.
//!
//! `pixel_shuffle` turns `[1, r^2 C, H, W]` into `[1, C, rH, rW]`. The
//! channel ordering is pinned: channel `C*(r*dy + dx) + c` feeds output pixel
//! `(r*y + dy, r*x + dx)` of channel `c`, i.e. sub-pixel position major with
//! `dx` fastest. The map is a bijection and `pixel_unshuffle` is its exact
//! inverse.

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::tensor::{Tensor, TensorData};

fn check_shuffle_shape(shape: &[usize], r: usize) -> Result<(usize, usize, usize)> {
    if shape.len() != 4 || shape[0] != 1 {
        return Err(Error::shape(format!(
            "pixel_shuffle expects [1, C, H, W], got {:?}",
            shape
        )));
    }
    if r == 0 {
        return Err(Error::invalid("upscale factor must be positive"));
    }
    if shape[1] % (r * r) != 0 {
        return Err(Error::shape(format!(
            "channel axis: {} channels are not divisible by r^2 = {}",
            shape[1],
            r * r
        )));
    }
    Ok((shape[1] / (r * r), shape[2], shape[3]))
}

pub(crate) fn pixel_shuffle_data<T: Scalar>(x: &TensorData<T>, r: usize) -> Result<TensorData<T>> {
    let (c_out, h, w) = check_shuffle_shape(x.shape(), r)?;
    let src = x.data();
    let mut out = vec![T::zero(); c_out * r * h * r * w];
    let (oh, ow) = (r * h, r * w);
    for c in 0..c_out {
        for dy in 0..r {
            for dx in 0..r {
                let ch = c_out * (r * dy + dx) + c;
                let plane = &src[ch * h * w..][..h * w];
                for y in 0..h {
                    let orow = (c * oh + (r * y + dy)) * ow;
                    for x in 0..w {
                        out[orow + r * x + dx] = plane[y * w + x];
                    }
                }
            }
        }
    }
    TensorData::new(&[1, c_out, oh, ow], out)
}

pub(crate) fn pixel_unshuffle_data<T: Scalar>(
    x: &TensorData<T>,
    r: usize,
) -> Result<TensorData<T>> {
    let shape = x.shape();
    if shape.len() != 4 || shape[0] != 1 {
        return Err(Error::shape(format!(
            "pixel_unshuffle expects [1, C, H, W], got {:?}",
            shape
        )));
    }
    let (c, oh, ow) = (shape[1], shape[2], shape[3]);
    if oh % r != 0 || ow % r != 0 {
        return Err(Error::shape(format!(
            "spatial axes {}x{} are not divisible by r = {}",
            oh, ow, r
        )));
    }
    let (h, w) = (oh / r, ow / r);
    let src = x.data();
    let mut out = vec![T::zero(); c * r * r * h * w];
    for cc in 0..c {
        for dy in 0..r {
            for dx in 0..r {
                let ch = c * (r * dy + dx) + cc;
                for y in 0..h {
                    for xx in 0..w {
                        out[(ch * h + y) * w + xx] =
                            src[(cc * oh + (r * y + dy)) * ow + r * xx + dx];
                    }
                }
            }
        }
    }
    TensorData::new(&[1, c * r * r, h, w], out)
}

/// Rearranges `r^2` channel groups into an `r`-times larger image.
pub fn pixel_shuffle<T: Scalar>(x: &Tensor<T>, r: usize) -> Result<Tensor<T>> {
    let value = x.with_value(|v| pixel_shuffle_data(v, r))?;
    Ok(Tensor::from_op(
        value,
        vec![x.clone()],
        Box::new(move |parents, out_grad| {
            if parents[0].requires_grad() {
                let shape = parents[0].shape();
                let (c_out, h, w) = check_shuffle_shape(&shape, r).expect("forward validated");
                let out_shape = [1, c_out, r * h, r * w];
                let g = TensorData::new(&out_shape, out_grad.to_vec()).expect("grad shape");
                let back = pixel_unshuffle_data(&g, r).expect("inverse of a bijection");
                vec![Some(back.into_data())]
            } else {
                vec![None]
            }
        }),
    ))
}

/// Exact inverse of [`pixel_shuffle`], on plain data.
pub fn pixel_unshuffle<T: Scalar>(x: &TensorData<T>, r: usize) -> Result<TensorData<T>> {
    pixel_unshuffle_data(x, r)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::Tensor;

    #[test]
    fn r1_is_identity() {
        let x = TensorData::new(&[1, 2, 2, 2], (0..8).map(|v| v as f64).collect()).unwrap();
        let t = Tensor::leaf(x.clone(), false);
        let y = pixel_shuffle(&t, 1).unwrap();
        assert_eq!(y.value(), x);
    }

    #[test]
    fn declared_ordering_for_r2() {
        // Channels (a,b,c,d) with C=1 land as [[a,b],[c,d]].
        let x = TensorData::new(&[1, 4, 1, 1], vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        let t = Tensor::leaf(x, false);
        let y = pixel_shuffle(&t, 2).unwrap();
        assert_eq!(y.shape(), vec![1, 1, 2, 2]);
        assert_eq!(y.value().data(), &[1.0, 2.0, 3.0, 4.0]);
    }

    #[test]
    fn indivisible_channels_rejected() {
        let x = Tensor::leaf(TensorData::<f64>::zeros(&[1, 3, 2, 2]), false);
        assert!(pixel_shuffle(&x, 2).is_err());
    }

    #[test]
    fn shuffle_then_unshuffle_is_exact() {
        let x = TensorData::new(&[1, 8, 3, 2], (0..48).map(|v| v as f64 * 0.25).collect())
            .unwrap();
        let t = Tensor::leaf(x.clone(), false);
        let y = pixel_shuffle(&t, 2).unwrap();
        let back = pixel_unshuffle(&y.value(), 2).unwrap();
        assert_eq!(back, x);
    }

    #[test]
    fn backward_is_the_inverse_permutation() {
        let x = Tensor::leaf(
            TensorData::new(&[1, 4, 2, 2], (0..16).map(|v| v as f64).collect()).unwrap(),
            true,
        );
        let y = pixel_shuffle(&x, 2).unwrap();
        let target = Tensor::constant(TensorData::zeros(&[1, 1, 4, 4]));
        let loss = crate::loss::mse_loss(&y, &target).unwrap();
        loss.backward().unwrap();
        let g = x.grad().unwrap();
        // grad of mse wrt y is 2*y/16; unshuffled back it must match 2*x/16.
        for (gi, xi) in g.data().iter().zip(x.value().data()) {
            assert!((gi - 2.0 * xi / 16.0).abs() < 1e-12);
        }
    }
}

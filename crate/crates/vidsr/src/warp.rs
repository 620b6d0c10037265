//! Differentiable bilinear warping.
//!
//! A flow field holds normalised displacements: a value of +/-1 moves a pixel
//! from the centre of the image to its border, so the pixel displacement is
//! `delta * (extent - 1) / 2` per axis. Samples outside the image clamp to
//! the edge. The warp is differentiable with respect to both the image and
//! the flow; with an identically zero flow it is the exact identity map.

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::tensor::{Tensor, TensorData};

fn check_warp_shapes(image: &[usize], flow: &[usize]) -> Result<(usize, usize)> {
    if image.len() != 4 || image[0] != 1 || image[1] != 1 {
        return Err(Error::shape(format!(
            "warp expects a [1,1,H,W] image, got {:?}",
            image
        )));
    }
    if flow.len() != 3 || flow[0] != 2 {
        return Err(Error::shape(format!(
            "warp expects a [2,H,W] flow, got {:?}",
            flow
        )));
    }
    if image[2] != flow[1] || image[3] != flow[2] {
        return Err(Error::shape(format!(
            "spatial axes: image {}x{} vs flow {}x{}",
            image[2], image[3], flow[1], flow[2]
        )));
    }
    Ok((image[2], image[3]))
}

struct Sample {
    y0: usize,
    x0: usize,
    y1: usize,
    x1: usize,
    fy: f64,
    fx: f64,
    // Zero when the continuous coordinate was clamped to the border, in
    // which case the flow receives no gradient through this pixel.
    dy_active: f64,
    dx_active: f64,
}

fn resolve_sample(h: usize, w: usize, y: usize, x: usize, dx: f64, dy: f64) -> Sample {
    let half_w = (w as f64 - 1.0) / 2.0;
    let half_h = (h as f64 - 1.0) / 2.0;
    let sx = x as f64 + dx * half_w;
    let sy = y as f64 + dy * half_h;
    let (cx, x_active) = if sx <= 0.0 {
        (0.0, 0.0)
    } else if sx >= (w - 1) as f64 {
        ((w - 1) as f64, 0.0)
    } else {
        (sx, half_w)
    };
    let (cy, y_active) = if sy <= 0.0 {
        (0.0, 0.0)
    } else if sy >= (h - 1) as f64 {
        ((h - 1) as f64, 0.0)
    } else {
        (sy, half_h)
    };
    let x0 = cx.floor() as usize;
    let y0 = cy.floor() as usize;
    let x1 = (x0 + 1).min(w - 1);
    let y1 = (y0 + 1).min(h - 1);
    Sample {
        y0,
        x0,
        y1,
        x1,
        fy: cy - y0 as f64,
        fx: cx - x0 as f64,
        dy_active: y_active,
        dx_active: x_active,
    }
}

pub(crate) fn bilinear_warp_data<T: Scalar>(
    image: &TensorData<T>,
    flow: &TensorData<T>,
) -> Result<TensorData<T>> {
    let (h, w) = check_warp_shapes(image.shape(), flow.shape())?;
    let img = image.data();
    let f = flow.data();
    let hw = h * w;
    let mut out = vec![T::zero(); hw];
    for y in 0..h {
        for x in 0..w {
            let i = y * w + x;
            let s = resolve_sample(h, w, y, x, f[i].as_f64(), f[hw + i].as_f64());
            let (fy, fx) = (T::cast(s.fy), T::cast(s.fx));
            let one = T::one();
            let top = (one - fx) * img[s.y0 * w + s.x0] + fx * img[s.y0 * w + s.x1];
            let bot = (one - fx) * img[s.y1 * w + s.x0] + fx * img[s.y1 * w + s.x1];
            out[i] = (one - fy) * top + fy * bot;
        }
    }
    TensorData::new(&[1, 1, h, w], out)
}

/// Warps `image` by the normalised flow field.
pub fn bilinear_warp<T: Scalar>(image: &Tensor<T>, flow: &Tensor<T>) -> Result<Tensor<T>> {
    let value = image.with_value(|iv| flow.with_value(|fv| bilinear_warp_data(iv, fv)))?;
    Ok(Tensor::from_op(
        value,
        vec![image.clone(), flow.clone()],
        Box::new(|parents, out_grad| warp_backward(&parents[0], &parents[1], out_grad)),
    ))
}

fn warp_backward<T: Scalar>(
    image: &Tensor<T>,
    flow: &Tensor<T>,
    out_grad: &[T],
) -> Vec<Option<Vec<T>>> {
    let ishape = image.shape();
    let (h, w) = (ishape[2], ishape[3]);
    let hw = h * w;
    let need_img = image.requires_grad();
    let need_flow = flow.requires_grad();
    let mut g_img = need_img.then(|| vec![T::zero(); hw]);
    let mut g_flow = need_flow.then(|| vec![T::zero(); 2 * hw]);

    image.with_value(|iv| {
        flow.with_value(|fv| {
            let img = iv.data();
            let f = fv.data();
            for y in 0..h {
                for x in 0..w {
                    let i = y * w + x;
                    let g = out_grad[i];
                    if g == T::zero() {
                        continue;
                    }
                    let s = resolve_sample(h, w, y, x, f[i].as_f64(), f[hw + i].as_f64());
                    let (fy, fx) = (T::cast(s.fy), T::cast(s.fx));
                    let one = T::one();
                    if let Some(gi) = g_img.as_mut() {
                        gi[s.y0 * w + s.x0] += (one - fy) * (one - fx) * g;
                        gi[s.y0 * w + s.x1] += (one - fy) * fx * g;
                        gi[s.y1 * w + s.x0] += fy * (one - fx) * g;
                        gi[s.y1 * w + s.x1] += fy * fx * g;
                    }
                    if let Some(gf) = g_flow.as_mut() {
                        let v00 = img[s.y0 * w + s.x0];
                        let v01 = img[s.y0 * w + s.x1];
                        let v10 = img[s.y1 * w + s.x0];
                        let v11 = img[s.y1 * w + s.x1];
                        // d out / d sx and d out / d sy of the bilinear form.
                        let d_sx = (one - fy) * (v01 - v00) + fy * (v11 - v10);
                        let d_sy = (one - fx) * (v10 - v00) + fx * (v11 - v01);
                        gf[i] += g * d_sx * T::cast(s.dx_active);
                        gf[hw + i] += g * d_sy * T::cast(s.dy_active);
                    }
                }
            }
        })
    });
    vec![g_img, g_flow]
}

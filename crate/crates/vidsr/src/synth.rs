//! Synthetic clips for tests, examples and desk-scale training: band-limited
//! textures moved by known global translations.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::data::{gaussian_blur, VideoClip};
use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::tensor::TensorData;

/// Smooth random texture in roughly `[0.1, 0.9]`.
///
/// Uniform noise is low-passed with the pipeline's Gaussian kernel (the
/// `blur` argument plays the role of the scale factor: sigma is `blur/2`)
/// and re-stretched so the contrast survives the averaging.
pub fn smooth_texture<T: Scalar>(h: usize, w: usize, blur: usize, seed: u64) -> TensorData<T> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise = TensorData::from_fn(&[1, h, w], |_| T::cast(rng.random::<f64>()));
    let blurred = if blur > 1 {
        gaussian_blur(&noise, blur)
    } else {
        noise
    };
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for &v in blurred.data() {
        lo = lo.min(v.as_f64());
        hi = hi.max(v.as_f64());
    }
    let span = (hi - lo).max(1e-9);
    blurred.map(|v| T::cast(0.1 + 0.8 * (v.as_f64() - lo) / span))
}

/// Texture mixing several blur scales: coarse structure gives photometric
/// objectives a wide basin, fine detail gives them sharp gradients.
pub fn multi_scale_texture<T: Scalar>(h: usize, w: usize, seed: u64) -> TensorData<T> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut acc = vec![0.0f64; h * w];
    for (blur, weight) in [(8usize, 0.5f64), (4, 0.3), (2, 0.2)] {
        let noise = TensorData::<f64>::from_fn(&[1, h, w], |_| rng.random::<f64>());
        let layer = gaussian_blur(&noise, blur);
        // Each octave is stretched to unit span before weighting so the
        // fine scales survive the averaging.
        let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
        for &v in layer.data() {
            lo = lo.min(v);
            hi = hi.max(v);
        }
        let span = (hi - lo).max(1e-9);
        for (a, &v) in acc.iter_mut().zip(layer.data()) {
            *a += weight * (v - lo) / span;
        }
    }
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for &v in &acc {
        lo = lo.min(v);
        hi = hi.max(v);
    }
    let span = (hi - lo).max(1e-9);
    TensorData::from_fn(&[1, h, w], |i| T::cast(0.1 + 0.8 * (acc[i] - lo) / span))
}

/// Bilinear crop of a `[1, H, W]` master image at a fractional origin.
fn sample_window<T: Scalar>(
    master: &TensorData<T>,
    oy: f64,
    ox: f64,
    h: usize,
    w: usize,
) -> Result<TensorData<T>> {
    let (mh, mw) = (master.shape()[1], master.shape()[2]);
    if oy < 0.0 || ox < 0.0 || oy + h as f64 >= mh as f64 || ox + w as f64 >= mw as f64 {
        return Err(Error::invalid(format!(
            "window {h}x{w} at ({oy:.2}, {ox:.2}) leaves the {mh}x{mw} master"
        )));
    }
    let src = master.data();
    let out = TensorData::from_fn(&[1, h, w], |i| {
        let (y, x) = (i / w, i % w);
        let sy = oy + y as f64;
        let sx = ox + x as f64;
        let (y0, x0) = (sy.floor() as usize, sx.floor() as usize);
        let (fy, fx) = (sy - y0 as f64, sx - x0 as f64);
        let v00 = src[y0 * mw + x0].as_f64();
        let v01 = src[y0 * mw + x0 + 1].as_f64();
        let v10 = src[(y0 + 1) * mw + x0].as_f64();
        let v11 = src[(y0 + 1) * mw + x0 + 1].as_f64();
        let top = (1.0 - fx) * v00 + fx * v01;
        let bot = (1.0 - fx) * v10 + fx * v11;
        T::cast((1.0 - fy) * top + fy * bot)
    });
    Ok(out)
}

/// Clip whose content translates globally by `(dx, dy)` pixels per frame.
///
/// Frame `i` shows the master window at origin `base + i * (dy, dx)`, sampled
/// bilinearly, so sub-pixel velocities are exact. The flow warping frame
/// `t+1` back onto frame `t` is the constant `(-dx, -dy)`.
pub fn translating_clip<T: Scalar>(
    master: &TensorData<T>,
    frames: usize,
    h: usize,
    w: usize,
    dx: f64,
    dy: f64,
) -> Result<VideoClip<T>> {
    let (mh, mw) = (master.shape()[1], master.shape()[2]);
    let travel_y = dy * (frames.max(1) - 1) as f64;
    let travel_x = dx * (frames.max(1) - 1) as f64;
    let base_y = ((mh - h) as f64 - travel_y.abs()) / 2.0 + travel_y.min(0.0).abs();
    let base_x = ((mw - w) as f64 - travel_x.abs()) / 2.0 + travel_x.min(0.0).abs();
    let mut out = Vec::with_capacity(frames);
    for i in 0..frames {
        out.push(sample_window(
            master,
            base_y + dy * i as f64,
            base_x + dx * i as f64,
            h,
            w,
        )?);
    }
    VideoClip::new(out)
}

/// Clip repeating one texture without motion.
pub fn static_clip<T: Scalar>(texture: &TensorData<T>, frames: usize) -> Result<VideoClip<T>> {
    VideoClip::new(vec![texture.clone(); frames])
}

/// Convenience bundle: seeded textured clips translating by the given
/// per-frame velocities, all at the same geometry. `blur = 0` selects the
/// multi-scale texture.
pub fn translation_dataset<T: Scalar>(
    velocities: &[(f64, f64)],
    frames: usize,
    h: usize,
    w: usize,
    blur: usize,
    seed: u64,
) -> Result<Vec<VideoClip<T>>> {
    let margin = 16usize;
    let max_travel = velocities
        .iter()
        .map(|(dx, dy)| dx.abs().max(dy.abs()) * (frames - 1) as f64)
        .fold(0.0f64, f64::max)
        .ceil() as usize;
    let (mh, mw) = (h + 2 * (margin + max_travel), w + 2 * (margin + max_travel));
    velocities
        .iter()
        .enumerate()
        .map(|(i, &(dx, dy))| {
            let tex_seed = seed.wrapping_add(i as u64 * 7919);
            let master = if blur == 0 {
                multi_scale_texture::<T>(mh, mw, tex_seed)
            } else {
                smooth_texture::<T>(mh, mw, blur, tex_seed)
            };
            translating_clip(&master, frames, h, w, dx, dy)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn texture_stays_in_range() {
        let t = smooth_texture::<f64>(32, 32, 3, 5);
        for &v in t.data() {
            assert!((0.05..=0.95).contains(&v));
        }
    }

    #[test]
    fn integer_translation_shifts_indices() {
        let master = smooth_texture::<f64>(64, 64, 2, 9);
        let clip = translating_clip(&master, 3, 24, 24, 2.0, 0.0).unwrap();
        let a = clip.frames()[0].data();
        let b = clip.frames()[1].data();
        // Frame 1 equals frame 0 shifted left by two columns.
        for y in 0..24 {
            for x in 0..22 {
                let lhs = b[y * 24 + x];
                let rhs = a[y * 24 + x + 2];
                assert!((lhs - rhs).abs() < 1e-12, "({y},{x})");
            }
        }
    }

    #[test]
    fn static_clip_repeats_frames() {
        let t = smooth_texture::<f64>(16, 16, 2, 1);
        let clip = static_clip(&t, 4).unwrap();
        for f in clip.frames() {
            assert_eq!(f.data(), t.data());
        }
    }
}

//! Quality metrics: pooled video PSNR, SSIM, the bicubic baseline and
//! temporal profiles.

use crate::data::VideoClip;
use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::tensor::TensorData;

/// Cropping applied before pooling metrics: a spatial border in pixels and a
/// number of frames dropped from each end of the clip.
#[derive(Debug, Clone, Copy)]
pub struct CropPolicy {
    pub border: usize,
    pub frames: usize,
}

impl Default for CropPolicy {
    fn default() -> Self {
        CropPolicy { border: 8, frames: 1 }
    }
}

impl CropPolicy {
    pub const NONE: CropPolicy = CropPolicy { border: 0, frames: 0 };
}

/// Peak signal-to-noise ratio with the squared error pooled over all pixels
/// of all kept frames — not the mean of per-frame PSNRs. Identical clips
/// yield the infinity sentinel.
pub fn psnr_video<T: Scalar>(
    reference: &VideoClip<T>,
    test: &VideoClip<T>,
    crop: CropPolicy,
    peak: f64,
) -> Result<f64> {
    if reference.len() != test.len() {
        return Err(Error::shape(format!(
            "frame counts differ: {} vs {}",
            reference.len(),
            test.len()
        )));
    }
    if reference.height() != test.height() || reference.width() != test.width() {
        return Err(Error::shape(format!(
            "geometry differs: {}x{} vs {}x{}",
            reference.height(),
            reference.width(),
            test.height(),
            test.width()
        )));
    }
    let (h, w) = (reference.height(), reference.width());
    if 2 * crop.border >= h.min(w) {
        return Err(Error::invalid(format!(
            "border crop {} leaves no pixels of a {}x{} frame",
            crop.border, h, w
        )));
    }
    let t0 = crop.frames;
    let t1 = reference.len().checked_sub(crop.frames).unwrap_or(0);
    if t0 >= t1 {
        return Err(Error::invalid(format!(
            "frame crop {} leaves no frames of a {}-frame clip",
            crop.frames,
            reference.len()
        )));
    }
    let mut sq = 0.0f64;
    let mut n = 0usize;
    for t in t0..t1 {
        let a = reference.frames()[t].data();
        let b = test.frames()[t].data();
        for y in crop.border..h - crop.border {
            for x in crop.border..w - crop.border {
                let d = a[y * w + x].as_f64() - b[y * w + x].as_f64();
                sq += d * d;
                n += 1;
            }
        }
    }
    let mse = sq / n as f64;
    if mse == 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(10.0 * (peak * peak / mse).log10())
}

/// Pooled PSNR of two single frames (a one-frame video).
pub fn psnr_frame<T: Scalar>(a: &TensorData<T>, b: &TensorData<T>, peak: f64) -> Result<f64> {
    let clip_a = VideoClip::new(vec![a.clone()])?;
    let clip_b = VideoClip::new(vec![b.clone()])?;
    psnr_video(&clip_a, &clip_b, CropPolicy::NONE, peak)
}

const SSIM_WINDOW: usize = 11;
const SSIM_SIGMA: f64 = 1.5;
const SSIM_K1: f64 = 0.01;
const SSIM_K2: f64 = 0.03;

fn ssim_window() -> [f64; SSIM_WINDOW] {
    let mut w = [0.0; SSIM_WINDOW];
    let c = (SSIM_WINDOW / 2) as f64;
    let mut sum = 0.0;
    for (i, v) in w.iter_mut().enumerate() {
        *v = (-(i as f64 - c).powi(2) / (2.0 * SSIM_SIGMA * SSIM_SIGMA)).exp();
        sum += *v;
    }
    for v in w.iter_mut() {
        *v /= sum;
    }
    w
}

/// Structural similarity with an 11x11 Gaussian window (sigma 1.5), pooled
/// over all fully valid window positions. Inputs are `[1, H, W]` in `[0, 1]`.
pub fn ssim<T: Scalar>(reference: &TensorData<T>, test: &TensorData<T>) -> Result<f64> {
    let (sa, sb) = (reference.shape(), test.shape());
    if sa != sb {
        return Err(Error::shape(format!("ssim: {:?} vs {:?}", sa, sb)));
    }
    if sa.len() != 3 || sa[0] != 1 {
        return Err(Error::shape(format!(
            "ssim expects [1, H, W] frames, got {:?}",
            sa
        )));
    }
    let (h, w) = (sa[1], sa[2]);
    if h < SSIM_WINDOW || w < SSIM_WINDOW {
        return Err(Error::invalid(format!(
            "ssim needs at least {0}x{0} images, got {1}x{2}",
            SSIM_WINDOW, h, w
        )));
    }
    let win = ssim_window();
    let c1 = (SSIM_K1 * 1.0f64).powi(2);
    let c2 = (SSIM_K2 * 1.0f64).powi(2);
    let a: Vec<f64> = reference.data().iter().map(|v| v.as_f64()).collect();
    let b: Vec<f64> = test.data().iter().map(|v| v.as_f64()).collect();

    // Separable weighted moments over valid positions.
    let (vw, vh) = (w - SSIM_WINDOW + 1, h - SSIM_WINDOW + 1);
    let horiz = |src: &[f64]| -> Vec<f64> {
        let mut out = vec![0.0; h * vw];
        for y in 0..h {
            for x in 0..vw {
                let mut acc = 0.0;
                for (j, g) in win.iter().enumerate() {
                    acc += g * src[y * w + x + j];
                }
                out[y * vw + x] = acc;
            }
        }
        out
    };
    let vert = |src: &[f64]| -> Vec<f64> {
        let mut out = vec![0.0; vh * vw];
        for y in 0..vh {
            for x in 0..vw {
                let mut acc = 0.0;
                for (j, g) in win.iter().enumerate() {
                    acc += g * src[(y + j) * vw + x];
                }
                out[y * vw + x] = acc;
            }
        }
        out
    };
    let blur = |src: &[f64]| vert(&horiz(src));

    let aa: Vec<f64> = a.iter().map(|v| v * v).collect();
    let bb: Vec<f64> = b.iter().map(|v| v * v).collect();
    let ab: Vec<f64> = a.iter().zip(&b).map(|(x, y)| x * y).collect();
    let mu_a = blur(&a);
    let mu_b = blur(&b);
    let m_aa = blur(&aa);
    let m_bb = blur(&bb);
    let m_ab = blur(&ab);

    let mut total = 0.0;
    for i in 0..vh * vw {
        let (ma, mb) = (mu_a[i], mu_b[i]);
        let va = m_aa[i] - ma * ma;
        let vb = m_bb[i] - mb * mb;
        let cov = m_ab[i] - ma * mb;
        let s = ((2.0 * ma * mb + c1) * (2.0 * cov + c2))
            / ((ma * ma + mb * mb + c1) * (va + vb + c2));
        total += s;
    }
    Ok(total / (vh * vw) as f64)
}

/// Catmull-Rom bicubic kernel (a = -0.5).
fn cubic(t: f64) -> f64 {
    let a = -0.5;
    let t = t.abs();
    if t <= 1.0 {
        (a + 2.0) * t.powi(3) - (a + 3.0) * t.powi(2) + 1.0
    } else if t < 2.0 {
        a * t.powi(3) - 5.0 * a * t.powi(2) + 8.0 * a * t - 4.0 * a
    } else {
        0.0
    }
}

/// Bicubic upscaling with centre-aligned sampling and replicate borders.
pub fn bicubic_upscale<T: Scalar>(frame: &TensorData<T>, r: usize) -> Result<TensorData<T>> {
    let s = frame.shape();
    if s.len() != 3 || s[0] != 1 {
        return Err(Error::shape(format!(
            "bicubic_upscale expects [1, H, W], got {:?}",
            s
        )));
    }
    if r == 0 {
        return Err(Error::invalid("scale factor must be positive"));
    }
    let (h, w) = (s[1], s[2]);
    if r == 1 {
        return Ok(frame.clone());
    }
    let (oh, ow) = (h * r, w * r);
    let src = frame.data();
    let sample = |y: isize, x: isize| -> f64 {
        let yy = y.clamp(0, h as isize - 1) as usize;
        let xx = x.clamp(0, w as isize - 1) as usize;
        src[yy * w + xx].as_f64()
    };
    let mut out = vec![T::zero(); oh * ow];
    for oy in 0..oh {
        let sy = (oy as f64 + 0.5) / r as f64 - 0.5;
        let y0 = sy.floor() as isize;
        let fy = sy - y0 as f64;
        let wy: Vec<f64> = (-1..=2).map(|j| cubic(j as f64 - fy)).collect();
        for ox in 0..ow {
            let sx = (ox as f64 + 0.5) / r as f64 - 0.5;
            let x0 = sx.floor() as isize;
            let fx = sx - x0 as f64;
            let wx: Vec<f64> = (-1..=2).map(|j| cubic(j as f64 - fx)).collect();
            let mut acc = 0.0;
            for (jy, gy) in wy.iter().enumerate() {
                for (jx, gx) in wx.iter().enumerate() {
                    acc += gy * gx * sample(y0 + jy as isize - 1, x0 + jx as isize - 1);
                }
            }
            out[oy * ow + ox] = T::cast(acc);
        }
    }
    TensorData::new(&[1, oh, ow], out)
}

/// Bicubic baseline over a whole clip.
pub fn bicubic_upscale_clip<T: Scalar>(clip: &VideoClip<T>, r: usize) -> Result<VideoClip<T>> {
    VideoClip::new(
        clip.frames()
            .iter()
            .map(|f| bicubic_upscale(f, r))
            .collect::<Result<Vec<_>>>()?,
    )
}

/// Stacks one pixel row from every frame into a `[frames, width]` image —
/// streaks reveal temporal inconsistency.
pub fn temporal_profile<T: Scalar>(clip: &VideoClip<T>, row: usize) -> Result<TensorData<T>> {
    if row >= clip.height() {
        return Err(Error::invalid(format!(
            "profile row {} out of range for {} rows",
            row,
            clip.height()
        )));
    }
    let w = clip.width();
    let mut out = Vec::with_capacity(clip.len() * w);
    for f in clip.frames() {
        out.extend_from_slice(&f.data()[row * w..(row + 1) * w]);
    }
    TensorData::new(&[clip.len(), w], out)
}

/// Mean absolute frame-to-frame difference of a temporal profile; the
/// temporal-consistency proxy.
pub fn profile_roughness<T: Scalar>(profile: &TensorData<T>) -> f64 {
    let (n, w) = (profile.shape()[0], profile.shape()[1]);
    if n < 2 {
        return 0.0;
    }
    let d = profile.data();
    let mut acc = 0.0;
    for t in 0..n - 1 {
        for x in 0..w {
            acc += (d[(t + 1) * w + x].as_f64() - d[t * w + x].as_f64()).abs();
        }
    }
    acc / ((n - 1) * w) as f64
}

#[cfg(test)]
mod tests {
    use super::*;

    fn clip_from(frames: Vec<TensorData<f64>>) -> VideoClip<f64> {
        VideoClip::new(frames).unwrap()
    }

    #[test]
    fn identical_clips_hit_the_infinity_sentinel() {
        let f = crate::synth::smooth_texture::<f64>(16, 16, 2, 3);
        let clip = clip_from(vec![f.clone(), f.clone()]);
        let psnr = psnr_video(&clip, &clip, CropPolicy::NONE, 1.0).unwrap();
        assert!(psnr.is_infinite());
    }

    #[test]
    fn uniform_error_of_one_is_zero_db() {
        let a = clip_from(vec![TensorData::zeros(&[1, 8, 8])]);
        let b = clip_from(vec![TensorData::filled(&[1, 8, 8], 1.0)]);
        let psnr = psnr_video(&a, &b, CropPolicy::NONE, 1.0).unwrap();
        assert!(psnr.abs() < 1e-12);
    }

    #[test]
    fn pooling_differs_from_frame_averaging() {
        // Frame A carries MSE m, frame B is perfect. Pooled PSNR must be
        // 10 log10(1 / (m/2)) — finite — while the frame-PSNR mean is infinite.
        let m = 0.01f64;
        let base = TensorData::filled(&[1, 8, 8], 0.5);
        let off = base.map(|v| v + m.sqrt());
        let reference = clip_from(vec![base.clone(), base.clone()]);
        let test = clip_from(vec![off, base.clone()]);
        let got = psnr_video(&reference, &test, CropPolicy::NONE, 1.0).unwrap();
        let want = 10.0 * (1.0 / (m / 2.0)).log10();
        assert!((got - want).abs() < 1e-9, "{got} vs {want}");
        assert!(got.is_finite());
    }

    #[test]
    fn psnr_monotone_in_mse() {
        let base = TensorData::filled(&[1, 8, 8], 0.5);
        let reference = clip_from(vec![base.clone()]);
        let mut prev = f64::INFINITY;
        for &e in &[0.01, 0.05, 0.2] {
            let test = clip_from(vec![base.map(|v| v + e)]);
            let p = psnr_video(&reference, &test, CropPolicy::NONE, 1.0).unwrap();
            assert!(p < prev);
            prev = p;
        }
    }

    #[test]
    fn crop_policy_rejects_degenerate_windows() {
        let f = TensorData::<f64>::zeros(&[1, 8, 8]);
        let clip = clip_from(vec![f.clone(), f.clone()]);
        assert!(psnr_video(&clip, &clip, CropPolicy { border: 4, frames: 0 }, 1.0).is_err());
        assert!(psnr_video(&clip, &clip, CropPolicy { border: 0, frames: 1 }, 1.0).is_err());
    }

    #[test]
    fn ssim_self_is_one_and_symmetric() {
        let a = crate::synth::smooth_texture::<f64>(24, 24, 2, 5);
        let b = crate::synth::smooth_texture::<f64>(24, 24, 2, 6);
        assert!((ssim(&a, &a).unwrap() - 1.0).abs() < 1e-12);
        let ab = ssim(&a, &b).unwrap();
        let ba = ssim(&b, &a).unwrap();
        assert!((ab - ba).abs() < 1e-12);
        assert!((-1.0..=1.0).contains(&ab));
    }

    #[test]
    fn negative_image_flips_the_structural_term() {
        // Two-level pattern about mid-gray against its negative: the
        // covariance term is negative wherever the window sees both levels.
        let a = TensorData::from_fn(&[1, 16, 16], |i| {
            let (y, x) = (i / 16, i % 16);
            if (x / 2 + y / 2) % 2 == 0 {
                0.8
            } else {
                0.2
            }
        });
        let b = a.map(|v: f64| 1.0 - v);
        let s = ssim(&a, &b).unwrap();
        assert!(s < 0.0, "expected negative SSIM, got {s}");

        // Independent dense oracle: direct per-window evaluation.
        let win = super::ssim_window();
        let (h, w) = (16usize, 16usize);
        let (vh, vw) = (h - 11 + 1, w - 11 + 1);
        let (c1, c2) = (0.01f64.powi(2), 0.03f64.powi(2));
        let mut total = 0.0;
        for y in 0..vh {
            for x in 0..vw {
                let (mut ma, mut mb, mut maa, mut mbb, mut mab) = (0.0, 0.0, 0.0, 0.0, 0.0);
                for jy in 0..11 {
                    for jx in 0..11 {
                        let g = win[jy] * win[jx];
                        let av = a.data()[(y + jy) * w + x + jx];
                        let bv = b.data()[(y + jy) * w + x + jx];
                        ma += g * av;
                        mb += g * bv;
                        maa += g * av * av;
                        mbb += g * bv * bv;
                        mab += g * av * bv;
                    }
                }
                let (va, vb, cov) = (maa - ma * ma, mbb - mb * mb, mab - ma * mb);
                total += ((2.0 * ma * mb + c1) * (2.0 * cov + c2))
                    / ((ma * ma + mb * mb + c1) * (va + vb + c2));
            }
        }
        let oracle = total / (vh * vw) as f64;
        assert!((s - oracle).abs() < 1e-9, "{s} vs oracle {oracle}");
    }

    #[test]
    fn ssim_rejects_small_images() {
        let tiny = TensorData::<f64>::zeros(&[1, 8, 8]);
        assert!(ssim(&tiny, &tiny).is_err());
    }

    #[test]
    fn bicubic_identity_and_dc() {
        let f = crate::synth::smooth_texture::<f64>(12, 12, 2, 9);
        assert_eq!(bicubic_upscale(&f, 1).unwrap(), f);
        let c = TensorData::filled(&[1, 6, 6], 0.33);
        let up = bicubic_upscale(&c, 3).unwrap();
        assert_eq!(up.shape(), &[1, 18, 18]);
        for &v in up.data() {
            assert!((v - 0.33f64).abs() < 1e-12);
        }
    }

    #[test]
    fn profile_geometry_and_static_clips() {
        let f = crate::synth::smooth_texture::<f64>(10, 14, 2, 4);
        let clip = crate::synth::static_clip(&f, 5).unwrap();
        let p = temporal_profile(&clip, 3).unwrap();
        assert_eq!(p.shape(), &[5, 14]);
        for t in 1..5 {
            assert_eq!(&p.data()[t * 14..(t + 1) * 14], &p.data()[..14]);
        }
        assert_eq!(profile_roughness(&p), 0.0);
        assert!(temporal_profile(&clip, 10).is_err());
    }

    #[test]
    fn pan_draws_a_unit_slope_stripe() {
        // One-pixel-per-frame horizontal pan: profile row t equals row t+1
        // shifted by one pixel.
        let master = crate::synth::smooth_texture::<f64>(48, 48, 3, 11);
        let clip = crate::synth::translating_clip(&master, 6, 16, 16, 1.0, 0.0).unwrap();
        let p = temporal_profile(&clip, 8).unwrap();
        let w = 16;
        for t in 0..5 {
            for x in 0..w - 1 {
                let a = p.data()[(t + 1) * w + x];
                let b = p.data()[t * w + x + 1];
                assert!((a - b).abs() < 1e-9, "t={t}, x={x}");
            }
        }
    }
}

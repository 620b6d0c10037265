//! Turning videos into training samples: luma extraction, anti-aliased
//! downscaling, consecutive-frame blocks, patch sampling and the batch-size
//! schedule.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::tensor::TensorData;

/// Low-resolution patch extent used for training sub-samples.
pub const LR_PATCH_SIZE: usize = 33;

/// An ordered sequence of single-channel luma frames in `[0, 1]`.
#[derive(Debug, Clone)]
pub struct VideoClip<T: Scalar> {
    frames: Vec<TensorData<T>>,
    pub frame_rate: Option<f64>,
}

impl<T: Scalar> VideoClip<T> {
    /// Frames must share one `[1, H, W]` geometry and there must be at least
    /// one of them.
    pub fn new(frames: Vec<TensorData<T>>) -> Result<Self> {
        let first = frames
            .first()
            .ok_or_else(|| Error::invalid("a clip needs at least one frame"))?;
        let shape = first.shape().to_vec();
        if shape.len() != 3 || shape[0] != 1 {
            return Err(Error::shape(format!(
                "clip frames must be [1, H, W], got {:?}",
                shape
            )));
        }
        for (i, f) in frames.iter().enumerate() {
            if f.shape() != shape {
                return Err(Error::shape(format!(
                    "frame {} has shape {:?}, expected {:?}",
                    i,
                    f.shape(),
                    shape
                )));
            }
        }
        Ok(VideoClip {
            frames,
            frame_rate: None,
        })
    }

    pub fn frames(&self) -> &[TensorData<T>] {
        &self.frames
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    pub fn height(&self) -> usize {
        self.frames[0].shape()[1]
    }

    pub fn width(&self) -> usize {
        self.frames[0].shape()[2]
    }

    /// Clip with every frame cropped to `[y0..y0+h, x0..x0+w]`.
    pub fn crop(&self, y0: usize, x0: usize, h: usize, w: usize) -> Result<VideoClip<T>> {
        if y0 + h > self.height() || x0 + w > self.width() {
            return Err(Error::invalid(format!(
                "crop {}x{}+{}+{} exceeds clip {}x{}",
                h,
                w,
                y0,
                x0,
                self.height(),
                self.width()
            )));
        }
        let frames = self
            .frames
            .iter()
            .map(|f| {
                let src = f.data();
                let fw = f.shape()[2];
                let mut out = Vec::with_capacity(h * w);
                for y in y0..y0 + h {
                    out.extend_from_slice(&src[y * fw + x0..y * fw + x0 + w]);
                }
                TensorData::new(&[1, h, w], out)
            })
            .collect::<Result<Vec<_>>>()?;
        VideoClip::new(frames)
    }
}

/// A group of consecutive low-resolution frames centred at `t`, together with
/// the full-resolution centre frame it should reconstruct.
#[derive(Debug, Clone)]
pub struct FrameBlock<T: Scalar> {
    /// `[D0, 1, h, w]` low-resolution luma.
    pub lr_frames: TensorData<T>,
    /// `[1, 1, r*h, r*w]` high-resolution centre frame.
    pub hr_center: TensorData<T>,
    /// Centre frame index in the source clip.
    pub t: usize,
    /// Upscaling factor relating the two resolutions.
    pub r: usize,
}

impl<T: Scalar> FrameBlock<T> {
    pub fn depth(&self) -> usize {
        self.lr_frames.shape()[0]
    }

    pub fn lr_height(&self) -> usize {
        self.lr_frames.shape()[2]
    }

    pub fn lr_width(&self) -> usize {
        self.lr_frames.shape()[3]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Validation,
}

/// One extracted patch with its provenance.
#[derive(Debug, Clone)]
pub struct SampleRecord<T: Scalar> {
    pub block: FrameBlock<T>,
    pub clip: usize,
    /// Patch origin in low-resolution pixels (y, x).
    pub origin: (usize, usize),
    pub split: Split,
}

/// The training corpus: 33x33 low-resolution patches with aligned
/// high-resolution targets, split 95/5 into train and validation.
#[derive(Debug, Clone)]
pub struct SampleSet<T: Scalar> {
    pub records: Vec<SampleRecord<T>>,
    pub r: usize,
    pub d0: usize,
    pub seed: u64,
    pub patch: usize,
    pub warnings: Vec<String>,
}

impl<T: Scalar> SampleSet<T> {
    pub fn train(&self) -> Vec<&SampleRecord<T>> {
        self.records.iter().filter(|r| r.split == Split::Train).collect()
    }

    pub fn validation(&self) -> Vec<&SampleRecord<T>> {
        self.records
            .iter()
            .filter(|r| r.split == Split::Validation)
            .collect()
    }
}

/// BT.601 luma from an `[3, H, W]` RGB tensor in `[0, 1]`.
pub fn to_luma<T: Scalar>(rgb: &TensorData<T>) -> Result<TensorData<T>> {
    let s = rgb.shape();
    if s.len() != 3 || s[0] != 3 {
        return Err(Error::shape(format!(
            "to_luma expects [3, H, W], got {:?}",
            s
        )));
    }
    let (h, w) = (s[1], s[2]);
    let hw = h * w;
    let d = rgb.data();
    let (cr, cg, cb) = (T::cast(0.299), T::cast(0.587), T::cast(0.114));
    let mut out = Vec::with_capacity(hw);
    for i in 0..hw {
        let y = cr * d[i] + cg * d[hw + i] + cb * d[2 * hw + i];
        out.push(y.max(T::zero()).min(T::one()));
    }
    TensorData::new(&[1, h, w], out)
}

/// Normalised Gaussian taps with sigma `r/2` and radius `ceil(2 sigma)`.
fn gaussian_taps<T: Scalar>(r: usize) -> Vec<T> {
    let sigma = r as f64 / 2.0;
    let radius = (2.0 * sigma).ceil() as i64;
    let mut taps: Vec<f64> = (-radius..=radius)
        .map(|j| (-(j as f64).powi(2) / (2.0 * sigma * sigma)).exp())
        .collect();
    let sum: f64 = taps.iter().sum();
    for t in taps.iter_mut() {
        *t /= sum;
    }
    taps.into_iter().map(T::cast).collect()
}

/// Separable Gaussian blur with replicate borders on a `[1, H, W]` frame.
pub(crate) fn gaussian_blur<T: Scalar>(frame: &TensorData<T>, r: usize) -> TensorData<T> {
    let (h, w) = (frame.shape()[1], frame.shape()[2]);
    let taps = gaussian_taps::<T>(r);
    let radius = (taps.len() / 2) as isize;
    let src = frame.data();

    let mut tmp = vec![T::zero(); h * w];
    for y in 0..h {
        for x in 0..w {
            let mut acc = T::zero();
            for (j, &g) in taps.iter().enumerate() {
                let ix = (x as isize + j as isize - radius).clamp(0, w as isize - 1) as usize;
                acc += g * src[y * w + ix];
            }
            tmp[y * w + x] = acc;
        }
    }
    let mut out = vec![T::zero(); h * w];
    for y in 0..h {
        for x in 0..w {
            let mut acc = T::zero();
            for (j, &g) in taps.iter().enumerate() {
                let iy = (y as isize + j as isize - radius).clamp(0, h as isize - 1) as usize;
                acc += g * tmp[iy * w + x];
            }
            out[y * w + x] = acc;
        }
    }
    TensorData::new(&[1, h, w], out).expect("blur preserves the shape")
}

/// Low-pass filtering followed by taking every `r`-th pixel.
///
/// `r = 1` bypasses the blur entirely. Both extents must be divisible by
/// `r`; callers crop first.
pub fn downscale<T: Scalar>(frame: &TensorData<T>, r: usize) -> Result<TensorData<T>> {
    let s = frame.shape();
    if s.len() != 3 || s[0] != 1 {
        return Err(Error::shape(format!(
            "downscale expects [1, H, W], got {:?}",
            s
        )));
    }
    if r == 0 {
        return Err(Error::invalid("scale factor must be positive"));
    }
    if r == 1 {
        return Ok(frame.clone());
    }
    let (h, w) = (s[1], s[2]);
    if h % r != 0 || w % r != 0 {
        return Err(Error::shape(format!(
            "downscale: {}x{} not divisible by r = {} (crop first)",
            h, w, r
        )));
    }
    let blurred = gaussian_blur(frame, r);
    let (oh, ow) = (h / r, w / r);
    let mut out = Vec::with_capacity(oh * ow);
    let src = blurred.data();
    for y in 0..oh {
        for x in 0..ow {
            out.push(src[(y * r) * w + x * r]);
        }
    }
    TensorData::new(&[1, oh, ow], out)
}

/// Builds the frame block centred at `t` with radius `R`, clamping
/// out-of-range indices to the first/last frame. The clip is cropped to a
/// multiple of `r` before downscaling.
pub fn frame_block<T: Scalar>(
    clip: &VideoClip<T>,
    t: usize,
    radius: usize,
    r: usize,
) -> Result<FrameBlock<T>> {
    if t >= clip.len() {
        return Err(Error::invalid(format!(
            "frame index {} out of range for a {}-frame clip",
            t,
            clip.len()
        )));
    }
    let (h, w) = (clip.height(), clip.width());
    let (ch, cw) = (h - h % r, w - w % r);
    if ch == 0 || cw == 0 {
        return Err(Error::invalid(format!(
            "clip {}x{} too small for scale factor {}",
            h, w, r
        )));
    }
    let d0 = 2 * radius + 1;
    let mut lr = Vec::with_capacity(d0 * ch / r * cw / r);
    let mut hr_center = None;
    for offset in 0..d0 {
        let idx = (t + offset).saturating_sub(radius).min(clip.len() - 1);
        let frame = &clip.frames()[idx];
        let cropped = crop_frame(frame, ch, cw)?;
        if offset == radius {
            hr_center = Some(cropped.clone());
        }
        lr.extend_from_slice(downscale(&cropped, r)?.data());
    }
    let hr = hr_center.expect("centre offset visited");
    Ok(FrameBlock {
        lr_frames: TensorData::new(&[d0, 1, ch / r, cw / r], lr)?,
        hr_center: hr.reshaped(&[1, 1, ch, cw])?,
        t,
        r,
    })
}

fn crop_frame<T: Scalar>(frame: &TensorData<T>, h: usize, w: usize) -> Result<TensorData<T>> {
    let (fh, fw) = (frame.shape()[1], frame.shape()[2]);
    if fh == h && fw == w {
        return Ok(frame.clone());
    }
    let src = frame.data();
    let mut out = Vec::with_capacity(h * w);
    for y in 0..h {
        out.extend_from_slice(&src[y * fw..y * fw + w]);
    }
    TensorData::new(&[1, h, w], out)
}

/// Deterministic patch extraction with a configurable patch size.
///
/// Patch origins are aligned to a `patch x patch` grid, so two patches from
/// the same source sample either coincide (prevented by deduplication) or do
/// not overlap at all. Each patch is built by cropping the high-resolution
/// window first and downscaling it, so the centre LR frame is bitwise the
/// downscaled HR target.
pub fn extract_samples_sized<T: Scalar>(
    clips: &[VideoClip<T>],
    d0: usize,
    r: usize,
    patch: usize,
    samples_per_clip: usize,
    seed: u64,
) -> Result<SampleSet<T>> {
    if d0 % 2 == 0 {
        return Err(Error::invalid("the temporal depth D0 must be odd"));
    }
    let radius = (d0 - 1) / 2;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut records = Vec::new();
    let mut warnings = Vec::new();

    for (ci, clip) in clips.iter().enumerate() {
        let lr_h = (clip.height() - clip.height() % r) / r;
        let lr_w = (clip.width() - clip.width() % r) / r;
        let (cells_y, cells_x) = (lr_h / patch, lr_w / patch);
        if cells_y == 0 || cells_x == 0 {
            warnings.push(format!(
                "clip {ci}: {lr_h}x{lr_w} LR too small for a {patch}x{patch} patch, skipped"
            ));
            continue;
        }
        let mut used: Vec<(usize, usize, usize)> = Vec::new();
        let capacity = clip.len() * cells_y * cells_x;
        let budget = samples_per_clip.min(capacity);
        let mut attempts = 0usize;
        while used.len() < budget && attempts < budget * 64 {
            attempts += 1;
            let t = rng.random_range(0..clip.len());
            let gy = rng.random_range(0..cells_y);
            let gx = rng.random_range(0..cells_x);
            if used.contains(&(t, gy, gx)) {
                continue;
            }
            used.push((t, gy, gx));
        }
        if used.len() < samples_per_clip {
            warnings.push(format!(
                "clip {}: only {} of {} requested samples available",
                ci,
                used.len(),
                samples_per_clip
            ));
        }
        for (t, gy, gx) in used {
            let (oy, ox) = (gy * patch, gx * patch);
            // HR window aligned with the LR patch, built per-patch so the
            // downscaled centre matches the target by construction.
            let window = clip.crop(oy * r, ox * r, patch * r, patch * r)?;
            let lo = t.saturating_sub(radius);
            let hi = (t + radius).min(clip.len() - 1);
            let sub = VideoClip::new(window.frames()[lo..=hi].to_vec())?;
            let block = frame_block(&sub, t - lo, radius, r)?;
            let block = FrameBlock { t, ..block };
            records.push(SampleRecord {
                block,
                clip: ci,
                origin: (oy, ox),
                split: Split::Train,
            });
        }
    }

    // Deterministic 5% validation split over a seeded shuffle.
    let mut order: Vec<usize> = (0..records.len()).collect();
    use rand::seq::SliceRandom;
    order.shuffle(&mut rng);
    let val_count = ((records.len() as f64) * 0.05).round() as usize;
    for &idx in order.iter().take(val_count) {
        records[idx].split = Split::Validation;
    }

    Ok(SampleSet {
        records,
        r,
        d0,
        seed,
        patch,
        warnings,
    })
}

/// Patch extraction at the standard 33x33 low-resolution patch size.
pub fn extract_samples<T: Scalar>(
    clips: &[VideoClip<T>],
    d0: usize,
    r: usize,
    samples_per_clip: usize,
    seed: u64,
) -> Result<SampleSet<T>> {
    extract_samples_sized(clips, d0, r, LR_PATCH_SIZE, samples_per_clip, seed)
}

/// Batch-size schedule: starts at 1 and doubles every 10 epochs up to 128.
pub fn batch_size(epoch: usize) -> usize {
    1usize << (epoch / 10).min(7)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ramp_clip(n: usize, h: usize, w: usize) -> VideoClip<f64> {
        let frames = (0..n)
            .map(|t| {
                TensorData::from_fn(&[1, h, w], |i| {
                    ((i + t * 7) % 97) as f64 / 97.0
                })
            })
            .collect();
        VideoClip::new(frames).unwrap()
    }

    #[test]
    fn luma_endpoints() {
        let white = TensorData::filled(&[3, 2, 2], 1.0);
        assert!(to_luma(&white)
            .unwrap()
            .data()
            .iter()
            .all(|&v: &f64| (v - 1.0).abs() < 1e-12));
        let black = TensorData::<f64>::zeros(&[3, 2, 2]);
        assert!(to_luma(&black).unwrap().data().iter().all(|&v| v == 0.0));
        // Pure green carries the 0.587 coefficient.
        let mut green = TensorData::<f64>::zeros(&[3, 1, 1]);
        green.data_mut()[1] = 1.0;
        assert!((to_luma(&green).unwrap().data()[0] - 0.587).abs() < 1e-12);
    }

    #[test]
    fn luma_rejects_wrong_channel_count() {
        let gray = TensorData::<f64>::zeros(&[1, 2, 2]);
        assert!(to_luma(&gray).is_err());
    }

    #[test]
    fn downscale_preserves_constants() {
        let frame = TensorData::filled(&[1, 12, 12], 0.42);
        let out = downscale(&frame, 3).unwrap();
        assert_eq!(out.shape(), &[1, 4, 4]);
        for &v in out.data() {
            assert!((v - 0.42f64).abs() < 1e-12);
        }
    }

    #[test]
    fn downscale_r1_is_identity() {
        let frame = TensorData::from_fn(&[1, 5, 5], |i| i as f64 * 0.01);
        assert_eq!(downscale(&frame, 1).unwrap(), frame);
    }

    #[test]
    fn downscale_rejects_indivisible() {
        let frame = TensorData::<f64>::zeros(&[1, 10, 9]);
        assert!(downscale(&frame, 3).is_err());
    }

    #[test]
    fn impulse_response_matches_direct_convolution() {
        // An impulse blurred and subsampled must equal the sampled 2D
        // Gaussian taps computed by direct convolution.
        let r = 2usize;
        let (h, w) = (16, 16);
        let mut frame = TensorData::<f64>::zeros(&[1, h, w]);
        frame.data_mut()[8 * w + 8] = 1.0;

        let taps: Vec<f64> = super::gaussian_taps(r);
        let radius = (taps.len() / 2) as isize;
        let direct = |y: usize, x: usize| -> f64 {
            let mut acc = 0.0;
            for (jy, gy) in taps.iter().enumerate() {
                for (jx, gx) in taps.iter().enumerate() {
                    let iy = (y as isize + jy as isize - radius).clamp(0, h as isize - 1);
                    let ix = (x as isize + jx as isize - radius).clamp(0, w as isize - 1);
                    if iy == 8 && ix == 8 {
                        acc += gy * gx;
                    }
                }
            }
            acc
        };

        let out = downscale(&frame, r).unwrap();
        let mut total = 0.0;
        for y in 0..h / r {
            for x in 0..w / r {
                let want = direct(y * r, x * r);
                let got = out.data()[y * (w / r) + x];
                assert!((got - want).abs() < 1e-12, "({y},{x}): {got} vs {want}");
                total += got;
            }
        }
        assert!(total <= 1.0 + 1e-12);
    }

    #[test]
    fn frame_block_clamps_boundaries() {
        let clip = ramp_clip(5, 6, 6);
        // R = 0: a single-frame block.
        let b = frame_block(&clip, 2, 0, 2).unwrap();
        assert_eq!(b.depth(), 1);
        // t = 0, R = 1: frames (0, 0, 1).
        let b = frame_block(&clip, 0, 1, 2).unwrap();
        assert_eq!(b.depth(), 3);
        let hw = 3 * 3;
        let first = &b.lr_frames.data()[..hw];
        let second = &b.lr_frames.data()[hw..2 * hw];
        assert_eq!(first, second, "leading frames clamp to frame 0");
        // Interior t: frames (t-1, t, t+1) are all distinct.
        let b = frame_block(&clip, 2, 1, 2).unwrap();
        let f0 = &b.lr_frames.data()[..hw];
        let f1 = &b.lr_frames.data()[hw..2 * hw];
        assert_ne!(f0, f1);
    }

    #[test]
    fn block_center_matches_downscaled_target() {
        let clip = ramp_clip(4, 12, 12);
        let b = frame_block(&clip, 1, 1, 3).unwrap();
        let redown = downscale(
            &b.hr_center.clone().reshaped(&[1, 12, 12]).unwrap(),
            3,
        )
        .unwrap();
        let hw = 4 * 4;
        let center = &b.lr_frames.data()[hw..2 * hw];
        assert_eq!(center, redown.data());
    }

    #[test]
    fn patch_counts_follow_the_grid() {
        // A clip exactly one patch large yields a single position.
        let one = ramp_clip(1, LR_PATCH_SIZE * 2, LR_PATCH_SIZE * 2); // r=2 -> 33x33 LR
        let set = extract_samples(&[one], 1, 2, 10, 7).unwrap();
        assert_eq!(set.records.len(), 1);
        assert!(!set.warnings.is_empty());

        // A 66x66 LR clip holds at most 4 non-overlapping positions per frame.
        let four = ramp_clip(1, LR_PATCH_SIZE * 4, LR_PATCH_SIZE * 4); // r=2 -> 66x66 LR
        let set = extract_samples(&[four], 1, 2, 10, 7).unwrap();
        assert!(set.records.len() <= 4);
    }

    #[test]
    fn patches_never_overlap_within_a_source_sample() {
        let clip = ramp_clip(3, 140, 140);
        let set = extract_samples(&[clip], 3, 2, 8, 21).unwrap();
        for a in &set.records {
            for b in &set.records {
                if std::ptr::eq(a, b) || a.block.t != b.block.t {
                    continue;
                }
                let disjoint_y = a.origin.0 + set.patch <= b.origin.0
                    || b.origin.0 + set.patch <= a.origin.0;
                let disjoint_x = a.origin.1 + set.patch <= b.origin.1
                    || b.origin.1 + set.patch <= a.origin.1;
                assert!(
                    disjoint_y || disjoint_x || a.origin == b.origin,
                    "overlap between {:?} and {:?}",
                    a.origin,
                    b.origin
                );
                assert!(
                    !(a.origin == b.origin),
                    "duplicate patch at {:?}",
                    a.origin
                );
            }
        }
    }

    #[test]
    fn extraction_is_deterministic() {
        let clips = vec![ramp_clip(4, 100, 100), ramp_clip(6, 80, 120)];
        let a = extract_samples(&clips, 3, 2, 5, 99).unwrap();
        let b = extract_samples(&clips, 3, 2, 5, 99).unwrap();
        assert_eq!(a.records.len(), b.records.len());
        for (x, y) in a.records.iter().zip(&b.records) {
            assert_eq!(x.origin, y.origin);
            assert_eq!(x.block.t, y.block.t);
            assert_eq!(x.split, y.split);
            assert_eq!(x.block.lr_frames.data(), y.block.lr_frames.data());
        }
    }

    #[test]
    fn batch_schedule_doubles_every_ten_epochs() {
        assert_eq!(batch_size(0), 1);
        assert_eq!(batch_size(9), 1);
        assert_eq!(batch_size(10), 2);
        assert_eq!(batch_size(35), 8);
        assert_eq!(batch_size(70), 128);
        assert_eq!(batch_size(100), 128);
        let mut prev = 0;
        for e in 0..200 {
            let b = batch_size(e);
            assert!(b >= prev && b <= 128);
            prev = b;
        }
    }
}

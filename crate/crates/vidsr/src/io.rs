//! On-disk formats: frame directories, dataset manifests, the patch store
//! and flow-map export.
//!
//! Frames live one file per frame as lossless grayscale or RGB PNG (8- or
//! 16-bit; RGB is reduced to luma on load) or as raw 8-bit planar luma
//! (`.gray`) with a `dims.txt` sidecar holding `WIDTH HEIGHT`. Outputs are
//! written as grayscale PNG named by zero-padded frame index.

use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::data::{FrameBlock, SampleRecord, SampleSet, Split, VideoClip};
use crate::error::{Error, Result};
use crate::motion::FlowField;
use crate::scalar::Scalar;
use crate::tensor::TensorData;

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

// ---------------------------------------------------------------------------
// Frames
// ---------------------------------------------------------------------------

fn luma_from_image<T: Scalar>(img: image::DynamicImage) -> Result<TensorData<T>> {
    use image::DynamicImage::*;
    let (w, h) = (img.width() as usize, img.height() as usize);
    let data: Vec<T> = match img {
        ImageLuma8(b) => b.into_raw().into_iter().map(|v| T::cast(v as f64 / 255.0)).collect(),
        ImageLuma16(b) => b
            .into_raw()
            .into_iter()
            .map(|v| T::cast(v as f64 / 65535.0))
            .collect(),
        other => {
            // Any colour layout: reduce to BT.601 luma at 16-bit precision.
            let rgb = other.into_rgb16();
            rgb.pixels()
                .map(|p| {
                    let [r, g, b] = p.0;
                    let y = 0.299 * r as f64 + 0.587 * g as f64 + 0.114 * b as f64;
                    T::cast((y / 65535.0).clamp(0.0, 1.0))
                })
                .collect()
        }
    };
    TensorData::new(&[1, h, w], data)
}

fn read_raw_luma<T: Scalar>(path: &Path, dims: (usize, usize)) -> Result<TensorData<T>> {
    let (w, h) = dims;
    let mut bytes = Vec::new();
    std::fs::File::open(path)?.read_to_end(&mut bytes)?;
    if bytes.len() != w * h {
        return Err(Error::format(format!(
            "{}: raw luma holds {} bytes, dims say {}x{}",
            path.display(),
            bytes.len(),
            w,
            h
        )));
    }
    TensorData::new(
        &[1, h, w],
        bytes.into_iter().map(|v| T::cast(v as f64 / 255.0)).collect(),
    )
}

fn raw_dims(dir: &Path) -> Result<(usize, usize)> {
    let sidecar = dir.join("dims.txt");
    let text = std::fs::read_to_string(&sidecar).map_err(|e| {
        Error::format(format!(
            "raw luma frames need a dims.txt sidecar ({}): {e}",
            sidecar.display()
        ))
    })?;
    let mut it = text.split_whitespace();
    let w = it
        .next()
        .and_then(|v| v.parse().ok())
        .ok_or_else(|| Error::format("dims.txt must hold WIDTH HEIGHT"))?;
    let h = it
        .next()
        .and_then(|v| v.parse().ok())
        .ok_or_else(|| Error::format("dims.txt must hold WIDTH HEIGHT"))?;
    Ok((w, h))
}

/// Reads a clip from a directory of frame files sorted by name.
pub fn read_clip<T: Scalar>(dir: &Path) -> Result<VideoClip<T>> {
    if !dir.is_dir() {
        return Err(Error::invalid(format!(
            "frame directory {} does not exist",
            dir.display()
        )));
    }
    let mut paths: Vec<PathBuf> = std::fs::read_dir(dir)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| {
            matches!(
                p.extension().and_then(|e| e.to_str()),
                Some("png" | "PNG" | "gray")
            )
        })
        .collect();
    paths.sort();
    if paths.is_empty() {
        return Err(Error::invalid(format!(
            "no .png or .gray frames in {}",
            dir.display()
        )));
    }
    let raw_dims = if paths.iter().any(|p| p.extension().is_some_and(|e| e == "gray")) {
        Some(raw_dims(dir)?)
    } else {
        None
    };
    let mut frames = Vec::with_capacity(paths.len());
    for p in &paths {
        let frame = if p.extension().is_some_and(|e| e == "gray") {
            read_raw_luma(p, raw_dims.expect("dims parsed above"))?
        } else {
            luma_from_image(image::open(p)?)?
        };
        frames.push(frame);
    }
    VideoClip::new(frames)
}

/// Writes one `[1, H, W]` frame as grayscale PNG at the given bit depth.
pub fn write_frame<T: Scalar>(frame: &TensorData<T>, path: &Path, bit_depth: u8) -> Result<()> {
    let s = frame.shape();
    if s.len() != 3 || s[0] != 1 {
        return Err(Error::shape(format!(
            "write_frame expects [1, H, W], got {:?}",
            s
        )));
    }
    let (h, w) = (s[1], s[2]);
    match bit_depth {
        8 => {
            let buf: Vec<u8> = frame
                .data()
                .iter()
                .map(|v| (v.as_f64().clamp(0.0, 1.0) * 255.0).round() as u8)
                .collect();
            image::GrayImage::from_raw(w as u32, h as u32, buf)
                .expect("buffer sized from the shape")
                .save(path)?;
        }
        16 => {
            let buf: Vec<u16> = frame
                .data()
                .iter()
                .map(|v| (v.as_f64().clamp(0.0, 1.0) * 65535.0).round() as u16)
                .collect();
            image::ImageBuffer::<image::Luma<u16>, Vec<u16>>::from_raw(w as u32, h as u32, buf)
                .expect("buffer sized from the shape")
                .save(path)?;
        }
        other => return Err(Error::invalid(format!("unsupported bit depth {other}"))),
    }
    Ok(())
}

/// Writes a clip as zero-padded PNG frames (`000000.png`, ...).
pub fn write_clip<T: Scalar>(clip: &VideoClip<T>, dir: &Path, bit_depth: u8) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    for (i, f) in clip.frames().iter().enumerate() {
        write_frame(f, &dir.join(format!("{i:06}.png")), bit_depth)?;
    }
    Ok(())
}

/// Exports a flow field in the Middlebury `.flo` layout (pixel units,
/// interleaved u/v), the common interchange format for flow visualisers.
pub fn write_flo<T: Scalar>(flow: &FlowField<T>, path: &Path) -> Result<()> {
    let v = flow.delta.value();
    let (h, w) = (v.shape()[1], v.shape()[2]);
    let hw = h * w;
    let mut file = std::fs::File::create(path)?;
    file.write_all(&202021.25f32.to_le_bytes())?;
    file.write_all(&(w as i32).to_le_bytes())?;
    file.write_all(&(h as i32).to_le_bytes())?;
    let px = (w as f64 - 1.0) / 2.0;
    let py = (h as f64 - 1.0) / 2.0;
    for i in 0..hw {
        let u = (v.data()[i].as_f64() * px) as f32;
        let vv = (v.data()[hw + i].as_f64() * py) as f32;
        file.write_all(&u.to_le_bytes())?;
        file.write_all(&vv.to_le_bytes())?;
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// Manifest and patch store
// ---------------------------------------------------------------------------

pub const PATCH_MAGIC: &[u8; 8] = b"VSRPATCH";
pub const PATCH_VERSION: u32 = 1;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ManifestRecord {
    pub clip: usize,
    pub t: usize,
    pub origin_y: usize,
    pub origin_x: usize,
    pub split: Split,
}

/// Plain-text description of a prepared dataset; the binary patch store sits
/// next to it.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Manifest {
    pub version: u32,
    pub r: usize,
    pub d0: usize,
    pub patch: usize,
    pub seed: u64,
    pub samples_per_clip: usize,
    pub clips: Vec<String>,
    pub warnings: Vec<String>,
    pub patch_store: String,
    pub patch_store_sha256: String,
    pub records: Vec<ManifestRecord>,
}

fn patch_store_bytes(set: &SampleSet<f32>) -> Vec<u8> {
    let mut bytes = Vec::new();
    bytes.extend_from_slice(PATCH_MAGIC);
    bytes.extend_from_slice(&PATCH_VERSION.to_le_bytes());
    bytes.extend_from_slice(&(set.records.len() as u64).to_le_bytes());
    bytes.extend_from_slice(&(set.d0 as u32).to_le_bytes());
    bytes.extend_from_slice(&(set.r as u32).to_le_bytes());
    bytes.extend_from_slice(&(set.patch as u32).to_le_bytes());
    for rec in &set.records {
        for &x in rec.block.lr_frames.data() {
            bytes.extend_from_slice(&x.to_le_bytes());
        }
        for &x in rec.block.hr_center.data() {
            bytes.extend_from_slice(&x.to_le_bytes());
        }
    }
    bytes
}

/// Writes `manifest.json` plus the binary patch store into `out_dir`.
pub fn write_dataset(
    set: &SampleSet<f32>,
    clip_names: &[String],
    samples_per_clip: usize,
    out_dir: &Path,
) -> Result<PathBuf> {
    std::fs::create_dir_all(out_dir)?;
    let store = patch_store_bytes(set);
    let store_name = "patches.bin".to_string();
    std::fs::write(out_dir.join(&store_name), &store)?;
    let manifest = Manifest {
        version: 1,
        r: set.r,
        d0: set.d0,
        patch: set.patch,
        seed: set.seed,
        samples_per_clip,
        clips: clip_names.to_vec(),
        warnings: set.warnings.clone(),
        patch_store: store_name,
        patch_store_sha256: sha256_hex(&store),
        records: set
            .records
            .iter()
            .map(|r| ManifestRecord {
                clip: r.clip,
                t: r.block.t,
                origin_y: r.origin.0,
                origin_x: r.origin.1,
                split: r.split,
            })
            .collect(),
    };
    let path = out_dir.join("manifest.json");
    let mut json = serde_json::to_vec_pretty(&manifest)?;
    json.push(b'\n');
    std::fs::write(&path, json)?;
    Ok(path)
}

/// Loads a dataset back from its manifest.
pub fn read_dataset(manifest_path: &Path) -> Result<SampleSet<f32>> {
    let manifest: Manifest = serde_json::from_slice(&std::fs::read(manifest_path)?)?;
    if manifest.version != 1 {
        return Err(Error::format(format!(
            "unsupported manifest version {}",
            manifest.version
        )));
    }
    let dir = manifest_path.parent().unwrap_or(Path::new("."));
    let store = std::fs::read(dir.join(&manifest.patch_store))?;
    if sha256_hex(&store) != manifest.patch_store_sha256 {
        return Err(Error::format("patch store does not match the manifest hash"));
    }
    if store.len() < 8 + 4 + 8 + 12 || &store[..8] != PATCH_MAGIC {
        return Err(Error::format("bad patch store magic"));
    }
    let version = u32::from_le_bytes(store[8..12].try_into().unwrap());
    if version != PATCH_VERSION {
        return Err(Error::format(format!("unsupported patch store version {version}")));
    }
    let count = u64::from_le_bytes(store[12..20].try_into().unwrap()) as usize;
    let d0 = u32::from_le_bytes(store[20..24].try_into().unwrap()) as usize;
    let r = u32::from_le_bytes(store[24..28].try_into().unwrap()) as usize;
    let patch = u32::from_le_bytes(store[28..32].try_into().unwrap()) as usize;
    if count != manifest.records.len() || d0 != manifest.d0 || r != manifest.r {
        return Err(Error::format("patch store disagrees with the manifest"));
    }
    let lr_len = d0 * patch * patch;
    let hr_len = patch * r * patch * r;
    let mut cursor = 32usize;
    let mut take = |len: usize| -> Result<Vec<f32>> {
        let need = len * 4;
        if cursor + need > store.len() {
            return Err(Error::format("patch store is truncated"));
        }
        let out = store[cursor..cursor + need]
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
            .collect();
        cursor += need;
        Ok(out)
    };
    let mut records = Vec::with_capacity(count);
    for meta in &manifest.records {
        let lr = TensorData::new(&[d0, 1, patch, patch], take(lr_len)?)?;
        let hr = TensorData::new(&[1, 1, patch * r, patch * r], take(hr_len)?)?;
        records.push(SampleRecord {
            block: FrameBlock {
                lr_frames: lr,
                hr_center: hr,
                t: meta.t,
                r,
            },
            clip: meta.clip,
            origin: (meta.origin_y, meta.origin_x),
            split: meta.split,
        });
    }
    Ok(SampleSet {
        records,
        r,
        d0,
        seed: manifest.seed,
        patch,
        warnings: manifest.warnings,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::extract_samples_sized;
    use crate::synth::{smooth_texture, translating_clip};

    #[test]
    fn png_roundtrip_at_both_depths() {
        let dir = tempfile::tempdir().unwrap();
        let frame = smooth_texture::<f64>(20, 24, 2, 3);
        for depth in [8u8, 16] {
            let p = dir.path().join(format!("f{depth}.png"));
            write_frame(&frame, &p, depth).unwrap();
            let clip = read_clip::<f64>(dir.path()).unwrap();
            assert_eq!(clip.height(), 20);
            assert_eq!(clip.width(), 24);
            std::fs::remove_file(&p).unwrap();
        }
        // 16-bit quantisation error stays below one step.
        let p = dir.path().join("x.png");
        write_frame(&frame, &p, 16).unwrap();
        let back = read_clip::<f64>(dir.path()).unwrap();
        let err = frame.max_abs_diff(&back.frames()[0]);
        assert!(err <= 0.5 / 65535.0 + 1e-9, "{err}");
    }

    #[test]
    fn raw_luma_with_sidecar() {
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(dir.path().join("dims.txt"), "6 4\n").unwrap();
        let bytes: Vec<u8> = (0..24).map(|v| (v * 10) as u8).collect();
        std::fs::write(dir.path().join("000000.gray"), &bytes).unwrap();
        let clip = read_clip::<f64>(dir.path()).unwrap();
        assert_eq!((clip.height(), clip.width()), (4, 6));
        assert!((clip.frames()[0].data()[1] - 10.0 / 255.0).abs() < 1e-12);
    }

    #[test]
    fn dataset_roundtrip_preserves_patches_bitwise() {
        let master = smooth_texture::<f32>(160, 160, 2, 3);
        let clip = translating_clip(&master, 4, 140, 140, 0.5, 0.25).unwrap();
        let set = extract_samples_sized(&[clip], 3, 2, 16, 6, 42).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let manifest = write_dataset(&set, &["clip0".into()], 6, dir.path()).unwrap();
        let back = read_dataset(&manifest).unwrap();
        assert_eq!(back.records.len(), set.records.len());
        for (a, b) in set.records.iter().zip(&back.records) {
            assert_eq!(a.block.lr_frames.data(), b.block.lr_frames.data());
            assert_eq!(a.block.hr_center.data(), b.block.hr_center.data());
            assert_eq!(a.split, b.split);
            assert_eq!(a.origin, b.origin);
        }
    }

    #[test]
    fn same_seed_gives_identical_manifests() {
        let master = smooth_texture::<f32>(120, 120, 2, 9);
        let mk = || {
            let clip = translating_clip(&master, 3, 100, 100, 1.0, 0.0).unwrap();
            extract_samples_sized(&[clip], 3, 2, 16, 4, 7).unwrap()
        };
        let d1 = tempfile::tempdir().unwrap();
        let d2 = tempfile::tempdir().unwrap();
        write_dataset(&mk(), &["c".into()], 4, d1.path()).unwrap();
        write_dataset(&mk(), &["c".into()], 4, d2.path()).unwrap();
        let a = std::fs::read(d1.path().join("manifest.json")).unwrap();
        let b = std::fs::read(d2.path().join("manifest.json")).unwrap();
        assert_eq!(sha256_hex(&a), sha256_hex(&b));
    }

    #[test]
    fn flo_export_layout() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("f.flo");
        let flow = crate::motion::FlowField {
            delta: crate::tensor::Tensor::constant(TensorData::<f64>::filled(&[2, 2, 3], 0.5)),
            kind: crate::motion::FlowKind::Total,
        };
        write_flo(&flow, &p).unwrap();
        let bytes = std::fs::read(&p).unwrap();
        assert_eq!(bytes.len(), 12 + 2 * 3 * 2 * 4);
        assert_eq!(f32::from_le_bytes(bytes[0..4].try_into().unwrap()), 202021.25);
        assert_eq!(i32::from_le_bytes(bytes[4..8].try_into().unwrap()), 3);
        assert_eq!(i32::from_le_bytes(bytes[8..12].try_into().unwrap()), 2);
        // u at pixel 0: 0.5 normalised * (3-1)/2 = 0.5 px.
        assert_eq!(f32::from_le_bytes(bytes[12..16].try_into().unwrap()), 0.5);
    }
}

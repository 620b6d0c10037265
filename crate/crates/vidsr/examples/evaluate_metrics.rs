//! Metric behaviour on constructed clips: pooled video PSNR versus
//! per-frame averaging, SSIM sanity, the bicubic baseline and temporal
//! profiles.

use vidsr::data::downscale;
use vidsr::data::VideoClip;
use vidsr::metrics::{
    bicubic_upscale_clip, profile_roughness, psnr_video, ssim, temporal_profile, CropPolicy,
};
use vidsr::synth::{smooth_texture, translating_clip};

fn main() {
    // Pooled vs averaged PSNR on a two-frame case.
    let base = vidsr::tensor::TensorData::<f64>::filled(&[1, 32, 32], 0.5);
    let off = base.map(|v| v + 0.1);
    let reference = VideoClip::new(vec![base.clone(), base.clone()]).unwrap();
    let test = VideoClip::new(vec![off, base.clone()]).unwrap();
    let pooled = psnr_video(&reference, &test, CropPolicy::NONE, 1.0).unwrap();
    println!("pooled video PSNR: {pooled:.3} dB (frame-averaged would be infinite)");

    // SSIM of an image with itself and with an unrelated texture.
    let a = smooth_texture::<f64>(32, 32, 2, 1);
    let b = smooth_texture::<f64>(32, 32, 2, 2);
    println!("SSIM(a, a) = {:.6}", ssim(&a, &a).unwrap());
    println!("SSIM(a, b) = {:.6}", ssim(&a, &b).unwrap());

    // Bicubic baseline against the ground truth on a panning clip.
    let master = smooth_texture::<f64>(160, 160, 3, 7);
    let hr = translating_clip(&master, 8, 96, 96, 1.3, 0.4).unwrap();
    let lr = VideoClip::new(
        hr.frames()
            .iter()
            .map(|f| downscale(f, 3).unwrap())
            .collect(),
    )
    .unwrap();
    let bicubic = bicubic_upscale_clip(&lr, 3).unwrap();
    let psnr = psnr_video(&hr, &bicubic, CropPolicy::default(), 1.0).unwrap();
    println!("bicubic x3 PSNR on a panning texture: {psnr:.3} dB");

    // Temporal profiles: ground truth pans coherently, bicubic flickers.
    let row = 48;
    let p_hr = temporal_profile(&hr, row).unwrap();
    let p_bi = temporal_profile(&bicubic, row).unwrap();
    println!(
        "profile roughness: ground truth {:.5}, bicubic {:.5}",
        profile_roughness(&p_hr),
        profile_roughness(&p_bi)
    );
}

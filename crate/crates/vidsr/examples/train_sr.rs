//! Trains a three-frame early-fusion network on synthetic textures and
//! compares it against the bicubic baseline on held-out clips of the same
//! distribution.
//!
//!     cargo run --release --example train_sr [epochs] [lr]

use vidsr::data::{downscale, extract_samples, frame_block, VideoClip};
use vidsr::metrics::{bicubic_upscale, psnr_video, CropPolicy};
use vidsr::network::{FusionKind, NetworkSpec, SrNetwork};
use vidsr::synth::translation_dataset;
use vidsr::tensor::Tensor;
use vidsr::train::{train_sr, TrainConfig, TrainerState};

fn main() {
    let mut args = std::env::args().skip(1);
    let epochs: usize = args.next().and_then(|a| a.parse().ok()).unwrap_or(60);
    let lr: f64 = args.next().and_then(|a| a.parse().ok()).unwrap_or(1e-3);
    let r = 3usize;

    // Slowly panning textured clips; four for training, two held out.
    let velocities: [(f64, f64); 6] = [
        (1.5, 0.7),
        (-1.2, 0.9),
        (2.1, -0.5),
        (0.8, 1.6),
        (-1.8, -1.1),
        (1.1, 1.2),
    ];
    let clips = translation_dataset::<f32>(&velocities, 5, 204, 204, 3, 77).unwrap();
    let (train_clips, held_out) = clips.split_at(4);

    let samples = extract_samples(train_clips, 3, r, 12, 5).unwrap();
    println!(
        "dataset: {} train / {} validation patches",
        samples.train().len(),
        samples.validation().len()
    );

    let spec = NetworkSpec::build(FusionKind::Early, 5, 3, r, None).unwrap();
    let net = SrNetwork::<f32>::init(spec, 13).unwrap();
    let config = TrainConfig::sr(epochs, 99).with_lr(lr);
    let mut state = TrainerState::fresh(config.lr, &net.parameters());
    let t0 = std::time::Instant::now();
    let history = train_sr(&net, &samples, &config, &mut state).unwrap();
    println!(
        "trained {} epochs in {:.1} s: train MSE {:.3e} -> {:.3e}",
        history.len(),
        t0.elapsed().as_secs_f64(),
        history[0].total,
        history.last().unwrap().total
    );
    for window in history.chunks(10) {
        let mean: f64 = window.iter().map(|r| r.total).sum::<f64>() / window.len() as f64;
        println!("  epochs {:3}..{:3}: mean MSE {mean:.4e}", window[0].epoch, window.last().unwrap().epoch);
    }

    // Held-out comparison on interior frames.
    let crop = CropPolicy { border: 8, frames: 0 };
    let mut net_frames = Vec::new();
    let mut bicubic_frames = Vec::new();
    let mut truth_frames = Vec::new();
    for clip in held_out {
        for t in 1..clip.len() - 1 {
            let block = frame_block(clip, t, 1, r).unwrap();
            let out = net
                .forward(&Tensor::constant(block.lr_frames.clone()))
                .unwrap()
                .value();
            let (h, w) = (out.shape()[2], out.shape()[3]);
            net_frames.push(out.reshaped(&[1, h, w]).unwrap());
            let lr_center = downscale(
                &block.hr_center.clone().reshaped(&[1, h, w]).unwrap(),
                r,
            )
            .unwrap();
            bicubic_frames.push(bicubic_upscale(&lr_center, r).unwrap());
            truth_frames.push(block.hr_center.clone().reshaped(&[1, h, w]).unwrap());
        }
    }
    let truth = VideoClip::new(truth_frames).unwrap();
    let ours = VideoClip::new(net_frames).unwrap();
    let base = VideoClip::new(bicubic_frames).unwrap();
    let psnr_net = psnr_video(&truth, &ours, crop, 1.0).unwrap();
    let psnr_bicubic = psnr_video(&truth, &base, crop, 1.0).unwrap();
    println!("held-out PSNR: trained {psnr_net:.3} dB, bicubic {psnr_bicubic:.3} dB");
    println!("margin over bicubic: {:+.3} dB", psnr_net - psnr_bicubic);
}

//! Streams a clip through a weight-shared slow-fusion network frame by
//! frame, verifying the outputs against block-mode inference and showing the
//! per-layer slice reuse.

use vidsr::data::{downscale, frame_block};
use vidsr::network::{forward_sr, FusionKind, NetworkSpec, SrNetwork};
use vidsr::streaming::{steady_state_finish, steady_state_forward, ActivationCache};
use vidsr::synth::{smooth_texture, translating_clip};

fn main() {
    let spec = NetworkSpec::build(FusionKind::SlowShared, 7, 5, 2, None).unwrap();
    let net = SrNetwork::<f64>::init(spec, 9).unwrap();
    let master = smooth_texture::<f64>(96, 96, 2, 5);
    let hr_clip = translating_clip(&master, 10, 48, 48, 1.2, -0.6).unwrap();
    let lr: Vec<_> = hr_clip
        .frames()
        .iter()
        .map(|f| downscale(f, 2).unwrap())
        .collect();

    let mut cache = ActivationCache::new(&net).unwrap();
    let mut streamed = Vec::new();
    for (i, f) in lr.iter().enumerate() {
        if let Some(out) = steady_state_forward(&net, f, &mut cache).unwrap() {
            streamed.push(out);
        }
        println!(
            "push {:2}: slices computed per layer {:?}",
            i,
            cache.computed_last_push()
        );
    }
    streamed.extend(steady_state_finish(&net, &mut cache).unwrap());

    let mut worst = 0.0f64;
    for (t, got) in streamed.iter().enumerate() {
        let block = frame_block(&hr_clip, t, 2, 2).unwrap();
        let want = forward_sr(&net, &block).unwrap();
        worst = worst.max(got.max_abs_diff(&want));
    }
    println!(
        "streamed {} frames; worst deviation from block mode: {:.3e}",
        streamed.len(),
        worst
    );
}

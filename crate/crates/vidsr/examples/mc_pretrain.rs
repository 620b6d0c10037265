//! Pretrains the motion-compensation module on synthetic clips with known
//! global translations and reports how accurately the flow recovers them.
//!
//!     cargo run --release --example mc_pretrain [epochs] [lr]

use vidsr::motion::{translation_flow_error, McNetwork};
use vidsr::synth::translation_dataset;
use vidsr::train::{mc_photometric, pretrain_mc, triples_from_clips, TrainConfig, TrainerState};

fn main() {
    let mut args = std::env::args().skip(1);
    let epochs: usize = args.next().and_then(|a| a.parse().ok()).unwrap_or(60);
    let lr: f64 = args.next().and_then(|a| a.parse().ok()).unwrap_or(2e-3);

    let velocities: [(f64, f64); 6] = [
        (2.0, 0.0),
        (0.0, 2.0),
        (-1.5, 1.0),
        (1.0, -2.0),
        (3.0, 0.0),
        (-2.0, -2.0),
    ];
    let clips = translation_dataset::<f32>(&velocities, 5, 64, 64, 0, 2024).unwrap();
    let samples = triples_from_clips(&clips, 7).unwrap();
    let net = McNetwork::<f32>::init(11).unwrap();

    let before = mc_photometric(&net, &samples.train()).unwrap();
    println!("photometric at initialisation: {before:.6e}");

    let config = TrainConfig::mc_pretrain(epochs, 3).with_lr(lr);
    let mut state = TrainerState::fresh(config.lr, &net.parameters());
    let t0 = std::time::Instant::now();
    let history = pretrain_mc(&net, &samples, &config, &mut state).unwrap();
    println!(
        "trained {} epochs in {:.1} s (final total loss {:.6e})",
        history.len(),
        t0.elapsed().as_secs_f64(),
        history.last().unwrap().total
    );

    let after = mc_photometric(&net, &samples.train()).unwrap();
    println!(
        "photometric after training:    {after:.6e} ({:.1}x reduction)",
        before / after
    );

    let mut worst = 0.0f64;
    let mut mean_acc = 0.0;
    for (clip, &(dx, dy)) in clips.iter().zip(&velocities) {
        // The flow that warps frame t+1 back onto frame t is -velocity.
        let err = translation_flow_error(
            &net,
            &clip.frames()[1],
            &clip.frames()[2],
            (-dx, -dy),
            8,
        )
        .unwrap();
        println!("velocity ({dx:+.1}, {dy:+.1}): mean interior flow error {err:.3} px");
        worst = worst.max(err);
        mean_acc += err;
    }
    println!(
        "mean over clips: {:.3} px, worst {:.3} px",
        mean_acc / velocities.len() as f64,
        worst
    );
}

//! Operator surface: dataset preparation, training, inference, evaluation
//! and cost reporting.
//!
//! Every command reads an optional JSON config file; command-line flags win
//! over file values. Unknown config keys are rejected before any
//! computation. Exit codes: 0 success, 1 computation failure, 2 usage or
//! configuration error.

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::checkpoint::{Checkpoint, CheckpointKind};
use crate::cost;
use crate::data::{extract_samples_sized, frame_block, VideoClip};
use crate::error::{Error, Result};
use crate::io;
use crate::metrics::{psnr_video, ssim, temporal_profile, CropPolicy};
use crate::motion::{compensate_block, McNetwork};
use crate::network::{FusionKind, NetworkSpec, SrNetwork};
use crate::optim::AdamState;
use crate::tensor::{Tensor, TensorData};
use crate::train::{
    pretrain_mc, train_joint, train_sr, Regime, TrainConfig, TrainerState,
};

#[derive(Parser)]
#[command(
    name = "vidsr",
    version,
    about = "Spatio-temporal video super-resolution with learned motion compensation"
)]
pub struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Extract training patches from frame directories into a dataset.
    PrepareData(PrepareArgs),
    /// Train a network (sr, mc-pretrain or joint regime).
    Train(TrainArgs),
    /// Super-resolve a clip with a trained checkpoint.
    SuperResolve(SuperResolveArgs),
    /// Compare a test clip against a reference and report metrics.
    Evaluate(EvaluateArgs),
    /// Print per-network operation counts for a target resolution.
    CostReport(CostArgs),
}

/// Distinguishes "the operator asked for something invalid" (exit 2) from
/// "the computation failed" (exit 1).
enum CmdError {
    Usage(String),
    Failure(Error),
}

impl From<Error> for CmdError {
    fn from(e: Error) -> Self {
        CmdError::Failure(e)
    }
}

type CmdResult<T> = std::result::Result<T, CmdError>;

fn usage(msg: impl Into<String>) -> CmdError {
    CmdError::Usage(msg.into())
}

pub fn main() -> i32 {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::PrepareData(a) => cmd_prepare_data(a),
        Command::Train(a) => cmd_train(a),
        Command::SuperResolve(a) => cmd_super_resolve(a),
        Command::Evaluate(a) => cmd_evaluate(a),
        Command::CostReport(a) => cmd_cost_report(a),
    };
    match outcome {
        Ok(()) => 0,
        Err(CmdError::Failure(e)) => {
            eprintln!("error: {e}");
            1
        }
        Err(CmdError::Usage(msg)) => {
            eprintln!("error: {msg}");
            2
        }
    }
}

fn load_file_config<C: DeserializeOwned + Default>(path: &Option<PathBuf>) -> CmdResult<C> {
    match path {
        None => Ok(C::default()),
        Some(p) => {
            let bytes = std::fs::read(p)
                .map_err(|e| usage(format!("cannot read config {}: {e}", p.display())))?;
            serde_json::from_slice(&bytes)
                .map_err(|e| usage(format!("config {}: {e}", p.display())))
        }
    }
}

fn pick<T: Clone>(flag: &Option<T>, file: &Option<T>, default: T) -> T {
    flag.clone().or_else(|| file.clone()).unwrap_or(default)
}

fn require<T: Clone>(flag: &Option<T>, file: &Option<T>, name: &str) -> CmdResult<T> {
    flag.clone()
        .or_else(|| file.clone())
        .ok_or_else(|| usage(format!("missing required option --{name}")))
}

// ---------------------------------------------------------------------------
// prepare-data
// ---------------------------------------------------------------------------

#[derive(Args)]
struct PrepareArgs {
    /// JSON config file; flags override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Frame directories, one clip each.
    #[arg(long = "frames-dir")]
    frames_dir: Vec<PathBuf>,
    /// Output dataset directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Upscaling factor.
    #[arg(long)]
    r: Option<usize>,
    /// Temporal block depth (odd).
    #[arg(long)]
    d0: Option<usize>,
    /// Low-resolution patch extent.
    #[arg(long)]
    patch: Option<usize>,
    #[arg(long = "samples-per-clip")]
    samples_per_clip: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Deserialize, Default)]
#[serde(deny_unknown_fields, default)]
struct PrepareFileConfig {
    frames_dir: Option<Vec<PathBuf>>,
    out: Option<PathBuf>,
    r: Option<usize>,
    d0: Option<usize>,
    patch: Option<usize>,
    samples_per_clip: Option<usize>,
    seed: Option<u64>,
}

fn cmd_prepare_data(args: PrepareArgs) -> CmdResult<()> {
    let file: PrepareFileConfig = load_file_config(&args.config)?;
    let dirs = if args.frames_dir.is_empty() {
        file.frames_dir.clone().unwrap_or_default()
    } else {
        args.frames_dir.clone()
    };
    if dirs.is_empty() {
        return Err(usage("no --frames-dir given"));
    }
    let out = require(&args.out, &file.out, "out")?;
    let r = pick(&args.r, &file.r, 3);
    let d0 = pick(&args.d0, &file.d0, 3);
    let patch = pick(&args.patch, &file.patch, crate::data::LR_PATCH_SIZE);
    let samples_per_clip = pick(&args.samples_per_clip, &file.samples_per_clip, 30);
    let seed = pick(&args.seed, &file.seed, 0);

    let mut failures = Vec::new();
    let mut clips: Vec<VideoClip<f32>> = Vec::new();
    let mut names = Vec::new();
    for d in &dirs {
        match io::read_clip::<f32>(d) {
            Ok(c) => {
                clips.push(c);
                names.push(d.display().to_string());
            }
            Err(e) => failures.push(format!("{}: {e}", d.display())),
        }
    }
    if !failures.is_empty() {
        for f in &failures {
            eprintln!("unreadable clip: {f}");
        }
        return Err(usage(format!("{} clip(s) could not be read", failures.len())));
    }

    let set = extract_samples_sized(&clips, d0, r, patch, samples_per_clip, seed)?;
    for w in &set.warnings {
        eprintln!("warning: {w}");
    }
    let manifest = io::write_dataset(&set, &names, samples_per_clip, &out)?;
    println!(
        "wrote {} samples ({} train / {} validation) to {}",
        set.records.len(),
        set.train().len(),
        set.validation().len(),
        manifest.display()
    );
    Ok(())
}

// ---------------------------------------------------------------------------
// train
// ---------------------------------------------------------------------------

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum FusionArg {
    Sf,
    Early,
    Slow,
    SlowShared,
}

impl From<FusionArg> for FusionKind {
    fn from(f: FusionArg) -> FusionKind {
        match f {
            FusionArg::Sf => FusionKind::SingleFrame,
            FusionArg::Early => FusionKind::Early,
            FusionArg::Slow => FusionKind::Slow,
            FusionArg::SlowShared => FusionKind::SlowShared,
        }
    }
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum RegimeArg {
    Sr,
    McPretrain,
    Joint,
}

impl From<RegimeArg> for Regime {
    fn from(r: RegimeArg) -> Regime {
        match r {
            RegimeArg::Sr => Regime::Sr,
            RegimeArg::McPretrain => Regime::McPretrain,
            RegimeArg::Joint => Regime::Joint,
        }
    }
}

#[derive(Args)]
struct TrainArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    /// Training regime.
    #[arg(long, value_enum)]
    regime: Option<RegimeArg>,
    /// Dataset manifest written by prepare-data.
    #[arg(long)]
    data: Option<PathBuf>,
    /// Output directory for checkpoints and the run log.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Fusion family for fresh sr-regime networks.
    #[arg(long, value_enum)]
    fusion: Option<FusionArg>,
    /// Layer count for fresh networks.
    #[arg(long)]
    layers: Option<usize>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    lr: Option<f64>,
    #[arg(long)]
    beta: Option<f64>,
    #[arg(long)]
    lambda: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long = "checkpoint-every")]
    checkpoint_every: Option<usize>,
    /// Resume a previous run bitwise from its checkpoint.
    #[arg(long)]
    resume: Option<PathBuf>,
    /// Pretrained SR checkpoint (joint regime).
    #[arg(long = "sr-checkpoint")]
    sr_checkpoint: Option<PathBuf>,
    /// Pretrained MC checkpoint (joint regime).
    #[arg(long = "mc-checkpoint")]
    mc_checkpoint: Option<PathBuf>,
}

#[derive(Deserialize, Default)]
#[serde(deny_unknown_fields, default)]
struct TrainFileConfig {
    regime: Option<Regime>,
    data: Option<PathBuf>,
    out: Option<PathBuf>,
    fusion: Option<FusionKind>,
    layers: Option<usize>,
    epochs: Option<usize>,
    lr: Option<f64>,
    beta: Option<f64>,
    lambda: Option<f64>,
    seed: Option<u64>,
    checkpoint_every: Option<usize>,
    resume: Option<PathBuf>,
    sr_checkpoint: Option<PathBuf>,
    mc_checkpoint: Option<PathBuf>,
}

fn fresh_sr_network(
    fusion: FusionKind,
    layers: usize,
    d0: usize,
    r: usize,
    seed: u64,
) -> Result<SrNetwork<f32>> {
    let spec = NetworkSpec::build(fusion, layers, d0, r, None)?;
    SrNetwork::init(spec, seed)
}

fn cmd_train(args: TrainArgs) -> CmdResult<()> {
    let file: TrainFileConfig = load_file_config(&args.config)?;
    let regime: Regime = args
        .regime
        .map(Regime::from)
        .or(file.regime)
        .ok_or_else(|| usage("missing required option --regime"))?;
    let data = require(&args.data, &file.data, "data")?;
    let out = require(&args.out, &file.out, "out")?;
    if !data.exists() {
        return Err(usage(format!("dataset manifest {} not found", data.display())));
    }
    let samples = io::read_dataset(&data)?;

    let epochs = pick(&args.epochs, &file.epochs, 50);
    let seed = pick(&args.seed, &file.seed, 0);
    let mut config = match regime {
        Regime::Sr => TrainConfig::sr(epochs, seed),
        Regime::McPretrain => TrainConfig::mc_pretrain(epochs, seed),
        Regime::Joint => TrainConfig::joint(epochs, seed),
    };
    if let Some(lr) = args.lr.or(file.lr) {
        config.lr = lr;
    }
    if let Some(beta) = args.beta.or(file.beta) {
        config.beta = beta;
    }
    if let Some(lambda) = args.lambda.or(file.lambda) {
        config.lambda = lambda;
    }
    config.checkpoint_every = pick(&args.checkpoint_every, &file.checkpoint_every, 10);
    config.validate().map_err(|e| usage(e.to_string()))?;

    if regime != Regime::Sr && samples.patch % 4 != 0 {
        return Err(usage(format!(
            "motion compensation needs patches divisible by 4; this dataset uses {} \
             (re-run prepare-data with e.g. --patch 32)",
            samples.patch
        )));
    }

    // Assemble networks: resumed, pretrained, or fresh.
    let resume_path = args.resume.clone().or(file.resume);
    let (sr_net, mc_net, mut state): (
        Option<SrNetwork<f32>>,
        Option<McNetwork<f32>>,
        TrainerState<f32>,
    ) = if let Some(rp) = &resume_path {
        let ck = Checkpoint::load(rp)?;
        if ck.config_hash != config.trajectory_hash() {
            return Err(usage(
                "checkpoint was produced by a different training configuration; \
                 refusing to resume on a diverging trajectory",
            ));
        }
        let state = TrainerState {
            adam: ck.adam.clone(),
            next_epoch: ck.epoch,
        };
        (ck.sr, ck.mc, state)
    } else {
        match regime {
            Regime::Sr => {
                let fusion = args
                    .fusion
                    .map(FusionKind::from)
                    .or(file.fusion)
                    .unwrap_or(FusionKind::Early);
                let layers = pick(&args.layers, &file.layers, 5);
                let net = fresh_sr_network(fusion, layers, samples.d0, samples.r, seed)
                    .map_err(|e| usage(e.to_string()))?;
                let state = TrainerState::fresh(config.lr, &net.parameters());
                (Some(net), None, state)
            }
            Regime::McPretrain => {
                let net = McNetwork::<f32>::init(seed)?;
                let state = TrainerState::fresh(config.lr, &net.parameters());
                (None, Some(net), state)
            }
            Regime::Joint => {
                let sr_path = require(&args.sr_checkpoint, &file.sr_checkpoint, "sr-checkpoint")?;
                let mc_path = require(&args.mc_checkpoint, &file.mc_checkpoint, "mc-checkpoint")?;
                let sr_ck = Checkpoint::load(&sr_path)?;
                let mc_ck = Checkpoint::load(&mc_path)?;
                let sr = sr_ck
                    .sr
                    .ok_or_else(|| usage("--sr-checkpoint holds no SR network"))?;
                let mc = mc_ck
                    .mc
                    .ok_or_else(|| usage("--mc-checkpoint holds no MC network"))?;
                if sr.spec.input_depth != 3 {
                    return Err(usage(format!(
                        "joint training needs a three-frame SR network, checkpoint has D0 = {}",
                        sr.spec.input_depth
                    )));
                }
                let params: Vec<Tensor<f32>> =
                    sr.parameters().into_iter().chain(mc.parameters()).collect();
                let state = TrainerState::fresh(config.lr, &params);
                (Some(sr), Some(mc), state)
            }
        }
    };

    if let Some(net) = &sr_net {
        if net.spec.upscale != samples.r || net.spec.input_depth != samples.d0 {
            return Err(usage(format!(
                "network (D0 = {}, x{}) does not match the dataset (D0 = {}, x{})",
                net.spec.input_depth, net.spec.upscale, samples.d0, samples.r
            )));
        }
    }

    std::fs::create_dir_all(&out).map_err(Error::from)?;
    let log_path = out.join("runlog.jsonl");
    let mut log = std::fs::OpenOptions::new()
        .create(true)
        .append(true)
        .open(&log_path)
        .map_err(Error::from)?;

    let write_ck = |name: &str, epoch: usize, adam: &AdamState<f32>| -> Result<PathBuf> {
        let ck = Checkpoint {
            kind: match regime {
                Regime::Sr => CheckpointKind::Sr,
                Regime::McPretrain => CheckpointKind::Mc,
                Regime::Joint => CheckpointKind::Joint,
            },
            sr: sr_net.clone(),
            mc: mc_net.clone(),
            adam: adam.clone(),
            epoch,
            seed,
            config_hash: config.trajectory_hash(),
        };
        let path = out.join(name);
        ck.save(&path)?;
        Ok(path)
    };

    let mut best_val = f64::INFINITY;
    let start = state.next_epoch;
    for epoch in start..config.epochs {
        let mut upto = config.clone();
        upto.epochs = epoch + 1;
        let records = match regime {
            Regime::Sr => train_sr(sr_net.as_ref().unwrap(), &samples, &upto, &mut state)?,
            Regime::McPretrain => {
                pretrain_mc(mc_net.as_ref().unwrap(), &samples, &upto, &mut state)?
            }
            Regime::Joint => train_joint(
                sr_net.as_ref().unwrap(),
                mc_net.as_ref().unwrap(),
                &samples,
                &upto,
                &mut state,
            )?,
        };
        for rec in &records {
            use std::io::Write;
            let line = serde_json::to_string(rec).map_err(Error::from)?;
            writeln!(log, "{line}").map_err(Error::from)?;
            println!(
                "epoch {:4}  batch {:3}  total {:.6e}  val {}",
                rec.epoch,
                rec.batch_size,
                rec.total,
                rec.val_mse
                    .map_or("-".into(), |v| format!("{v:.6e}")),
            );
            if let Some(v) = rec.val_mse {
                if v < best_val {
                    best_val = v;
                    write_ck("best.vsr", rec.epoch + 1, &state.adam)?;
                }
            }
        }
        if config.checkpoint_every > 0 && (epoch + 1) % config.checkpoint_every == 0 {
            write_ck(&format!("ckpt-{:06}.vsr", epoch + 1), epoch + 1, &state.adam)?;
        }
    }
    let final_path = write_ck("final.vsr", config.epochs, &state.adam)?;
    println!("final checkpoint: {}", final_path.display());
    Ok(())
}

// ---------------------------------------------------------------------------
// super-resolve
// ---------------------------------------------------------------------------

#[derive(Args)]
struct SuperResolveArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    checkpoint: Option<PathBuf>,
    /// Directory of low-resolution input frames.
    #[arg(long)]
    input: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Output PNG bit depth (8 or 16).
    #[arg(long = "bit-depth")]
    bit_depth: Option<u8>,
    /// Directory for per-frame flow maps (joint checkpoints only).
    #[arg(long = "dump-flows")]
    dump_flows: Option<PathBuf>,
}

#[derive(Deserialize, Default)]
#[serde(deny_unknown_fields, default)]
struct SuperResolveFileConfig {
    checkpoint: Option<PathBuf>,
    input: Option<PathBuf>,
    out: Option<PathBuf>,
    bit_depth: Option<u8>,
    dump_flows: Option<PathBuf>,
}

fn cmd_super_resolve(args: SuperResolveArgs) -> CmdResult<()> {
    let file: SuperResolveFileConfig = load_file_config(&args.config)?;
    let ck_path = require(&args.checkpoint, &file.checkpoint, "checkpoint")?;
    let input = require(&args.input, &file.input, "input")?;
    let out = require(&args.out, &file.out, "out")?;
    let bit_depth = pick(&args.bit_depth, &file.bit_depth, 8);
    let dump_flows = args.dump_flows.clone().or(file.dump_flows);

    if !input.is_dir() {
        return Err(usage(format!("input directory {} not found", input.display())));
    }
    let ck = Checkpoint::load(&ck_path)?;
    let sr = ck
        .sr
        .as_ref()
        .ok_or_else(|| usage("checkpoint holds no SR network"))?;
    let use_mc = ck.kind == CheckpointKind::Joint;
    let clip = io::read_clip::<f32>(&input)?;

    if use_mc && (clip.height() % 4 != 0 || clip.width() % 4 != 0) {
        return Err(usage(format!(
            "motion compensation needs frames divisible by 4; got {}x{} \
             (crop to {}x{} first)",
            clip.height(),
            clip.width(),
            clip.height() - clip.height() % 4,
            clip.width() - clip.width() % 4
        )));
    }

    std::fs::create_dir_all(&out).map_err(Error::from)?;
    if let Some(d) = &dump_flows {
        std::fs::create_dir_all(d).map_err(Error::from)?;
    }
    let radius = (sr.spec.input_depth - 1) / 2;
    let mut frames = Vec::with_capacity(clip.len());
    for t in 0..clip.len() {
        // The clip is already low resolution: build the clamped window
        // without rescaling.
        let block = frame_block(&clip, t, radius, 1)?;
        let input_t = Tensor::constant(block.lr_frames.clone());
        let sr_frame = if use_mc {
            let mc = ck.mc.as_ref().expect("joint checkpoints carry MC");
            let comp = compensate_block(mc, &input_t)?;
            if let Some(dir) = &dump_flows {
                io::write_flo(&comp.flows[0], &dir.join(format!("{t:06}_prev.flo")))?;
                io::write_flo(&comp.flows[1], &dir.join(format!("{t:06}_next.flo")))?;
            }
            sr.forward(&comp.frames)?
        } else {
            sr.forward(&input_t)?
        };
        let v = sr_frame.value();
        let (h, w) = (v.shape()[2], v.shape()[3]);
        frames.push(v.reshaped(&[1, h, w])?);
    }
    let out_clip = VideoClip::new(frames)?;
    io::write_clip(&out_clip, &out, bit_depth)?;
    println!("wrote {} frames to {}", out_clip.len(), out.display());
    Ok(())
}

// ---------------------------------------------------------------------------
// evaluate
// ---------------------------------------------------------------------------

#[derive(Args)]
struct EvaluateArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    /// Ground-truth frames.
    #[arg(long)]
    reference: Option<PathBuf>,
    /// Frames under test.
    #[arg(long)]
    test: Option<PathBuf>,
    /// Spatial border to crop, in pixels.
    #[arg(long = "border-crop")]
    border_crop: Option<usize>,
    /// Frames to crop from each end.
    #[arg(long = "frame-crop")]
    frame_crop: Option<usize>,
    /// Metrics report file (JSON); stdout otherwise.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Row for temporal profiles.
    #[arg(long = "profile-row")]
    profile_row: Option<usize>,
    /// Directory for profile images.
    #[arg(long = "profiles-out")]
    profiles_out: Option<PathBuf>,
}

#[derive(Deserialize, Default)]
#[serde(deny_unknown_fields, default)]
struct EvaluateFileConfig {
    reference: Option<PathBuf>,
    test: Option<PathBuf>,
    border_crop: Option<usize>,
    frame_crop: Option<usize>,
    out: Option<PathBuf>,
    profile_row: Option<usize>,
    profiles_out: Option<PathBuf>,
}

#[derive(Serialize)]
struct MetricsReport {
    psnr_db: Option<f64>,
    psnr_infinite: bool,
    ssim_mean: f64,
    frames_compared: usize,
    pixels_per_frame: usize,
    border_crop: usize,
    frame_crop: usize,
}

fn cmd_evaluate(args: EvaluateArgs) -> CmdResult<()> {
    let file: EvaluateFileConfig = load_file_config(&args.config)?;
    let reference = require(&args.reference, &file.reference, "reference")?;
    let test = require(&args.test, &file.test, "test")?;
    let crop = CropPolicy {
        border: pick(&args.border_crop, &file.border_crop, 8),
        frames: pick(&args.frame_crop, &file.frame_crop, 1),
    };
    for d in [&reference, &test] {
        if !d.is_dir() {
            return Err(usage(format!("frame directory {} not found", d.display())));
        }
    }
    let ref_clip = io::read_clip::<f64>(&reference)?;
    let test_clip = io::read_clip::<f64>(&test)?;

    let psnr = psnr_video(&ref_clip, &test_clip, crop, 1.0)?;
    let (h, w) = (ref_clip.height(), ref_clip.width());
    let t0 = crop.frames;
    let t1 = ref_clip.len() - crop.frames;
    let mut ssim_sum = 0.0;
    for t in t0..t1 {
        let a = crop_border(&ref_clip.frames()[t], crop.border)?;
        let b = crop_border(&test_clip.frames()[t], crop.border)?;
        ssim_sum += ssim(&a, &b)?;
    }
    let frames_compared = t1 - t0;
    let report = MetricsReport {
        psnr_db: psnr.is_finite().then_some(psnr),
        psnr_infinite: psnr.is_infinite(),
        ssim_mean: ssim_sum / frames_compared as f64,
        frames_compared,
        pixels_per_frame: (h - 2 * crop.border) * (w - 2 * crop.border),
        border_crop: crop.border,
        frame_crop: crop.frames,
    };

    if let (Some(row), Some(dir)) = (
        args.profile_row.or(file.profile_row),
        args.profiles_out.clone().or(file.profiles_out),
    ) {
        std::fs::create_dir_all(&dir).map_err(Error::from)?;
        for (name, clip) in [("reference", &ref_clip), ("test", &test_clip)] {
            let p = temporal_profile(clip, row)?;
            let (n, width) = (p.shape()[0], p.shape()[1]);
            let img = p.reshaped(&[1, n, width])?;
            io::write_frame(&img, &dir.join(format!("profile_{name}.png")), 8)?;
        }
    }

    let json = serde_json::to_string_pretty(&report).map_err(Error::from)?;
    if psnr.is_finite() {
        println!("PSNR: {psnr:.4} dB");
    } else {
        println!("PSNR: inf dB (identical content)");
    }
    println!("SSIM: {:.6}", report.ssim_mean);
    match args.out.clone().or(file.out) {
        Some(p) => std::fs::write(&p, json + "\n").map_err(Error::from)?,
        None => println!("{json}"),
    }
    Ok(())
}

fn crop_border(frame: &TensorData<f64>, border: usize) -> Result<TensorData<f64>> {
    let (h, w) = (frame.shape()[1], frame.shape()[2]);
    if border == 0 {
        return Ok(frame.clone());
    }
    let (ch, cw) = (h - 2 * border, w - 2 * border);
    let src = frame.data();
    let mut out = Vec::with_capacity(ch * cw);
    for y in border..h - border {
        out.extend_from_slice(&src[y * w + border..y * w + w - border]);
    }
    TensorData::new(&[1, ch, cw], out)
}

// ---------------------------------------------------------------------------
// cost-report
// ---------------------------------------------------------------------------

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ReportFormat {
    Text,
    Json,
}

#[derive(Args)]
struct CostArgs {
    /// Output format.
    #[arg(long, value_enum, default_value = "text")]
    format: ReportFormat,
    /// Target high-resolution geometry, WIDTHxHEIGHT.
    #[arg(long, default_value = "1920x1080")]
    hr: String,
}

fn cmd_cost_report(args: CostArgs) -> CmdResult<()> {
    let (w, h) = args
        .hr
        .split_once('x')
        .and_then(|(a, b)| Some((a.parse::<usize>().ok()?, b.parse::<usize>().ok()?)))
        .ok_or_else(|| usage(format!("--hr must look like 1920x1080, got {}", args.hr)))?;
    let hr = (h, w);
    let arch = cost::architecture_table(hr)?;
    let bench = cost::benchmark_table(hr)?;
    match args.format {
        ReportFormat::Json => {
            let all: Vec<&cost::TableEntry> = arch.iter().chain(&bench).collect();
            println!(
                "{}",
                serde_json::to_string_pretty(&all).map_err(Error::from)?
            );
        }
        ReportFormat::Text => {
            println!("Spatio-temporal architectures, x3 upscaling to {h}x{w} (GOps/frame)");
            println!("{:<10} {:>8} {:>8} {:>8} {:>8}", "# Layers", "SF", "E5", "S5", "S5-SW");
            for layers in [7usize, 9] {
                let row: Vec<f64> = arch
                    .iter()
                    .filter(|e| e.layer_count == layers)
                    .map(|e| e.gops)
                    .collect();
                println!(
                    "{:<10} {:>8.2} {:>8.2} {:>8.2} {:>8.2}",
                    layers, row[0], row[1], row[2], row[3]
                );
            }
            println!();
            println!("Benchmark networks at {h}x{w} (GOps/frame)");
            println!(
                "{:<8} {:>10} {:>10} {:>10} {:>12} {:>20}",
                "Scale", "SRCNN", "ESPCN", "5L-E3", "9L-E3-MC", "MC (per estimation)"
            );
            for scale in [3usize, 4] {
                let row: Vec<f64> = bench
                    .iter()
                    .filter(|e| e.scale == scale)
                    .map(|e| e.gops)
                    .collect();
                println!(
                    "{:<8} {:>10.2} {:>10.2} {:>10.2} {:>12.2} {:>20.2}",
                    scale, row[0], row[1], row[2], row[3], row[4]
                );
            }
        }
    }
    Ok(())
}

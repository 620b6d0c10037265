//! The three training regimes: reconstruction-only, motion-compensation
//! pretraining (photometric plus smoothness, no reconstruction term), and
//! joint fine-tuning of both networks through a single backward pass.
//!
//! Batches follow the doubling schedule of `data::batch_size`, samples are
//! reshuffled each epoch with a seed derived from (run seed, epoch), and all
//! arithmetic runs in a fixed order, so fixed-seed runs are bitwise
//! reproducible and a checkpointed run resumes on the exact trajectory.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::data::{batch_size, SampleRecord, SampleSet};
use crate::error::{Error, Result};
use crate::loss::mse_loss;
use crate::motion::{compensate_block, McNetwork};
use crate::network::SrNetwork;
use crate::optim::{adam_step, AdamState};
use crate::scalar::Scalar;
use crate::tensor::{add, mean_of, scale, slice_depth, Tensor};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Regime {
    Sr,
    McPretrain,
    Joint,
}

impl std::fmt::Display for Regime {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            Regime::Sr => "sr",
            Regime::McPretrain => "mc-pretrain",
            Regime::Joint => "joint",
        };
        f.write_str(s)
    }
}

/// Hyperparameters of one training run.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrainConfig {
    pub regime: Regime,
    pub lr: f64,
    /// Photometric weight of the compensation terms.
    pub beta: f64,
    /// Smoothness weight of the compensation terms.
    pub lambda: f64,
    pub epochs: usize,
    pub seed: u64,
    pub checkpoint_every: usize,
    /// Optional global gradient-norm clip; off unless set.
    pub clip_grad: Option<f64>,
}

impl TrainConfig {
    pub fn sr(epochs: usize, seed: u64) -> Self {
        TrainConfig {
            regime: Regime::Sr,
            lr: 1e-4,
            beta: 0.0,
            lambda: 0.0,
            epochs,
            seed,
            checkpoint_every: 10,
            clip_grad: None,
        }
    }

    /// Pretraining ignores the reconstruction term: beta 1, lambda 0.01.
    pub fn mc_pretrain(epochs: usize, seed: u64) -> Self {
        TrainConfig {
            regime: Regime::McPretrain,
            beta: 1.0,
            lambda: 0.01,
            ..TrainConfig::sr(epochs, seed)
        }
    }

    /// Joint fine-tuning: beta 0.01, lambda 0.001.
    pub fn joint(epochs: usize, seed: u64) -> Self {
        TrainConfig {
            regime: Regime::Joint,
            beta: 0.01,
            lambda: 0.001,
            ..TrainConfig::sr(epochs, seed)
        }
    }

    pub fn with_lr(mut self, lr: f64) -> Self {
        self.lr = lr;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.beta < 0.0 || self.lambda < 0.0 {
            return Err(Error::config("beta and lambda must be non-negative"));
        }
        if self.lr <= 0.0 {
            return Err(Error::config("learning rate must be positive"));
        }
        Ok(())
    }

    /// Hash over the trajectory-relevant fields; resuming checks it.
    pub fn trajectory_hash(&self) -> String {
        use sha2::{Digest, Sha256};
        let key = format!(
            "{}|{}|{}|{}|{}|{:?}",
            self.regime, self.lr, self.beta, self.lambda, self.seed, self.clip_grad
        );
        let d = Sha256::digest(key.as_bytes());
        d.iter().map(|b| format!("{b:02x}")).collect()
    }
}

/// One line of the run log.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub batch_size: usize,
    /// Mean reconstruction term over the epoch's batches.
    pub reconstruction: f64,
    /// Mean beta-weighted photometric term.
    pub photometric: f64,
    /// Mean lambda-weighted smoothness term.
    pub smoothness: f64,
    /// Sum of the three components above.
    pub total: f64,
    pub val_mse: Option<f64>,
    pub val_psnr: Option<f64>,
}

/// Optimiser state that survives checkpointing.
#[derive(Debug, Clone)]
pub struct TrainerState<T: Scalar> {
    pub adam: AdamState<T>,
    pub next_epoch: usize,
}

impl<T: Scalar> TrainerState<T> {
    pub fn fresh(lr: f64, params: &[Tensor<T>]) -> Self {
        TrainerState {
            adam: AdamState::new(lr, params),
            next_epoch: 0,
        }
    }
}

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e3779b97f4a7c15);
    x = (x ^ (x >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94d049bb133111eb);
    x ^ (x >> 31)
}

/// Every epoch gets its own derived stream, so resuming at an epoch boundary
/// reproduces the shuffles of an uninterrupted run.
pub fn epoch_rng(seed: u64, epoch: usize) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(splitmix64(seed ^ (epoch as u64).wrapping_mul(0xa076_1d64_78bd_642f)))
}

fn clip_gradients<T: Scalar>(params: &[Tensor<T>], max_norm: f64) {
    let norm: f64 = params.iter().map(|p| p.grad_norm_sq()).sum::<f64>().sqrt();
    if norm > max_norm && norm > 0.0 {
        let factor = T::cast(max_norm / norm);
        for p in params {
            p.scale_grad(factor);
        }
    }
}

struct BatchTerms<T: Scalar> {
    loss: Tensor<T>,
    reconstruction: f64,
    photometric: f64,
    smoothness: f64,
}

/// Builds the per-sample loss graph for one regime.
fn sample_terms<T: Scalar>(
    regime: Regime,
    sr_net: Option<&SrNetwork<T>>,
    mc_net: Option<&McNetwork<T>>,
    record: &SampleRecord<T>,
    beta: f64,
    lambda: f64,
) -> Result<(Tensor<T>, f64, f64, f64)> {
    match regime {
        Regime::Sr => {
            let net = sr_net.expect("sr regime carries an SR network");
            let out = net.forward(&Tensor::constant(record.block.lr_frames.clone()))?;
            let target = Tensor::constant(record.block.hr_center.clone());
            let rec = mse_loss(&out, &target)?;
            let value = rec.item().as_f64();
            Ok((rec, value, 0.0, 0.0))
        }
        Regime::McPretrain | Regime::Joint => {
            let mc = mc_net.expect("regime carries an MC network");
            let block = Tensor::constant(record.block.lr_frames.clone());
            let comp = compensate_block(mc, &block)?;
            let center = slice_depth(&block, 1, 1)?;

            let mut photometric_v = 0.0;
            let mut smoothness_v = 0.0;
            let mut terms: Vec<Tensor<T>> = Vec::new();
            for (i, flow) in comp.flows.iter().enumerate() {
                let warped = slice_depth(&comp.frames, i * 2, 1)?;
                let photo = scale(&mse_loss(&center, &warped)?, T::cast(beta));
                photometric_v += photo.item().as_f64();
                terms.push(photo);
                if lambda > 0.0 {
                    let smooth = scale(
                        &crate::loss::huber_smoothness(&flow.delta, crate::motion::HUBER_EPS)?,
                        T::cast(lambda),
                    );
                    smoothness_v += smooth.item().as_f64();
                    terms.push(smooth);
                }
            }

            let mut reconstruction_v = 0.0;
            if regime == Regime::Joint {
                let net = sr_net.expect("joint regime carries an SR network");
                let out = net.forward(&comp.frames)?;
                let target = Tensor::constant(record.block.hr_center.clone());
                let rec = mse_loss(&out, &target)?;
                reconstruction_v = rec.item().as_f64();
                terms.insert(0, rec);
            }

            let mut loss = terms[0].clone();
            for t in &terms[1..] {
                loss = add(&loss, t)?;
            }
            Ok((loss, reconstruction_v, photometric_v, smoothness_v))
        }
    }
}

fn batch_terms<T: Scalar>(
    regime: Regime,
    sr_net: Option<&SrNetwork<T>>,
    mc_net: Option<&McNetwork<T>>,
    records: &[&SampleRecord<T>],
    batch: &[usize],
    beta: f64,
    lambda: f64,
) -> Result<BatchTerms<T>> {
    let mut losses = Vec::with_capacity(batch.len());
    let (mut rec, mut photo, mut smooth) = (0.0, 0.0, 0.0);
    for &i in batch {
        let (l, r, p, s) = sample_terms(regime, sr_net, mc_net, records[i], beta, lambda)?;
        losses.push(l);
        rec += r;
        photo += p;
        smooth += s;
    }
    let n = batch.len() as f64;
    Ok(BatchTerms {
        loss: mean_of(&losses)?,
        reconstruction: rec / n,
        photometric: photo / n,
        smoothness: smooth / n,
    })
}

/// Pooled validation MSE and PSNR of a (possibly compensated) SR pipeline.
///
/// Read-only and deterministic; an empty validation set is rejected.
pub fn validate<T: Scalar>(
    sr_net: &SrNetwork<T>,
    mc_net: Option<&McNetwork<T>>,
    records: &[&SampleRecord<T>],
) -> Result<(f64, f64)> {
    if records.is_empty() {
        return Err(Error::invalid("validation set is empty"));
    }
    let mut sq = 0.0f64;
    let mut n = 0usize;
    for rec in records {
        let input = Tensor::constant(rec.block.lr_frames.clone());
        let out = match mc_net {
            Some(mc) => {
                let comp = compensate_block(mc, &input)?;
                sr_net.forward(&comp.frames)?
            }
            None => sr_net.forward(&input)?,
        };
        let outv = out.value();
        for (a, b) in outv.data().iter().zip(rec.block.hr_center.data()) {
            let d = a.as_f64() - b.as_f64();
            sq += d * d;
            n += 1;
        }
    }
    let mse = sq / n as f64;
    let psnr = if mse == 0.0 {
        f64::INFINITY
    } else {
        10.0 * (1.0 / mse).log10()
    };
    Ok((mse, psnr))
}

/// Photometric error of the compensation module alone on a sample set:
/// the mean squared error between warped outer frames and the centre.
pub fn mc_photometric<T: Scalar>(mc: &McNetwork<T>, records: &[&SampleRecord<T>]) -> Result<f64> {
    if records.is_empty() {
        return Err(Error::invalid("empty sample set"));
    }
    let mut acc = 0.0;
    let mut n = 0usize;
    for rec in records {
        let block = Tensor::constant(rec.block.lr_frames.clone());
        let comp = compensate_block(mc, &block)?;
        let center = slice_depth(&block, 1, 1)?;
        for i in 0..2 {
            let warped = slice_depth(&comp.frames, i * 2, 1)?;
            acc += mse_loss(&center, &warped)?.item().as_f64();
            n += 1;
        }
    }
    Ok(acc / n as f64)
}

/// The shared epoch loop.
fn run_epochs<T: Scalar>(
    regime: Regime,
    sr_net: Option<&SrNetwork<T>>,
    mc_net: Option<&McNetwork<T>>,
    samples: &SampleSet<T>,
    config: &TrainConfig,
    state: &mut TrainerState<T>,
) -> Result<Vec<EpochRecord>> {
    config.validate()?;
    if config.regime != regime {
        return Err(Error::config(format!(
            "config regime {} does not match the requested {} run",
            config.regime, regime
        )));
    }
    let train = samples.train();
    if train.is_empty() {
        return Err(Error::invalid("training set is empty"));
    }
    let validation = samples.validation();

    let mut params: Vec<Tensor<T>> = Vec::new();
    if let Some(net) = sr_net {
        params.extend(net.parameters());
    }
    if let Some(net) = mc_net {
        params.extend(net.parameters());
    }
    for p in &params {
        p.zero_grad();
    }

    let mut history = Vec::with_capacity(config.epochs.saturating_sub(state.next_epoch));
    for epoch in state.next_epoch..config.epochs {
        let bs = batch_size(epoch);
        let mut order: Vec<usize> = (0..train.len()).collect();
        order.shuffle(&mut epoch_rng(config.seed, epoch));

        let (mut rec_sum, mut photo_sum, mut smooth_sum) = (0.0f64, 0.0f64, 0.0f64);
        let mut batches = 0usize;
        for batch in order.chunks(bs) {
            let terms = batch_terms(
                regime,
                sr_net,
                mc_net,
                &train,
                batch,
                config.beta,
                config.lambda,
            )?;
            terms.loss.backward()?;
            if let Some(max_norm) = config.clip_grad {
                clip_gradients(&params, max_norm);
            }
            adam_step(&params, &mut state.adam)?;
            rec_sum += terms.reconstruction;
            photo_sum += terms.photometric;
            smooth_sum += terms.smoothness;
            batches += 1;
        }
        let nb = batches as f64;
        let (reconstruction, photometric, smoothness) =
            (rec_sum / nb, photo_sum / nb, smooth_sum / nb);

        let (val_mse, val_psnr) = if validation.is_empty() || regime == Regime::McPretrain {
            (None, None)
        } else {
            let (m, p) = validate(
                sr_net.expect("validated regimes carry an SR network"),
                if regime == Regime::Joint { mc_net } else { None },
                &validation,
            )?;
            (Some(m), Some(p))
        };

        history.push(EpochRecord {
            epoch,
            batch_size: bs,
            reconstruction,
            photometric,
            smoothness,
            total: reconstruction + photometric + smoothness,
            val_mse,
            val_psnr,
        });
        state.next_epoch = epoch + 1;
    }
    Ok(history)
}

/// Reconstruction-only training of an SR network.
pub fn train_sr<T: Scalar>(
    net: &SrNetwork<T>,
    samples: &SampleSet<T>,
    config: &TrainConfig,
    state: &mut TrainerState<T>,
) -> Result<Vec<EpochRecord>> {
    if samples.d0 != net.spec.input_depth {
        return Err(Error::config(format!(
            "samples have D0 = {} but the network expects {}",
            samples.d0, net.spec.input_depth
        )));
    }
    if samples.r != net.spec.upscale {
        return Err(Error::config(format!(
            "samples were built for x{} but the network upscales x{}",
            samples.r, net.spec.upscale
        )));
    }
    run_epochs(Regime::Sr, Some(net), None, samples, config, state)
}

/// Trains the compensation module alone on three-frame samples, minimising
/// the photometric and smoothness terms.
pub fn pretrain_mc<T: Scalar>(
    mc: &McNetwork<T>,
    samples: &SampleSet<T>,
    config: &TrainConfig,
    state: &mut TrainerState<T>,
) -> Result<Vec<EpochRecord>> {
    if samples.d0 != 3 {
        return Err(Error::config(
            "motion-compensation pretraining needs three-frame samples",
        ));
    }
    run_epochs(Regime::McPretrain, None, Some(mc), samples, config, state)
}

/// Joint fine-tuning of a three-frame SR network and the compensation
/// module through one backward pass per batch.
pub fn train_joint<T: Scalar>(
    sr_net: &SrNetwork<T>,
    mc: &McNetwork<T>,
    samples: &SampleSet<T>,
    config: &TrainConfig,
    state: &mut TrainerState<T>,
) -> Result<Vec<EpochRecord>> {
    if sr_net.spec.input_depth != 3 {
        return Err(Error::config(format!(
            "joint training compensates 3-frame blocks; the SR network expects D0 = {}",
            sr_net.spec.input_depth
        )));
    }
    if samples.d0 != 3 {
        return Err(Error::config("joint training needs three-frame samples"));
    }
    run_epochs(Regime::Joint, Some(sr_net), Some(mc), samples, config, state)
}

/// Builds an in-memory sample set directly from frame blocks (bypassing the
/// patch sampler); the spatial extents must suit the networks involved.
pub fn sample_set_from_blocks<T: Scalar>(
    blocks: Vec<crate::data::FrameBlock<T>>,
    validation: Vec<crate::data::FrameBlock<T>>,
    r: usize,
    d0: usize,
    seed: u64,
) -> SampleSet<T> {
    let patch = blocks
        .first()
        .or(validation.first())
        .map_or(0, |b| b.lr_width());
    let mut records: Vec<SampleRecord<T>> = Vec::new();
    for b in blocks {
        records.push(SampleRecord {
            block: b,
            clip: 0,
            origin: (0, 0),
            split: crate::data::Split::Train,
        });
    }
    for b in validation {
        records.push(SampleRecord {
            block: b,
            clip: 0,
            origin: (0, 0),
            split: crate::data::Split::Validation,
        });
    }
    SampleSet {
        records,
        r,
        d0,
        seed,
        patch,
        warnings: Vec::new(),
    }
}

/// Collects the `[3,1,h,w]` blocks of every interior frame of each clip as a
/// training set for the compensation module (identity HR targets; the
/// pretraining regime never reads them).
pub fn triples_from_clips<T: Scalar>(
    clips: &[crate::data::VideoClip<T>],
    seed: u64,
) -> Result<SampleSet<T>> {
    let mut blocks = Vec::new();
    for clip in clips {
        for t in 1..clip.len().saturating_sub(1) {
            blocks.push(crate::data::frame_block(clip, t, 1, 1)?);
        }
    }
    if blocks.is_empty() {
        return Err(Error::invalid("no interior frames to build triples from"));
    }
    Ok(sample_set_from_blocks(blocks, Vec::new(), 1, 3, seed))
}

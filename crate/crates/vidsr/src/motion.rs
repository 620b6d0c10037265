//! Spatial-transformer motion compensation.
//!
//! Two frames are early-fused and pushed through a strided stack that
//! estimates a x4-coarse flow; a second stack refines it at x2 using the
//! coarsely warped frame, the coarse flow and both originals. Warping the
//! target frame with the summed flow yields the compensated frame. Both
//! stages end in tanh, so emitted flows live in the normalised [-1, 1]
//! displacement range. Output heads start at zero, making the untrained
//! module an exact identity warp.

use crate::conv::{conv_forward, ConvWeights, Padding};
use crate::error::{Error, Result};
use crate::loss::{huber_smoothness, mse_loss};
use crate::scalar::Scalar;
use crate::shuffle::pixel_shuffle;
use crate::tensor::{
    activation, add, concat_channels, concat_depth, reshape, scale, slice_depth, Activation,
    Tensor,
};
use crate::warp::bilinear_warp;

/// Smoothness epsilon of the flow regulariser.
pub const HUBER_EPS: f64 = 0.01;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FlowKind {
    /// Output of the x4 coarse stage.
    Coarse,
    /// Residual refinement from the fine stage.
    Fine,
    /// Coarse plus fine; what the final warp uses.
    Total,
}

/// Per-pixel displacement map in normalised units, channels `(dx, dy)`.
#[derive(Debug, Clone)]
pub struct FlowField<T: Scalar> {
    pub delta: Tensor<T>,
    pub kind: FlowKind,
}

impl<T: Scalar> FlowField<T> {
    /// Mean displacement over an interior window, in pixels.
    pub fn mean_pixel_displacement(&self, margin: usize) -> (f64, f64) {
        let v = self.delta.value();
        let (h, w) = (v.shape()[1], v.shape()[2]);
        let hw = h * w;
        let (mut sx, mut sy, mut n) = (0.0, 0.0, 0usize);
        for y in margin..h.saturating_sub(margin) {
            for x in margin..w.saturating_sub(margin) {
                sx += v.data()[y * w + x].as_f64();
                sy += v.data()[hw + y * w + x].as_f64();
                n += 1;
            }
        }
        let px = (w as f64 - 1.0) / 2.0;
        let py = (h as f64 - 1.0) / 2.0;
        if n == 0 {
            (0.0, 0.0)
        } else {
            (sx / n as f64 * px, sy / n as f64 * py)
        }
    }
}

/// Geometry of one convolution in a flow stack.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct McLayerSpec {
    pub kernel: usize,
    pub in_features: usize,
    pub out_features: usize,
    pub stride: usize,
    pub activation: Activation,
}

/// The fixed coarse/fine architecture (kernel, features, stride):
/// coarse k5n24s2, k3n24s1, k5n24s2, k3n24s1, k3n32s1-tanh, sub-pixel x4;
/// fine k5n24s2, k3n24s1 x3, k3n8s1-tanh, sub-pixel x2.
#[derive(Debug, Clone)]
pub struct McArchitecture {
    pub coarse: Vec<McLayerSpec>,
    pub fine: Vec<McLayerSpec>,
    pub coarse_upscale: usize,
    pub fine_upscale: usize,
}

impl McArchitecture {
    pub fn standard() -> Self {
        use Activation::{Relu, Tanh};
        let l = |k, i, o, s, a| McLayerSpec {
            kernel: k,
            in_features: i,
            out_features: o,
            stride: s,
            activation: a,
        };
        McArchitecture {
            coarse: vec![
                l(5, 2, 24, 2, Relu),
                l(3, 24, 24, 1, Relu),
                l(5, 24, 24, 2, Relu),
                l(3, 24, 24, 1, Relu),
                l(3, 24, 32, 1, Tanh),
            ],
            fine: vec![
                l(5, 5, 24, 2, Relu),
                l(3, 24, 24, 1, Relu),
                l(3, 24, 24, 1, Relu),
                l(3, 24, 24, 1, Relu),
                l(3, 24, 8, 1, Tanh),
            ],
            coarse_upscale: 4,
            fine_upscale: 2,
        }
    }
}

#[derive(Debug, Clone)]
pub struct McLayer<T: Scalar> {
    pub spec: McLayerSpec,
    pub kernel: ConvWeights<T>,
}

/// Motion-compensation network: coarse and fine flow stacks with one shared
/// parameter set applied to both outer frames of a block.
#[derive(Debug, Clone)]
pub struct McNetwork<T: Scalar> {
    pub arch: McArchitecture,
    pub coarse: Vec<McLayer<T>>,
    pub fine: Vec<McLayer<T>>,
}

impl<T: Scalar> McNetwork<T> {
    /// Hidden layers orthogonal with gain sqrt(2); the tanh output heads are
    /// zero-initialised so the module starts as an identity warp.
    pub fn init(seed: u64) -> Result<Self> {
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let arch = McArchitecture::standard();
        let build = |specs: &[McLayerSpec], rng: &mut rand_chacha::ChaCha8Rng| {
            specs
                .iter()
                .map(|s| {
                    let kernel = if s.activation == Activation::Tanh {
                        ConvWeights::zeros(1, s.in_features, s.out_features, s.kernel)?
                    } else {
                        ConvWeights::orthogonal(
                            1,
                            s.in_features,
                            s.out_features,
                            s.kernel,
                            crate::network::INIT_GAIN,
                            rng,
                        )?
                    };
                    Ok(McLayer { spec: *s, kernel })
                })
                .collect::<Result<Vec<_>>>()
        };
        let coarse = build(&arch.coarse, &mut rng)?;
        let fine = build(&arch.fine, &mut rng)?;
        Ok(McNetwork { arch, coarse, fine })
    }

    /// Parameters in declaration order: coarse stack then fine stack, per
    /// layer weights then bias.
    pub fn parameters(&self) -> Vec<Tensor<T>> {
        self.coarse
            .iter()
            .chain(&self.fine)
            .flat_map(|l| l.kernel.parameters())
            .collect()
    }

    pub fn zero_grad(&self) {
        for p in self.parameters() {
            p.zero_grad();
        }
    }
}

fn run_stack<T: Scalar>(layers: &[McLayer<T>], mut x: Tensor<T>) -> Result<Tensor<T>> {
    for l in layers {
        let y = conv_forward(&x, &l.kernel, l.spec.stride, Padding::Same)?;
        x = activation(&y, l.spec.activation);
    }
    Ok(x)
}

fn check_frame<T: Scalar>(frame: &Tensor<T>, divisor: usize) -> Result<(usize, usize)> {
    let s = frame.shape();
    if s.len() != 4 || s[0] != 1 || s[1] != 1 {
        return Err(Error::shape(format!(
            "flow estimation expects [1,1,H,W] frames, got {:?}",
            s
        )));
    }
    let (h, w) = (s[2], s[3]);
    if h % divisor != 0 || w % divisor != 0 {
        return Err(Error::shape(format!(
            "frame {}x{} is not divisible by {} (crop or pad first)",
            h, w, divisor
        )));
    }
    Ok((h, w))
}

/// x4-coarse flow from an early fusion of the two frames.
pub fn coarse_flow<T: Scalar>(
    net: &McNetwork<T>,
    frame_t: &Tensor<T>,
    frame_tk: &Tensor<T>,
) -> Result<FlowField<T>> {
    let (h, w) = check_frame(frame_t, 4)?;
    let (h2, w2) = check_frame(frame_tk, 4)?;
    if (h, w) != (h2, w2) {
        return Err(Error::shape(format!(
            "frame sizes differ: {h}x{w} vs {h2}x{w2}"
        )));
    }
    let fused = concat_channels(&[frame_t.clone(), frame_tk.clone()])?;
    let features = run_stack(&net.coarse, fused)?;
    let full = pixel_shuffle(&features, net.arch.coarse_upscale)?;
    let delta = reshape(&full, &[2, h, w])?;
    Ok(FlowField {
        delta,
        kind: FlowKind::Coarse,
    })
}

/// x2-refinement from the originals, the coarse flow and the coarsely warped
/// frame, concatenated in that order into five channels.
pub fn fine_flow<T: Scalar>(
    net: &McNetwork<T>,
    frame_t: &Tensor<T>,
    frame_tk: &Tensor<T>,
    coarse: &FlowField<T>,
    warped_coarse: &Tensor<T>,
) -> Result<FlowField<T>> {
    let (h, w) = check_frame(frame_t, 2)?;
    let flow_2ch = reshape(&coarse.delta, &[1, 2, h, w])?;
    let stacked = concat_channels(&[
        frame_t.clone(),
        frame_tk.clone(),
        flow_2ch,
        warped_coarse.clone(),
    ])?;
    let features = run_stack(&net.fine, stacked)?;
    let full = pixel_shuffle(&features, net.arch.fine_upscale)?;
    let delta = reshape(&full, &[2, h, w])?;
    Ok(FlowField {
        delta,
        kind: FlowKind::Fine,
    })
}

/// Estimates the total flow for `frame_tk` relative to `frame_t` and warps
/// `frame_tk` with it.
pub fn compensate<T: Scalar>(
    net: &McNetwork<T>,
    frame_t: &Tensor<T>,
    frame_tk: &Tensor<T>,
) -> Result<(Tensor<T>, FlowField<T>)> {
    let coarse = coarse_flow(net, frame_t, frame_tk)?;
    let warped_coarse = bilinear_warp(frame_tk, &coarse.delta)?;
    let fine = fine_flow(net, frame_t, frame_tk, &coarse, &warped_coarse)?;
    let total = FlowField {
        delta: add(&coarse.delta, &fine.delta)?,
        kind: FlowKind::Total,
    };
    let warped = bilinear_warp(frame_tk, &total.delta)?;
    Ok((warped, total))
}

/// A three-frame block with the outer frames warped toward the centre.
#[derive(Debug, Clone)]
pub struct CompensatedBlock<T: Scalar> {
    /// `[3, 1, h, w]`; the centre slice is bitwise the original centre frame.
    pub frames: Tensor<T>,
    /// Total flows for the previous and next frame, in that order.
    pub flows: [FlowField<T>; 2],
}

/// Compensates the outer frames of a `[3, 1, h, w]` block toward its centre
/// with one shared-parameter network.
pub fn compensate_block<T: Scalar>(
    net: &McNetwork<T>,
    block: &Tensor<T>,
) -> Result<CompensatedBlock<T>> {
    let s = block.shape();
    if s.len() != 4 || s[0] != 3 || s[1] != 1 {
        return Err(Error::shape(format!(
            "compensate_block expects [3,1,h,w], got {:?}",
            s
        )));
    }
    let prev = slice_depth(block, 0, 1)?;
    let center = slice_depth(block, 1, 1)?;
    let next = slice_depth(block, 2, 1)?;
    let (warped_prev, flow_prev) = compensate(net, &center, &prev)?;
    let (warped_next, flow_next) = compensate(net, &center, &next)?;
    let frames = concat_depth(&[warped_prev, center, warped_next])?;
    Ok(CompensatedBlock {
        frames,
        flows: [flow_prev, flow_next],
    })
}

/// Motion-compensation objective: photometric error plus `lambda` times the
/// smoothness of the flow.
pub fn mc_loss<T: Scalar>(
    frame_t: &Tensor<T>,
    warped: &Tensor<T>,
    total_flow: &FlowField<T>,
    lambda: f64,
) -> Result<Tensor<T>> {
    if lambda < 0.0 {
        return Err(Error::invalid("lambda must be non-negative"));
    }
    let photometric = mse_loss(frame_t, warped)?;
    if lambda == 0.0 {
        return Ok(photometric);
    }
    let smooth = huber_smoothness(&total_flow.delta, HUBER_EPS)?;
    add(&photometric, &scale(&smooth, T::cast(lambda)))
}

/// Mean interior flow error, in pixels, against a known constant
/// displacement. `truth_px` is the expected pixel displacement `(dx, dy)`
/// of the flow that warps `neighbor` onto `center`.
pub fn translation_flow_error<T: Scalar>(
    net: &McNetwork<T>,
    center: &crate::tensor::TensorData<T>,
    neighbor: &crate::tensor::TensorData<T>,
    truth_px: (f64, f64),
    margin: usize,
) -> Result<f64> {
    let (h, w) = (center.shape()[1], center.shape()[2]);
    let c = Tensor::constant(center.clone().reshaped(&[1, 1, h, w])?);
    let n = Tensor::constant(neighbor.clone().reshaped(&[1, 1, h, w])?);
    let (_, total) = compensate(net, &c, &n)?;
    let v = total.delta.value();
    let hw = h * w;
    let px = (w as f64 - 1.0) / 2.0;
    let py = (h as f64 - 1.0) / 2.0;
    let mut acc = 0.0;
    let mut count = 0usize;
    for y in margin..h - margin {
        for x in margin..w - margin {
            let u = v.data()[y * w + x].as_f64() * px - truth_px.0;
            let vv = v.data()[hw + y * w + x].as_f64() * py - truth_px.1;
            acc += (u * u + vv * vv).sqrt();
            count += 1;
        }
    }
    Ok(acc / count as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::TensorData;

    fn frame(h: usize, w: usize, seed: u64) -> Tensor<f64> {
        Tensor::constant(crate::synth::smooth_texture(h, w, 2, seed).reshaped(&[1, 1, h, w]).unwrap())
    }

    #[test]
    fn zero_initialised_heads_give_zero_flow_and_identity_warp() {
        let net = McNetwork::<f64>::init(3).unwrap();
        let a = frame(16, 16, 1);
        let b = frame(16, 16, 2);
        let flow = coarse_flow(&net, &a, &b).unwrap();
        assert!(flow.delta.value().data().iter().all(|&v| v == 0.0));
        let (warped, total) = compensate(&net, &a, &b).unwrap();
        assert!(total.delta.value().data().iter().all(|&v| v == 0.0));
        assert_eq!(warped.value().data(), b.value().data());
    }

    #[test]
    fn coarse_channel_trace() {
        let arch = McArchitecture::standard();
        let chain: Vec<usize> = std::iter::once(arch.coarse[0].in_features)
            .chain(arch.coarse.iter().map(|l| l.out_features))
            .collect();
        assert_eq!(chain, vec![2, 24, 24, 24, 24, 32]);
        // 32 channels carry 2 flow components at x4 sub-pixel resolution.
        assert_eq!(32 / (arch.coarse_upscale * arch.coarse_upscale), 2);
    }

    #[test]
    fn fine_channel_trace() {
        let arch = McArchitecture::standard();
        let chain: Vec<usize> = std::iter::once(arch.fine[0].in_features)
            .chain(arch.fine.iter().map(|l| l.out_features))
            .collect();
        assert_eq!(chain, vec![5, 24, 24, 24, 24, 8]);
        assert_eq!(8 / (arch.fine_upscale * arch.fine_upscale), 2);
    }

    #[test]
    fn flow_resolution_matches_input() {
        let net = McNetwork::<f64>::init(7).unwrap();
        let a = frame(32, 48, 3);
        let b = frame(32, 48, 4);
        let flow = coarse_flow(&net, &a, &b).unwrap();
        assert_eq!(flow.delta.shape(), vec![2, 32, 48]);
        let (warped, total) = compensate(&net, &a, &b).unwrap();
        assert_eq!(warped.shape(), vec![1, 1, 32, 48]);
        assert_eq!(total.delta.shape(), vec![2, 32, 48]);
    }

    #[test]
    fn indivisible_sizes_are_rejected() {
        let net = McNetwork::<f64>::init(1).unwrap();
        let a = frame(18, 16, 1);
        let b = frame(18, 16, 2);
        assert!(coarse_flow(&net, &a, &b).is_err());
    }

    #[test]
    fn emitted_flows_stay_in_tanh_range() {
        // Random (non-zero) heads: re-initialise the tanh layers orthogonally
        // to probe the range guarantee.
        let mut net = McNetwork::<f64>::init(11).unwrap();
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(99);
        let last = net.coarse.last_mut().unwrap();
        last.kernel =
            ConvWeights::orthogonal(1, last.spec.in_features, last.spec.out_features, 3, 2.0, &mut rng)
                .unwrap();
        let a = frame(16, 16, 5);
        let b = frame(16, 16, 6);
        let flow = coarse_flow(&net, &a, &b).unwrap();
        assert!(flow
            .delta
            .value()
            .data()
            .iter()
            .all(|&v| (-1.0..=1.0).contains(&v)));
    }

    #[test]
    fn block_center_is_bitwise_preserved() {
        let net = McNetwork::<f64>::init(21).unwrap();
        let block_data = TensorData::from_fn(&[3, 1, 16, 16], |i| ((i * 31) % 101) as f64 / 101.0);
        let block = Tensor::constant(block_data.clone());
        let comp = compensate_block(&net, &block).unwrap();
        let hw = 16 * 16;
        assert_eq!(
            &comp.frames.value().data()[hw..2 * hw],
            &block_data.data()[hw..2 * hw]
        );
        assert_eq!(comp.flows.len(), 2);
    }

    #[test]
    fn block_depth_must_be_three() {
        let net = McNetwork::<f64>::init(2).unwrap();
        let block = Tensor::constant(TensorData::<f64>::zeros(&[5, 1, 16, 16]));
        assert!(compensate_block(&net, &block).is_err());
    }

    #[test]
    fn loss_constants_and_reachability() {
        // Perfect warp + constant flow at lambda = 0.01 costs exactly
        // 0.01 * sqrt(0.01) = 0.001.
        let a = frame(8, 8, 1);
        let flow = FlowField {
            delta: Tensor::constant(TensorData::filled(&[2, 8, 8], 0.25)),
            kind: FlowKind::Total,
        };
        let loss = mc_loss(&a, &a, &flow, 0.01).unwrap();
        assert!((loss.item() - 0.001).abs() < 1e-12);
        // lambda = 0 is pure photometric error.
        let b = frame(8, 8, 2);
        let l0 = mc_loss(&a, &b, &flow, 0.0).unwrap();
        let direct = crate::loss::mse_loss(&a, &b).unwrap();
        assert_eq!(l0.item(), direct.item());
        assert!(mc_loss(&a, &a, &flow, -0.5).is_err());
    }

    #[test]
    fn every_parameter_receives_gradient() {
        // Non-degenerate parameters: nudge the zero heads off the origin so
        // gradient reaches the hidden stacks too.
        let mut net = McNetwork::<f64>::init(13).unwrap();
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(555);
        for head in [net.coarse.last_mut().unwrap(), net.fine.last_mut().unwrap()] {
            head.kernel = ConvWeights::orthogonal(
                1,
                head.spec.in_features,
                head.spec.out_features,
                head.spec.kernel,
                0.1,
                &mut rng,
            )
            .unwrap();
        }
        let a = frame(16, 16, 7);
        let b = frame(16, 16, 8);
        let (warped, total) = compensate(&net, &a, &b).unwrap();
        let loss = mc_loss(&a, &warped, &total, 0.01).unwrap();
        loss.backward().unwrap();
        for (i, p) in net.parameters().iter().enumerate() {
            let g = p.grad().unwrap_or_else(|| panic!("parameter {i} missing grad"));
            assert!(
                g.data().iter().all(|v| v.is_finite()),
                "parameter {i} has non-finite gradient"
            );
            assert!(
                g.data().iter().any(|&v| v != 0.0),
                "parameter {i} gradient identically zero"
            );
        }
    }

    #[test]
    fn roughness_strictly_increases_smoothness_cost() {
        let smooth = TensorData::filled(&[2, 8, 8], 0.1);
        let mut rough = smooth.clone();
        for (i, v) in rough.data_mut().iter_mut().enumerate() {
            if i % 2 == 0 {
                *v += 0.05;
            }
        }
        let s = huber_smoothness(&Tensor::constant(smooth), HUBER_EPS)
            .unwrap()
            .item();
        let r = huber_smoothness(&Tensor::constant(rough), HUBER_EPS)
            .unwrap()
            .item();
        assert!(r > s, "{r} vs {s}");
    }
}

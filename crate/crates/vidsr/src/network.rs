//! The four super-resolution network families: single-frame, early fusion,
//! slow fusion, and slow fusion with shared weights (the 3D-convolution
//! view).
//!
//! A [`NetworkSpec`] is declarative and carries no parameters; an
//! [`SrNetwork`] materialises it. Slow fusion without weight sharing gives
//! every output temporal slice of a fusing layer its own kernel; sharing
//! collapses those to a single kernel that slides over time, which is what
//! enables activation reuse during streaming inference.

use serde::{Deserialize, Serialize};

use crate::conv::{conv_forward, ConvWeights, Padding};
use crate::data::FrameBlock;
use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::shuffle::pixel_shuffle;
use crate::tensor::{concat_depth, slice_depth, Activation, Tensor, TensorData};

pub const DEFAULT_FEATURES: usize = 24;
pub const INIT_GAIN: f64 = std::f64::consts::SQRT_2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FusionKind {
    SingleFrame,
    Early,
    Slow,
    SlowShared,
}

impl std::fmt::Display for FusionKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            FusionKind::SingleFrame => "SF",
            FusionKind::Early => "E",
            FusionKind::Slow => "S",
            FusionKind::SlowShared => "S-SW",
        };
        f.write_str(s)
    }
}

/// One convolutional layer of an SR network.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LayerSpec {
    pub kernel: usize,
    pub temporal_depth: usize,
    pub features: usize,
    pub stride: usize,
    pub activation: Activation,
    pub shared_in_time: bool,
}

/// Declarative description of a network; validated on construction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkSpec {
    pub layers: Vec<LayerSpec>,
    pub input_depth: usize,
    pub upscale: usize,
    pub fusion: FusionKind,
}

impl NetworkSpec {
    /// Output temporal depth after each layer.
    pub fn output_depths(&self) -> Vec<usize> {
        let mut d = self.input_depth;
        self.layers
            .iter()
            .map(|l| {
                d = d + 1 - l.temporal_depth;
                d
            })
            .collect()
    }

    /// Input feature count of each layer (luma input has a single channel).
    pub fn input_features(&self) -> Vec<usize> {
        let mut n = 1usize;
        self.layers
            .iter()
            .map(|l| {
                let cur = n;
                n = l.features;
                cur
            })
            .collect()
    }

    pub fn validate(&self) -> Result<()> {
        if self.layers.is_empty() {
            return Err(Error::config("a network needs at least one layer"));
        }
        if self.input_depth % 2 == 0 {
            return Err(Error::config(format!(
                "input depth must be odd, got {}",
                self.input_depth
            )));
        }
        let mut depth = self.input_depth;
        let mut trace = vec![depth];
        for (i, l) in self.layers.iter().enumerate() {
            if l.kernel % 2 == 0 || l.kernel == 0 {
                return Err(Error::config(format!(
                    "layer {}: kernel {} must be odd and positive",
                    i, l.kernel
                )));
            }
            if l.temporal_depth == 0 || l.temporal_depth > depth {
                return Err(Error::config(format!(
                    "layer {}: temporal depth {} invalid at network depth {} (trace {:?})",
                    i, l.temporal_depth, depth, trace
                )));
            }
            if l.features == 0 {
                return Err(Error::config(format!("layer {}: zero features", i)));
            }
            depth = depth + 1 - l.temporal_depth;
            trace.push(depth);
        }
        if depth != 1 {
            return Err(Error::config(format!(
                "temporal depth must reduce to 1 by the last layer; depth trace {:?}",
                trace
            )));
        }
        let last = self.layers.last().unwrap();
        let r2 = self.upscale * self.upscale;
        if last.features != r2 {
            return Err(Error::config(format!(
                "last layer must emit r^2 = {} features, got {}",
                r2, last.features
            )));
        }
        if last.activation != Activation::Linear {
            return Err(Error::config("the output layer must be linear"));
        }
        if self.fusion == FusionKind::Early || self.fusion == FusionKind::SingleFrame {
            let ok = self.layers[0].temporal_depth == self.input_depth
                && self.layers[1..].iter().all(|l| l.temporal_depth == 1);
            if !ok {
                return Err(Error::config(
                    "early fusion requires d0 = D0 and d = 1 afterwards",
                ));
            }
        }
        Ok(())
    }

    /// Builds the standard architecture of a family.
    ///
    /// `layer_count` includes the output layer. All kernels are 3x3, hidden
    /// activations are rectified, the output layer is linear with `r^2`
    /// features followed by a sub-pixel rearrangement. The slow-fusion
    /// temporal schedule defaults to depth-2 kernels until the network depth
    /// reaches one; a custom schedule may be supplied instead.
    pub fn build(
        fusion: FusionKind,
        layer_count: usize,
        input_depth: usize,
        upscale: usize,
        schedule: Option<&[usize]>,
    ) -> Result<NetworkSpec> {
        if layer_count < 2 {
            return Err(Error::config("need at least two layers"));
        }
        if fusion == FusionKind::SingleFrame && input_depth != 1 {
            return Err(Error::config("single-frame networks require D0 = 1"));
        }
        let depths: Vec<usize> = match (fusion, schedule) {
            (_, Some(s)) => {
                if s.len() != layer_count {
                    return Err(Error::config(format!(
                        "schedule length {} does not match {} layers",
                        s.len(),
                        layer_count
                    )));
                }
                s.to_vec()
            }
            (FusionKind::SingleFrame, None) => vec![1; layer_count],
            (FusionKind::Early, None) => {
                let mut d = vec![1; layer_count];
                d[0] = input_depth;
                d
            }
            (FusionKind::Slow | FusionKind::SlowShared, None) => {
                let fusing = input_depth - 1;
                if fusing + 1 > layer_count {
                    return Err(Error::config(format!(
                        "{} layers cannot fuse D0 = {} with depth-2 kernels",
                        layer_count, input_depth
                    )));
                }
                (0..layer_count).map(|l| if l < fusing { 2 } else { 1 }).collect()
            }
        };

        let shared = fusion == FusionKind::SlowShared;
        let mut depth = input_depth;
        let mut layers = Vec::with_capacity(layer_count);
        for (l, &d) in depths.iter().enumerate() {
            if d == 0 || d > depth {
                return Err(Error::config(format!(
                    "layer {}: schedule depth {} invalid at network depth {}",
                    l, d, depth
                )));
            }
            depth = depth + 1 - d;
            let is_last = l == layer_count - 1;
            let features = if is_last {
                upscale * upscale
            } else {
                feature_allocation(DEFAULT_FEATURES, depth)?
            };
            layers.push(LayerSpec {
                kernel: 3,
                temporal_depth: d,
                features,
                stride: 1,
                activation: if is_last { Activation::Linear } else { Activation::Relu },
                shared_in_time: shared,
            });
        }
        let spec = NetworkSpec {
            layers,
            input_depth,
            upscale,
            fusion,
        };
        spec.validate()?;
        Ok(spec)
    }

    /// Stable fingerprint used to pair caches and checkpoints with a spec.
    pub fn fingerprint(&self) -> String {
        use sha2::{Digest, Sha256};
        let json = serde_json::to_string(self).expect("spec serialises");
        let digest = Sha256::digest(json.as_bytes());
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }
}

/// Feature budget per layer: `base / D` features where `D` is the layer's
/// output temporal depth, keeping parameter counts comparable across fusion
/// families. `D` must divide the base.
pub fn feature_allocation(base: usize, depth: usize) -> Result<usize> {
    if depth == 0 || base % depth != 0 {
        return Err(Error::config(format!(
            "temporal depth {} does not divide the feature base {}",
            depth, base
        )));
    }
    Ok(base / depth)
}

/// One materialised layer: a single kernel when weights are shared in time
/// (or no fusion happens), otherwise one kernel per output temporal slice.
#[derive(Debug, Clone)]
pub struct SrLayer<T: Scalar> {
    pub spec: LayerSpec,
    pub kernels: Vec<ConvWeights<T>>,
}

/// A network with parameters.
#[derive(Debug, Clone)]
pub struct SrNetwork<T: Scalar> {
    pub spec: NetworkSpec,
    pub layers: Vec<SrLayer<T>>,
}

impl<T: Scalar> SrNetwork<T> {
    /// Materialises `spec` with orthogonal initialisation (gain sqrt(2)) and
    /// zero biases. Deterministic for a fixed seed.
    pub fn init(spec: NetworkSpec, seed: u64) -> Result<Self> {
        spec.validate()?;
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let depths = spec.output_depths();
        let inputs = spec.input_features();
        let mut layers = Vec::with_capacity(spec.layers.len());
        for (l, ls) in spec.layers.iter().enumerate() {
            let kernel_count = if ls.shared_in_time || ls.temporal_depth == 1 || depths[l] == 1 {
                1
            } else {
                depths[l]
            };
            let kernels = (0..kernel_count)
                .map(|_| {
                    ConvWeights::orthogonal(
                        ls.temporal_depth,
                        inputs[l],
                        ls.features,
                        ls.kernel,
                        INIT_GAIN,
                        &mut rng,
                    )
                })
                .collect::<Result<Vec<_>>>()?;
            layers.push(SrLayer {
                spec: ls.clone(),
                kernels,
            });
        }
        Ok(SrNetwork { spec, layers })
    }

    /// All parameters in declaration order: per layer, per kernel, weights
    /// then bias.
    pub fn parameters(&self) -> Vec<Tensor<T>> {
        self.layers
            .iter()
            .flat_map(|l| l.kernels.iter().flat_map(|k| k.parameters()))
            .collect()
    }

    pub fn zero_grad(&self) {
        for p in self.parameters() {
            p.zero_grad();
        }
    }

    /// Forward pass on a graph tensor of shape `[D0, 1, h, w]`.
    ///
    /// All convolutions run at low resolution; the final sub-pixel
    /// rearrangement produces the `[1, 1, r h, r w]` output.
    pub fn forward(&self, input: &Tensor<T>) -> Result<Tensor<T>> {
        let in_shape = input.shape();
        if in_shape.len() != 4 || in_shape[0] != self.spec.input_depth {
            return Err(Error::shape(format!(
                "temporal axis: network expects depth {}, got input {:?}",
                self.spec.input_depth, in_shape
            )));
        }
        let mut x = input.clone();
        for layer in &self.layers {
            x = layer_forward(layer, &x)?;
        }
        pixel_shuffle(&x, self.spec.upscale)
    }

    /// Super-resolves the centre frame of a block.
    pub fn forward_block(&self, block: &FrameBlock<T>) -> Result<Tensor<T>> {
        if block.r != self.spec.upscale {
            return Err(Error::config(format!(
                "block was built for x{} but the network upscales x{}",
                block.r, self.spec.upscale
            )));
        }
        self.forward(&Tensor::constant(block.lr_frames.clone()))
    }
}

fn layer_forward<T: Scalar>(layer: &SrLayer<T>, x: &Tensor<T>) -> Result<Tensor<T>> {
    let d = layer.spec.temporal_depth;
    let conv = if layer.kernels.len() == 1 {
        conv_forward(x, &layer.kernels[0], layer.spec.stride, Padding::Same)?
    } else {
        // Per-slice kernels: one convolution per output temporal position.
        let d_in = x.shape()[0];
        let d_out = d_in + 1 - d;
        debug_assert_eq!(layer.kernels.len(), d_out);
        let mut slices = Vec::with_capacity(d_out);
        for (j, kernel) in layer.kernels.iter().enumerate() {
            let window = slice_depth(x, j, d)?;
            slices.push(conv_forward(&window, kernel, layer.spec.stride, Padding::Same)?);
        }
        concat_depth(&slices)?
    };
    Ok(crate::tensor::activation(&conv, layer.spec.activation))
}

/// Convenience wrapper matching the block-level contract.
pub fn forward_sr<T: Scalar>(net: &SrNetwork<T>, block: &FrameBlock<T>) -> Result<TensorData<T>> {
    Ok(net.forward_block(block)?.value())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn feature_allocation_follows_the_rule() {
        assert_eq!(feature_allocation(24, 1).unwrap(), 24);
        assert_eq!(feature_allocation(24, 3).unwrap(), 8);
        assert!(feature_allocation(24, 5).is_err());
    }

    #[test]
    fn slow_fusion_worked_example() {
        // Six layers, D0 = 5, x3: features 6, 8, 12, 24, 24, 9.
        let spec = NetworkSpec::build(FusionKind::Slow, 6, 5, 3, None).unwrap();
        let feats: Vec<usize> = spec.layers.iter().map(|l| l.features).collect();
        assert_eq!(feats, vec![6, 8, 12, 24, 24, 9]);
    }

    #[test]
    fn single_frame_features() {
        let spec = NetworkSpec::build(FusionKind::SingleFrame, 7, 1, 3, None).unwrap();
        let feats: Vec<usize> = spec.layers.iter().map(|l| l.features).collect();
        assert_eq!(feats, vec![24, 24, 24, 24, 24, 24, 9]);
        assert_eq!(spec.input_features()[0], 1);
    }

    #[test]
    fn early_fusion_collapses_in_the_first_layer() {
        let spec = NetworkSpec::build(FusionKind::Early, 7, 5, 3, None).unwrap();
        assert_eq!(spec.layers[0].temporal_depth, 5);
        assert!(spec.layers[1..].iter().all(|l| l.temporal_depth == 1));
    }

    #[test]
    fn slow_fusion_depth_trace() {
        let spec = NetworkSpec::build(FusionKind::Slow, 7, 5, 3, None).unwrap();
        assert_eq!(spec.output_depths(), vec![4, 3, 2, 1, 1, 1, 1]);
    }

    #[test]
    fn inconsistent_schedule_reports_the_trace() {
        let err = NetworkSpec::build(FusionKind::Slow, 5, 5, 3, Some(&[2, 2, 1, 1, 1]))
            .unwrap_err()
            .to_string();
        assert!(err.contains("trace"), "{err}");
    }

    #[test]
    fn depth_invariant_enforced_at_construction() {
        // d-schedule that would leave depth 2 at the output.
        assert!(NetworkSpec::build(FusionKind::Slow, 4, 5, 2, Some(&[2, 2, 1, 1])).is_err());
    }

    #[test]
    fn zero_network_maps_to_zero_at_the_right_shape() {
        let spec = NetworkSpec::build(FusionKind::Early, 3, 3, 3, None).unwrap();
        let mut net = SrNetwork::<f64>::init(spec, 1).unwrap();
        for layer in net.layers.iter_mut() {
            for k in &layer.kernels {
                k.weights.update_value(|v| v.data_mut().fill(0.0));
                k.bias.update_value(|v| v.data_mut().fill(0.0));
            }
        }
        let block = crate::data::FrameBlock {
            lr_frames: TensorData::filled(&[3, 1, 33, 33], 0.5),
            hr_center: TensorData::zeros(&[1, 1, 99, 99]),
            t: 0,
            r: 3,
        };
        let out = forward_sr(&net, &block).unwrap();
        assert_eq!(out.shape(), &[1, 1, 99, 99]);
        assert!(out.data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn single_frame_equals_early_fusion_with_depth_one() {
        let sf = NetworkSpec::build(FusionKind::SingleFrame, 3, 1, 2, None).unwrap();
        let ef = NetworkSpec::build(FusionKind::Early, 3, 1, 2, None).unwrap();
        let a = SrNetwork::<f64>::init(sf, 9).unwrap();
        let b = SrNetwork::<f64>::init(ef, 9).unwrap();
        let x = Tensor::constant(TensorData::from_fn(&[1, 1, 8, 8], |i| {
            (i % 13) as f64 / 13.0
        }));
        let ya = a.forward(&x).unwrap().value();
        let yb = b.forward(&x).unwrap().value();
        assert_eq!(ya.data(), yb.data());
    }

    #[test]
    fn slow_fusion_without_sharing_has_more_parameters() {
        let s = NetworkSpec::build(FusionKind::Slow, 7, 5, 3, None).unwrap();
        let sw = NetworkSpec::build(FusionKind::SlowShared, 7, 5, 3, None).unwrap();
        let count = |net: &SrNetwork<f64>| -> usize {
            net.parameters().iter().map(|p| p.numel()).sum()
        };
        let ns = count(&SrNetwork::init(s, 0).unwrap());
        let nsw = count(&SrNetwork::init(sw, 0).unwrap());
        assert!(ns > nsw, "{ns} vs {nsw}");
    }

    #[test]
    fn depth_mismatch_is_rejected() {
        let spec = NetworkSpec::build(FusionKind::Early, 3, 3, 2, None).unwrap();
        let net = SrNetwork::<f64>::init(spec, 2).unwrap();
        let x = Tensor::constant(TensorData::<f64>::zeros(&[5, 1, 8, 8]));
        assert!(net.forward(&x).is_err());
    }

    #[test]
    fn shifting_input_shifts_output_by_r() {
        // Interior translation consistency of conv + shuffle.
        let spec = NetworkSpec::build(FusionKind::SingleFrame, 3, 1, 2, None).unwrap();
        let net = SrNetwork::<f64>::init(spec, 33).unwrap();
        let (h, w) = (12usize, 12usize);
        let base = crate::synth::smooth_texture::<f64>(h, w + 1, 2, 4);
        let crop = |x0: usize| {
            TensorData::from_fn(&[1, 1, h, w], |i| {
                let (y, x) = (i / w, i % w);
                base.data()[y * (w + 1) + x + x0]
            })
        };
        let y0 = net.forward(&Tensor::constant(crop(0))).unwrap().value();
        let y1 = net.forward(&Tensor::constant(crop(1))).unwrap().value();
        let r = 2usize;
        let (oh, ow) = (r * h, r * w);
        let margin = 8usize; // skip the replicate-padding halo
        for y in margin..oh - margin {
            for x in margin..ow - margin - r {
                let a = y1.data()[y * ow + x];
                let b = y0.data()[y * ow + x + r];
                assert!(
                    (a - b).abs() < 1e-9,
                    "interior shift mismatch at ({y},{x}): {a} vs {b}"
                );
            }
        }
    }
}

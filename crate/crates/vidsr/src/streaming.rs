//! Frame-by-frame inference with activation reuse.
//!
//! When layer weights are shared across time, the temporal slices computed
//! for the previous frame remain valid for the next one: each new frame only
//! requires one fresh slice per layer. The cache holds, per layer, the most
//! recent input slices the layer's temporal kernel needs. Outputs are
//! identical to running the block forward pass from scratch; boundary frames
//! reproduce the replicate-clamped blocks of `frame_block`.

use std::collections::VecDeque;

use crate::conv::{conv_data, Padding};
use crate::error::{Error, Result};
use crate::network::SrNetwork;
use crate::scalar::Scalar;
use crate::shuffle::pixel_shuffle_data;
use crate::tensor::{Activation, TensorData};

/// Per-layer ring buffers of temporal activation slices.
#[derive(Debug, Clone)]
pub struct ActivationCache<T: Scalar> {
    fingerprint: String,
    /// windows[l] holds the last `d_l` input slices of layer `l`.
    windows: Vec<VecDeque<TensorData<T>>>,
    frames_pushed: usize,
    last_frame: Option<TensorData<T>>,
    /// Slices computed by each layer during the most recent push.
    computed_last: Vec<usize>,
}

impl<T: Scalar> ActivationCache<T> {
    pub fn new(net: &SrNetwork<T>) -> Result<Self> {
        for (i, l) in net.layers.iter().enumerate() {
            if l.kernels.len() != 1 {
                return Err(Error::config(format!(
                    "layer {} has per-slice kernels; streaming needs weights shared in time",
                    i
                )));
            }
        }
        Ok(ActivationCache {
            fingerprint: net.spec.fingerprint(),
            windows: net.layers.iter().map(|_| VecDeque::new()).collect(),
            frames_pushed: 0,
            last_frame: None,
            computed_last: vec![0; net.layers.len()],
        })
    }

    /// How many temporal slices each layer computed on the last push.
    pub fn computed_last_push(&self) -> &[usize] {
        &self.computed_last
    }

    pub fn frames_pushed(&self) -> usize {
        self.frames_pushed
    }

    fn check(&self, net: &SrNetwork<T>) -> Result<()> {
        if self.fingerprint != net.spec.fingerprint() {
            return Err(Error::config(
                "activation cache was built for a different network",
            ));
        }
        Ok(())
    }

    /// Advances every layer by one temporal step.
    fn feed(&mut self, net: &SrNetwork<T>, frame_slice: TensorData<T>) -> Result<Option<TensorData<T>>> {
        let mut new_slice = Some(frame_slice);
        for (li, layer) in net.layers.iter().enumerate() {
            let Some(slice) = new_slice.take() else { break };
            let d = layer.spec.temporal_depth;
            let win = &mut self.windows[li];
            win.push_back(slice);
            while win.len() > d {
                win.pop_front();
            }
            if win.len() < d {
                break;
            }
            // Stack the window along the temporal axis and convolve once,
            // producing this layer's newest output slice.
            let (c, h, w) = {
                let s = win[0].shape();
                (s[1], s[2], s[3])
            };
            let mut stacked = Vec::with_capacity(d * c * h * w);
            for s in win.iter() {
                stacked.extend_from_slice(s.data());
            }
            let input = TensorData::new(&[d, c, h, w], stacked)?;
            let out = net.layers[li].kernels[0].weights.with_value(|wv| {
                net.layers[li].kernels[0]
                    .bias
                    .with_value(|bv| conv_data(&input, wv, bv, layer.spec.stride, Padding::Same))
            })?;
            let out = apply_activation(out, layer.spec.activation);
            self.computed_last[li] += 1;
            new_slice = Some(out);
        }
        match new_slice {
            Some(last) => Ok(Some(pixel_shuffle_data(&last, net.spec.upscale)?)),
            None => Ok(None),
        }
    }
}

fn apply_activation<T: Scalar>(x: TensorData<T>, kind: Activation) -> TensorData<T> {
    match kind {
        Activation::Linear => x,
        Activation::Relu => x.map(|v| if v > T::zero() { v } else { T::zero() }),
        Activation::Tanh => x.map(|v| v.tanh()),
    }
}

/// Pushes one `[1, H, W]` frame into the stream and returns the
/// super-resolved frame whose temporal window is now complete, if any.
///
/// The first push replicates the frame to fill the leading half of the
/// window, mirroring the clamped blocks used in block-mode inference; after
/// `R` further frames the outputs arrive one per push. Call
/// [`steady_state_finish`] to flush the trailing `R` outputs.
pub fn steady_state_forward<T: Scalar>(
    net: &SrNetwork<T>,
    frame: &TensorData<T>,
    cache: &mut ActivationCache<T>,
) -> Result<Option<TensorData<T>>> {
    cache.check(net)?;
    let s = frame.shape();
    if s.len() != 3 || s[0] != 1 {
        return Err(Error::shape(format!(
            "streaming frames must be [1, H, W], got {:?}",
            s
        )));
    }
    let slice = frame.clone().reshaped(&[1, 1, s[1], s[2]])?;
    let radius = (net.spec.input_depth - 1) / 2;
    cache.computed_last.fill(0);
    if cache.frames_pushed == 0 {
        for _ in 0..radius {
            let warm = cache.feed(net, slice.clone())?;
            debug_assert!(warm.is_none(), "no output can complete during warm-up");
        }
    }
    let out = cache.feed(net, slice.clone())?;
    cache.last_frame = Some(slice);
    cache.frames_pushed += 1;
    Ok(out)
}

/// Flushes the stream by replicating the final frame, producing the last
/// `R` outputs (matching the clamped trailing blocks).
pub fn steady_state_finish<T: Scalar>(
    net: &SrNetwork<T>,
    cache: &mut ActivationCache<T>,
) -> Result<Vec<TensorData<T>>> {
    cache.check(net)?;
    let radius = (net.spec.input_depth - 1) / 2;
    let Some(last) = cache.last_frame.clone() else {
        return Ok(Vec::new());
    };
    let mut outs = Vec::with_capacity(radius);
    for _ in 0..radius {
        if let Some(o) = cache.feed(net, last.clone())? {
            outs.push(o);
        }
    }
    Ok(outs)
}

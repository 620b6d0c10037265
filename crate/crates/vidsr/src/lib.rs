//! Spatio-temporal video super-resolution at desk scale.
//!
//! The crate bundles a small reverse-mode differentiation engine with exactly
//! the operations its networks need, the four fusion architectures
//! (single-frame, early, slow, slow with shared weights), a spatial-transformer
//! motion-compensation module with coarse and fine flow stages, the three
//! training regimes, an exact per-layer operation-count model, and PSNR/SSIM
//! evaluation tooling. Everything runs on the CPU and is deterministic for a
//! fixed seed.
//!
//! Start with the runnable programs under `examples/` — one per major
//! capability — or with the `vidsr` binary, which exposes the
//! `prepare-data`, `train`, `super-resolve`, `evaluate` and `cost-report`
//! workflows.

pub mod checkpoint;
pub mod cli;
pub mod conv;
pub mod cost;
pub mod data;
pub mod error;
pub mod gradcheck;
pub mod init;
pub mod io;
pub mod loss;
pub mod metrics;
pub mod motion;
pub mod network;
pub mod optim;
pub mod scalar;
pub mod shuffle;
pub mod streaming;
pub mod synth;
pub mod tensor;
pub mod train;
pub mod warp;

pub use error::{Error, Result};
pub use scalar::Scalar;
pub use tensor::{Tensor, TensorData};

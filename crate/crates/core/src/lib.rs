//! HDR image-quality pipeline.
//!
//! The crate covers the full path from display-encoded pixels to a trained
//! patch-wise quality model:
//!
//! * [`display`]: gain-offset-gamma display simulation with ambient reflection.
//! * [`encoding`]: PU21 and PQ luminance encodings and the two normalization
//!   schemes (`Pmax` and `255`).
//! * [`metrics`]: PSNR/SSIM and their PU-encoded variants.
//! * [`patches`]: jittered-grid patch sampling for full-reference pairs.
//! * [`nn`]: a small PieAPP-shaped network, deep CORAL, and hand-written
//!   reverse-mode gradients.
//! * [`train`]: the SDR→HDR domain-adaptation training loop.
//! * [`eval`]: SROCC, logistic-fit PLCC, and reference-stratified k-fold splits.
//! * [`synth`]: synthetic SDR / simulated-HDR IQA datasets.
//! * [`io`]: PFM, 8-bit PNG, and manifest CSV readers and writers.

pub mod display;
pub mod encoding;
mod error;
pub mod eval;
pub mod experiment;
pub mod grid;
pub mod io;
pub mod metrics;
pub mod nn;
pub mod patches;
pub mod rng;
pub mod synth;
pub mod train;

pub use display::{DisplayModel, Domain, Eotf};
pub use encoding::{EncodedImage, Encoder, Scheme};
pub use error::{Error, Result};
pub use grid::{Grid, LuminanceImage};
pub use io::manifest::{DatasetManifest, DatasetRecord};
pub use nn::{FeatureBatch, ModelConfig, QualityNetParams};
pub use patches::PatchBatch;
pub use train::{DaMode, TrainConfig, TrainHistory};

//! Core library for a continuous speech separation (CSS) benchmark toolkit.
//!
//! The crate covers the full desk-scale experiment loop:
//!
//! - [`signal`]: sampled-audio containers, WAV I/O, STFT/iSTFT, SI-SNR.
//! - [`room`]: image-method room impulse responses, convolution placement,
//!   spherically isotropic noise, SNR mixing.
//! - [`sim`]: overlap-ratio-controlled conversation planning and rendering
//!   with ground-truth segmentation.
//! - [`pipeline`]: the sliding-window separation engine — chunking, oracle
//!   ratio masks, permutation stitching, spectral masking.
//! - [`beamform`]: mask-based MVDR — spatial covariance estimation, steering
//!   vectors, weight computation, filtering.
//! - [`segment`]: energy VAD and the long-segment cutter for continuous
//!   evaluation.
//! - [`eval`]: WER, the two-hypothesis utterance protocol, multi-stream
//!   continuous alignment, SI-SNR tables, condition-bucketed reports.

pub mod beamform;
pub mod error;
pub mod eval;
pub mod pipeline;
pub mod room;
pub mod segment;
pub mod signal;
pub mod sim;

pub use error::{Error, Result};

//! Segmentation of diadochokinetic (DDK) speech into VOT, vowel and other
//! regions at 1 ms resolution.
//!
//! The pipeline is: [`audio`] (WAV I/O, resampling, windowing) → [`models`]
//! (raw-waveform CNN+BiLSTM or dilated-CNN frame classifiers built on
//! [`nn`]) → [`postproc`] (frames to segments) → [`metrics`] (DDK rate and
//! segment-level evaluation). [`synth`] generates labeled synthetic trials
//! and [`augment`] provides the training-time augmentations.

pub mod audio;
pub mod augment;
pub mod dsp;
pub mod experiment;
pub mod labels;
pub mod metrics;
pub mod models;
pub mod nn;
pub mod postproc;
pub mod synth;

pub use audio::{Waveform, WindowPlan, MODEL_RATE_HZ};
pub use labels::{FrameLabelSequence, Label};
pub use metrics::{EvalReport, MatchedPairs};
pub use models::{Architecture, ModelConfig, Network, TrainConfig};
pub use postproc::{Segment, SegmentSequence};

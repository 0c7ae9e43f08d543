//! Waveform container, WAV I/O, resampling and fixed-length analysis windows.

mod resample;
mod wav;
mod window;

pub use resample::{resample, Resampler, KAISER_BETA, TAPS_PER_PHASE};
pub use wav::{read_wav, write_wav};
pub use window::{cut_windows, stitch_predictions, WindowPlan};

use std::path::PathBuf;

/// Sample rate the networks operate at.
pub const MODEL_RATE_HZ: u32 = 16_000;

/// Largest representable amplitude: the int16 maximum mapped through `s / 32768`.
pub const MAX_SAMPLE: f32 = 32767.0 / 32768.0;

#[derive(Debug, thiserror::Error)]
pub enum AudioError {
    #[error("audio file not found: {0}")]
    NotFound(PathBuf),
    #[error("malformed RIFF/WAVE data: {0}")]
    MalformedRiff(String),
    #[error("unsupported encoding: {0}")]
    UnsupportedEncoding(String),
    #[error("invalid waveform: {0}")]
    InvalidWaveform(String),
    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),
    #[error("window coverage gap at frame {0}")]
    CoverageGap(usize),
}

/// Mono audio with samples in `[-1, 1)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Waveform {
    samples: Vec<f32>,
    sample_rate_hz: u32,
}

impl Waveform {
    /// Validating constructor: rejects a zero rate and any sample outside `[-1, 1)`.
    pub fn new(samples: Vec<f32>, sample_rate_hz: u32) -> Result<Self, AudioError> {
        if sample_rate_hz == 0 {
            return Err(AudioError::InvalidWaveform(
                "sample rate must be positive".into(),
            ));
        }
        if let Some((i, s)) = samples
            .iter()
            .enumerate()
            .find(|(_, s)| !s.is_finite() || **s < -1.0 || **s >= 1.0)
        {
            return Err(AudioError::InvalidWaveform(format!(
                "sample {i} = {s} outside [-1, 1)"
            )));
        }
        Ok(Self {
            samples,
            sample_rate_hz,
        })
    }

    /// Builds a waveform, clamping every sample into `[-1, MAX_SAMPLE]`.
    /// Non-finite samples become 0.
    ///
    /// Panics if `sample_rate_hz` is 0.
    pub fn clipped(mut samples: Vec<f32>, sample_rate_hz: u32) -> Self {
        assert!(sample_rate_hz > 0, "sample rate must be positive");
        for s in &mut samples {
            *s = if s.is_finite() {
                s.clamp(-1.0, MAX_SAMPLE)
            } else {
                0.0
            };
        }
        Self {
            samples,
            sample_rate_hz,
        }
    }

    pub fn silence(len: usize, sample_rate_hz: u32) -> Self {
        Self::clipped(vec![0.0; len], sample_rate_hz)
    }

    pub fn samples(&self) -> &[f32] {
        &self.samples
    }

    pub fn into_samples(self) -> Vec<f32> {
        self.samples
    }

    pub fn sample_rate_hz(&self) -> u32 {
        self.sample_rate_hz
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// `round(1000 * len / rate)`.
    pub fn duration_ms(&self) -> usize {
        let num = 1000u128 * self.samples.len() as u128;
        let den = self.sample_rate_hz as u128;
        ((num + den / 2) / den) as usize
    }

    pub fn duration_s(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate_hz as f64
    }

    pub fn rms(&self) -> f64 {
        rms(&self.samples)
    }

    /// Samples `[start, end)`, clamped to the signal.
    pub fn slice(&self, start: usize, end: usize) -> Waveform {
        let end = end.min(self.samples.len());
        let start = start.min(end);
        Self {
            samples: self.samples[start..end].to_vec(),
            sample_rate_hz: self.sample_rate_hz,
        }
    }

    /// Multiplies by `gain`, clamping into range.
    pub fn scaled(&self, gain: f32) -> Waveform {
        Self::clipped(
            self.samples.iter().map(|s| s * gain).collect(),
            self.sample_rate_hz,
        )
    }
}

pub(crate) fn rms(samples: &[f32]) -> f64 {
    if samples.is_empty() {
        return 0.0;
    }
    let energy: f64 = samples.iter().map(|&s| (s as f64) * (s as f64)).sum();
    (energy / samples.len() as f64).sqrt()
}

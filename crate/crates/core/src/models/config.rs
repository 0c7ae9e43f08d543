use serde::{Deserialize, Serialize};

use super::ModelError;
use crate::augment::AugmentSpec;
use crate::nn::{AdamConfig, ConvSpec};

/// Samples consumed per output frame (16 kHz, 1 ms frames).
pub const SAMPLES_PER_FRAME: usize = 16;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Architecture {
    /// Conv feature extractor, bidirectional LSTM, two FC layers.
    Lstm,
    /// Dilated conv stack, two FC layers.
    Cnn,
}

impl Architecture {
    pub fn conv_layers(self) -> usize {
        match self {
            Architecture::Lstm => 5,
            Architecture::Cnn => 10,
        }
    }

    pub fn lstm_layers(self) -> usize {
        match self {
            Architecture::Lstm => 2,
            Architecture::Cnn => 0,
        }
    }
}

impl std::fmt::Display for Architecture {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Architecture::Lstm => "lstm",
            Architecture::Cnn => "cnn",
        })
    }
}

impl std::str::FromStr for Architecture {
    type Err = ModelError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "lstm" => Ok(Architecture::Lstm),
            "cnn" => Ok(Architecture::Cnn),
            other => Err(ModelError::Config(format!(
                "unknown architecture `{other}` (expected lstm or cnn)"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConvLayer {
    pub channels: usize,
    pub kernel: usize,
    pub stride: usize,
    pub padding: usize,
    pub dilation: usize,
}

impl ConvLayer {
    /// A layer with length-preserving ("same") padding.
    pub fn same(channels: usize, kernel: usize, stride: usize, dilation: usize) -> Self {
        Self {
            channels,
            kernel,
            stride,
            padding: ConvSpec::same_padding(kernel, stride, dilation),
            dilation,
        }
    }

    fn span(&self) -> usize {
        self.dilation * (self.kernel - 1) + 1
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    pub architecture: Architecture,
    pub conv: Vec<ConvLayer>,
    /// Hidden units per direction; ignored by the CNN architecture.
    pub lstm_hidden: usize,
    pub lstm_layers: usize,
    /// Width of the first FC layer; the second maps to the three classes.
    pub fc_hidden: usize,
    pub dropout: f64,
    pub leaky_slope: f64,
    pub frame_ms: usize,
}

fn stack(
    channels: &[usize],
    kernels: &[usize],
    strides: &[usize],
    dilations: &[usize],
) -> Vec<ConvLayer> {
    (0..channels.len())
        .map(|i| ConvLayer::same(channels[i], kernels[i], strides[i], dilations[i]))
        .collect()
}

const LSTM_STRIDES: [usize; 5] = [4, 2, 2, 1, 1];
const CNN_STRIDES: [usize; 10] = [4, 2, 2, 1, 1, 1, 1, 1, 1, 1];
const CNN_DILATIONS: [usize; 10] = [1, 1, 1, 2, 4, 8, 16, 32, 1, 1];
const CNN_KERNELS: [usize; 10] = [16, 5, 5, 3, 3, 3, 3, 3, 3, 3];

impl ModelConfig {
    pub fn default_for(architecture: Architecture) -> Self {
        match architecture {
            Architecture::Lstm => Self::lstm(&[32, 64, 64, 128, 128], 128, 64),
            Architecture::Cnn => Self::cnn(&[32, 64, 64, 128, 128, 256, 256, 256, 256, 256], 64),
        }
    }

    /// Narrow variant sized for single-core training runs.
    pub fn compact_for(architecture: Architecture) -> Self {
        match architecture {
            Architecture::Lstm => Self::lstm(&[16, 32, 32, 32, 32], 32, 32),
            Architecture::Cnn => Self::cnn(&[16, 32, 32, 32, 32, 32, 32, 32, 32, 32], 32),
        }
    }

    pub fn lstm(channels: &[usize; 5], hidden: usize, fc_hidden: usize) -> Self {
        Self {
            architecture: Architecture::Lstm,
            conv: stack(channels, &[16, 5, 5, 3, 3], &LSTM_STRIDES, &[1; 5]),
            lstm_hidden: hidden,
            lstm_layers: 2,
            fc_hidden,
            dropout: 0.1,
            leaky_slope: 0.01,
            frame_ms: 1,
        }
    }

    pub fn cnn(channels: &[usize; 10], fc_hidden: usize) -> Self {
        Self {
            architecture: Architecture::Cnn,
            conv: stack(channels, &CNN_KERNELS, &CNN_STRIDES, &CNN_DILATIONS),
            lstm_hidden: 0,
            lstm_layers: 0,
            fc_hidden,
            dropout: 0.1,
            leaky_slope: 0.01,
            frame_ms: 1,
        }
    }

    /// Two-conv-layer miniature of the same architecture for gradient
    /// checks; not a valid full configuration.
    pub fn tiny_clone(&self) -> Self {
        let dilation = if self.architecture == Architecture::Cnn {
            2
        } else {
            1
        };
        Self {
            architecture: self.architecture,
            conv: vec![
                ConvLayer::same(3, 8, 4, 1),
                ConvLayer::same(4, 3, 4, dilation),
            ],
            lstm_hidden: if self.lstm_layers > 0 { 3 } else { 0 },
            lstm_layers: self.lstm_layers,
            fc_hidden: 4,
            ..self.clone()
        }
    }

    /// Checks every invariant except the per-architecture layer counts.
    pub fn validate_structure(&self) -> Result<(), ModelError> {
        let err = |m: String| Err(ModelError::Config(m));
        if self.conv.is_empty() {
            return err("at least one conv layer is required".into());
        }
        let strides: usize = self.conv.iter().map(|c| c.stride).product();
        if strides != SAMPLES_PER_FRAME {
            return err(format!(
                "conv strides multiply to {strides}, expected {SAMPLES_PER_FRAME}"
            ));
        }
        for (i, c) in self.conv.iter().enumerate() {
            if c.channels == 0 || c.kernel == 0 || c.stride == 0 || c.dilation == 0 {
                return err(format!("conv layer {i} has a zero size"));
            }
            // Lengths divisible by the stride must map to exactly length / stride.
            let (lo, hi) = (c.span().saturating_sub(c.stride), c.span() - 1);
            if 2 * c.padding < lo || 2 * c.padding > hi {
                return err(format!(
                    "conv layer {i}: padding {} does not give length / stride outputs",
                    c.padding
                ));
            }
        }
        if self.frame_ms != 1 {
            return err(format!("frame_ms must be 1, got {}", self.frame_ms));
        }
        if self.fc_hidden == 0 {
            return err("fc_hidden must be positive".into());
        }
        if (self.lstm_layers > 0) != (self.lstm_hidden > 0) {
            return err("lstm_hidden and lstm_layers must both be zero or both positive".into());
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return err(format!("dropout {} outside [0, 1)", self.dropout));
        }
        if !self.leaky_slope.is_finite() || self.leaky_slope < 0.0 {
            return err(format!(
                "leaky slope {} must be finite and non-negative",
                self.leaky_slope
            ));
        }
        Ok(())
    }

    /// Full invariants: structure plus the architecture's layer counts.
    pub fn validate(&self) -> Result<(), ModelError> {
        self.validate_structure()?;
        let (conv, lstm) = (
            self.architecture.conv_layers(),
            self.architecture.lstm_layers(),
        );
        if self.conv.len() != conv {
            return Err(ModelError::Config(format!(
                "{} architecture needs {conv} conv layers, got {}",
                self.architecture,
                self.conv.len()
            )));
        }
        if self.lstm_layers != lstm {
            return Err(ModelError::Config(format!(
                "{} architecture needs {lstm} lstm layers, got {}",
                self.architecture, self.lstm_layers
            )));
        }
        Ok(())
    }

    /// Input samples that influence one output frame through the conv stack.
    pub fn receptive_field(&self) -> usize {
        let mut field = 1;
        let mut jump = 1;
        for c in &self.conv {
            field += (c.span() - 1) * jump;
            jump *= c.stride;
        }
        field
    }

    pub fn conv_specs(&self) -> Vec<ConvSpec> {
        let mut in_channels = 1;
        self.conv
            .iter()
            .map(|c| {
                let s = ConvSpec {
                    in_channels,
                    out_channels: c.channels,
                    kernel: c.kernel,
                    stride: c.stride,
                    padding: c.padding,
                    dilation: c.dilation,
                };
                in_channels = c.channels;
                s
            })
            .collect()
    }

    /// Features entering the FC head.
    pub fn head_input(&self) -> usize {
        if self.lstm_layers > 0 {
            2 * self.lstm_hidden
        } else {
            self.conv.last().map_or(0, |c| c.channels)
        }
    }
}

/// Optimization and data settings for [`super::train`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    pub batch_size: usize,
    pub lr: f64,
    pub max_epochs: usize,
    pub patience: usize,
    pub seed: u64,
    pub augment: AugmentSpec,
    /// Random start offset drawn from `0..=max_shift_samples` each epoch.
    pub random_shift: bool,
    pub max_shift_samples: usize,
    pub chunk_ms: usize,
    /// Trailing chunks shorter than this are dropped.
    pub min_chunk_ms: usize,
    pub class_weight_cap: f64,
    /// Length of the synthetic noise bank used for SNR augmentation.
    pub noise_bank_s: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            batch_size: 32,
            lr: 1e-4,
            max_epochs: 50,
            patience: 10,
            seed: 0,
            augment: AugmentSpec::default(),
            random_shift: true,
            max_shift_samples: 999,
            chunk_ms: 1000,
            min_chunk_ms: 250,
            class_weight_cap: 5.0,
            noise_bank_s: 30.0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), ModelError> {
        let err = |m: String| Err(ModelError::Config(m));
        if self.batch_size == 0 {
            return err("batch_size must be at least 1".into());
        }
        if self.patience > self.max_epochs {
            return err(format!(
                "patience {} exceeds max_epochs {}",
                self.patience, self.max_epochs
            ));
        }
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return err(format!("learning rate {} must be positive", self.lr));
        }
        if self.chunk_ms == 0 || self.min_chunk_ms > self.chunk_ms {
            return err("need 0 < min_chunk_ms <= chunk_ms".into());
        }
        if self.class_weight_cap.is_nan() || self.class_weight_cap < 1.0 {
            return err("class_weight_cap must be at least 1".into());
        }
        if self.noise_bank_s.is_nan() || self.noise_bank_s <= 0.0 {
            return err("noise_bank_s must be positive".into());
        }
        Ok(())
    }

    pub fn adam(&self) -> AdamConfig {
        AdamConfig {
            lr: self.lr,
            ..AdamConfig::default()
        }
    }
}

use std::path::Path;

use clap::ValueEnum;
use ddkseg_core::models::{Architecture, ModelConfig, TrainConfig};
use ddkseg_core::synth::TrialSpec;
use ddkseg_core::WindowPlan;
use serde::Deserialize;

use crate::failure::{Classify, CliResult};

/// Network width preset.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Size {
    /// Full-width layers.
    #[default]
    Default,
    /// Narrow layers for single-core training.
    Compact,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CorpusFile {
    pub trials: Option<usize>,
    pub ratios: Option<[f64; 3]>,
    pub syllables: Option<(usize, usize)>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelFile {
    pub architecture: Option<Architecture>,
    pub size: Option<Size>,
    pub dropout: Option<f64>,
}

/// Optional TOML configuration; command-line flags take precedence.
///
/// ```toml
/// seed = 7
/// [corpus]
/// trials = 200
/// [trial]          # any trial-spec field
/// vot_ms = { min = 20.0, max = 100.0 }
/// [model]
/// architecture = "lstm"
/// size = "compact"
/// [train]          # any training field except the seed
/// batch_size = 8
/// [window]
/// window_ms = 1000
/// hop_ms = 800
/// ```
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FileConfig {
    pub seed: Option<u64>,
    pub corpus: CorpusFile,
    pub trial: Option<TrialSpec>,
    pub model: ModelFile,
    pub train: Option<TrainConfig>,
    pub window: Option<WindowPlan>,
}

impl FileConfig {
    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path)
            .usage_err(|| format!("reading config {}", path.display()))?;
        Self::parse(&text).usage_err(|| format!("parsing config {}", path.display()))
    }

    pub fn parse(text: &str) -> Result<Self, toml::de::Error> {
        toml::from_str(text)
    }

    /// Model from the preset chosen by flags, then file, then defaults.
    pub fn model(&self, arch: Option<Architecture>, size: Option<Size>) -> ModelConfig {
        let arch = arch
            .or(self.model.architecture)
            .unwrap_or(Architecture::Lstm);
        let mut cfg = match size.or(self.model.size).unwrap_or_default() {
            Size::Default => ModelConfig::default_for(arch),
            Size::Compact => ModelConfig::compact_for(arch),
        };
        if let Some(p) = self.model.dropout {
            cfg.dropout = p;
        }
        cfg
    }
}

//! Labeled synthetic DDK trials: noise-burst VOTs followed by harmonic
//! vowels, separated by a low-level noise floor.

use std::f64::consts::PI;
use std::path::{Path, PathBuf};

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::audio::{write_wav, AudioError, Waveform, MODEL_RATE_HZ};
use crate::labels::Label;
use crate::postproc::{write_segments_csv, Segment, SegmentError, SegmentSequence};

const SAMPLES_PER_MS: usize = (MODEL_RATE_HZ / 1000) as usize;
/// Formant-like peaks of an open /a/.
pub const FORMANTS_HZ: [f64; 2] = [700.0, 1200.0];
const FORMANT_BANDWIDTH_HZ: f64 = 150.0;
const HARMONIC_CEILING_HZ: f64 = 4000.0;
const BURST_RISE_MS: f64 = 3.0;
const VOWEL_RAMP_MS: f64 = 10.0;

#[derive(Debug, thiserror::Error)]
pub enum SynthError {
    #[error("invalid trial spec: {0}")]
    Spec(String),
    #[error("split ratios must be non-negative and sum to 1, got {0:?}")]
    Ratios([f64; 3]),
    #[error(transparent)]
    Audio(#[from] AudioError),
    #[error(transparent)]
    Segments(#[from] SegmentError),
    #[error("manifest: {0}")]
    Manifest(#[from] csv::Error),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

/// Closed interval sampled uniformly.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Range {
    pub min: f64,
    pub max: f64,
}

impl Range {
    pub const fn new(min: f64, max: f64) -> Self {
        Self { min, max }
    }

    fn sample(&self, rng: &mut impl Rng) -> f64 {
        if self.min == self.max {
            self.min
        } else {
            rng.gen_range(self.min..=self.max)
        }
    }

    fn sample_ms(&self, rng: &mut impl Rng) -> usize {
        self.sample(rng).round() as usize
    }
}

/// Parameters of one trial. Durations are drawn per syllable and rounded to
/// whole milliseconds so segment boundaries are sample-exact.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrialSpec {
    pub syllable_count: usize,
    pub vot_ms: Range,
    pub vowel_ms: Range,
    pub gap_ms: Range,
    pub f0_hz: Range,
    /// Silence before the first and after the last syllable.
    pub edge_ms: Range,
    /// Background noise level in dBFS (RMS re full scale).
    pub noise_floor_dbfs: f64,
    pub seed: u64,
}

impl Default for TrialSpec {
    fn default() -> Self {
        Self {
            syllable_count: 9,
            vot_ms: Range::new(20.0, 100.0),
            vowel_ms: Range::new(80.0, 200.0),
            gap_ms: Range::new(10.0, 150.0),
            f0_hz: Range::new(90.0, 180.0),
            edge_ms: Range::new(100.0, 300.0),
            noise_floor_dbfs: -40.0,
            seed: 0,
        }
    }
}

impl TrialSpec {
    pub fn validate(&self) -> Result<(), SynthError> {
        let ranges = [
            ("vot_ms", self.vot_ms, 5.0),
            ("vowel_ms", self.vowel_ms, 20.0),
            ("gap_ms", self.gap_ms, 1.0),
            ("f0_hz", self.f0_hz, 1.0),
            ("edge_ms", self.edge_ms, 0.0),
        ];
        for (name, r, floor) in ranges {
            if !(r.min.is_finite() && r.max.is_finite() && r.min <= r.max && r.min >= floor) {
                return Err(SynthError::Spec(format!(
                    "{name} range [{}, {}] must lie at or above {floor}",
                    r.min, r.max
                )));
            }
        }
        if self.syllable_count == 0 {
            return Err(SynthError::Spec("syllable_count must be positive".into()));
        }
        if self.f0_hz.max >= HARMONIC_CEILING_HZ {
            return Err(SynthError::Spec(format!(
                "f0 must stay below {HARMONIC_CEILING_HZ} Hz"
            )));
        }
        if self.noise_floor_dbfs > -20.0 {
            return Err(SynthError::Spec("noise floor above -20 dBFS".into()));
        }
        Ok(())
    }
}

/// A generated trial with its exact ground truth (VOT and vowel segments).
#[derive(Debug, Clone, PartialEq)]
pub struct Trial {
    pub waveform: Waveform,
    pub segments: SegmentSequence,
    /// Fundamental used for each vowel, in syllable order.
    pub f0_hz: Vec<f64>,
}

fn ms_to_samples(ms: usize) -> usize {
    ms * SAMPLES_PER_MS
}

/// Relative harmonic amplitude: a falling source spectrum lifted by two
/// resonances. The fundamental stays the strongest component.
fn harmonic_gain(freq: f64, k: usize) -> f64 {
    let resonance: f64 = FORMANTS_HZ
        .iter()
        .map(|f| 1.0 / (1.0 + ((freq - f) / FORMANT_BANDWIDTH_HZ).powi(2)))
        .sum();
    (1.0 + 2.0 * resonance) / k as f64
}

fn write_vowel(out: &mut [f32], f0: f64, amplitude: f64, rng: &mut impl Rng) {
    let fs = MODEL_RATE_HZ as f64;
    let n = out.len();
    let harmonics: Vec<(f64, f64, f64)> = (1..)
        .map(|k| (k, k as f64 * f0))
        .take_while(|&(_, f)| f < HARMONIC_CEILING_HZ)
        .map(|(k, f)| (f, harmonic_gain(f, k), rng.gen_range(0.0..2.0 * PI)))
        .collect();
    // Normalizing by the gain sum bounds the peak by `amplitude`.
    let norm: f64 = harmonics.iter().map(|h| h.1).sum();
    let ramp = VOWEL_RAMP_MS * SAMPLES_PER_MS as f64;
    for (i, o) in out.iter_mut().enumerate() {
        let t = i as f64 / fs;
        let v: f64 = harmonics
            .iter()
            .map(|&(f, g, ph)| g * (2.0 * PI * f * t + ph).sin())
            .sum();
        let edge = (i as f64 + 0.5).min(n as f64 - i as f64 - 0.5);
        let env = (edge / ramp).min(1.0);
        *o += (amplitude * env * v / norm) as f32;
    }
}

fn write_burst(out: &mut [f32], amplitude: f64, rng: &mut impl Rng) {
    let rise = BURST_RISE_MS * SAMPLES_PER_MS as f64;
    // Decays by e^-3 over the burst.
    let tau = (out.len() as f64 / 3.0).max(1.0);
    for (i, o) in out.iter_mut().enumerate() {
        let x = i as f64;
        let env = if x < rise {
            (x + 1.0) / rise
        } else {
            (-(x - rise) / tau).exp()
        };
        *o += (amplitude * env * rng.gen_range(-1.0..1.0)) as f32;
    }
}

/// Synthesizes one trial. Same spec, same output, bit for bit.
pub fn generate_trial(spec: &TrialSpec) -> Result<Trial, SynthError> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let lead = spec.edge_ms.sample_ms(&mut rng);
    let mut plan = Vec::with_capacity(spec.syllable_count);
    for i in 0..spec.syllable_count {
        let gap = if i == 0 {
            lead
        } else {
            spec.gap_ms.sample_ms(&mut rng)
        };
        let vot = spec.vot_ms.sample_ms(&mut rng);
        let vowel = spec.vowel_ms.sample_ms(&mut rng);
        let f0 = spec.f0_hz.sample(&mut rng);
        plan.push((gap, vot, vowel, f0));
    }
    let trail = spec.edge_ms.sample_ms(&mut rng);
    let total_ms = plan.iter().map(|p| p.0 + p.1 + p.2).sum::<usize>() + trail;

    // Uniform noise on [-a, a] has RMS a/sqrt(3).
    let floor = 10f64.powf(spec.noise_floor_dbfs / 20.0) * 3f64.sqrt();
    let mut samples: Vec<f32> = (0..ms_to_samples(total_ms))
        .map(|_| (floor * rng.gen_range(-1.0..1.0)) as f32)
        .collect();

    let mut segments = Vec::with_capacity(2 * plan.len());
    let mut f0s = Vec::with_capacity(plan.len());
    let mut t = 0;
    for &(gap, vot, vowel, f0) in &plan {
        t += gap;
        let (a, b, c) = (
            ms_to_samples(t),
            ms_to_samples(t + vot),
            ms_to_samples(t + vot + vowel),
        );
        write_burst(&mut samples[a..b], rng.gen_range(0.2..0.5), &mut rng);
        write_vowel(&mut samples[b..c], f0, rng.gen_range(0.4..0.7), &mut rng);
        segments.push(Segment::new(Label::Vot, t, t + vot));
        segments.push(Segment::new(Label::Vowel, t + vot, t + vot + vowel));
        f0s.push(f0);
        t += vot + vowel;
    }
    Ok(Trial {
        waveform: Waveform::new(samples, MODEL_RATE_HZ)?,
        segments: SegmentSequence::new(segments)?,
        f0_hz: f0s,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Val,
    Test,
}

impl Split {
    pub fn as_str(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Val => "val",
            Split::Test => "test",
        }
    }
}

/// Per-corpus generation settings; per-trial syllable counts are drawn from
/// `syllables` and seeds are derived from `seed`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CorpusSpec {
    pub trials: usize,
    pub ratios: [f64; 3],
    pub seed: u64,
    pub syllables: (usize, usize),
    pub template: TrialSpec,
}

impl Default for CorpusSpec {
    fn default() -> Self {
        Self {
            trials: 200,
            ratios: [0.6, 0.2, 0.2],
            seed: 0,
            syllables: (7, 11),
            template: TrialSpec::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CorpusEntry {
    pub trial_id: String,
    pub split: Split,
    pub trial: Trial,
}

/// Split sizes: `round(n r0)` train, `round(n r1)` val, the rest test.
pub fn split_counts(n: usize, ratios: [f64; 3]) -> Result<[usize; 3], SynthError> {
    if ratios.iter().any(|r| !(r.is_finite() && *r >= 0.0))
        || (ratios.iter().sum::<f64>() - 1.0).abs() > 1e-9
    {
        return Err(SynthError::Ratios(ratios));
    }
    let train = ((n as f64 * ratios[0]).round() as usize).min(n);
    let val = ((n as f64 * ratios[1]).round() as usize).min(n - train);
    Ok([train, val, n - train - val])
}

/// Trial specs of a corpus, in id order.
pub fn corpus_specs(spec: &CorpusSpec) -> Result<Vec<(String, Split, TrialSpec)>, SynthError> {
    let [train, val, _] = split_counts(spec.trials, spec.ratios)?;
    let (lo, hi) = spec.syllables;
    if lo == 0 || lo > hi {
        return Err(SynthError::Spec(format!("syllable range {lo}..={hi}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    Ok((0..spec.trials)
        .map(|i| {
            let split = if i < train {
                Split::Train
            } else if i < train + val {
                Split::Val
            } else {
                Split::Test
            };
            let trial = TrialSpec {
                syllable_count: rng.gen_range(lo..=hi),
                seed: rng.gen(),
                ..spec.template.clone()
            };
            (format!("trial_{i:04}"), split, trial)
        })
        .collect())
}

/// Generates every trial of a corpus in memory.
pub fn generate_corpus(spec: &CorpusSpec) -> Result<Vec<CorpusEntry>, SynthError> {
    corpus_specs(spec)?
        .into_iter()
        .map(|(trial_id, split, ts)| {
            Ok(CorpusEntry {
                trial_id,
                split,
                trial: generate_trial(&ts)?,
            })
        })
        .collect()
}

/// One manifest row.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManifestRow {
    pub trial_id: String,
    pub wav_path: String,
    pub labels_path: String,
    pub split: Split,
}

pub const MANIFEST_FILE: &str = "manifest.csv";

/// Writes `<id>.wav`, `<id>.csv` and `manifest.csv` under `dir` (created if
/// missing). Paths in the manifest are relative to `dir`.
pub fn write_corpus(dir: impl AsRef<Path>, entries: &[CorpusEntry]) -> Result<PathBuf, SynthError> {
    let dir = dir.as_ref();
    std::fs::create_dir_all(dir)?;
    let manifest_path = dir.join(MANIFEST_FILE);
    let mut manifest = csv::Writer::from_path(&manifest_path)?;
    for e in entries {
        let wav = format!("{}.wav", e.trial_id);
        let labels = format!("{}.csv", e.trial_id);
        write_wav(dir.join(&wav), &e.trial.waveform)?;
        write_segments_csv(dir.join(&labels), &e.trial.segments)?;
        manifest.serialize(ManifestRow {
            trial_id: e.trial_id.clone(),
            wav_path: wav,
            labels_path: labels,
            split: e.split,
        })?;
    }
    manifest.flush()?;
    Ok(manifest_path)
}

/// Reads a manifest; relative paths are resolved against its directory.
pub fn read_manifest(path: impl AsRef<Path>) -> Result<Vec<ManifestRow>, SynthError> {
    let path = path.as_ref();
    let base = path.parent().unwrap_or(Path::new(""));
    let mut reader = csv::Reader::from_path(path)?;
    reader
        .deserialize::<ManifestRow>()
        .map(|row| {
            let mut row = row?;
            for p in [&mut row.wav_path, &mut row.labels_path] {
                if Path::new(p.as_str()).is_relative() {
                    *p = base.join(p.as_str()).to_string_lossy().into_owned();
                }
            }
            Ok(row)
        })
        .collect()
}

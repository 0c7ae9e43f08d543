use std::io::Write;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::config::{ModelConfig, TrainConfig, SAMPLES_PER_FRAME};
use super::network::{build_model, Network};
use super::ModelError;
use crate::audio::{Waveform, MODEL_RATE_HZ};
use crate::augment::synth_noise;
use crate::labels::Label;
use crate::nn::{softmax_xent, AdamState, Mode, NnError, Tensor3, IGNORE_TARGET};
use crate::postproc::SegmentSequence;

/// A 16 kHz recording with one label per millisecond frame.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainExample {
    pub id: String,
    pub waveform: Waveform,
    pub labels: Vec<Label>,
}

impl TrainExample {
    pub fn new(
        id: impl Into<String>,
        waveform: Waveform,
        labels: Vec<Label>,
    ) -> Result<Self, ModelError> {
        let id = id.into();
        if waveform.sample_rate_hz() != MODEL_RATE_HZ {
            return Err(ModelError::Data(format!(
                "{id}: expected {MODEL_RATE_HZ} Hz, got {}",
                waveform.sample_rate_hz()
            )));
        }
        let frames = waveform.len() / SAMPLES_PER_FRAME;
        if labels.len() != frames {
            return Err(ModelError::Data(format!(
                "{id}: {} labels for {frames} frames",
                labels.len()
            )));
        }
        Ok(Self {
            id,
            waveform,
            labels,
        })
    }

    /// Labels each frame by the segment covering its midpoint. Segment
    /// boundaries are whole milliseconds, so this is the rasterization.
    pub fn from_segments(
        id: impl Into<String>,
        waveform: Waveform,
        segs: &SegmentSequence,
    ) -> Result<Self, ModelError> {
        let frames = waveform.len() / SAMPLES_PER_FRAME;
        Self::new(id, waveform, segs.rasterize(frames))
    }

    /// Label at a sample position; segments are aligned to whole frames.
    fn label_at_sample(&self, pos: usize) -> u8 {
        self.labels
            .get(pos / SAMPLES_PER_FRAME)
            .map_or(IGNORE_TARGET, |l| l.index() as u8)
    }
}

/// One minibatch: `(B, 1, samples)` input and `B × frames` targets.
#[derive(Debug, Clone)]
pub struct Batch {
    pub input: Tensor3<f32>,
    pub targets: Vec<u8>,
}

struct Chunk {
    samples: Vec<f32>,
    targets: Vec<u8>,
}

/// Cuts `samples` (aligned with `ex`, starting `shift` samples in) into
/// disjoint chunks of `chunk_ms`; a short trailing chunk is kept only if at
/// least `min_ms` long and is zero-padded with ignored targets.
fn chunk_example(
    ex: &TrainExample,
    samples: &[f32],
    shift: usize,
    chunk_ms: usize,
    min_ms: usize,
) -> Vec<Chunk> {
    let frames = samples.len().saturating_sub(shift) / SAMPLES_PER_FRAME;
    let mut out = Vec::new();
    for start in (0..frames).step_by(chunk_ms) {
        let n = chunk_ms.min(frames - start);
        if n < chunk_ms && n < min_ms && start > 0 {
            break;
        }
        let a = shift + start * SAMPLES_PER_FRAME;
        let mut s = samples[a..a + n * SAMPLES_PER_FRAME].to_vec();
        s.resize(chunk_ms * SAMPLES_PER_FRAME, 0.0);
        let mut targets: Vec<u8> = (0..n)
            .map(|k| ex.label_at_sample(a + k * SAMPLES_PER_FRAME + SAMPLES_PER_FRAME / 2))
            .collect();
        targets.resize(chunk_ms, IGNORE_TARGET);
        out.push(Chunk {
            samples: s,
            targets,
        });
    }
    out
}

fn batches(chunks: &[Chunk], batch_size: usize) -> Vec<Batch> {
    chunks
        .chunks(batch_size)
        .map(|group| {
            let len = group[0].samples.len();
            let input = group
                .iter()
                .flat_map(|c| c.samples.iter().copied())
                .collect();
            Batch {
                input: Tensor3::from_vec(input, (group.len(), 1, len))
                    .expect("equal chunk lengths"),
                targets: group
                    .iter()
                    .flat_map(|c| c.targets.iter().copied())
                    .collect(),
            }
        })
        .collect()
}

/// Fixed-shift, unaugmented batches (validation and evaluation).
pub fn eval_batches(examples: &[TrainExample], cfg: &TrainConfig) -> Vec<Batch> {
    let chunks: Vec<Chunk> = examples
        .iter()
        .flat_map(|ex| chunk_example(ex, ex.waveform.samples(), 0, cfg.chunk_ms, cfg.min_chunk_ms))
        .collect();
    batches(&chunks, cfg.batch_size)
}

/// Inverse-frequency weights `max_count / count`, capped.
pub fn class_weights(examples: &[TrainExample], cap: f64) -> [f32; 3] {
    let mut counts = [0usize; 3];
    for ex in examples {
        for l in &ex.labels {
            counts[l.index()] += 1;
        }
    }
    let max = *counts.iter().max().unwrap_or(&0) as f64;
    counts.map(|c| {
        if c == 0 {
            cap as f32
        } else {
            (max / c as f64).min(cap) as f32
        }
    })
}

/// Owns the network, optimizer state and dropout stream.
pub struct Trainer {
    pub net: Network<f32>,
    pub adam: AdamState<f32>,
    pub class_weights: [f32; 3],
    rng: ChaCha8Rng,
}

impl Trainer {
    pub fn new(net: Network<f32>, cfg: &TrainConfig, class_weights: [f32; 3], seed: u64) -> Self {
        Self {
            net,
            adam: AdamState::new(cfg.adam()),
            class_weights,
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    /// One optimization step; returns the weighted batch loss.
    pub fn step(&mut self, batch: &Batch) -> Result<f32, ModelError> {
        use crate::nn::Parameterized;
        self.net.zero_grads();
        let (logits, cache) = self.net.forward(&batch.input, Mode::Train, &mut self.rng)?;
        let out = softmax_xent(&logits, &batch.targets, Some(&self.class_weights))?;
        if !out.loss.is_finite() {
            return Err(NnError::NonFiniteGradient {
                param: "loss".into(),
                index: 0,
                value: out.loss as f64,
            }
            .into());
        }
        self.net.backward(&cache, &out.grad)?;
        self.adam.step(&mut self.net)?;
        Ok(out.loss)
    }
}

/// Unweighted mean frame cross-entropy and frame accuracy in eval mode.
pub fn evaluate(net: &Network<f32>, batches: &[Batch]) -> Result<(f64, f64), ModelError> {
    let (mut loss, mut counted, mut correct) = (0.0, 0usize, 0usize);
    for b in batches {
        let out = softmax_xent(&net.infer(&b.input)?, &b.targets, None)?;
        loss += out.loss as f64 * out.counted as f64;
        counted += out.counted;
        correct += out.correct;
    }
    if counted == 0 {
        return Ok((f64::NAN, f64::NAN));
    }
    Ok((loss / counted as f64, correct as f64 / counted as f64))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EpochLog {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_loss: f64,
    pub val_frame_acc: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct TrainLog {
    pub epochs: Vec<EpochLog>,
    /// 1-based epoch whose parameters were kept.
    pub best_epoch: usize,
    pub stopped_early: bool,
}

impl TrainLog {
    pub fn write_csv(&self, writer: impl Write) -> Result<(), ModelError> {
        let mut w = csv::Writer::from_writer(writer);
        for e in &self.epochs {
            w.serialize(e)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn train_losses(&self) -> Vec<f64> {
        self.epochs.iter().map(|e| e.train_loss).collect()
    }
}

pub struct TrainOutcome {
    pub network: Network<f32>,
    pub log: TrainLog,
}

/// [`train_with_progress`] without a callback.
pub fn train(
    train_set: &[TrainExample],
    val_set: &[TrainExample],
    model: &ModelConfig,
    cfg: &TrainConfig,
) -> Result<TrainOutcome, ModelError> {
    train_with_progress(train_set, val_set, model, cfg, &mut |_| {})
}

/// Trains with Adam on weighted frame cross-entropy. Every epoch each
/// training example gets a fresh random shift and augmentation before being
/// cut into chunks; chunks are shuffled into batches. The parameters with
/// the best validation frame accuracy are kept (lowest training loss when
/// there is no validation data), and training stops after `patience` epochs
/// without improvement.
pub fn train_with_progress(
    train_set: &[TrainExample],
    val_set: &[TrainExample],
    model: &ModelConfig,
    cfg: &TrainConfig,
    on_epoch: &mut dyn FnMut(&EpochLog),
) -> Result<TrainOutcome, ModelError> {
    cfg.validate()?;
    if train_set.is_empty() {
        return Err(ModelError::Data("empty training set".into()));
    }
    for ex in train_set.iter().chain(val_set) {
        TrainExample::new(ex.id.clone(), ex.waveform.clone(), ex.labels.clone())?;
    }
    let mut seeds = ChaCha8Rng::seed_from_u64(cfg.seed);
    let net = build_model(model, seeds.gen())?;
    let mut trainer = Trainer::new(
        net,
        cfg,
        class_weights(train_set, cfg.class_weight_cap),
        seeds.gen(),
    );
    let mut data_rng = ChaCha8Rng::seed_from_u64(seeds.gen());
    let noise_len = (cfg.noise_bank_s * MODEL_RATE_HZ as f64) as usize;
    let noise = synth_noise(noise_len.max(1), MODEL_RATE_HZ, seeds.gen());
    let val_batches = eval_batches(val_set, cfg);

    let mut log = TrainLog::default();
    let mut best: Option<(f64, Network<f32>)> = None;
    let mut since_best = 0;
    for epoch in 1..=cfg.max_epochs {
        let mut chunks = Vec::new();
        for ex in train_set {
            let mode = cfg.augment.sample_mode(&mut data_rng);
            let augmented = cfg.augment.apply(mode, &ex.waveform, &noise, &mut data_rng);
            let shift = if cfg.random_shift {
                data_rng.gen_range(0..=cfg.max_shift_samples)
            } else {
                0
            };
            chunks.extend(chunk_example(
                ex,
                augmented.samples(),
                shift,
                cfg.chunk_ms,
                cfg.min_chunk_ms,
            ));
        }
        chunks.shuffle(&mut data_rng);
        let mut loss_sum = 0.0;
        let train_batches = batches(&chunks, cfg.batch_size);
        for b in &train_batches {
            loss_sum += trainer.step(b)? as f64;
        }
        let train_loss = loss_sum / train_batches.len().max(1) as f64;
        let (val_loss, val_frame_acc) = evaluate(&trainer.net, &val_batches)?;
        let entry = EpochLog {
            epoch,
            train_loss,
            val_loss,
            val_frame_acc,
        };
        on_epoch(&entry);
        log.epochs.push(entry);

        let score = if val_batches.is_empty() {
            -train_loss
        } else {
            val_frame_acc
        };
        if best.as_ref().is_none_or(|(s, _)| score > *s) {
            best = Some((score, trainer.net.clone()));
            log.best_epoch = epoch;
            since_best = 0;
        } else {
            since_best += 1;
            if since_best >= cfg.patience {
                log.stopped_early = epoch < cfg.max_epochs;
                break;
            }
        }
    }
    let network = best.map(|(_, n)| n).unwrap_or(trainer.net);
    Ok(TrainOutcome { network, log })
}

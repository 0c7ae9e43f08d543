//! End-to-end protocol on labeled recordings: train on one split, segment
//! another and score it.

use crate::audio::{Waveform, WindowPlan};
use crate::labels::Label;
use crate::metrics::{EvalReport, TrialInput};
use crate::models::{
    train_with_progress, EpochLog, ModelConfig, ModelError, Network, TrainConfig, TrainExample,
    TrainLog,
};
use crate::postproc::{postprocess_frames, SegmentSequence};
use crate::synth::{generate_corpus, CorpusEntry, CorpusSpec, Split, SynthError};

/// A recording with its reference VOT and vowel segments.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledRecording {
    pub id: String,
    pub waveform: Waveform,
    pub segments: SegmentSequence,
}

impl LabeledRecording {
    pub fn to_example(&self) -> Result<TrainExample, ModelError> {
        TrainExample::from_segments(self.id.clone(), self.waveform.clone(), &self.segments)
    }
}

impl From<CorpusEntry> for LabeledRecording {
    fn from(e: CorpusEntry) -> Self {
        Self {
            id: e.trial_id,
            waveform: e.trial.waveform,
            segments: e.trial.segments,
        }
    }
}

/// Held-out scores of one network.
#[derive(Debug, Clone, PartialEq)]
pub struct HeldOut {
    /// Pooled over every frame of every recording.
    pub frame_accuracy: f64,
    pub report: EvalReport,
    /// Post-processed predictions (VOT and vowel only), in input order.
    pub predictions: Vec<SegmentSequence>,
}

/// Segments every recording with `net` and scores the result against the
/// references.
pub fn evaluate_recordings(
    net: &Network<f32>,
    recordings: &[LabeledRecording],
    plan: &WindowPlan,
) -> Result<HeldOut, ModelError> {
    let (mut hits, mut frames) = (0usize, 0usize);
    let mut inputs = Vec::with_capacity(recordings.len());
    let mut predictions = Vec::with_capacity(recordings.len());
    for rec in recordings {
        let pred = net.predict_file(&rec.waveform, plan)?;
        let reference: Vec<Label> = rec.segments.rasterize(pred.len());
        hits += pred
            .labels
            .iter()
            .zip(&reference)
            .filter(|(a, b)| a == b)
            .count();
        frames += pred.len();
        let segs = postprocess_frames(&pred).without_other();
        inputs.push(TrialInput {
            trial_id: rec.id.clone(),
            predicted: segs.clone(),
            target: rec.segments.clone(),
            window: None,
        });
        predictions.push(segs);
    }
    let frame_accuracy = if frames == 0 {
        f64::NAN
    } else {
        hits as f64 / frames as f64
    };
    Ok(HeldOut {
        frame_accuracy,
        report: EvalReport::compute(&inputs),
        predictions,
    })
}

/// Synthetic corpus split by role.
#[derive(Debug, Clone, Default)]
pub struct Splits {
    pub train: Vec<LabeledRecording>,
    pub val: Vec<LabeledRecording>,
    pub test: Vec<LabeledRecording>,
}

impl Splits {
    pub fn generate(spec: &CorpusSpec) -> Result<Self, SynthError> {
        let mut s = Self::default();
        for e in generate_corpus(spec)? {
            match e.split {
                Split::Train => s.train.push(e.into()),
                Split::Val => s.val.push(e.into()),
                Split::Test => s.test.push(e.into()),
            }
        }
        Ok(s)
    }
}

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub network: Network<f32>,
    pub log: TrainLog,
    pub held_out: HeldOut,
}

/// Trains on `splits.train` (selecting on `splits.val`) and evaluates on
/// `splits.test`.
pub fn train_and_evaluate(
    splits: &Splits,
    model: &ModelConfig,
    cfg: &TrainConfig,
    plan: &WindowPlan,
    on_epoch: &mut dyn FnMut(&EpochLog),
) -> Result<RunOutcome, ModelError> {
    let examples = |recs: &[LabeledRecording]| {
        recs.iter()
            .map(LabeledRecording::to_example)
            .collect::<Result<Vec<_>, _>>()
    };
    let outcome = train_with_progress(
        &examples(&splits.train)?,
        &examples(&splits.val)?,
        model,
        cfg,
        on_epoch,
    )?;
    let held_out = evaluate_recordings(&outcome.network, &splits.test, plan)?;
    Ok(RunOutcome {
        network: outcome.network,
        log: outcome.log,
        held_out,
    })
}

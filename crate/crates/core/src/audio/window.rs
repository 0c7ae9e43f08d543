use serde::{Deserialize, Serialize};

use super::{AudioError, Waveform};
use crate::labels::FrameLabelSequence;

/// Fixed-length analysis windows over a signal.
///
/// A signal that fits in one window yields exactly one window; otherwise a
/// window starts at every multiple of `hop_ms` below the signal duration, and
/// trailing windows may be short.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct WindowPlan {
    pub window_ms: usize,
    pub hop_ms: usize,
}

impl Default for WindowPlan {
    fn default() -> Self {
        Self {
            window_ms: 1000,
            hop_ms: 800,
        }
    }
}

impl WindowPlan {
    pub fn new(window_ms: usize, hop_ms: usize) -> Result<Self, AudioError> {
        if hop_ms == 0 || hop_ms > window_ms {
            return Err(AudioError::InvalidWaveform(format!(
                "window plan needs 0 < hop ({hop_ms}) <= window ({window_ms})"
            )));
        }
        Ok(Self { window_ms, hop_ms })
    }

    /// Window start offsets in ms for a signal of `duration_ms`.
    pub fn starts(&self, duration_ms: usize) -> Vec<usize> {
        if duration_ms == 0 {
            return Vec::new();
        }
        if duration_ms <= self.window_ms {
            return vec![0];
        }
        (0..duration_ms).step_by(self.hop_ms).collect()
    }
}

/// Cuts `w` into the windows of `plan`, returned with their start offsets in ms.
pub fn cut_windows(w: &Waveform, plan: &WindowPlan) -> Vec<(usize, Waveform)> {
    let rate = w.sample_rate_hz() as usize;
    let to_sample = |ms: usize| ms * rate / 1000;
    plan.starts(w.duration_ms())
        .into_iter()
        .map(|start| {
            let a = to_sample(start);
            let b = to_sample(start + plan.window_ms).min(w.len());
            (start, w.slice(a, b))
        })
        .collect()
}

/// Merges per-window predictions into one sequence of `total_ms` frames.
///
/// Each frame takes its label from the covering window whose center is
/// nearest the frame center; exact ties go to the earlier window.
pub fn stitch_predictions(
    windows: &[(usize, FrameLabelSequence)],
    total_ms: usize,
) -> Result<FrameLabelSequence, AudioError> {
    let with_probs = !windows.is_empty() && windows.iter().all(|(_, f)| f.probabilities.is_some());
    let mut labels = Vec::with_capacity(total_ms);
    let mut probs = Vec::new();
    for t in 0..total_ms {
        // Twice the frame center, to stay in integers.
        let center2 = 2 * t + 1;
        let mut best: Option<(usize, usize)> = None;
        for (i, (start, frames)) in windows.iter().enumerate() {
            if *start > t {
                break;
            }
            if t >= start + frames.len() {
                continue;
            }
            let win_center2 = 2 * start + frames.len();
            let dist = center2.abs_diff(win_center2);
            if best.is_none_or(|(_, d)| dist < d) {
                best = Some((i, dist));
            }
        }
        let (i, _) = best.ok_or(AudioError::CoverageGap(t))?;
        let (start, frames) = &windows[i];
        labels.push(frames.labels[t - start]);
        if with_probs {
            probs.push(frames.probabilities.as_ref().unwrap()[t - start]);
        }
    }
    Ok(FrameLabelSequence {
        labels,
        probabilities: with_probs.then_some(probs),
        padded: windows.iter().any(|(_, f)| f.padded),
    })
}

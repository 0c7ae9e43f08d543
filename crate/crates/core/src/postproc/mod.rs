//! Frame-to-segment conversion and the three clean-up rules applied to every
//! prediction: run-length grouping, minimum durations, and bridging short
//! silences between consecutive VOTs.

mod io;

pub use io::{
    read_segments_csv, segments_from_csv, segments_to_csv, to_textgrid, write_segments_csv,
};

use serde::{Deserialize, Serialize};

use crate::labels::{FrameLabelSequence, Label};

/// VOT segments shorter than this (ms) become `other`.
pub const MIN_VOT_MS: usize = 5;
/// Vowel segments shorter than this (ms) become `other`.
pub const MIN_VOWEL_MS: usize = 20;
/// `other` gaps shorter than this (ms) between two VOTs are absorbed.
pub const MAX_VOT_GAP_MS: usize = 20;

#[derive(Debug, thiserror::Error)]
pub enum SegmentError {
    #[error("segment {index}: onset {onset} must be below offset {offset}")]
    Empty {
        index: usize,
        onset: usize,
        offset: usize,
    },
    #[error("segment {index} (onset {onset}) overlaps or precedes the previous one (offset {prev_offset})")]
    Unordered {
        index: usize,
        onset: usize,
        prev_offset: usize,
    },
    #[error("row {row}: {source}")]
    Label {
        row: usize,
        source: crate::labels::UnknownLabel,
    },
    #[error("CSV error: {0}")]
    Csv(#[from] csv::Error),
    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),
}

/// Labeled half-open interval `[onset_ms, offset_ms)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Segment {
    pub label: Label,
    pub onset_ms: usize,
    pub offset_ms: usize,
}

impl Segment {
    pub fn new(label: Label, onset_ms: usize, offset_ms: usize) -> Self {
        debug_assert!(onset_ms < offset_ms);
        Self {
            label,
            onset_ms,
            offset_ms,
        }
    }

    pub fn duration_ms(&self) -> usize {
        self.offset_ms - self.onset_ms
    }

    /// Length of the intersection with `other`, in ms.
    pub fn overlap_ms(&self, other: &Segment) -> usize {
        let lo = self.onset_ms.max(other.onset_ms);
        let hi = self.offset_ms.min(other.offset_ms);
        hi.saturating_sub(lo)
    }
}

/// Ordered, non-overlapping segments; touching segments never share a label.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct SegmentSequence(Vec<Segment>);

impl SegmentSequence {
    /// Validates ordering and merges touching segments that share a label.
    pub fn new(segments: Vec<Segment>) -> Result<Self, SegmentError> {
        let mut prev_offset = 0;
        for (index, s) in segments.iter().enumerate() {
            if s.onset_ms >= s.offset_ms {
                return Err(SegmentError::Empty {
                    index,
                    onset: s.onset_ms,
                    offset: s.offset_ms,
                });
            }
            if index > 0 && s.onset_ms < prev_offset {
                return Err(SegmentError::Unordered {
                    index,
                    onset: s.onset_ms,
                    prev_offset,
                });
            }
            prev_offset = s.offset_ms;
        }
        Ok(Self(merge_touching(segments)))
    }

    pub fn empty() -> Self {
        Self(Vec::new())
    }

    pub fn as_slice(&self) -> &[Segment] {
        &self.0
    }

    pub fn into_vec(self) -> Vec<Segment> {
        self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn iter(&self) -> std::slice::Iter<'_, Segment> {
        self.0.iter()
    }

    pub fn with_label(&self, label: Label) -> impl Iterator<Item = &Segment> {
        self.0.iter().filter(move |s| s.label == label)
    }

    /// Drops `other` segments, leaving the annotated speech events.
    pub fn without_other(&self) -> Self {
        Self(
            self.0
                .iter()
                .filter(|s| s.label != Label::Other)
                .copied()
                .collect(),
        )
    }

    /// End of the last segment (0 when empty).
    pub fn end_ms(&self) -> usize {
        self.0.last().map_or(0, |s| s.offset_ms)
    }

    /// Inverse of [`group_frames`]: one label per ms over `[0, total_ms)`,
    /// `other` wherever no segment covers a frame.
    pub fn rasterize(&self, total_ms: usize) -> Vec<Label> {
        let mut out = vec![Label::Other; total_ms];
        for s in &self.0 {
            let hi = s.offset_ms.min(total_ms);
            if s.onset_ms < hi {
                out[s.onset_ms..hi].fill(s.label);
            }
        }
        out
    }

    /// Shifts every segment later by `delta_ms`.
    pub fn translated(&self, delta_ms: usize) -> Self {
        Self(
            self.0
                .iter()
                .map(|s| Segment::new(s.label, s.onset_ms + delta_ms, s.offset_ms + delta_ms))
                .collect(),
        )
    }
}

impl<'a> IntoIterator for &'a SegmentSequence {
    type Item = &'a Segment;
    type IntoIter = std::slice::Iter<'a, Segment>;

    fn into_iter(self) -> Self::IntoIter {
        self.0.iter()
    }
}

fn merge_touching(segments: Vec<Segment>) -> Vec<Segment> {
    let mut out: Vec<Segment> = Vec::with_capacity(segments.len());
    for s in segments {
        match out.last_mut() {
            Some(last) if last.label == s.label && last.offset_ms == s.onset_ms => {
                last.offset_ms = s.offset_ms
            }
            _ => out.push(s),
        }
    }
    out
}

/// Maximal runs of equal labels.
pub fn group_frames(frames: &[Label]) -> SegmentSequence {
    let mut out = Vec::new();
    let mut start = 0;
    for t in 1..=frames.len() {
        if t == frames.len() || frames[t] != frames[start] {
            out.push(Segment::new(frames[start], start, t));
            start = t;
        }
    }
    SegmentSequence(out)
}

/// Relabels VOTs under [`MIN_VOT_MS`] and vowels under [`MIN_VOWEL_MS`] as
/// `other`, then re-merges touching `other` runs.
pub fn apply_min_durations(segs: &SegmentSequence) -> SegmentSequence {
    let relabeled = segs
        .iter()
        .map(|s| {
            let too_short = match s.label {
                Label::Vot => s.duration_ms() < MIN_VOT_MS,
                Label::Vowel => s.duration_ms() < MIN_VOWEL_MS,
                Label::Other => false,
            };
            if too_short {
                Segment {
                    label: Label::Other,
                    ..*s
                }
            } else {
                *s
            }
        })
        .collect();
    SegmentSequence(merge_touching(relabeled))
}

/// Collapses every `VOT, other (< MAX_VOT_GAP_MS), VOT` pattern of touching
/// segments into one VOT, left to right, until no pattern remains.
pub fn merge_vot_gaps(segs: &SegmentSequence) -> SegmentSequence {
    let mut out: Vec<Segment> = Vec::with_capacity(segs.len());
    for &s in segs {
        if s.label == Label::Vot && out.len() >= 2 {
            let gap = out[out.len() - 1];
            let prev = out[out.len() - 2];
            if gap.label == Label::Other
                && prev.label == Label::Vot
                && gap.duration_ms() < MAX_VOT_GAP_MS
                && prev.offset_ms == gap.onset_ms
                && gap.offset_ms == s.onset_ms
            {
                out.pop();
                out.last_mut().unwrap().offset_ms = s.offset_ms;
                continue;
            }
        }
        out.push(s);
    }
    SegmentSequence(merge_touching(out))
}

/// Grouping, minimum durations, then VOT gap bridging, in that order.
pub fn postprocess(frames: &[Label]) -> SegmentSequence {
    merge_vot_gaps(&apply_min_durations(&group_frames(frames)))
}

/// Convenience wrapper over [`postprocess`] for model output.
pub fn postprocess_frames(frames: &FrameLabelSequence) -> SegmentSequence {
    postprocess(&frames.labels)
}

//! Frame classes and per-millisecond label sequences.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

/// Acoustic class of a 1 ms frame.
///
/// The discriminants are the class indices used by the networks; argmax ties
/// resolve toward the lower index.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
#[repr(u8)]
pub enum Label {
    Other = 0,
    Vot = 1,
    Vowel = 2,
}

impl Label {
    pub const COUNT: usize = 3;
    pub const ALL: [Label; 3] = [Label::Other, Label::Vot, Label::Vowel];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(index: usize) -> Option<Label> {
        Label::ALL.get(index).copied()
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Label::Other => "other",
            Label::Vot => "vot",
            Label::Vowel => "vowel",
        }
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("unknown label `{0}` (expected one of vot, vowel, other)")]
pub struct UnknownLabel(pub String);

impl FromStr for Label {
    type Err = UnknownLabel;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim() {
            "other" => Ok(Label::Other),
            "vot" => Ok(Label::Vot),
            "vowel" => Ok(Label::Vowel),
            other => Err(UnknownLabel(other.to_string())),
        }
    }
}

/// One label per millisecond, optionally with the class posteriors that
/// produced it.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct FrameLabelSequence {
    pub labels: Vec<Label>,
    /// Per-frame probabilities in class-index order.
    pub probabilities: Option<Vec<[f32; 3]>>,
    /// Set when the input was shorter than the receptive field and had to be
    /// zero-padded before inference.
    pub padded: bool,
}

impl FrameLabelSequence {
    pub fn from_labels(labels: Vec<Label>) -> Self {
        Self {
            labels,
            probabilities: None,
            padded: false,
        }
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    /// Fraction of frames on which `self` and `other` agree, over the shorter
    /// of the two lengths.
    pub fn accuracy_against(&self, reference: &[Label]) -> f64 {
        let n = self.labels.len().min(reference.len());
        if n == 0 {
            return 0.0;
        }
        let hits = self
            .labels
            .iter()
            .zip(reference)
            .filter(|(a, b)| a == b)
            .count();
        hits as f64 / n as f64
    }
}

/// Index of the largest value; ties go to the lowest index.
pub fn argmax_label(scores: &[f32]) -> Label {
    let mut best = 0;
    for (i, &s) in scores.iter().enumerate().skip(1) {
        if s > scores[best] {
            best = i;
        }
    }
    Label::from_index(best).unwrap_or(Label::Other)
}

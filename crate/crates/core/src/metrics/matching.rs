use serde::Serialize;

use crate::labels::Label;
use crate::postproc::{Segment, SegmentSequence};

/// One-to-one assignment of predicted to target segments of equal label.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct MatchedPairs {
    /// `(predicted, target)` in predicted order.
    pub pairs: Vec<(Segment, Segment)>,
    /// Unmatched targets in target order.
    pub misses: Vec<Segment>,
    /// Unmatched predictions in predicted order.
    pub false_alarms: Vec<Segment>,
}

impl MatchedPairs {
    /// Concatenates the assignments of several trials.
    pub fn extend(&mut self, other: MatchedPairs) {
        self.pairs.extend(other.pairs);
        self.misses.extend(other.misses);
        self.false_alarms.extend(other.false_alarms);
    }

    pub fn pairs_with_label(&self, label: Label) -> impl Iterator<Item = &(Segment, Segment)> {
        self.pairs.iter().filter(move |p| p.0.label == label)
    }
}

fn boundary_cost(a: &Segment, b: &Segment) -> usize {
    a.onset_ms.abs_diff(b.onset_ms) + a.offset_ms.abs_diff(b.offset_ms)
}

/// Greedy matching in predicted order. Each VOT or vowel prediction takes
/// the unmatched target of its label with the smallest
/// `|Δonset| + |Δoffset|` (ties: larger overlap, then earlier target) and
/// keeps it only if the two overlap. `other` segments are ignored.
pub fn match_segments(pred: &SegmentSequence, target: &SegmentSequence) -> MatchedPairs {
    let targets: Vec<Segment> = target
        .iter()
        .filter(|s| s.label != Label::Other)
        .copied()
        .collect();
    let mut taken = vec![false; targets.len()];
    let mut out = MatchedPairs::default();
    for p in pred.iter().filter(|s| s.label != Label::Other) {
        let best = targets
            .iter()
            .enumerate()
            .filter(|(i, t)| !taken[*i] && t.label == p.label)
            .min_by_key(|(i, t)| (boundary_cost(p, t), std::cmp::Reverse(p.overlap_ms(t)), *i));
        match best {
            Some((i, t)) if p.overlap_ms(t) > 0 => {
                taken[i] = true;
                out.pairs.push((*p, *t));
            }
            _ => out.false_alarms.push(*p),
        }
    }
    out.misses = targets
        .iter()
        .zip(&taken)
        .filter(|(_, &t)| !t)
        .map(|(s, _)| *s)
        .collect();
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LabelScores {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub matched: usize,
    pub false_alarms: usize,
    pub misses: usize,
    /// A denominator was empty and the zero convention was used.
    pub degenerate: bool,
}

fn ratio(num: usize, den: usize) -> Option<f64> {
    (den > 0).then(|| num as f64 / den as f64)
}

/// Precision, recall and F1 for one label; empty denominators give 0 and
/// set `degenerate`.
pub fn f1_scores(m: &MatchedPairs, label: Label) -> LabelScores {
    let matched = m.pairs_with_label(label).count();
    let false_alarms = m.false_alarms.iter().filter(|s| s.label == label).count();
    let misses = m.misses.iter().filter(|s| s.label == label).count();
    let p = ratio(matched, matched + false_alarms);
    let r = ratio(matched, matched + misses);
    let (precision, recall) = (p.unwrap_or(0.0), r.unwrap_or(0.0));
    let f1 = if precision + recall > 0.0 {
        2.0 * precision * recall / (precision + recall)
    } else {
        0.0
    };
    LabelScores {
        precision,
        recall,
        f1,
        matched,
        false_alarms,
        misses,
        degenerate: p.is_none() || r.is_none(),
    }
}

/// Mean absolute boundary deviation (ms) per boundary class; `None` for a
/// class without pairs.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct BoundaryMad {
    pub vot_onset: Option<f64>,
    /// VOT offsets pooled with vowel onsets.
    pub vot_offset_vowel_onset: Option<f64>,
    pub vowel_offset: Option<f64>,
}

pub fn boundary_mad(m: &MatchedPairs) -> BoundaryMad {
    let mut sums = [(0usize, 0usize); 3];
    for (p, t) in &m.pairs {
        let (on, off) = match p.label {
            Label::Vot => (0, 1),
            Label::Vowel => (1, 2),
            Label::Other => continue,
        };
        sums[on].0 += p.onset_ms.abs_diff(t.onset_ms);
        sums[on].1 += 1;
        sums[off].0 += p.offset_ms.abs_diff(t.offset_ms);
        sums[off].1 += 1;
    }
    let mean = |(s, n): (usize, usize)| ratio(s, n);
    BoundaryMad {
        vot_onset: mean(sums[0]),
        vot_offset_vowel_onset: mean(sums[1]),
        vowel_offset: mean(sums[2]),
    }
}

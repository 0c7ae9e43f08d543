use serde::Serialize;

use crate::labels::Label;
use crate::postproc::{Segment, SegmentSequence};

/// Why a syllable was added to the raw count.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Correction {
    /// Vowel longer than twice the trial's mean vowel: likely two merged syllables.
    LongVowel,
    /// Onset-to-onset VOT gap longer than twice the mean gap: a missed VOT.
    LongVotGap,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SyllableCount {
    pub raw_count: usize,
    pub corrected_count: f64,
    /// `(segment index, reason)`; the index refers to the input sequence for
    /// vowels and to the VOT list for gaps (the gap after that VOT).
    pub corrections_applied: Vec<(usize, Correction)>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RateResult {
    /// Syllables per second.
    pub rate: f64,
    pub count: SyllableCount,
    pub articulation_time_s: f64,
}

/// Syllable rate over the span from the first VOT onset to the last vowel
/// offset. A syllable is a VOT segment; each vowel longer than twice the
/// mean vowel duration adds one. `None` without VOTs, vowels or a positive
/// span.
pub fn ddk_rate(segs: &SegmentSequence) -> Option<RateResult> {
    let first_vot = segs.with_label(Label::Vot).next()?;
    let last_vowel = segs.with_label(Label::Vowel).last()?;
    if last_vowel.offset_ms <= first_vot.onset_ms {
        return None;
    }
    let raw_count = segs.with_label(Label::Vot).count();
    let vowels: Vec<(usize, &Segment)> = segs
        .iter()
        .enumerate()
        .filter(|(_, s)| s.label == Label::Vowel)
        .collect();
    // d > 2 * total / n, compared exactly in integers
    let total: usize = vowels.iter().map(|(_, s)| s.duration_ms()).sum();
    let corrections: Vec<(usize, Correction)> = vowels
        .iter()
        .filter(|(_, s)| s.duration_ms() * vowels.len() > 2 * total)
        .map(|&(i, _)| (i, Correction::LongVowel))
        .collect();
    let corrected = (raw_count + corrections.len()) as f64;
    let time = (last_vowel.offset_ms - first_vot.onset_ms) as f64 / 1000.0;
    Some(RateResult {
        rate: corrected / time,
        count: SyllableCount {
            raw_count,
            corrected_count: corrected,
            corrections_applied: corrections,
        },
        articulation_time_s: time,
    })
}

/// Rate from VOT segments alone over an externally supplied window
/// `(start_s, end_s)`: each onset-to-onset gap longer than twice the mean
/// gap counts one extra syllable. `None` with fewer than two VOTs or an
/// empty window.
pub fn ddk_rate_vot_only(segs: &SegmentSequence, window: (f64, f64)) -> Option<RateResult> {
    let onsets: Vec<usize> = segs.with_label(Label::Vot).map(|s| s.onset_ms).collect();
    let duration = window.1 - window.0;
    if onsets.len() < 2 || duration.is_nan() || duration <= 0.0 {
        return None;
    }
    let gaps: Vec<usize> = onsets.windows(2).map(|w| w[1] - w[0]).collect();
    let total: usize = gaps.iter().sum();
    let corrections: Vec<(usize, Correction)> = gaps
        .iter()
        .enumerate()
        .filter(|(_, &g)| g * gaps.len() > 2 * total)
        .map(|(i, _)| (i, Correction::LongVotGap))
        .collect();
    let corrected = (onsets.len() + corrections.len()) as f64;
    Some(RateResult {
        rate: corrected / duration,
        count: SyllableCount {
            raw_count: onsets.len(),
            corrected_count: corrected,
            corrections_applied: corrections,
        },
        articulation_time_s: duration,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use Label::{Vot as T, Vowel as V};

    fn seq(v: &[(Label, usize, usize)]) -> SegmentSequence {
        SegmentSequence::new(v.iter().map(|&(l, a, b)| Segment::new(l, a, b)).collect()).unwrap()
    }

    /// `n` syllables of a VOT then a vowel, one every `period` ms from `start`.
    fn syllables(
        n: usize,
        start: usize,
        period: usize,
        vot: usize,
        vowel: usize,
    ) -> SegmentSequence {
        seq(&(0..n)
            .flat_map(|i| {
                let t = start + i * period;
                [(T, t, t + vot), (V, t + vot, t + vot + vowel)]
            })
            .collect::<Vec<_>>())
    }

    #[test]
    fn ten_syllables_over_five_seconds() {
        // first VOT at 0.5 s, last vowel ends at 5.5 s
        let r = ddk_rate(&syllables(10, 500, 500, 40, 460)).unwrap();
        assert_eq!(r.count.raw_count, 10);
        assert_eq!(r.articulation_time_s, 5.0);
        assert_eq!(r.rate, 2.0);
    }

    #[test]
    fn vowel_split_threshold() {
        let mut v = vec![];
        let mut t = 0;
        for d in [100, 100, 100, 100, 100, 250] {
            v.push((T, t, t + 20));
            v.push((V, t + 20, t + 20 + d));
            t += 400;
        }
        let r = ddk_rate(&seq(&v)).unwrap();
        assert!(r.count.corrections_applied.is_empty());

        // five vowels of 84 ms and one of 300 ms: mean 120 ms
        let mut v = vec![];
        let mut t = 0;
        for d in [84, 84, 84, 84, 84, 300] {
            v.push((T, t, t + 20));
            v.push((V, t + 20, t + 20 + d));
            t += 400;
        }
        let r = ddk_rate(&seq(&v)).unwrap();
        assert_eq!(r.count.raw_count, 6);
        assert_eq!(r.count.corrected_count, 7.0);
        assert_eq!(
            r.count.corrections_applied,
            vec![(11, Correction::LongVowel)]
        );
    }

    #[test]
    fn undefined_without_vots_or_vowels() {
        assert!(ddk_rate(&SegmentSequence::empty()).is_none());
        assert!(ddk_rate(&seq(&[(T, 0, 30)])).is_none());
        assert!(ddk_rate(&seq(&[(V, 0, 30)])).is_none());
        // vowel entirely before the first VOT
        assert!(ddk_rate(&seq(&[(V, 0, 30), (T, 40, 60)])).is_none());
    }

    #[test]
    fn vot_only_rate() {
        let uniform = syllables(10, 0, 500, 30, 100);
        assert_eq!(ddk_rate_vot_only(&uniform, (0.0, 5.0)).unwrap().rate, 2.0);
        // eight 0.5 s gaps and one 1.2 s gap
        let onsets = [0, 500, 1000, 1500, 2700, 3200, 3700, 4200, 4700, 5200];
        let s = seq(&onsets.iter().map(|&t| (T, t, t + 30)).collect::<Vec<_>>());
        let r = ddk_rate_vot_only(&s, (0.0, 5.5)).unwrap();
        assert_eq!(r.count.corrected_count, 11.0);
        assert_eq!(
            r.count.corrections_applied,
            vec![(3, Correction::LongVotGap)]
        );
        assert!(ddk_rate_vot_only(&seq(&[(T, 0, 30)]), (0.0, 1.0)).is_none());
        assert!(ddk_rate_vot_only(&uniform, (1.0, 1.0)).is_none());
    }

    // Independent recount: walk the segment list once, tallying by hand.
    fn recount(segs: &[(Label, usize, usize)]) -> Option<(usize, f64)> {
        let mut vots = 0;
        let mut vowel_total = 0;
        let mut vowel_n = 0;
        let mut first_vot = None;
        let mut last_vowel_end = None;
        for &(l, a, b) in segs {
            if l == T {
                vots += 1;
                first_vot.get_or_insert(a);
            } else if l == V {
                vowel_total += b - a;
                vowel_n += 1;
                last_vowel_end = Some(b);
            }
        }
        let (a, b) = (first_vot?, last_vowel_end?);
        if b <= a {
            return None;
        }
        // d > 2 * total / n  <=>  d * n > 2 * total, in exact integers
        let extra = segs
            .iter()
            .filter(|s| s.0 == V && (s.2 - s.1) * vowel_n > 2 * vowel_total)
            .count();
        Some((vots + extra, (b - a) as f64 / 1000.0))
    }

    fn random_segments() -> impl Strategy<Value = Vec<(Label, usize, usize)>> {
        prop::collection::vec((prop::bool::ANY, 1usize..400, 0usize..100), 0..30).prop_map(|v| {
            let mut t = 0;
            v.into_iter()
                .map(|(is_vot, d, gap)| {
                    t += gap;
                    let s = (if is_vot { T } else { V }, t, t + d);
                    t += d + 1;
                    s
                })
                .collect()
        })
    }

    proptest! {
        #[test]
        fn matches_recount(v in random_segments()) {
            let got = ddk_rate(&seq(&v)).map(|r| (r.count.corrected_count as usize, r.articulation_time_s));
            prop_assert_eq!(got, recount(&v));
        }

        #[test]
        fn translation_invariant_and_dilation_scaled(v in random_segments(), shift in 0usize..5000) {
            let base = seq(&v);
            if let Some(r) = ddk_rate(&base) {
                prop_assert_eq!(ddk_rate(&base.translated(shift)).unwrap().rate, r.rate);
                let doubled = seq(&v.iter().map(|&(l, a, b)| (l, 2 * a, 2 * b)).collect::<Vec<_>>());
                let r2 = ddk_rate(&doubled).unwrap();
                prop_assert!((r2.rate - r.rate / 2.0).abs() < 1e-12 * r.rate);
            }
        }

        #[test]
        fn vot_only_matches_recount(onsets in prop::collection::btree_set(0usize..20000, 0..25)) {
            let onsets: Vec<usize> = onsets.into_iter().map(|t| t * 2).collect();
            let s = seq(&onsets.iter().map(|&t| (T, t, t + 1)).collect::<Vec<_>>());
            let got = ddk_rate_vot_only(&s, (0.0, 50.0)).map(|r| r.count.corrected_count as usize);
            let want = (onsets.len() >= 2).then(|| {
                let gaps: Vec<usize> = onsets.windows(2).map(|w| w[1] - w[0]).collect();
                let total: usize = gaps.iter().sum();
                onsets.len() + gaps.iter().filter(|&&g| g * gaps.len() > 2 * total).count()
            });
            prop_assert_eq!(got, want);
        }
    }
}

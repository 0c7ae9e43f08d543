use serde::Serialize;

use super::MatchedPairs;
use crate::labels::Label;

/// Linear-interpolation percentile (`q` in [0, 100]) of unsorted values.
pub fn percentile(values: &[f64], q: f64) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let pos = q.clamp(0.0, 100.0) / 100.0 * (v.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = (lo + 1).min(v.len() - 1);
    Some(v[lo] + (pos - lo as f64) * (v[hi] - v[lo]))
}

/// Upper and lower trimming percentiles.
pub const TRIM_UPPER_PERCENTILE: f64 = 95.0;
pub const TRIM_LOWER_PERCENTILE: f64 = 2.0;

/// Indices of values neither above the 95th nor below the 2nd percentile.
pub fn trim_outliers(values: &[f64]) -> Vec<usize> {
    let (Some(hi), Some(lo)) = (
        percentile(values, TRIM_UPPER_PERCENTILE),
        percentile(values, TRIM_LOWER_PERCENTILE),
    ) else {
        return Vec::new();
    };
    (0..values.len())
        .filter(|&i| values[i] <= hi && values[i] >= lo)
        .collect()
}

/// Pearson correlation; `None` for fewer than two points or zero variance.
pub fn pearson(x: &[f64], y: &[f64]) -> Option<f64> {
    let n = x.len();
    let constant = |v: &[f64]| v.iter().all(|&a| a == v[0]);
    if n < 2 || n != y.len() || constant(x) || constant(y) {
        return None;
    }
    let mx = x.iter().sum::<f64>() / n as f64;
    let my = y.iter().sum::<f64>() / n as f64;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        let (dx, dy) = (a - mx, b - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    Some((sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0))
}

pub fn mean_abs_error(x: &[f64], y: &[f64]) -> Option<f64> {
    (!x.is_empty() && x.len() == y.len())
        .then(|| x.iter().zip(y).map(|(a, b)| (a - b).abs()).sum::<f64>() / x.len() as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DurationStats {
    /// Pairs surviving the trim.
    pub n: usize,
    /// `None` when either side has zero variance.
    pub pearson_r: Option<f64>,
    pub mae_s: f64,
}

/// Minimum number of surviving pairs for duration statistics.
pub const MIN_DURATION_PAIRS: usize = 3;

/// Duration agreement for one label. Predicted and target durations are
/// trimmed independently and a pair survives only if both sides do.
pub fn duration_stats(m: &MatchedPairs, label: Label) -> Option<DurationStats> {
    let (pred, target): (Vec<f64>, Vec<f64>) = m
        .pairs_with_label(label)
        .map(|(p, t)| {
            (
                p.duration_ms() as f64 / 1000.0,
                t.duration_ms() as f64 / 1000.0,
            )
        })
        .unzip();
    let mut keep = vec![0u8; pred.len()];
    for i in trim_outliers(&pred) {
        keep[i] += 1;
    }
    for i in trim_outliers(&target) {
        keep[i] += 1;
    }
    let (x, y): (Vec<f64>, Vec<f64>) = (0..pred.len())
        .filter(|&i| keep[i] == 2)
        .map(|i| (pred[i], target[i]))
        .unzip();
    if x.len() < MIN_DURATION_PAIRS {
        return None;
    }
    Some(DurationStats {
        n: x.len(),
        pearson_r: pearson(&x, &y),
        mae_s: mean_abs_error(&x, &y)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::postproc::Segment;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn hundred_sorted_values() {
        let v: Vec<f64> = (0..100).map(|i| i as f64 * 1.5 + 3.0).collect();
        assert_eq!(trim_outliers(&v), (2..=94).collect::<Vec<_>>());
    }

    #[test]
    fn trim_edge_cases() {
        assert_eq!(trim_outliers(&[4.0; 17]), (0..17).collect::<Vec<_>>());
        assert!(trim_outliers(&[]).is_empty());
        assert_eq!(trim_outliers(&[1.0]), vec![0]);
    }

    // Percentile from the explicit rank formula on a sorted copy.
    #[test]
    fn trim_matches_explicit_percentiles() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..200 {
            let n = rng.gen_range(1..60);
            let v: Vec<f64> = (0..n).map(|_| rng.gen_range(0..40) as f64).collect();
            let mut s = v.clone();
            s.sort_by(f64::total_cmp);
            let at = |q: f64| {
                let h = (n - 1) as f64 * q;
                let f = h.floor();
                s[f as usize] + (h - f) * (s[(f as usize + 1).min(n - 1)] - s[f as usize])
            };
            let (hi, lo) = (at(0.95), at(0.02));
            let want: Vec<usize> = (0..n).filter(|&i| v[i] <= hi && v[i] >= lo).collect();
            assert_eq!(trim_outliers(&v), want);
            // every value strictly inside the band is retained
            assert!((0..n)
                .filter(|&i| v[i] > lo && v[i] < hi)
                .all(|i| want.contains(&i)));
        }
    }

    fn pairs(durations: &[(usize, usize)]) -> MatchedPairs {
        MatchedPairs {
            pairs: durations
                .iter()
                .enumerate()
                .map(|(i, &(p, t))| {
                    (
                        Segment::new(Label::Vot, i * 1000, i * 1000 + p),
                        Segment::new(Label::Vot, i * 1000, i * 1000 + t),
                    )
                })
                .collect(),
            ..Default::default()
        }
    }

    #[test]
    fn identical_and_shifted_durations() {
        let d: Vec<(usize, usize)> = (0..30).map(|i| (20 + 3 * i, 20 + 3 * i)).collect();
        let s = duration_stats(&pairs(&d), Label::Vot).unwrap();
        assert!((s.pearson_r.unwrap() - 1.0).abs() < 1e-12);
        assert_eq!(s.mae_s, 0.0);
        let shifted: Vec<(usize, usize)> = d.iter().map(|&(p, t)| (p + 5, t)).collect();
        let s = duration_stats(&pairs(&shifted), Label::Vot).unwrap();
        assert!((s.pearson_r.unwrap() - 1.0).abs() < 1e-12);
        assert!((s.mae_s - 0.005).abs() < 1e-12);
        assert!(duration_stats(&pairs(&d[..2]), Label::Vot).is_none());
        assert!(duration_stats(&pairs(&d), Label::Vowel).is_none());
    }

    // Exact integer sums, one rounding at the end.
    fn exact_pearson(x: &[i64], y: &[i64]) -> f64 {
        let n = x.len() as i128;
        let sx: i128 = x.iter().map(|&v| v as i128).sum();
        let sy: i128 = y.iter().map(|&v| v as i128).sum();
        let sxy: i128 = x.iter().zip(y).map(|(&a, &b)| a as i128 * b as i128).sum();
        let sxx: i128 = x.iter().map(|&a| a as i128 * a as i128).sum();
        let syy: i128 = y.iter().map(|&b| b as i128 * b as i128).sum();
        let num = (n * sxy - sx * sy) as f64;
        let den = ((n * sxx - sx * sx) as f64).sqrt() * ((n * syy - sy * sy) as f64).sqrt();
        num / den
    }

    #[test]
    fn pearson_matches_exact_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..500 {
            let n = rng.gen_range(3..200);
            let x: Vec<i64> = (0..n).map(|_| rng.gen_range(5..400)).collect();
            let y: Vec<i64> = x.iter().map(|&v| v + rng.gen_range(-60..60)).collect();
            let fx: Vec<f64> = x.iter().map(|&v| v as f64).collect();
            let fy: Vec<f64> = y.iter().map(|&v| v as f64).collect();
            let r = pearson(&fx, &fy).unwrap();
            assert!((r - exact_pearson(&x, &y)).abs() < 1e-12);
        }
        assert_eq!(pearson(&[1.0, 1.0, 1.0], &[1.0, 2.0, 3.0]), None);
    }
}

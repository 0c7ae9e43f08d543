use std::fmt::Write as _;
use std::io::Write;

use serde::Serialize;

use super::{
    boundary_mad, ddk_rate, ddk_rate_vot_only, duration_stats, f1_scores, match_segments,
    mean_abs_error, pearson, BoundaryMad, DurationStats, LabelScores, MatchedPairs,
};
use crate::labels::Label;
use crate::postproc::SegmentSequence;

#[derive(Debug, thiserror::Error)]
pub enum MetricsError {
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

/// One trial to evaluate. With a `window` (seconds) the VOT-only rate is
/// used for both sides; otherwise the articulation-time rate.
#[derive(Debug, Clone)]
pub struct TrialInput {
    pub trial_id: String,
    pub predicted: SegmentSequence,
    pub target: SegmentSequence,
    pub window: Option<(f64, f64)>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrialRate {
    pub trial_id: String,
    pub predicted: Option<f64>,
    pub target: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvalReport {
    pub trials: usize,
    pub vot: LabelScores,
    pub vowel: LabelScores,
    pub boundary_mad_ms: BoundaryMad,
    pub vot_duration: Option<DurationStats>,
    pub vowel_duration: Option<DurationStats>,
    pub rates: Vec<TrialRate>,
    /// Over trials where both rates are defined.
    pub rate_correlation: Option<f64>,
    pub rate_mae: Option<f64>,
}

impl EvalReport {
    /// Pools segment matches over all trials; rates are per trial.
    pub fn compute(trials: &[TrialInput]) -> Self {
        let mut pooled = MatchedPairs::default();
        let mut rates = Vec::with_capacity(trials.len());
        for t in trials {
            pooled.extend(match_segments(&t.predicted, &t.target));
            let rate = |s: &SegmentSequence| match t.window {
                Some(w) => ddk_rate_vot_only(s, w).map(|r| r.rate),
                None => ddk_rate(s).map(|r| r.rate),
            };
            rates.push(TrialRate {
                trial_id: t.trial_id.clone(),
                predicted: rate(&t.predicted),
                target: rate(&t.target),
            });
        }
        let (p, g): (Vec<f64>, Vec<f64>) = rates
            .iter()
            .filter_map(|r| Some((r.predicted?, r.target?)))
            .unzip();
        Self {
            trials: trials.len(),
            vot: f1_scores(&pooled, Label::Vot),
            vowel: f1_scores(&pooled, Label::Vowel),
            boundary_mad_ms: boundary_mad(&pooled),
            vot_duration: duration_stats(&pooled, Label::Vot),
            vowel_duration: duration_stats(&pooled, Label::Vowel),
            rate_correlation: pearson(&p, &g),
            rate_mae: mean_abs_error(&p, &g),
            rates,
        }
    }

    /// `(metric, label, value)` rows; undefined values are written as
    /// `undefined`.
    pub fn rows(&self) -> Vec<(&'static str, &'static str, Option<f64>)> {
        let mut rows = Vec::new();
        for (name, s) in [("vot", &self.vot), ("vowel", &self.vowel)] {
            rows.push(("precision", name, Some(s.precision)));
            rows.push(("recall", name, Some(s.recall)));
            rows.push(("f1", name, Some(s.f1)));
            rows.push(("matched", name, Some(s.matched as f64)));
            rows.push(("false_alarms", name, Some(s.false_alarms as f64)));
            rows.push(("misses", name, Some(s.misses as f64)));
        }
        rows.push((
            "boundary_mad_ms",
            "vot_onset",
            self.boundary_mad_ms.vot_onset,
        ));
        rows.push((
            "boundary_mad_ms",
            "vot_offset_vowel_onset",
            self.boundary_mad_ms.vot_offset_vowel_onset,
        ));
        rows.push((
            "boundary_mad_ms",
            "vowel_offset",
            self.boundary_mad_ms.vowel_offset,
        ));
        for (name, d) in [("vot", &self.vot_duration), ("vowel", &self.vowel_duration)] {
            rows.push(("duration_r", name, d.and_then(|d| d.pearson_r)));
            rows.push(("duration_mae_s", name, d.map(|d| d.mae_s)));
        }
        rows.push(("rate_correlation", "all", self.rate_correlation));
        rows.push(("rate_mae", "all", self.rate_mae));
        rows
    }

    pub fn write_csv(&self, writer: impl Write) -> Result<(), MetricsError> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["metric", "label", "value"])?;
        for (metric, label, value) in self.rows() {
            w.write_record([metric, label, &fmt_opt(value)])?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn write_rates_csv(&self, writer: impl Write) -> Result<(), MetricsError> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["trial_id", "predicted_rate", "target_rate"])?;
        for r in &self.rates {
            w.write_record([
                r.trial_id.as_str(),
                &fmt_opt(r.predicted),
                &fmt_opt(r.target),
            ])?;
        }
        w.flush()?;
        Ok(())
    }

    /// Human-readable summary.
    pub fn to_table(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "trials: {}", self.trials);
        let _ = writeln!(
            s,
            "{:<8}{:>10}{:>10}{:>10}{:>9}{:>6}{:>8}",
            "label", "precision", "recall", "f1", "matched", "FA", "misses"
        );
        for (name, l) in [("vot", &self.vot), ("vowel", &self.vowel)] {
            let _ = writeln!(
                s,
                "{name:<8}{:>10.4}{:>10.4}{:>10.4}{:>9}{:>6}{:>8}{}",
                l.precision,
                l.recall,
                l.f1,
                l.matched,
                l.false_alarms,
                l.misses,
                if l.degenerate { "  (degenerate)" } else { "" }
            );
        }
        let m = &self.boundary_mad_ms;
        let _ = writeln!(
            s,
            "boundary MAD (ms): vot onset {}, vot offset/vowel onset {}, vowel offset {}",
            fmt_opt(m.vot_onset),
            fmt_opt(m.vot_offset_vowel_onset),
            fmt_opt(m.vowel_offset)
        );
        for (name, d) in [("vot", &self.vot_duration), ("vowel", &self.vowel_duration)] {
            let _ = match d {
                Some(d) => writeln!(
                    s,
                    "{name} duration: r {} MAE {:.4} s (n = {})",
                    fmt_opt(d.pearson_r),
                    d.mae_s,
                    d.n
                ),
                None => writeln!(s, "{name} duration: undefined"),
            };
        }
        let _ = writeln!(
            s,
            "rate: r {} MAE {} syll/s",
            fmt_opt(self.rate_correlation),
            fmt_opt(self.rate_mae)
        );
        s
    }
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(|| "undefined".to_string(), |v| format!("{v:.6}"))
}

//! DDK rate estimation and segment-level evaluation against annotations.

mod matching;
mod rate;
mod report;
mod stats;

pub use matching::{
    boundary_mad, f1_scores, match_segments, BoundaryMad, LabelScores, MatchedPairs,
};
pub use rate::{ddk_rate, ddk_rate_vot_only, Correction, RateResult, SyllableCount};
pub use report::{EvalReport, MetricsError, TrialInput, TrialRate};
pub use stats::{
    duration_stats, mean_abs_error, pearson, percentile, trim_outliers, DurationStats,
};

//! Goal completion, success, step totals and the Improvement Rate.

pub mod ir;
pub mod ols;
pub mod report;

pub use ir::{
    calibrated_power_law_series, improvement_rate, match_power_law_exponent, power_law_series, segmentation_levels,
    uniform_partition, SegmentationLevel, DEFAULT_MAX_SEGMENTS,
};
pub use ols::ols_slope;
pub use report::{evaluate_log, replay_series, report, score_series, MetricsReport, ScoreMode, ScoreSeries, ScoreTracker};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum MetricsError {
    #[error("series too short: need at least {needed} points, got {got}")]
    TooShort { needed: usize, got: usize },
    #[error("maximum segmentation must be at least 2, got {0}")]
    BadSegmentation(usize),
    #[error("target {target} outside the achievable range [{min}, {max}]")]
    OutOfRange { target: f64, min: f64, max: f64 },
    #[error("replay diverged at record {index}")]
    ReplayMismatch { index: usize },
}

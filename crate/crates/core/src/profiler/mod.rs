//! Task-complexity profiling and fine-tuning lift prediction.
//!
//! The pipeline: measure each task's dataset ([`compute_profile`]), pair it
//! with measured model quality ([`QualityRecord`]), look at how the two
//! correlate ([`correlation_report`]), and fit linear models from z-scored
//! heuristics to each quality metric ([`lift_table`]).
//!
//! Conventions used throughout: whitespace tokenization after lowercasing,
//! population standard deviation, nearest-rank percentiles.

mod dataset;
mod regression;
mod stats;
mod table;
mod text;

pub use dataset::{
    compute_profile, parse_jsonl, read_profiles_csv, read_quality_csv, write_profiles_csv,
    LengthStats, QualityMetric, QualityRecord, Spread, TaskProfile, HEURISTICS,
};
pub use regression::{fit_lift_model, fit_ols, loo_rmse, predict, predict_row, LiftModel};
pub use stats::{mean, pearson, population_std, rmse, zscore, ZScored};
pub use table::{correlation_report, lift_table, CorrelationMatrix, LiftRow, RmseMode};
pub use text::{compressibility, lcs_len, rouge_l, tokenize};

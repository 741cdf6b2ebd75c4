//! Sequential evaluation, metrics, learner split and grid search.

mod grid;
mod metrics;
mod report;
mod sequential;
mod split;

pub use grid::{grid_search, write_sweep_csv, GridResult, GridSpec, Objective, SweepRow};
pub use metrics::{compute_metrics, weighted_metrics, ConfusionCounts, Metrics};
pub use report::{comparison_table, EvalReport, LearnerResult, SplitInfo, REPORT_SCHEMA_VERSION};
pub use sequential::{evaluate_from, evaluate_sequential, validate_ordering};
pub use split::split_learners;

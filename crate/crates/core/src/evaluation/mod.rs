//! Cross-validation, grid search over selector x model combinations, and the
//! reports built from them.

mod cv;
mod metrics;
mod pipeline;

pub use cv::{holdout_split, kfold_split, CvConfig, Fold};
pub use metrics::{
    bin_residuals, coefficient_magnitudes, compute_metrics, feature_importance_report, mean_metrics,
    residual_analysis, sex_gap, Metrics, ResidualBins, SexGap, RESIDUAL_EDGES,
};
pub use pipeline::{
    evaluate_combo, grid_search, leaderboard, leak_free_split, run_grid, selector_frequency, ComboFailure,
    EvalRecord, GridConfig, GridPoint, GridRun, GridSearchResult, LeaderboardRow, PipelineMode, RowAccess,
};

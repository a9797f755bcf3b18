//! Post-processing of session logs: strategic levels, convergence rates,
//! closed-form predictions, and per-label summaries.

mod convergence;
mod histogram;
mod levels;
mod predict;
mod summary;

pub use convergence::{
    convergence_rate, convergence_series, ConvergencePoint, ConvergenceRate, Undefined,
};
pub use histogram::{choice_histogram, Bin};
pub use levels::{
    classify_level, estimate_level, normalize_choice, recalibrated_reference, LevelClass,
    LevelEstimate, LevelFlag, LEVEL_CLASS_HALF_WIDTH, N_MAX,
};
pub use predict::{
    per_type_coefficients, per_type_ratio_mixed, predicted_next_mixed, predicted_ratio_fixed,
    TypeRatioCoefficients,
};
pub use summary::{
    mean, median, session_summary, ChoiceRow, GroupSummary, PeriodValue, SummaryOptions,
    SummaryTable,
};

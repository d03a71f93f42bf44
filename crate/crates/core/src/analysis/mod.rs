//! Period detection, cycle decomposition, the instability constants and the
//! estimators linking pre-limit runs to the fluid switch laws.

mod constants;
mod cycles;
mod estimators;
mod growth;
mod periods;
mod supermartingale;

pub use constants::{constants, ConstantsStatus, InstabilityConstants, KappaAlpha, P_INCREASE};
pub use cycles::{
    cycle_decomposition, weakly_balanced, BoundKind, CycleReport, CycleStats, PairStats, Violation, BOUND_SLACK,
};
pub use estimators::{
    estimate_pq, m1_exit_frequencies, path_m1_exits, pq_start, prelimit_m1_exits, prelimit_transition, ExitCounts,
    ExitFrequencies, ExitFrequency, PqEstimate, PqRung, PqSide, TransitionRun, MIN_EXITS,
};
pub use growth::{node_average_slope, post_period_increments, sawtooth_ratios, SawtoothSummary};
pub use periods::{
    detect_periods, next_period, path_periods, path_scheme, DetectOptions, LabeledInterval, PeriodScheme,
};
pub use supermartingale::{supermartingale_diagnostic, SupermartingaleReport, MIN_PAIRS};

//! Search-efficiency metrics, path-optimality ratios and benchmark suites.

mod metrics;
mod report;
mod suite;

pub use metrics::{
    check_weights, classify_failure, compute_osr, compute_rates, optimal_tour_length, osr, path_stats, Count,
    FailureCategory, PathStats, SearchRates, DEFAULT_WEIGHTS, MAX_TOUR_WAYPOINTS,
};
pub use report::{
    aggregate, read_rows_csv, stat, write_rows_csv, Aggregate, BenchReport, Row, RowKind, Stat, CSV_COLUMNS,
    RATE_DEFINITIONS, REPORT_FORMAT,
};
pub use suite::{
    load_source, make_ranker, plan_instances, run_benchmark, trial_row, LoadedScene, PlanInstance, RankerBackend,
    SceneSource, SuiteConfig, SuiteKind, BUILTIN_SUITES,
};

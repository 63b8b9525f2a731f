//! Workload parsing and feature extraction.

mod features;
mod parse;
mod selectivity;
mod workload;

pub use features::{
    analyze_workload, extract_workload_features, AnalyzedWorkload, ColumnStat, PredicateSelectivity, QueryFeature,
    WorkloadFeatures,
};
pub use parse::{parse_query, QueryShape, WherePredicate};
pub use selectivity::{
    SelectivityEstimator, SimEstimator, PREFIX_LIKE_SELECTIVITY, RANGE_SELECTIVITY, UNKNOWN_SELECTIVITY,
};
pub use workload::{split_statements, Workload};

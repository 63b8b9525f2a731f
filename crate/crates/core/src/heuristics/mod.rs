//! Candidate generation, two budget-constrained advisors, and the label
//! collection built on them.

mod advisors;
mod candidates;
mod labels;

pub use advisors::{
    advisor_registry, greedy_extend, ranked_by_density, Advisor, AdvisorRegistry, DensityAdvisor, GreedyAdvisor,
};
pub use candidates::{feature_columns, generate_candidates, CandidateSet, Clause};
pub use labels::{collect_default_label, make_refined_label, DefaultLabel, PoolMember, DEFAULT_BUDGET_GRID};

/// Converts a fraction of the database size to MB.
pub fn budget_mb(fraction: f64, db_size_mb: f64) -> f64 {
    fraction * db_size_mb
}

//! Sampling-based inference scaling: voting over sampled recommendations,
//! best-of-N selection, and the iterative self-optimization loop.

mod optimize;
mod vote;

pub use optimize::{
    best_of_n, evaluate_option, evaluate_options, self_optimize, CandidateOption, IterationTrace, Origin,
    SelfOptConfig, SelfOptResult, DEMOS_PER_PROMPT,
};
pub use vote::{index_guided_major_voting, tally, VoteTally};

#[cfg(test)]
mod tests;

use std::collections::BTreeSet;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::WhatIfError;
use crate::heuristics::{greedy_extend, Advisor, DensityAdvisor, GreedyAdvisor};
use crate::index::{IndexAction, IndexDef};
use crate::sql::AnalyzedWorkload;
use crate::whatif::WhatIfBackend;

/// Budget fractions used for label collection when none are given.
pub const DEFAULT_BUDGET_GRID: [f64; 5] = [0.2, 0.3, 0.4, 0.5, 0.6];

/// One candidate configuration considered for a default label.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PoolMember {
    /// Producing advisor and grid fraction, e.g. `greedy@0.2+ext`.
    pub source: String,
    pub indexes: BTreeSet<IndexDef>,
    pub size_mb: f64,
    pub cost: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DefaultLabel {
    /// CREATE actions only.
    pub actions: Vec<IndexAction>,
    pub chosen: BTreeSet<IndexDef>,
    pub cost: f64,
    pub baseline_cost: f64,
    /// Every distinct pool configuration, cheapest first.
    pub pool: Vec<PoolMember>,
}

impl DefaultLabel {
    /// Pool members other than the chosen configuration.
    pub fn suboptimal(&self) -> impl Iterator<Item = &PoolMember> {
        self.pool.iter().filter(move |m| m.indexes != self.chosen)
    }
}

/// Runs both advisors at every grid budget up to `target`, extends each result
/// greedily to the target budget, and keeps the cheapest configuration.
///
/// `db_size_mb` converts fractions to MB. Ties prefer fewer indexes, then
/// smaller total size, then the lexicographically smaller set.
pub fn collect_default_label(
    backend: &dyn WhatIfBackend,
    workload: &AnalyzedWorkload,
    candidates: &[IndexDef],
    budget_grid: &[f64],
    target: f64,
    db_size_mb: f64,
) -> Result<DefaultLabel, WhatIfError> {
    if !budget_grid.iter().any(|b| (b - target).abs() < 1e-12) {
        return Err(WhatIfError::Backend(format!(
            "target budget {target} is not in the grid {budget_grid:?}"
        )));
    }
    let target_mb = target * db_size_mb;
    let advisors: [&dyn Advisor; 2] = [&GreedyAdvisor, &DensityAdvisor];
    let mut fractions: Vec<f64> = budget_grid.iter().copied().filter(|b| *b <= target + 1e-12).collect();
    fractions.sort_by(f64::total_cmp);
    fractions.dedup();

    let runs: Vec<(&dyn Advisor, f64)> = fractions
        .iter()
        .flat_map(|&b| advisors.iter().map(move |a| (*a, b)))
        .collect();
    let produced = runs
        .par_iter()
        .map(|(a, b)| {
            let native = a.advise(backend, workload, candidates, b * db_size_mb)?;
            let extended = greedy_extend(backend, workload, candidates, &native, target_mb)?;
            Ok([
                (format!("{}@{b}", a.name()), native),
                (format!("{}@{b}+ext", a.name()), extended),
            ])
        })
        .collect::<Result<Vec<_>, WhatIfError>>()?;

    let mut pool: Vec<PoolMember> = Vec::new();
    for (source, defs) in produced.into_iter().flatten() {
        let indexes: BTreeSet<IndexDef> = defs.into_iter().collect();
        if pool.iter().any(|m| m.indexes == indexes) {
            continue;
        }
        let size_mb = indexes
            .iter()
            .map(|d| backend.index_size_mb(d))
            .sum::<Result<f64, _>>()?;
        let cost = backend.cost_with(workload, &indexes)?.total;
        pool.push(PoolMember {
            source,
            indexes,
            size_mb,
            cost,
        });
    }
    pool.sort_by(|a, b| {
        a.cost
            .total_cmp(&b.cost)
            .then(a.indexes.len().cmp(&b.indexes.len()))
            .then(a.size_mb.total_cmp(&b.size_mb))
            .then(a.indexes.cmp(&b.indexes))
    });
    let baseline_cost = backend.cost_with(workload, &BTreeSet::new())?.total;
    let chosen = pool.first().map(|m| m.indexes.clone()).unwrap_or_default();
    let cost = pool.first().map_or(baseline_cost, |m| m.cost);
    Ok(DefaultLabel {
        actions: chosen.iter().cloned().map(IndexAction::Create).collect(),
        chosen,
        cost,
        baseline_cost,
        pool,
    })
}

/// DROPs for `suboptimal ∖ optimal`, then CREATEs for `optimal ∖ suboptimal`.
pub fn make_refined_label(suboptimal: &BTreeSet<IndexDef>, optimal: &BTreeSet<IndexDef>) -> Vec<IndexAction> {
    suboptimal
        .difference(optimal)
        .cloned()
        .map(IndexAction::Drop)
        .chain(optimal.difference(suboptimal).cloned().map(IndexAction::Create))
        .collect()
}

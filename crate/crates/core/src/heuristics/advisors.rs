use std::collections::BTreeSet;

use rayon::prelude::*;

use crate::error::{RegistryError, WhatIfError};
use crate::index::IndexDef;
use crate::registry::Registry;
use crate::sql::AnalyzedWorkload;
use crate::whatif::WhatIfBackend;

/// Budget-constrained index selection over a fixed candidate list.
pub trait Advisor: Send + Sync {
    fn name(&self) -> &'static str;

    /// Chosen definitions in selection order; their total size never exceeds `budget_mb`.
    fn advise(
        &self,
        backend: &dyn WhatIfBackend,
        workload: &AnalyzedWorkload,
        candidates: &[IndexDef],
        budget_mb: f64,
    ) -> Result<Vec<IndexDef>, WhatIfError>;
}

/// Adds, one at a time, the candidate with the largest cost reduction.
#[derive(Debug, Clone, Copy, Default)]
pub struct GreedyAdvisor;

/// Ranks candidates by solo benefit per MB and admits them while they fit.
#[derive(Debug, Clone, Copy, Default)]
pub struct DensityAdvisor;

impl Advisor for GreedyAdvisor {
    fn name(&self) -> &'static str {
        "greedy"
    }

    fn advise(
        &self,
        backend: &dyn WhatIfBackend,
        workload: &AnalyzedWorkload,
        candidates: &[IndexDef],
        budget_mb: f64,
    ) -> Result<Vec<IndexDef>, WhatIfError> {
        greedy_extend(backend, workload, candidates, &[], budget_mb)
    }
}

/// Greedy selection starting from `start`, whose size counts against the budget.
/// Returns `start` followed by the added definitions.
pub fn greedy_extend(
    backend: &dyn WhatIfBackend,
    workload: &AnalyzedWorkload,
    candidates: &[IndexDef],
    start: &[IndexDef],
    budget_mb: f64,
) -> Result<Vec<IndexDef>, WhatIfError> {
    let sizes = sizes(backend, candidates)?;
    let mut chosen: Vec<IndexDef> = start.to_vec();
    let mut set: BTreeSet<IndexDef> = start.iter().cloned().collect();
    let mut used: f64 = start.iter().map(|d| backend.index_size_mb(d)).sum::<Result<f64, _>>()?;
    let mut current = backend.cost_with(workload, &set)?.total;
    loop {
        let open: Vec<usize> = (0..candidates.len())
            .filter(|&i| !set.contains(&candidates[i]) && used + sizes[i] <= budget_mb)
            .collect();
        let costs = open
            .par_iter()
            .map(|&i| {
                let mut s = set.clone();
                s.insert(candidates[i].clone());
                backend.cost_with(workload, &s).map(|r| r.total)
            })
            .collect::<Result<Vec<_>, _>>()?;
        let mut best: Option<(usize, f64)> = None;
        for (&i, &c) in open.iter().zip(&costs) {
            if c < current && best.is_none_or(|(_, bc)| c < bc) {
                best = Some((i, c));
            }
        }
        let Some((i, c)) = best else { break };
        set.insert(candidates[i].clone());
        chosen.push(candidates[i].clone());
        used += sizes[i];
        current = c;
    }
    Ok(chosen)
}

impl Advisor for DensityAdvisor {
    fn name(&self) -> &'static str {
        "density"
    }

    fn advise(
        &self,
        backend: &dyn WhatIfBackend,
        workload: &AnalyzedWorkload,
        candidates: &[IndexDef],
        budget_mb: f64,
    ) -> Result<Vec<IndexDef>, WhatIfError> {
        let sizes = sizes(backend, candidates)?;
        let base = backend.cost_with(workload, &BTreeSet::new())?.total;
        let benefits = candidates
            .par_iter()
            .map(|d| {
                backend
                    .cost_with(workload, &BTreeSet::from([d.clone()]))
                    .map(|r| base - r.total)
            })
            .collect::<Result<Vec<_>, _>>()?;
        ranked_by_density(&benefits, &sizes, budget_mb)
            .into_iter()
            .map(|i| Ok(candidates[i].clone()))
            .collect()
    }
}

/// Indexes admitted by descending `benefit / size`, skipping non-positive
/// benefits and anything that no longer fits. Ties keep input order.
pub fn ranked_by_density(benefits: &[f64], sizes: &[f64], budget_mb: f64) -> Vec<usize> {
    let mut order: Vec<usize> = (0..benefits.len()).filter(|&i| benefits[i] > 0.0).collect();
    order.sort_by(|&a, &b| {
        (benefits[b] / sizes[b])
            .total_cmp(&(benefits[a] / sizes[a]))
            .then(a.cmp(&b))
    });
    let mut used = 0.0;
    let mut out = Vec::new();
    for i in order {
        if used + sizes[i] <= budget_mb {
            used += sizes[i];
            out.push(i);
        }
    }
    out
}

fn sizes(backend: &dyn WhatIfBackend, candidates: &[IndexDef]) -> Result<Vec<f64>, WhatIfError> {
    candidates.iter().map(|d| backend.index_size_mb(d)).collect()
}

pub type AdvisorRegistry = Registry<dyn Advisor, (), RegistryError>;

pub fn advisor_registry() -> AdvisorRegistry {
    Registry::new("advisor")
        .with("greedy", |_: &()| Ok(Box::new(GreedyAdvisor) as Box<dyn Advisor>))
        .with("density", |_: &()| Ok(Box::new(DensityAdvisor) as Box<dyn Advisor>))
}

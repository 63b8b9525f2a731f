//! Hypothetical index sessions and workload costing.
//!
//! A [`WhatIfBackend`] owns the catalog and a selectivity estimator and hands
//! out independent [`WhatIfSession`]s. Sessions hold a set of hypothetical
//! indexes and price an [`AnalyzedWorkload`] against it.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::catalog::Catalog;
use crate::error::{FeatureError, WhatIfError};
use crate::index::{IndexAction, IndexDef};
use crate::registry::Registry;
use crate::sql::{analyze_workload, AnalyzedWorkload, SelectivityEstimator, Workload};

#[cfg(feature = "live")]
pub mod live;
pub mod sim;

pub use sim::{SimBackend, SimSession};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HypoIndex {
    pub def: IndexDef,
    /// Estimated storage in MB; always positive.
    pub est_size_mb: f64,
    /// Backend handle.
    pub id: String,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct CostReport {
    pub per_query_cost: Vec<f64>,
    pub total: f64,
    /// Canonical names of indexes credited by the plans.
    pub used_indexes: BTreeSet<String>,
}

impl CostReport {
    pub fn from_parts(per_query_cost: Vec<f64>, used_indexes: BTreeSet<String>) -> Self {
        let total = per_query_cost.iter().sum();
        CostReport {
            per_query_cost,
            total,
            used_indexes,
        }
    }
}

/// `(baseline - current) / baseline`; negative when `current` regressed.
pub fn relative_cost_reduction(baseline: &CostReport, current: &CostReport) -> Result<f64, WhatIfError> {
    if baseline.total <= 0.0 {
        return Err(WhatIfError::ZeroBaseline);
    }
    Ok((baseline.total - current.total) / baseline.total)
}

pub trait WhatIfSession {
    fn backend(&self) -> &'static str;

    fn create(&mut self, def: &IndexDef) -> Result<HypoIndex, WhatIfError>;

    fn drop_index(&mut self, def: &IndexDef) -> Result<(), WhatIfError>;

    /// Current hypothetical indexes in canonical order.
    fn existing(&self) -> Vec<HypoIndex>;

    fn estimate_cost(&mut self, workload: &AnalyzedWorkload) -> Result<CostReport, WhatIfError>;

    fn contains(&self, def: &IndexDef) -> bool {
        self.existing().iter().any(|h| &h.def == def)
    }

    fn total_size_mb(&self) -> f64 {
        self.existing().iter().map(|h| h.est_size_mb).sum()
    }

    fn existing_defs(&self) -> BTreeSet<IndexDef> {
        self.existing().into_iter().map(|h| h.def).collect()
    }

    /// Applies actions in order; a failed action leaves earlier ones applied.
    fn apply(&mut self, actions: &[IndexAction]) -> Result<(), WhatIfError> {
        for a in actions {
            match a {
                IndexAction::Create(d) => {
                    self.create(d)?;
                }
                IndexAction::Drop(d) => self.drop_index(d)?,
            }
        }
        Ok(())
    }
}

pub trait WhatIfBackend: Send + Sync {
    fn name(&self) -> &'static str;

    fn catalog(&self) -> &Catalog;

    fn estimator(&self) -> &dyn SelectivityEstimator;

    fn open_session(&self) -> Result<Box<dyn WhatIfSession + '_>, WhatIfError>;

    /// Estimated size of `def` without creating it.
    fn index_size_mb(&self, def: &IndexDef) -> Result<f64, WhatIfError> {
        def.validate(self.catalog())?;
        sim_index_size_mb(self.catalog(), def)
    }

    fn analyze(&self, workload: &Workload) -> Result<AnalyzedWorkload, FeatureError> {
        analyze_workload(workload, self.catalog(), self.estimator())
    }

    /// Opens a session holding `existing`.
    fn session_with(&self, existing: &BTreeSet<IndexDef>) -> Result<Box<dyn WhatIfSession + '_>, WhatIfError> {
        let mut s = self.open_session()?;
        for d in existing {
            s.create(d)?;
        }
        Ok(s)
    }

    /// Workload cost under exactly the index set `indexes`.
    fn cost_with(&self, workload: &AnalyzedWorkload, indexes: &BTreeSet<IndexDef>) -> Result<CostReport, WhatIfError> {
        self.session_with(indexes)?.estimate_cost(workload)
    }
}

/// Catalog-based size: rows × (Σ column widths + row overhead), in MB.
pub fn sim_index_size_mb(catalog: &Catalog, def: &IndexDef) -> Result<f64, WhatIfError> {
    catalog
        .index_size_mb(def.table(), def.columns())
        .ok_or_else(|| WhatIfError::UnknownColumn(def.to_string()))
}

/// Construction arguments shared by every backend factory.
#[derive(Debug, Clone, Default)]
pub struct BackendArgs {
    pub catalog: Option<Catalog>,
    /// Connection string for backends that talk to a database.
    pub dsn: Option<String>,
}

pub type BackendRegistry = Registry<dyn WhatIfBackend, BackendArgs, WhatIfError>;

/// Registry with `sim` and, when compiled in, `live`.
pub fn backend_registry() -> BackendRegistry {
    let reg = Registry::new("what-if backend").with("sim", |a: &BackendArgs| {
        let catalog = a
            .catalog
            .clone()
            .ok_or_else(|| WhatIfError::Backend("the sim backend needs a catalog".into()))?;
        Ok(Box::new(SimBackend::new(catalog)) as Box<dyn WhatIfBackend>)
    });
    #[cfg(feature = "live")]
    let reg = reg.with("live", |a: &BackendArgs| {
        let dsn = a
            .dsn
            .as_deref()
            .ok_or_else(|| WhatIfError::Backend("the live backend needs a connection string".into()))?;
        Ok(Box::new(live::LiveBackend::connect(dsn, a.catalog.clone())?) as Box<dyn WhatIfBackend>)
    });
    reg
}

/// Total cost and index names found in an `EXPLAIN (FORMAT JSON)` result.
pub fn explain_cost(plan_json: &serde_json::Value) -> Result<(f64, Vec<String>), WhatIfError> {
    let root = match plan_json {
        serde_json::Value::Array(a) => a.first(),
        v => Some(v),
    }
    .and_then(|v| v.get("Plan"))
    .ok_or_else(|| WhatIfError::Backend("EXPLAIN output has no Plan".into()))?;
    let cost = root
        .get("Total Cost")
        .and_then(|c| c.as_f64())
        .ok_or_else(|| WhatIfError::Backend("plan node has no Total Cost".into()))?;
    let mut names = Vec::new();
    let mut stack = vec![root];
    while let Some(node) = stack.pop() {
        if let Some(n) = node.get("Index Name").and_then(|n| n.as_str()) {
            names.push(n.to_string());
        }
        if let Some(children) = node.get("Plans").and_then(|p| p.as_array()) {
            stack.extend(children);
        }
    }
    names.sort();
    names.dedup();
    Ok((cost, names))
}

/// Exhaustive minimum-cost subset of `candidates` (at most 20) within `budget_mb`.
///
/// Ties go to fewer indexes, then to the lexicographically smaller sorted set.
pub fn exhaustive_best(
    backend: &dyn WhatIfBackend,
    workload: &AnalyzedWorkload,
    candidates: &[IndexDef],
    budget_mb: f64,
) -> Result<(BTreeSet<IndexDef>, CostReport), WhatIfError> {
    assert!(candidates.len() <= 20, "exhaustive search is limited to 20 candidates");
    let sizes = candidates
        .iter()
        .map(|d| backend.index_size_mb(d))
        .collect::<Result<Vec<_>, _>>()?;
    let mut best: Option<(BTreeSet<IndexDef>, CostReport)> = None;
    for mask in 0u32..(1 << candidates.len()) {
        let size: f64 = (0..candidates.len())
            .filter(|i| mask & (1 << i) != 0)
            .map(|i| sizes[i])
            .sum();
        if size > budget_mb {
            continue;
        }
        let set: BTreeSet<IndexDef> = (0..candidates.len())
            .filter(|i| mask & (1 << i) != 0)
            .map(|i| candidates[i].clone())
            .collect();
        let report = backend.cost_with(workload, &set)?;
        let better = match &best {
            None => true,
            Some((bs, br)) => (report.total, set.len(), &set) < (br.total, bs.len(), bs),
        };
        if better {
            best = Some((set, report));
        }
    }
    Ok(best.expect("the empty set always fits"))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reduction_examples() {
        let r = |t: f64| CostReport::from_parts(vec![t], BTreeSet::new());
        assert_eq!(relative_cost_reduction(&r(100.0), &r(100.0)).unwrap(), 0.0);
        assert!((relative_cost_reduction(&r(100.0), &r(12.8)).unwrap() - 0.872).abs() < 1e-12);
        assert!((relative_cost_reduction(&r(100.0), &r(120.0)).unwrap() + 0.2).abs() < 1e-12);
        assert!(matches!(
            relative_cost_reduction(&r(0.0), &r(1.0)),
            Err(WhatIfError::ZeroBaseline)
        ));
    }

    #[test]
    fn parses_explain_json() {
        let v: serde_json::Value = serde_json::from_str(
            r#"[{"Plan":{"Node Type":"Hash Join","Total Cost":1234.5,"Plans":[
                {"Node Type":"Index Scan","Index Name":"<13401>btree_lineitem_l_orderkey","Total Cost":10.0},
                {"Node Type":"Seq Scan","Total Cost":20.0,"Plans":[{"Index Name":"orders_o_orderdate_idx"}]}]}}]"#,
        )
        .unwrap();
        let (cost, names) = explain_cost(&v).unwrap();
        assert_eq!(cost, 1234.5);
        assert_eq!(
            names,
            vec!["<13401>btree_lineitem_l_orderkey", "orders_o_orderdate_idx"]
        );
        assert!(explain_cost(&serde_json::json!([{}])).is_err());
    }

    #[test]
    fn unknown_backend_is_reported() {
        let err = backend_registry().build("nope", &BackendArgs::default()).err().unwrap();
        assert!(err.to_string().contains("sim"));
    }
}

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::catalog::ColumnRef;
use crate::index::IndexDef;
use crate::sql::{QueryFeature, WorkloadFeatures};

/// Clause a candidate's leading column was taken from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Clause {
    Where,
    Join,
    GroupBy,
    OrderBy,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct CandidateSet {
    /// Ordered by width, then table and columns.
    pub candidates: Vec<IndexDef>,
    pub provenance: BTreeMap<IndexDef, Clause>,
}

impl CandidateSet {
    pub fn len(&self) -> usize {
        self.candidates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.candidates.is_empty()
    }
}

fn clauses(q: &QueryFeature) -> BTreeMap<&ColumnRef, Clause> {
    let mut m = BTreeMap::new();
    // Reverse priority so that WHERE wins.
    for (cols, clause) in [
        (q.order_by.iter().collect::<Vec<_>>(), Clause::OrderBy),
        (q.group_by.iter().collect(), Clause::GroupBy),
        (q.join_columns.iter().collect(), Clause::Join),
        (q.where_columns.iter().collect(), Clause::Where),
    ] {
        for c in cols {
            m.insert(c, clause);
        }
    }
    m
}

/// Single columns from every clause, plus same-query same-table column
/// sequences up to `max_width` whose leading column is a WHERE or JOIN column.
pub fn generate_candidates(features: &WorkloadFeatures, max_width: usize) -> CandidateSet {
    let max_width = max_width.max(1);
    let mut provenance: BTreeMap<IndexDef, Clause> = BTreeMap::new();
    let mut offer = |def: IndexDef, clause: Clause| {
        provenance
            .entry(def)
            .and_modify(|c| *c = (*c).min(clause))
            .or_insert(clause);
    };
    for q in &features.per_query {
        let cl = clauses(q);
        for (c, clause) in &cl {
            offer(IndexDef::single(&c.table, &c.column), *clause);
        }
        if max_width < 2 {
            continue;
        }
        let mut by_table: BTreeMap<&str, Vec<&str>> = BTreeMap::new();
        for c in cl.keys() {
            by_table.entry(c.table.as_str()).or_default().push(c.column.as_str());
        }
        for (table, cols) in by_table {
            for lead in &cols {
                let lead_clause = cl[&ColumnRef::new(table, *lead)];
                if !matches!(lead_clause, Clause::Where | Clause::Join) {
                    continue;
                }
                let mut frontier = vec![vec![*lead]];
                for _ in 1..max_width {
                    let mut next = Vec::new();
                    for prefix in &frontier {
                        for c in &cols {
                            if prefix.contains(c) {
                                continue;
                            }
                            let mut seq = prefix.clone();
                            seq.push(c);
                            offer(
                                IndexDef::new(table, seq.iter().copied()).expect("distinct columns"),
                                lead_clause,
                            );
                            next.push(seq);
                        }
                    }
                    frontier = next;
                }
            }
        }
    }
    let mut candidates: Vec<IndexDef> = provenance.keys().cloned().collect();
    candidates.sort_by(|a, b| a.width().cmp(&b.width()).then_with(|| a.cmp(b)));
    CandidateSet { candidates, provenance }
}

/// Columns of `features` on each table, for validating candidate provenance.
pub fn feature_columns(features: &WorkloadFeatures) -> BTreeSet<ColumnRef> {
    features
        .per_query
        .iter()
        .flat_map(|q| clauses(q).into_keys().cloned().collect::<Vec<_>>())
        .collect()
}

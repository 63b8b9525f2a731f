//! Deterministic cost model over catalog statistics.
//!
//! Per query and table: the cheapest applicable index gives
//! `0.5 × rows × matched_sel + log2(rows + 2)`, capped at a full scan of
//! `rows`; join-leading indexes scale by 0.8, sort-prefix indexes by 0.9; the
//! result is floored at 1 and summed over tables.

use std::collections::{BTreeMap, BTreeSet};

use crate::catalog::Catalog;
use crate::error::WhatIfError;
use crate::index::IndexDef;
use crate::sql::{AnalyzedWorkload, QueryShape, SelectivityEstimator, SimEstimator};
use crate::whatif::{sim_index_size_mb, CostReport, HypoIndex, WhatIfBackend, WhatIfSession};

pub const JOIN_FACTOR: f64 = 0.8;
pub const SORT_FACTOR: f64 = 0.9;

#[derive(Debug, Clone)]
pub struct SimBackend {
    catalog: Catalog,
    estimator: SimEstimator,
}

impl SimBackend {
    pub fn new(catalog: Catalog) -> Self {
        SimBackend {
            estimator: SimEstimator::new(catalog.clone()),
            catalog,
        }
    }

    pub fn session(&self) -> SimSession<'_> {
        SimSession {
            catalog: &self.catalog,
            existing: BTreeMap::new(),
            next_id: 0,
        }
    }
}

impl WhatIfBackend for SimBackend {
    fn name(&self) -> &'static str {
        "sim"
    }

    fn catalog(&self) -> &Catalog {
        &self.catalog
    }

    fn estimator(&self) -> &dyn SelectivityEstimator {
        &self.estimator
    }

    fn open_session(&self) -> Result<Box<dyn WhatIfSession + '_>, WhatIfError> {
        Ok(Box::new(self.session()))
    }
}

#[derive(Debug, Clone)]
pub struct SimSession<'a> {
    catalog: &'a Catalog,
    existing: BTreeMap<IndexDef, HypoIndex>,
    next_id: u64,
}

impl WhatIfSession for SimSession<'_> {
    fn backend(&self) -> &'static str {
        "sim"
    }

    fn create(&mut self, def: &IndexDef) -> Result<HypoIndex, WhatIfError> {
        def.validate(self.catalog)?;
        if self.existing.contains_key(def) {
            return Err(WhatIfError::DuplicateIndex(def.name()));
        }
        self.next_id += 1;
        let h = HypoIndex {
            def: def.clone(),
            est_size_mb: sim_index_size_mb(self.catalog, def)?,
            id: format!("sim:{}", self.next_id),
        };
        self.existing.insert(def.clone(), h.clone());
        Ok(h)
    }

    fn drop_index(&mut self, def: &IndexDef) -> Result<(), WhatIfError> {
        self.existing
            .remove(def)
            .map(|_| ())
            .ok_or_else(|| WhatIfError::NotFound(def.name()))
    }

    fn existing(&self) -> Vec<HypoIndex> {
        self.existing.values().cloned().collect()
    }

    fn contains(&self, def: &IndexDef) -> bool {
        self.existing.contains_key(def)
    }

    fn estimate_cost(&mut self, workload: &AnalyzedWorkload) -> Result<CostReport, WhatIfError> {
        let indexes: Vec<&IndexDef> = self.existing.keys().collect();
        let mut per_query = Vec::with_capacity(workload.len());
        let mut used = BTreeSet::new();
        for (shape, sels) in workload.shapes.iter().zip(&workload.selectivities) {
            let (cost, u) = query_cost(self.catalog, shape, sels, &indexes);
            per_query.push(cost);
            used.extend(u);
        }
        Ok(CostReport::from_parts(per_query, used))
    }
}

/// Cost of one query under `indexes`, with the names of credited indexes.
pub fn query_cost(
    catalog: &Catalog,
    shape: &QueryShape,
    selectivities: &[f64],
    indexes: &[&IndexDef],
) -> (f64, BTreeSet<String>) {
    let mut total = 0.0;
    let mut used = BTreeSet::new();
    for t in &shape.tables {
        let rows = catalog.rows(t) as f64;
        // Selectivity carried by each column of t: product over its single-column predicates.
        let mut carried: BTreeMap<&str, f64> = BTreeMap::new();
        for (p, &s) in shape.where_predicates.iter().zip(selectivities) {
            if p.table != *t {
                continue;
            }
            if let Some(c) = p.index_column() {
                *carried.entry(c).or_insert(1.0) *= s;
            }
        }
        let on_t: Vec<&IndexDef> = indexes.iter().copied().filter(|i| i.table() == t).collect();

        let mut access = rows;
        let mut chosen: Option<&IndexDef> = None;
        for i in &on_t {
            let mut sel = 1.0;
            let mut matched = 0;
            for c in i.columns() {
                match carried.get(c.as_str()) {
                    Some(s) => {
                        sel *= s;
                        matched += 1;
                    }
                    None => break,
                }
            }
            if matched == 0 {
                continue;
            }
            let c = 0.5 * rows * sel + (rows + 2.0).log2();
            if c < access {
                access = c;
                chosen = Some(i);
            }
        }
        if let Some(i) = chosen {
            used.insert(i.name());
        }

        let join_cols: BTreeSet<&str> = shape
            .join_columns
            .iter()
            .filter(|c| c.table == *t)
            .map(|c| c.column.as_str())
            .collect();
        let join_credit: Vec<&&IndexDef> = on_t.iter().filter(|i| join_cols.contains(i.leading())).collect();
        if !join_credit.is_empty() {
            access *= JOIN_FACTOR;
            used.extend(join_credit.iter().map(|i| i.name()));
        }

        let group: BTreeSet<&str> = columns_on(&shape.group_by, t);
        let order: BTreeSet<&str> = columns_on(&shape.order_by, t);
        let sort_credit: Vec<&&IndexDef> = on_t
            .iter()
            .filter(|i| is_prefix_set(&group, i) || is_prefix_set(&order, i))
            .collect();
        if !sort_credit.is_empty() {
            access *= SORT_FACTOR;
            used.extend(sort_credit.iter().map(|i| i.name()));
        }

        total += access.max(1.0);
    }
    (total, used)
}

fn columns_on<'a>(cols: &'a [crate::catalog::ColumnRef], table: &str) -> BTreeSet<&'a str> {
    cols.iter()
        .filter(|c| c.table == table)
        .map(|c| c.column.as_str())
        .collect()
}

/// True when `cols` is non-empty and equals the set of the first `|cols|` index columns.
fn is_prefix_set(cols: &BTreeSet<&str>, index: &IndexDef) -> bool {
    !cols.is_empty()
        && cols.len() <= index.width()
        && index.columns()[..cols.len()].iter().all(|c| cols.contains(c.as_str()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sql::Workload;

    fn backend() -> SimBackend {
        SimBackend::new(
            Catalog::from_json(
                r#"{"tables":[
                {"name":"t","rows":1000,"columns":[{"name":"a","type":"int","ndv":100},{"name":"b","type":"int","ndv":10},{"name":"c","type":"text","ndv":1000}]},
                {"name":"u","rows":1000000,"columns":[{"name":"int_col","type":"int","ndv":1000},{"name":"k","type":"bigint","ndv":1000000}]}]}"#,
            )
            .unwrap(),
        )
    }

    fn analyzed(b: &SimBackend, qs: &[&str]) -> AnalyzedWorkload {
        let w = Workload::new("w", qs.iter().map(|s| s.to_string()).collect()).unwrap();
        b.analyze(&w).unwrap()
    }

    #[test]
    fn size_formula() {
        let b = backend();
        let mut s = b.session();
        let h = s.create(&IndexDef::single("u", "int_col")).unwrap();
        assert!((h.est_size_mb - 1_000_000.0 * 12.0 / 1_048_576.0).abs() < 1e-12);
        assert!((h.est_size_mb - 11.44).abs() < 0.01);
        assert!(matches!(
            s.create(&IndexDef::single("u", "int_col")),
            Err(WhatIfError::DuplicateIndex(_))
        ));
        assert!(matches!(
            s.create(&IndexDef::single("u", "nope")),
            Err(WhatIfError::UnknownColumn(_))
        ));
    }

    #[test]
    fn no_index_scan_and_equality_index() {
        let b = backend();
        let w = analyzed(&b, &["SELECT * FROM t WHERE c = 'x'"]);
        let mut s = b.session();
        assert_eq!(s.estimate_cost(&w).unwrap().per_query_cost, vec![1000.0]);
        s.create(&IndexDef::single("t", "c")).unwrap();
        let r = s.estimate_cost(&w).unwrap();
        let expected = 0.5 * 1000.0 * 0.001 + 1002f64.log2();
        assert!((r.total - expected).abs() < 1e-9);
        assert_eq!(r.used_indexes, BTreeSet::from(["t_c_idx".to_string()]));
    }

    #[test]
    fn equality_with_one_percent_selectivity() {
        let b = backend();
        let w = analyzed(&b, &["SELECT * FROM t WHERE a = 3"]);
        let mut s = b.session();
        s.create(&IndexDef::single("t", "a")).unwrap();
        let r = s.estimate_cost(&w).unwrap();
        assert!((r.total - 14.97).abs() < 0.01);
    }

    #[test]
    fn prefix_matching_and_credits() {
        let b = backend();
        let w = analyzed(&b, &["SELECT b FROM t WHERE a = 1 AND b = 2 GROUP BY b"]);
        let mut s = b.session();
        s.create(&IndexDef::new("t", ["a", "b"]).unwrap()).unwrap();
        let full = 0.5 * 1000.0 * 0.01 * 0.1 + 1002f64.log2();
        assert!((s.estimate_cost(&w).unwrap().total - full).abs() < 1e-9);
        s.create(&IndexDef::single("t", "b")).unwrap();
        // t(b) is not cheaper for access but earns the sort bonus.
        assert!((s.estimate_cost(&w).unwrap().total - full * SORT_FACTOR).abs() < 1e-9);
    }

    #[test]
    fn drop_restores_baseline() {
        let b = backend();
        let w = analyzed(
            &b,
            &["SELECT * FROM t JOIN u ON t.a = u.int_col WHERE t.b = 1 ORDER BY t.b"],
        );
        let mut s = b.session();
        let base = s.estimate_cost(&w).unwrap();
        let defs = [IndexDef::single("t", "b"), IndexDef::single("u", "int_col")];
        for d in &defs {
            s.create(d).unwrap();
        }
        let with = s.estimate_cost(&w).unwrap();
        assert!(with.total < base.total);
        s.drop_index(&defs[0]).unwrap();
        let one = s.estimate_cost(&w).unwrap();
        assert!(one.total < base.total && one.used_indexes.contains("u_int_col_idx"));
        s.drop_index(&defs[1]).unwrap();
        assert_eq!(s.estimate_cost(&w).unwrap(), base);
        assert!(matches!(s.drop_index(&defs[1]), Err(WhatIfError::NotFound(_))));
    }

    #[test]
    fn tiny_table_index_never_raises_cost() {
        let b = SimBackend::new(
            Catalog::from_json(r#"{"tables":[{"name":"x","rows":1,"columns":[{"name":"a","type":"int","ndv":1}]}]}"#)
                .unwrap(),
        );
        let w = analyzed(&b, &["SELECT * FROM x WHERE a = 1"]);
        let mut s = b.session();
        let base = s.estimate_cost(&w).unwrap().total;
        s.create(&IndexDef::single("x", "a")).unwrap();
        assert!(s.estimate_cost(&w).unwrap().total <= base);
    }
}

//! Workload feature extraction: per-query column statistics, WHERE predicates
//! with selectivities, and JOIN / GROUP BY / ORDER BY column frequencies.

use std::collections::{BTreeMap, BTreeSet};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::catalog::{Catalog, ColumnRef, DataType};
use crate::error::FeatureError;
use crate::sql::{parse_query, QueryShape, SelectivityEstimator, Workload};

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ColumnStat {
    pub table: String,
    pub column: String,
    pub ndv: u64,
    pub rows: u64,
    #[serde(rename = "type")]
    pub data_type: DataType,
}

/// Columns used by one query, with their clause classification.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct QueryFeature {
    pub columns: Vec<ColumnStat>,
    /// Columns of index-eligible WHERE predicates.
    pub where_columns: BTreeSet<ColumnRef>,
    pub join_columns: BTreeSet<ColumnRef>,
    pub group_by: Vec<ColumnRef>,
    pub order_by: Vec<ColumnRef>,
}

impl QueryFeature {
    /// Every index-eligible column of the query on `table`.
    pub fn columns_on<'a>(&'a self, table: &'a str) -> impl Iterator<Item = &'a ColumnRef> + 'a {
        self.where_columns
            .iter()
            .chain(&self.join_columns)
            .chain(&self.group_by)
            .chain(&self.order_by)
            .filter(move |c| c.table == table)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredicateSelectivity {
    pub query: usize,
    pub table: String,
    pub columns: Vec<String>,
    pub predicate: String,
    pub selectivity: f64,
    pub indexable: bool,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct WorkloadFeatures {
    pub per_query: Vec<QueryFeature>,
    pub where_selectivities: Vec<PredicateSelectivity>,
    pub join_freq: BTreeMap<ColumnRef, u32>,
    pub groupby_freq: BTreeMap<ColumnRef, u32>,
    pub orderby_freq: BTreeMap<ColumnRef, u32>,
    pub table_rows: BTreeMap<String, u64>,
}

impl WorkloadFeatures {
    /// Number of WHERE predicates recorded for each query.
    pub fn where_predicates_per_query(&self) -> Vec<usize> {
        let mut counts = vec![0; self.per_query.len()];
        for p in &self.where_selectivities {
            counts[p.query] += 1;
        }
        counts
    }

    /// Distinct WHERE predicates per query, as written in the SQL text.
    ///
    /// Entries sharing a predicate text are one atom attributed to several
    /// tables; atoms constraining the same set of columns count once.
    pub fn distinct_where_predicates_per_query(&self) -> Vec<usize> {
        let mut atoms: Vec<BTreeMap<&str, BTreeSet<ColumnRef>>> = vec![BTreeMap::new(); self.per_query.len()];
        for p in &self.where_selectivities {
            atoms[p.query]
                .entry(p.predicate.as_str())
                .or_default()
                .extend(p.columns.iter().map(|c| ColumnRef::new(&p.table, c)));
        }
        atoms
            .into_iter()
            .map(|m| m.into_values().collect::<BTreeSet<_>>().len())
            .collect()
    }

    /// Occurrences of each column in index-eligible WHERE predicates.
    pub fn where_freq(&self) -> BTreeMap<ColumnRef, u32> {
        let mut m = BTreeMap::new();
        for p in self.where_selectivities.iter().filter(|p| p.indexable) {
            for c in &p.columns {
                *m.entry(ColumnRef::new(&p.table, c)).or_insert(0) += 1;
            }
        }
        m
    }

    /// Lowest selectivity seen among single-column predicates on each column.
    pub fn min_selectivity(&self) -> BTreeMap<ColumnRef, f64> {
        let mut m: BTreeMap<ColumnRef, f64> = BTreeMap::new();
        for p in self
            .where_selectivities
            .iter()
            .filter(|p| p.indexable && p.columns.len() == 1)
        {
            let e = m.entry(ColumnRef::new(&p.table, &p.columns[0])).or_insert(1.0);
            *e = e.min(p.selectivity);
        }
        m
    }

    /// Column statistics by reference, for every column the workload uses.
    pub fn column_stats(&self) -> BTreeMap<ColumnRef, ColumnStat> {
        self.per_query
            .iter()
            .flat_map(|q| &q.columns)
            .map(|c| (ColumnRef::new(&c.table, &c.column), c.clone()))
            .collect()
    }

    pub fn is_empty(&self) -> bool {
        self.per_query.is_empty()
    }

    /// Concatenates two feature sets as if their workloads were concatenated.
    pub fn concat(&self, other: &WorkloadFeatures) -> WorkloadFeatures {
        let offset = self.per_query.len();
        let mut out = self.clone();
        out.per_query.extend(other.per_query.iter().cloned());
        out.where_selectivities
            .extend(other.where_selectivities.iter().map(|p| PredicateSelectivity {
                query: p.query + offset,
                ..p.clone()
            }));
        for (dst, src) in [
            (&mut out.join_freq, &other.join_freq),
            (&mut out.groupby_freq, &other.groupby_freq),
            (&mut out.orderby_freq, &other.orderby_freq),
        ] {
            for (k, v) in src {
                *dst.entry(k.clone()).or_insert(0) += v;
            }
        }
        out.table_rows
            .extend(other.table_rows.iter().map(|(k, v)| (k.clone(), *v)));
        out
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("features serialize")
    }
}

/// A parsed workload with selectivities and extracted features, ready for costing.
#[derive(Debug, Clone)]
pub struct AnalyzedWorkload {
    pub workload: Workload,
    pub shapes: Vec<QueryShape>,
    /// Selectivity of each WHERE predicate, aligned with `shapes[i].where_predicates`.
    pub selectivities: Vec<Vec<f64>>,
    pub features: WorkloadFeatures,
}

impl AnalyzedWorkload {
    pub fn len(&self) -> usize {
        self.shapes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.shapes.is_empty()
    }
}

/// Parses every query, probes each predicate and aggregates features.
///
/// Predicate probes run in parallel; results are collected in query order.
pub fn analyze_workload(
    workload: &Workload,
    catalog: &Catalog,
    estimator: &dyn SelectivityEstimator,
) -> Result<AnalyzedWorkload, FeatureError> {
    let shapes = workload
        .queries
        .iter()
        .enumerate()
        .map(|(index, q)| parse_query(q, catalog).map_err(|source| FeatureError::Sql { index, source }))
        .collect::<Result<Vec<_>, _>>()?;

    let selectivities = shapes
        .par_iter()
        .enumerate()
        .map(|(index, shape)| {
            shape
                .where_predicates
                .iter()
                .map(|p| {
                    estimator
                        .estimate_predicate(p)
                        .map(|s| s.clamp(0.0, 1.0))
                        .map_err(|source| FeatureError::Selectivity { index, source })
                })
                .collect::<Result<Vec<_>, _>>()
        })
        .collect::<Result<Vec<_>, _>>()?;

    let features = aggregate(&shapes, &selectivities, catalog);
    Ok(AnalyzedWorkload {
        workload: workload.clone(),
        shapes,
        selectivities,
        features,
    })
}

pub fn extract_workload_features(
    workload: &Workload,
    catalog: &Catalog,
    estimator: &dyn SelectivityEstimator,
) -> Result<WorkloadFeatures, FeatureError> {
    analyze_workload(workload, catalog, estimator).map(|a| a.features)
}

fn aggregate(shapes: &[QueryShape], selectivities: &[Vec<f64>], catalog: &Catalog) -> WorkloadFeatures {
    let mut f = WorkloadFeatures::default();
    for (qi, (shape, sels)) in shapes.iter().zip(selectivities).enumerate() {
        let columns = shape
            .all_columns
            .iter()
            .filter_map(|c| {
                let def = catalog.column(&c.table, &c.column)?;
                Some(ColumnStat {
                    table: c.table.clone(),
                    column: c.column.clone(),
                    ndv: def.ndv,
                    rows: catalog.rows(&c.table),
                    data_type: def.data_type,
                })
            })
            .collect();
        let mut qf = QueryFeature {
            columns,
            join_columns: shape.join_columns.iter().cloned().collect(),
            group_by: shape.group_by.clone(),
            order_by: shape.order_by.clone(),
            ..Default::default()
        };
        for (p, &s) in shape.where_predicates.iter().zip(sels) {
            if p.indexable {
                qf.where_columns
                    .extend(p.columns.iter().map(|c| ColumnRef::new(&p.table, c)));
            }
            f.where_selectivities.push(PredicateSelectivity {
                query: qi,
                table: p.table.clone(),
                columns: p.columns.clone(),
                predicate: p.text.clone(),
                selectivity: s,
                indexable: p.indexable,
            });
        }
        for c in &shape.join_columns {
            *f.join_freq.entry(c.clone()).or_insert(0) += 1;
        }
        for c in &shape.group_by {
            *f.groupby_freq.entry(c.clone()).or_insert(0) += 1;
        }
        for c in &shape.order_by {
            *f.orderby_freq.entry(c.clone()).or_insert(0) += 1;
        }
        for t in &shape.tables {
            f.table_rows.insert(t.clone(), catalog.rows(t));
        }
        f.per_query.push(qf);
    }
    f
}

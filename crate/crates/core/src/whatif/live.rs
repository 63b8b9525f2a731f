//! PostgreSQL backend over the hypopg extension.
//!
//! Each session owns its own connection, so hypothetical indexes are isolated
//! per session. Parallel plans are disabled on every connection to keep probe
//! row estimates from being divided across workers.

use std::collections::{BTreeMap, BTreeSet};
use std::sync::Mutex;

use postgres::{Client, NoTls};

use crate::catalog::{Catalog, ColumnDef, DataType, TableDef};
use crate::error::{SelectivityError, WhatIfError};
use crate::index::IndexDef;
use crate::sql::{AnalyzedWorkload, SelectivityEstimator};
use crate::whatif::{explain_cost, CostReport, HypoIndex, WhatIfBackend, WhatIfSession};

const SESSION_SETUP: &str = "CREATE EXTENSION IF NOT EXISTS hypopg; \
     SET max_parallel_workers_per_gather = 0; SELECT hypopg_reset();";

fn backend_err(e: postgres::Error) -> WhatIfError {
    WhatIfError::Backend(e.to_string())
}

fn connect(dsn: &str) -> Result<Client, WhatIfError> {
    let mut c = Client::connect(dsn, NoTls).map_err(backend_err)?;
    c.batch_execute(SESSION_SETUP).map_err(backend_err)?;
    Ok(c)
}

fn explain(client: &mut Client, sql: &str) -> Result<serde_json::Value, WhatIfError> {
    let row = client
        .query_one(&format!("EXPLAIN (FORMAT JSON) {sql}"), &[])
        .map_err(backend_err)?;
    let text: String = row.try_get(0).map_err(backend_err)?;
    serde_json::from_str(&text).map_err(|e| WhatIfError::Backend(format!("EXPLAIN JSON: {e}")))
}

pub struct LiveBackend {
    dsn: String,
    catalog: Catalog,
    estimator: LiveEstimator,
}

impl LiveBackend {
    /// Connects and either adopts `catalog` or reads one from the database statistics.
    pub fn connect(dsn: &str, catalog: Option<Catalog>) -> Result<Self, WhatIfError> {
        let mut client = connect(dsn)?;
        let catalog = match catalog {
            Some(c) => c,
            None => load_catalog(&mut client)?,
        };
        Ok(LiveBackend {
            dsn: dsn.to_string(),
            estimator: LiveEstimator {
                client: Mutex::new(client),
                catalog: catalog.clone(),
            },
            catalog,
        })
    }
}

impl WhatIfBackend for LiveBackend {
    fn name(&self) -> &'static str {
        "live"
    }

    fn catalog(&self) -> &Catalog {
        &self.catalog
    }

    fn estimator(&self) -> &dyn SelectivityEstimator {
        &self.estimator
    }

    fn open_session(&self) -> Result<Box<dyn WhatIfSession + '_>, WhatIfError> {
        Ok(Box::new(LiveSession {
            client: connect(&self.dsn)?,
            catalog: &self.catalog,
            existing: BTreeMap::new(),
        }))
    }

    fn index_size_mb(&self, def: &IndexDef) -> Result<f64, WhatIfError> {
        def.validate(&self.catalog)?;
        let mut s = LiveSession {
            client: connect(&self.dsn)?,
            catalog: &self.catalog,
            existing: BTreeMap::new(),
        };
        Ok(s.create(def)?.est_size_mb)
    }
}

pub struct LiveSession<'a> {
    client: Client,
    catalog: &'a Catalog,
    existing: BTreeMap<IndexDef, (u32, HypoIndex)>,
}

impl WhatIfSession for LiveSession<'_> {
    fn backend(&self) -> &'static str {
        "live"
    }

    fn create(&mut self, def: &IndexDef) -> Result<HypoIndex, WhatIfError> {
        def.validate(self.catalog)?;
        if self.existing.contains_key(def) {
            return Err(WhatIfError::DuplicateIndex(def.name()));
        }
        let ddl = format!("CREATE INDEX ON {} ({})", def.table(), def.columns().join(", "));
        let row = self
            .client
            .query_one(
                "SELECT indexrelid, hypopg_relation_size(indexrelid)::float8 FROM hypopg_create_index($1)",
                &[&ddl],
            )
            .map_err(backend_err)?;
        let oid: u32 = row.try_get(0).map_err(backend_err)?;
        let bytes: f64 = row.try_get(1).map_err(backend_err)?;
        let h = HypoIndex {
            def: def.clone(),
            est_size_mb: (bytes / (1024.0 * 1024.0)).max(f64::MIN_POSITIVE),
            id: oid.to_string(),
        };
        self.existing.insert(def.clone(), (oid, h.clone()));
        Ok(h)
    }

    fn drop_index(&mut self, def: &IndexDef) -> Result<(), WhatIfError> {
        let (oid, _) = self
            .existing
            .remove(def)
            .ok_or_else(|| WhatIfError::NotFound(def.name()))?;
        self.client
            .execute("SELECT hypopg_drop_index($1)", &[&oid])
            .map_err(backend_err)?;
        Ok(())
    }

    fn existing(&self) -> Vec<HypoIndex> {
        self.existing.values().map(|(_, h)| h.clone()).collect()
    }

    fn estimate_cost(&mut self, workload: &AnalyzedWorkload) -> Result<CostReport, WhatIfError> {
        // hypopg plan names look like "<oid>btree_t_a"; map them back to canonical names.
        let by_oid: BTreeMap<String, String> = self
            .existing
            .values()
            .map(|(oid, h)| (format!("<{oid}>"), h.def.name()))
            .collect();
        let mut per_query = Vec::with_capacity(workload.len());
        let mut used = BTreeSet::new();
        for q in &workload.workload.queries {
            let (cost, names) = explain_cost(&explain(&mut self.client, q)?)?;
            per_query.push(cost.max(0.0));
            for n in names {
                match by_oid.iter().find(|(tag, _)| n.starts_with(tag.as_str())) {
                    Some((_, canonical)) => {
                        used.insert(canonical.clone());
                    }
                    None if n.ends_with("_idx") => {
                        used.insert(n);
                    }
                    None => {}
                }
            }
        }
        Ok(CostReport::from_parts(per_query, used))
    }
}

/// Probes `SELECT * FROM t WHERE p` and divides the planned rows by table rows.
pub struct LiveEstimator {
    client: Mutex<Client>,
    catalog: Catalog,
}

impl SelectivityEstimator for LiveEstimator {
    fn estimate(&self, table: &str, alias: Option<&str>, predicate: &str) -> Result<f64, SelectivityError> {
        let rows = self.catalog.rows(table);
        let err = |m: String| SelectivityError::PredicateError {
            predicate: predicate.to_string(),
            message: m,
        };
        if rows == 0 {
            return Err(err(format!("table `{table}` is missing or empty")));
        }
        let sql = match alias {
            Some(a) => format!("SELECT * FROM {table} AS {a} WHERE {predicate}"),
            None => format!("SELECT * FROM {table} WHERE {predicate}"),
        };
        let mut client = self
            .client
            .lock()
            .map_err(|_| SelectivityError::EstimatorUnavailable("connection poisoned".into()))?;
        let plan = explain(&mut client, &sql).map_err(|e| err(e.to_string()))?;
        let planned = plan
            .get(0)
            .and_then(|p| p.get("Plan"))
            .and_then(|p| p.get("Plan Rows"))
            .and_then(|r| r.as_f64())
            .ok_or_else(|| err("plan has no row estimate".into()))?;
        Ok((planned / rows as f64).clamp(0.0, 1.0))
    }
}

/// Reads tables, column types, row counts and distinct counts of the `public` schema.
pub fn load_catalog(client: &mut Client) -> Result<Catalog, WhatIfError> {
    let rows = client
        .query(
            "SELECT c.relname::text, GREATEST(c.reltuples, 0)::float8, a.attname::text, \
                    format_type(a.atttypid, a.atttypmod), COALESCE(s.n_distinct, -1)::float8 \
             FROM pg_class c \
             JOIN pg_namespace n ON n.oid = c.relnamespace \
             JOIN pg_attribute a ON a.attrelid = c.oid AND a.attnum > 0 AND NOT a.attisdropped \
             LEFT JOIN pg_stats s ON s.schemaname = n.nspname AND s.tablename = c.relname AND s.attname = a.attname \
             WHERE n.nspname = 'public' AND c.relkind = 'r' \
             ORDER BY c.relname, a.attnum",
            &[],
        )
        .map_err(backend_err)?;
    let mut tables: Vec<TableDef> = Vec::new();
    for r in rows {
        let table: String = r.get(0);
        let reltuples: f64 = r.get(1);
        let column: String = r.get(2);
        let ty: String = r.get(3);
        let n_distinct: f64 = r.get(4);
        let row_count = reltuples.round() as u64;
        // Negative n_distinct is a fraction of the row count.
        let ndv = if n_distinct < 0.0 {
            (-n_distinct * reltuples).round()
        } else {
            n_distinct
        };
        let ndv = (ndv as u64).clamp(row_count.min(1), row_count);
        if tables.last().map(|t| t.name != table).unwrap_or(true) {
            tables.push(TableDef {
                name: table,
                rows: row_count,
                columns: Vec::new(),
            });
        }
        tables.last_mut().unwrap().columns.push(ColumnDef {
            name: column,
            data_type: DataType::from_sql_name(&ty),
            ndv,
        });
    }
    Catalog::new(tables).map_err(|e| WhatIfError::Backend(e.to_string()))
}

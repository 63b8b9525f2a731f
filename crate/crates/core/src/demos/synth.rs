//! Offline pool construction: query synthesis, filtering, workload sampling
//! and label collection.

use std::collections::{BTreeSet, HashSet};
use std::fmt::Write;
use std::sync::LazyLock;

use rand::seq::{IndexedRandom, IteratorRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use regex::Regex;

use crate::catalog::Catalog;
use crate::demos::{build_meta_feature, DemoPool, Demonstration, RefinedLabel, DEFAULT_META_LEN};
use crate::error::{DemoError, LlmError};
use crate::heuristics::{collect_default_label, generate_candidates, make_refined_label, DEFAULT_BUDGET_GRID};
use crate::llm::{extract_fenced_sql, mock::literal, ChatRequest, LlmBackend, GENERATION_MARKER};
use crate::sql::{split_statements, Workload};
use crate::whatif::WhatIfBackend;

/// System instruction for query generation.
pub const SYNTH_INSTRUCTION: &str = "\
You write SQL queries that exercise a PostgreSQL database for index tuning \
experiments. Use only the tables and columns in the given schema and respect \
the value constraints. Every query is a single SELECT statement accepted by \
PostgreSQL; mix joins, filters, aggregation and ordering. Return all queries \
in one ```sql block, each terminated by a semicolon, with no commentary.";

/// Completion length requested for a generation batch.
const SYNTH_MAX_TOKENS: usize = 4096;

static TOKEN: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(r"'(?:[^']|'')*'|[A-Za-z_][A-Za-z0-9_]*|\d+(?:\.\d+)?|[^\sA-Za-z0-9_]").expect("token pattern compiles")
});

/// Randomly sampled material that steers one generation request.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SynthSeeds {
    pub tables: Vec<String>,
    /// Rendered constraints such as `orders.o_custkey = 42`.
    pub values: Vec<String>,
    pub examples: Vec<String>,
}

/// Up to three tables, one value constraint per table and up to two examples.
pub fn sample_seeds(catalog: &Catalog, examples: &[String], rng: &mut ChaCha8Rng) -> SynthSeeds {
    let amount = rng.random_range(1..=catalog.tables.len().clamp(1, 3));
    let mut tables: Vec<_> = catalog.tables.iter().choose_multiple(rng, amount);
    tables.sort_by(|a, b| a.name.cmp(&b.name));
    let values = tables
        .iter()
        .filter_map(|t| {
            let c = t.columns.choose(rng)?;
            Some(format!("{}.{} = {}", t.name, c.name, literal(rng, c.data_type, c.ndv)))
        })
        .collect();
    SynthSeeds {
        tables: tables.iter().map(|t| t.name.clone()).collect(),
        values,
        examples: examples.iter().cloned().choose_multiple(rng, 2),
    }
}

fn generation_request(catalog: &Catalog, n: usize, seeds: &SynthSeeds, temperature: f64) -> ChatRequest {
    let mut u = String::new();
    writeln!(u, "{GENERATION_MARKER}").unwrap();
    writeln!(
        u,
        "Schema: {}",
        serde_json::to_string(catalog).expect("catalog serializes")
    )
    .unwrap();
    u.push_str("Dialect: PostgreSQL\n");
    writeln!(u, "Focus tables: {}", seeds.tables.join(", ")).unwrap();
    u.push_str("Value constraints:\n");
    for v in &seeds.values {
        writeln!(u, "- {v}").unwrap();
    }
    u.push_str("Example queries:\n");
    for e in &seeds.examples {
        writeln!(u, "{};", e.trim_end_matches(';')).unwrap();
    }
    writeln!(u, "Number of queries: {n}").unwrap();
    ChatRequest {
        system_text: SYNTH_INSTRUCTION.to_string(),
        user_text: u,
        temperature,
        n_samples: 1,
        max_tokens: SYNTH_MAX_TOKENS,
    }
}

/// Asks for `n` queries and returns at most `n` fenced SELECT statements.
pub fn synthesize_queries(
    llm: &dyn LlmBackend,
    catalog: &Catalog,
    n: usize,
    seeds: &SynthSeeds,
    temperature: f64,
) -> Result<Vec<String>, DemoError> {
    let completions = llm.chat(&generation_request(catalog, n, seeds, temperature))?;
    let queries: Vec<String> = completions
        .iter()
        .flat_map(|c| extract_fenced_sql(c))
        .flat_map(|block| split_statements(&block))
        .filter(|q| {
            let head = q.trim_start().get(..6).unwrap_or("").to_ascii_uppercase();
            head == "SELECT" || head.starts_with("WITH")
        })
        .take(n)
        .collect();
    if queries.is_empty() {
        return Err(LlmError::NoQueriesParsed.into());
    }
    Ok(queries)
}

fn tokens(sql: &str) -> HashSet<String> {
    TOKEN
        .find_iter(sql)
        .map(|m| {
            let t = m.as_str();
            if t.starts_with('\'') || t.starts_with(|c: char| c.is_ascii_digit()) {
                "?".to_string()
            } else {
                t.to_ascii_lowercase()
            }
        })
        .collect()
}

/// Jaccard similarity of the token sets with literals replaced by placeholders.
pub fn token_jaccard(a: &str, b: &str) -> f64 {
    let (x, y) = (tokens(a), tokens(b));
    let union = x.union(&y).count();
    if union == 0 {
        return 1.0;
    }
    x.intersection(&y).count() as f64 / union as f64
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FilterConfig {
    /// Queries at least this similar to a benchmark template are dropped.
    pub similarity_threshold: f64,
    /// Queries costing more than this multiple of the median are dropped.
    pub cost_multiple: f64,
}

impl Default for FilterConfig {
    fn default() -> Self {
        FilterConfig {
            similarity_threshold: 0.8,
            cost_multiple: 50.0,
        }
    }
}

/// Drops queries the engine rejects, near-copies of `templates`, and queries
/// whose index-free cost exceeds `cost_multiple` × the median.
pub fn validate_and_filter(
    queries: &[String],
    backend: &dyn WhatIfBackend,
    templates: &[String],
    cfg: &FilterConfig,
) -> Vec<String> {
    let mut session = match backend.open_session() {
        Ok(s) => s,
        Err(e) => {
            log::warn!("cannot open a what-if session for filtering: {e}");
            return Vec::new();
        }
    };
    let mut costed: Vec<(String, f64)> = Vec::new();
    for q in queries {
        let cost = Workload::new("probe", vec![q.clone()])
            .map_err(|e| e.to_string())
            .and_then(|w| backend.analyze(&w).map_err(|e| e.to_string()))
            .and_then(|a| session.estimate_cost(&a).map_err(|e| e.to_string()));
        match cost {
            Ok(c) => {
                if let Some(t) = templates
                    .iter()
                    .find(|t| token_jaccard(q, t) >= cfg.similarity_threshold)
                {
                    log::debug!("dropping query similar to template `{t}`");
                } else {
                    costed.push((q.clone(), c.total));
                }
            }
            Err(e) => log::debug!("dropping invalid query `{q}`: {e}"),
        }
    }
    if costed.is_empty() {
        return Vec::new();
    }
    let mut costs: Vec<f64> = costed.iter().map(|c| c.1).collect();
    costs.sort_by(f64::total_cmp);
    let mid = costs.len() / 2;
    let median = if costs.len() % 2 == 1 {
        costs[mid]
    } else {
        (costs[mid - 1] + costs[mid]) / 2.0
    };
    costed
        .into_iter()
        .filter(|(_, c)| *c <= cfg.cost_multiple * median)
        .map(|(q, _)| q)
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct PoolConfig {
    pub queries_per_schema: usize,
    pub batch_size: usize,
    pub workloads: usize,
    /// Inclusive bounds on queries per sampled workload.
    pub workload_size: (usize, usize),
    pub budget_grid: Vec<f64>,
    pub meta_len: usize,
    pub max_width: usize,
    pub temperature: f64,
    pub seed: u64,
    /// Benchmark queries used as generation examples and similarity references.
    pub templates: Vec<String>,
    pub filter: FilterConfig,
}

impl Default for PoolConfig {
    fn default() -> Self {
        PoolConfig {
            queries_per_schema: 60,
            batch_size: 10,
            workloads: 40,
            workload_size: (3, 10),
            budget_grid: DEFAULT_BUDGET_GRID.to_vec(),
            meta_len: DEFAULT_META_LEN,
            max_width: 2,
            temperature: 0.6,
            seed: 0,
            templates: Vec::new(),
            filter: FilterConfig::default(),
        }
    }
}

/// Generates `cfg.queries_per_schema` queries in batches and filters them.
pub fn generate_workload_queries(
    backend: &dyn WhatIfBackend,
    llm: &dyn LlmBackend,
    cfg: &PoolConfig,
    rng: &mut ChaCha8Rng,
) -> Result<Vec<String>, DemoError> {
    let catalog = backend.catalog();
    let batch = cfg.batch_size.max(1);
    let mut generated: Vec<String> = Vec::new();
    for _ in 0..cfg.queries_per_schema.div_ceil(batch) {
        let want = batch.min(cfg.queries_per_schema - generated.len());
        let seeds = sample_seeds(catalog, &cfg.templates, rng);
        match synthesize_queries(llm, catalog, want, &seeds, cfg.temperature) {
            Ok(qs) => generated.extend(qs),
            Err(DemoError::Llm(LlmError::NoQueriesParsed)) => log::warn!("a generation batch returned no SQL"),
            Err(e) => return Err(e),
        }
    }
    let mut seen = HashSet::new();
    generated.retain(|q| seen.insert(q.clone()));
    let queries = validate_and_filter(&generated, backend, &cfg.templates, &cfg.filter);
    log::info!(
        "{} of {} generated queries survived filtering",
        queries.len(),
        generated.len()
    );
    Ok(queries)
}

/// Synthesizes and filters queries, then emits one demonstration per sampled
/// workload and grid budget.
pub fn build_pool(
    schema_id: &str,
    backend: &dyn WhatIfBackend,
    llm: &dyn LlmBackend,
    cfg: &PoolConfig,
) -> Result<DemoPool, DemoError> {
    let catalog = backend.catalog();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let queries = generate_workload_queries(backend, llm, cfg, &mut rng)?;
    if queries.is_empty() {
        log::warn!("no generated queries survived filtering; the pool is empty");
        return Ok(DemoPool::default());
    }

    let (lo, hi) = cfg.workload_size;
    let samples: Vec<Vec<String>> = (0..cfg.workloads)
        .map(|_| {
            let size = rng.random_range(lo.max(1)..=hi.max(lo).max(1)).min(queries.len());
            queries.iter().cloned().choose_multiple(&mut rng, size)
        })
        .collect();
    let db_mb = catalog.database_size_mb();
    let per_workload = samples
        .par_iter()
        .enumerate()
        .map(|(wi, qs)| {
            let w =
                Workload::new(format!("{schema_id}-w{wi:03}"), qs.clone()).map_err(crate::error::WhatIfError::from)?;
            let analyzed = backend.analyze(&w)?;
            let candidates = generate_candidates(&analyzed.features, cfg.max_width).candidates;
            let meta = build_meta_feature(&analyzed.features, cfg.meta_len);
            let features_text = analyzed.features.to_json();
            cfg.budget_grid
                .iter()
                .map(|&b| {
                    let label = collect_default_label(backend, &analyzed, &candidates, &cfg.budget_grid, b, db_mb)?;
                    let mut states = BTreeSet::new();
                    let refined_labels = label
                        .suboptimal()
                        .filter(|m| states.insert(m.indexes.clone()))
                        .map(|m| RefinedLabel {
                            initial_state: m.indexes.clone(),
                            actions: make_refined_label(&m.indexes, &label.chosen),
                        })
                        .collect();
                    Ok(Demonstration {
                        id: format!("{}-b{:02}", w.name, (b * 100.0).round() as u32),
                        schema_id: schema_id.to_string(),
                        meta: meta.clone(),
                        features_text: features_text.clone(),
                        default_label: label.actions,
                        refined_labels,
                        budget_fraction: b,
                    })
                })
                .collect::<Result<Vec<_>, DemoError>>()
        })
        .collect::<Result<Vec<_>, DemoError>>()?;
    DemoPool::new(per_workload.into_iter().flatten().collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bundled;
    use crate::index::apply_actions;
    use crate::llm::MockLlm;
    use crate::whatif::SimBackend;

    struct Canned(&'static str);

    impl LlmBackend for Canned {
        fn name(&self) -> &'static str {
            "canned"
        }

        fn chat(&self, r: &ChatRequest) -> Result<Vec<String>, LlmError> {
            Ok(vec![self.0.to_string(); r.n_samples])
        }
    }

    #[test]
    fn mock_synthesis_is_reproducible() {
        let c = bundled::tpch_catalog();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let seeds = sample_seeds(&c, &[], &mut rng);
        let a = synthesize_queries(&MockLlm::new(1), &c, 5, &seeds, 0.6).unwrap();
        assert_eq!(a.len(), 5);
        assert_eq!(a, synthesize_queries(&MockLlm::new(1), &c, 5, &seeds, 0.6).unwrap());
        for q in &a {
            crate::sql::parse_query(q, &c).unwrap();
        }
    }

    #[test]
    fn parsing_canned_completions() {
        let c = bundled::toy_catalog();
        let seeds = SynthSeeds::default();
        assert!(matches!(
            synthesize_queries(&Canned("I cannot help."), &c, 3, &seeds, 0.6),
            Err(DemoError::Llm(LlmError::NoQueriesParsed))
        ));
        let three = "```sql\nSELECT 1;\nSELECT 2;\nSELECT 3;\n```";
        assert_eq!(synthesize_queries(&Canned(three), &c, 5, &seeds, 0.6).unwrap().len(), 3);
    }

    #[test]
    fn filtering_rules() {
        let c = bundled::toy_catalog();
        let b = SimBackend::new(c.clone());
        let template = "SELECT * FROM users WHERE u_id = 5".to_string();
        let qs = vec![
            "SELECT * FROM users WHERE u_id = 17".to_string(),
            "SELECT * FROM nowhere".to_string(),
            "SELEC oops".to_string(),
            "SELECT * FROM orders WHERE o_user = 3".to_string(),
        ];
        let kept = validate_and_filter(&qs, &b, std::slice::from_ref(&template), &FilterConfig::default());
        assert_eq!(kept, vec!["SELECT * FROM orders WHERE o_user = 3".to_string()]);
        assert_eq!(token_jaccard(&template, &qs[0]), 1.0);
    }

    #[test]
    fn expensive_outliers_are_dropped() {
        let c = bundled::toy_catalog();
        let b = SimBackend::new(c);
        let mut qs: Vec<String> = (0..5)
            .map(|i| format!("SELECT * FROM users WHERE u_id = {i}"))
            .collect();
        qs.push("SELECT * FROM order_items, orders, users, products".into());
        let strict = FilterConfig {
            similarity_threshold: 1.1,
            cost_multiple: 1.0,
        };
        let kept = validate_and_filter(&qs, &b, &[], &strict);
        assert_eq!(kept.len(), 5);
    }

    #[test]
    fn one_workload_one_budget() {
        let b = SimBackend::new(bundled::tpch_catalog());
        let cfg = PoolConfig {
            queries_per_schema: 12,
            batch_size: 6,
            workloads: 1,
            workload_size: (3, 3),
            budget_grid: vec![0.3],
            seed: 11,
            ..PoolConfig::default()
        };
        let pool = build_pool("tpch", &b, &MockLlm::new(2), &cfg).unwrap();
        assert_eq!(pool.len(), 1);
        let d = &pool.demos()[0];
        assert!(!d.default_label.is_empty());
        assert!(d.default_label.iter().all(|a| !a.is_drop()));
        for r in &d.refined_labels {
            assert_eq!(apply_actions(&r.initial_state, &r.actions), d.default_set());
        }
        let again = build_pool("tpch", &b, &MockLlm::new(2), &cfg).unwrap();
        assert_eq!(pool.to_jsonl(), again.to_jsonl());
    }

    #[test]
    fn nothing_survives() {
        let b = SimBackend::new(bundled::toy_catalog());
        let cfg = PoolConfig {
            queries_per_schema: 2,
            ..PoolConfig::default()
        };
        let pool = build_pool("toy", &b, &Canned("```sql\nSELECT * FROM missing;\n```"), &cfg).unwrap();
        assert!(pool.is_empty());
    }
}

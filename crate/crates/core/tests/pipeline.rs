//! End-to-end runs with the mock LLM and the simulated backend.

use std::collections::BTreeSet;

use idxadvise_core::bundled;
use idxadvise_core::demos::{
    build_meta_feature, build_pool, match_demonstrations, match_registry, CosineMatch, DemoPool, MatchArgs, PoolConfig,
    DEFAULT_META_LEN,
};
use idxadvise_core::index::apply_actions;
use idxadvise_core::llm::MockLlm;
use idxadvise_core::scaling::{self_optimize, SelfOptConfig, SelfOptResult};
use idxadvise_core::whatif::{SimBackend, WhatIfBackend};

fn small_pool(schema: &str, backend: &SimBackend, seed: u64) -> DemoPool {
    let cfg = PoolConfig {
        queries_per_schema: 24,
        workloads: 4,
        workload_size: (3, 6),
        budget_grid: vec![0.2, 0.3],
        seed,
        ..PoolConfig::default()
    };
    build_pool(schema, backend, &MockLlm::new(seed), &cfg).unwrap()
}

fn advise(backend: &SimBackend, pool: &DemoPool, fraction: f64, seed: u64) -> SelfOptResult {
    let w = backend.analyze(&bundled::tpch_workload()).unwrap();
    let meta = build_meta_feature(&w.features, DEFAULT_META_LEN);
    let ranked = match_demonstrations(pool, &meta, &CosineMatch, None).unwrap();
    let budget = fraction * backend.catalog().database_size_mb();
    self_optimize(
        backend,
        &MockLlm::new(seed),
        &w,
        budget,
        fraction,
        &ranked,
        &SelfOptConfig::default(),
    )
    .unwrap()
}

#[test]
fn pool_labels_are_consistent() {
    let b = SimBackend::new(bundled::toy_catalog());
    let pool = small_pool("toy", &b, 5);
    assert_eq!(pool.len(), 8);
    let db = b.catalog().database_size_mb();
    for d in pool.demos() {
        assert_eq!(d.schema_id, "toy");
        assert_eq!(d.meta.len(), DEFAULT_META_LEN);
        let size: f64 = d.default_set().iter().map(|x| b.index_size_mb(x).unwrap()).sum();
        assert!(size <= d.budget_fraction * db + 1e-9, "{}", d.id);
        for r in &d.refined_labels {
            assert_eq!(apply_actions(&r.initial_state, &r.actions), d.default_set(), "{}", d.id);
        }
    }
    assert_eq!(DemoPool::from_jsonl(&pool.to_jsonl()).unwrap(), pool);
}

#[test]
fn tpch_advice_is_reproducible_and_within_budget() {
    let b = SimBackend::new(bundled::tpch_catalog());
    let pool = small_pool("tpch", &b, 2);
    let r1 = advise(&b, &pool, 0.3, 9);
    let r2 = advise(&b, &pool, 0.3, 9);
    assert_eq!(r1.trace_jsonl(), r2.trace_jsonl());
    assert_eq!(r1.indexes, r2.indexes);

    let size: f64 = r1.indexes.iter().map(|d| b.index_size_mb(d).unwrap()).sum();
    assert!(size <= 0.3 * b.catalog().database_size_mb());
    assert!(r1.cost < r1.baseline_cost);
    let best = r1.iteration_costs().into_iter().fold(f64::INFINITY, f64::min);
    assert_eq!(r1.cost, best);
    assert_eq!(apply_actions(&BTreeSet::new(), &r1.actions()), r1.indexes);
    assert_eq!(
        b.cost_with(&b.analyze(&bundled::tpch_workload()).unwrap(), &r1.indexes)
            .unwrap()
            .total,
        r1.cost
    );
}

#[test]
fn cross_schema_matching_excludes_own_schema() {
    let toy = SimBackend::new(bundled::toy_catalog());
    let tpch = SimBackend::new(bundled::tpch_catalog());
    let mut demos = small_pool("toy", &toy, 1).demos().to_vec();
    demos.extend(small_pool("tpch", &tpch, 1).demos().iter().cloned());
    let pool = DemoPool::new(demos).unwrap();
    let w = tpch.analyze(&bundled::tpch_workload()).unwrap();
    let meta = build_meta_feature(&w.features, DEFAULT_META_LEN);
    for name in match_registry().names() {
        let strategy = match_registry().build(name, &MatchArgs::default()).unwrap();
        let ranked = match_demonstrations(&pool, &meta, strategy.as_ref(), Some("tpch")).unwrap();
        assert_eq!(ranked.len(), 8, "{name}");
        assert!(ranked.iter().all(|d| d.schema_id == "toy"), "{name}");
    }
}

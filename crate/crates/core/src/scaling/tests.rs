use std::collections::BTreeSet;
use std::sync::atomic::{AtomicUsize, Ordering};

use super::*;
use crate::bundled;
use crate::error::{LlmError, ScalingError};
use crate::index::{IndexAction, IndexDef};
use crate::llm::{ChatRequest, LlmBackend, MockLlm};
use crate::sql::AnalyzedWorkload;
use crate::whatif::{SimBackend, WhatIfBackend};

fn toy() -> (SimBackend, AnalyzedWorkload) {
    let b = SimBackend::new(bundled::toy_catalog());
    let w = b.analyze(&bundled::toy_workload()).unwrap();
    (b, w)
}

fn option(cost: f64, size: f64, applied: Vec<IndexAction>) -> CandidateOption {
    CandidateOption {
        origin: Origin::Sample(0),
        actions: applied.clone(),
        applied,
        result: BTreeSet::new(),
        cost,
        size_mb: size,
        used_indexes: BTreeSet::new(),
    }
}

#[test]
fn best_of_n_examples() {
    assert!(matches!(best_of_n(&[]), Err(ScalingError::EmptyOptions)));
    let one = [option(4.0, 1.0, vec![])];
    assert_eq!(best_of_n(&one).unwrap(), &one[0]);
    let three = [
        option(10.0, 0.0, vec![]),
        option(7.0, 0.0, vec![]),
        option(9.0, 0.0, vec![]),
    ];
    assert_eq!(best_of_n(&three).unwrap().cost, 7.0);
    let a = IndexAction::Create(IndexDef::single("t", "a"));
    let b = IndexAction::Create(IndexDef::single("t", "b"));
    let ties = [option(5.0, 5.0, vec![a.clone()]), option(5.0, 3.0, vec![b.clone()])];
    assert_eq!(best_of_n(&ties).unwrap().size_mb, 3.0);
    let fewer = [
        option(5.0, 1.0, vec![a.clone(), b.clone()]),
        option(5.0, 9.0, vec![b.clone()]),
    ];
    assert_eq!(best_of_n(&fewer).unwrap().applied, vec![b.clone()]);
    let lex = [option(5.0, 1.0, vec![b]), option(5.0, 1.0, vec![a.clone()])];
    assert_eq!(best_of_n(&lex).unwrap().applied, vec![a]);
}

#[test]
fn evaluation_examples() {
    let (b, w) = toy();
    let db = b.catalog().database_size_mb();
    let base = b.cost_with(&w, &BTreeSet::new()).unwrap().total;
    let e = evaluate_option(&b, &w, &BTreeSet::new(), &[], db, Origin::Voted).unwrap();
    assert_eq!(e.cost, base);
    assert!(e.applied.is_empty());

    let defs = [
        IndexDef::single("orders", "o_user"),
        IndexDef::single("order_items", "oi_order"),
        IndexDef::single("users", "u_country"),
    ];
    let sizes: Vec<f64> = defs.iter().map(|d| b.index_size_mb(d).unwrap()).collect();
    let actions: Vec<IndexAction> = defs.iter().cloned().map(IndexAction::Create).collect();
    // Room for the first and third only.
    let budget = sizes[0] + sizes[2] + 0.5 * sizes[1].min(1.0);
    assert!(sizes[1] > sizes[2]);
    let e = evaluate_option(&b, &w, &BTreeSet::new(), &actions, budget, Origin::Sample(0)).unwrap();
    assert_eq!(e.applied, vec![actions[0].clone(), actions[2].clone()]);
    assert!(e.size_mb <= budget);

    let existing = BTreeSet::from([defs[2].clone()]);
    let swap = [IndexAction::Drop(defs[2].clone()), IndexAction::Create(defs[0].clone())];
    let e = evaluate_option(&b, &w, &existing, &swap, sizes[0], Origin::Sample(1)).unwrap();
    assert_eq!(e.applied, swap.to_vec());
    assert_eq!(e.result, BTreeSet::from([defs[0].clone()]));
    assert_eq!(e.cost, b.cost_with(&w, &e.result).unwrap().total);
}

#[test]
fn single_iteration() {
    let (b, w) = toy();
    let budget = 0.3 * b.catalog().database_size_mb();
    let cfg = SelfOptConfig {
        max_iters: 1,
        ..SelfOptConfig::default()
    };
    let r = self_optimize(&b, &MockLlm::new(1), &w, budget, 0.3, &[], &cfg).unwrap();
    assert_eq!(r.trace.len(), 1);
    assert_eq!(r.trace[0].option_costs.len(), 9);
}

#[test]
fn toy_run_is_monotone() {
    let (b, w) = toy();
    let budget = 0.3 * b.catalog().database_size_mb();
    let r = self_optimize(&b, &MockLlm::new(3), &w, budget, 0.3, &[], &SelfOptConfig::default()).unwrap();
    let costs = r.iteration_costs();
    assert!(r.cost <= costs[0] && costs[0] <= r.baseline_cost);
    assert!(r.cost < r.baseline_cost);
    assert_eq!(r.cost, costs.iter().copied().fold(f64::INFINITY, f64::min));
    let size: f64 = r.indexes.iter().map(|d| b.index_size_mb(d).unwrap()).sum();
    assert!(size <= budget);
}

/// Repeats one completion; fails after `fail_after` calls.
struct Scripted {
    text: String,
    calls: AtomicUsize,
    fail_after: usize,
}

impl LlmBackend for Scripted {
    fn name(&self) -> &'static str {
        "scripted"
    }

    fn chat(&self, r: &ChatRequest) -> Result<Vec<String>, LlmError> {
        if self.calls.fetch_add(1, Ordering::SeqCst) >= self.fail_after {
            return Err(LlmError::Transport("down".into()));
        }
        Ok(vec![self.text.clone(); r.n_samples])
    }
}

#[test]
fn stops_when_nothing_improves() {
    let (b, w) = toy();
    let llm = Scripted {
        text: "```sql\nCREATE INDEX ON orders (o_user);\n```".into(),
        calls: AtomicUsize::new(0),
        fail_after: usize::MAX,
    };
    let r = self_optimize(&b, &llm, &w, 1e9, 0.3, &[], &SelfOptConfig::default()).unwrap();
    assert_eq!(r.history.len(), 2);
    assert!(r.trace[0].improved && !r.trace[1].improved);
    assert_eq!(r.indexes, BTreeSet::from([IndexDef::single("orders", "o_user")]));
}

#[test]
fn llm_failure_keeps_best_so_far() {
    let (b, w) = toy();
    let llm = Scripted {
        text: "```sql\nCREATE INDEX ON orders (o_user);\n```".into(),
        calls: AtomicUsize::new(0),
        fail_after: 0,
    };
    let r = self_optimize(&b, &llm, &w, 1e9, 0.3, &[], &SelfOptConfig::default()).unwrap();
    assert!(r.aborted.is_some());
    assert!(r.indexes.is_empty());
    assert_eq!(r.cost, r.baseline_cost);
}

use std::collections::{BTreeSet, HashSet};
use std::fmt;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::demos::Demonstration;
use crate::error::{ScalingError, WhatIfError};
use crate::index::{IndexAction, IndexDef};
use crate::llm::{build_prompt, parse_actions, HistoryEntry, LlmBackend, PromptOptions, PromptState};
use crate::scaling::{index_guided_major_voting, tally};
use crate::sql::AnalyzedWorkload;
use crate::whatif::WhatIfBackend;

/// Demonstrations shown per prompt.
pub const DEMOS_PER_PROMPT: usize = 2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Origin {
    Sample(usize),
    Voted,
}

impl fmt::Display for Origin {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Origin::Sample(i) => write!(f, "sample-{i}"),
            Origin::Voted => f.write_str("voted"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateOption {
    pub origin: Origin,
    pub actions: Vec<IndexAction>,
    /// The subset of `actions` that took effect.
    pub applied: Vec<IndexAction>,
    /// Index set after applying.
    pub result: BTreeSet<IndexDef>,
    pub cost: f64,
    /// Total storage of `result`; never above the budget it was evaluated with.
    pub size_mb: f64,
    pub used_indexes: BTreeSet<String>,
}

/// Applies `actions` on top of `existing` in a fresh session.
///
/// DROPs of absent indexes and CREATEs of present ones are skipped. A CREATE
/// that would push total storage over `budget_mb` is skipped and later actions
/// still run.
pub fn evaluate_option(
    backend: &dyn WhatIfBackend,
    workload: &AnalyzedWorkload,
    existing: &BTreeSet<IndexDef>,
    actions: &[IndexAction],
    budget_mb: f64,
    origin: Origin,
) -> Result<CandidateOption, WhatIfError> {
    let mut s = backend.session_with(existing)?;
    let mut applied = Vec::new();
    for a in actions {
        match a {
            IndexAction::Drop(d) if s.contains(d) => {
                s.drop_index(d)?;
                applied.push(a.clone());
            }
            IndexAction::Create(d) if !s.contains(d) => {
                s.create(d)?;
                if s.total_size_mb() > budget_mb {
                    s.drop_index(d)?;
                } else {
                    applied.push(a.clone());
                }
            }
            _ => {}
        }
    }
    let report = s.estimate_cost(workload)?;
    Ok(CandidateOption {
        origin,
        actions: actions.to_vec(),
        applied,
        result: s.existing_defs(),
        cost: report.total,
        size_mb: s.total_size_mb(),
        used_indexes: report.used_indexes,
    })
}

/// Evaluates every option concurrently, one session each, preserving order.
pub fn evaluate_options(
    backend: &dyn WhatIfBackend,
    workload: &AnalyzedWorkload,
    existing: &BTreeSet<IndexDef>,
    options: &[(Origin, Vec<IndexAction>)],
    budget_mb: f64,
) -> Result<Vec<CandidateOption>, WhatIfError> {
    options
        .par_iter()
        .map(|(o, a)| evaluate_option(backend, workload, existing, a, budget_mb, *o))
        .collect()
}

/// Cheapest option; ties prefer fewer applied actions, then smaller size,
/// then the lexicographically smaller applied list.
pub fn best_of_n(options: &[CandidateOption]) -> Result<&CandidateOption, ScalingError> {
    options
        .iter()
        .min_by(|a, b| {
            a.cost
                .total_cmp(&b.cost)
                .then(a.applied.len().cmp(&b.applied.len()))
                .then(a.size_mb.total_cmp(&b.size_mb))
                .then_with(|| a.applied.cmp(&b.applied))
        })
        .ok_or(ScalingError::EmptyOptions)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SelfOptConfig {
    pub max_iters: usize,
    pub vote: bool,
    pub prompt: PromptOptions,
}

impl Default for SelfOptConfig {
    fn default() -> Self {
        SelfOptConfig {
            max_iters: 4,
            vote: true,
            prompt: PromptOptions::default(),
        }
    }
}

/// One line of the optimization trace.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationTrace {
    pub iteration: usize,
    pub demo_ids: Vec<String>,
    pub option_costs: Vec<(String, f64)>,
    pub chosen: String,
    pub chosen_cost: f64,
    pub improved: bool,
    /// DDL applied to the incumbent state; empty when not improved.
    pub applied_ddl: Vec<String>,
    pub remaining_budget_mb: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelfOptResult {
    pub indexes: BTreeSet<IndexDef>,
    pub cost: f64,
    pub baseline_cost: f64,
    pub history: Vec<HistoryEntry>,
    pub trace: Vec<IterationTrace>,
    /// Set when an LLM failure ended the loop early.
    pub aborted: Option<String>,
}

impl SelfOptResult {
    /// CREATE statements for the recommended set.
    pub fn actions(&self) -> Vec<IndexAction> {
        self.indexes.iter().cloned().map(IndexAction::Create).collect()
    }

    /// Best cost of each completed iteration.
    pub fn iteration_costs(&self) -> Vec<f64> {
        self.trace.iter().map(|t| t.chosen_cost).collect()
    }

    pub fn trace_jsonl(&self) -> String {
        self.trace
            .iter()
            .map(|t| serde_json::to_string(t).expect("trace serializes") + "\n")
            .collect()
    }
}

/// Demonstrations currently shown plus the rotation bookkeeping.
struct Rotation<'a> {
    ranked: &'a [&'a Demonstration],
    shown: HashSet<&'a str>,
    current: Vec<&'a Demonstration>,
}

impl<'a> Rotation<'a> {
    fn new(ranked: &'a [&'a Demonstration]) -> Self {
        let current: Vec<_> = ranked.iter().take(DEMOS_PER_PROMPT).copied().collect();
        Rotation {
            ranked,
            shown: current.iter().map(|d| d.id.as_str()).collect(),
            current,
        }
    }

    /// Both slots go to unseen demos when two exist; with one unseen it is
    /// paired with the highest-ranked seen demo; with none nothing changes.
    fn advance(&mut self) {
        let unseen: Vec<&Demonstration> = self
            .ranked
            .iter()
            .filter(|d| !self.shown.contains(d.id.as_str()))
            .take(DEMOS_PER_PROMPT)
            .copied()
            .collect();
        match unseen.len() {
            0 => return,
            n if n >= DEMOS_PER_PROMPT => self.current = unseen,
            _ => {
                let best_seen = self.ranked.iter().find(|d| self.shown.contains(d.id.as_str())).copied();
                self.current = unseen.into_iter().chain(best_seen).collect();
            }
        }
        self.shown.extend(self.current.iter().map(|d| d.id.as_str()));
    }
}

/// Iterative inference: prompt, sample, vote, evaluate, keep the best, and
/// feed the outcome back until an iteration fails to improve.
///
/// `ranked_demos` is the full matching order; an empty slice runs zero-shot.
pub fn self_optimize(
    backend: &dyn WhatIfBackend,
    llm: &dyn LlmBackend,
    workload: &AnalyzedWorkload,
    budget_mb: f64,
    budget_fraction: f64,
    ranked_demos: &[&Demonstration],
    cfg: &SelfOptConfig,
) -> Result<SelfOptResult, ScalingError> {
    let budget_mb = budget_mb.max(0.0);
    let baseline_cost = backend.cost_with(workload, &BTreeSet::new())?.total;
    let mut existing: BTreeSet<IndexDef> = BTreeSet::new();
    let mut existing_size = 0.0;
    let mut incumbent = baseline_cost;
    let mut history: Vec<HistoryEntry> = Vec::new();
    let mut trace = Vec::new();
    let mut rotation = Rotation::new(ranked_demos);
    let mut aborted = None;

    for iteration in 1..=cfg.max_iters.max(1) {
        let state = PromptState {
            features: workload.features.clone(),
            table_rows: workload.features.table_rows.clone(),
            existing: existing.clone(),
            remaining_budget_mb: (budget_mb - existing_size).max(0.0),
            history: history.clone(),
            demos: rotation.current.iter().map(|d| d.prompt_demo(&existing)).collect(),
            budget_fraction,
            workload_len: workload.len(),
            first_iteration: iteration == 1,
        };
        let completions = match llm.chat(&build_prompt(&state, &cfg.prompt)) {
            Ok(c) => c,
            Err(e) => {
                log::warn!("iteration {iteration}: LLM failure, keeping best so far: {e}");
                aborted = Some(e.to_string());
                break;
            }
        };
        let mut options: Vec<(Origin, Vec<IndexAction>)> = completions
            .iter()
            .enumerate()
            .map(|(i, text)| (Origin::Sample(i), parse_actions(text, backend.catalog()).actions))
            .collect();
        if cfg.vote {
            let samples: Vec<Vec<IndexAction>> = options.iter().map(|o| o.1.clone()).collect();
            options.push((Origin::Voted, index_guided_major_voting(&tally(&samples))));
        }
        let evaluated = evaluate_options(backend, workload, &existing, &options, budget_mb)?;
        let best = best_of_n(&evaluated)?.clone();
        let improved = best.cost < incumbent;
        history.push(HistoryEntry {
            iteration,
            recommended: best.applied.clone(),
            cost_before: incumbent,
            cost_after: best.cost,
            used_indexes: best.used_indexes.clone(),
        });
        if improved {
            existing = best.result.clone();
            existing_size = best.size_mb;
            incumbent = best.cost;
        }
        trace.push(IterationTrace {
            iteration,
            demo_ids: rotation.current.iter().map(|d| d.id.clone()).collect(),
            option_costs: evaluated.iter().map(|o| (o.origin.to_string(), o.cost)).collect(),
            chosen: best.origin.to_string(),
            chosen_cost: best.cost,
            improved,
            applied_ddl: if improved {
                best.applied.iter().map(IndexAction::to_ddl).collect()
            } else {
                Vec::new()
            },
            remaining_budget_mb: (budget_mb - existing_size).max(0.0),
        });
        if !improved {
            break;
        }
        rotation.advance();
    }
    Ok(SelfOptResult {
        indexes: existing,
        cost: incumbent,
        baseline_cost,
        history,
        trace,
        aborted,
    })
}

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write;

use serde::{Deserialize, Serialize};

use crate::index::{render_actions, IndexAction, IndexDef};
use crate::llm::{ChatRequest, DEFAULT_MAX_TOKENS, DEFAULT_SAMPLES, DEFAULT_TEMPERATURE};
use crate::sql::WorkloadFeatures;

/// Fixed system instruction for index recommendation.
pub const SYSTEM_INSTRUCTION: &str = "\
You are an index advisor for a relational database. You will see the \
features of a SQL workload, the row counts of the tables it reads, the \
indexes that already exist, the storage still available for new indexes and \
the results of earlier recommendations. Recommend B-tree indexes that lower \
the estimated cost of the whole workload while staying within the available \
storage.

Input: workload features as JSON (columns per query with their distinct \
counts and types, WHERE predicates with selectivities, and how often each \
column appears in JOIN, GROUP BY and ORDER BY clauses), table rows, existing \
indexes, remaining storage and history.

Output: SQL statements inside one ```sql block, one per line, using only \
`CREATE INDEX <table>_<col1>_<col2>_idx ON <table> (<col1>, <col2>);` and \
`DROP INDEX <index name>;`. List the most beneficial index first. Within an \
index, place columns filtered by equality before columns filtered by ranges. \
Drop existing indexes that the workload does not use when their storage is \
better spent elsewhere.";

/// Marks a prompt that asks for SQL queries instead of index recommendations.
pub const GENERATION_MARKER: &str = "## Query Generation";

/// Share of the context window a prompt may occupy before demonstrations are trimmed.
const CONTEXT_FILL: f64 = 0.75;
const CHARS_PER_TOKEN: usize = 4;

/// One earlier round of recommendation and its measured effect.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HistoryEntry {
    pub iteration: usize,
    pub recommended: Vec<IndexAction>,
    pub cost_before: f64,
    pub cost_after: f64,
    pub used_indexes: BTreeSet<String>,
}

/// A demonstration as it is shown in a prompt, with the label already chosen.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PromptDemo {
    pub id: String,
    pub features_text: String,
    pub budget_fraction: f64,
    pub initial_state: BTreeSet<IndexDef>,
    pub label: Vec<IndexAction>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PromptState {
    pub features: WorkloadFeatures,
    pub table_rows: BTreeMap<String, u64>,
    pub existing: BTreeSet<IndexDef>,
    /// Non-negative.
    pub remaining_budget_mb: f64,
    pub history: Vec<HistoryEntry>,
    /// At most two are rendered.
    pub demos: Vec<PromptDemo>,
    pub budget_fraction: f64,
    pub workload_len: usize,
    pub first_iteration: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PromptOptions {
    pub temperature: f64,
    pub n_samples: usize,
    pub max_tokens: usize,
    /// Context window of the model, in tokens.
    pub context_tokens: usize,
}

impl Default for PromptOptions {
    fn default() -> Self {
        PromptOptions {
            temperature: DEFAULT_TEMPERATURE,
            n_samples: DEFAULT_SAMPLES,
            max_tokens: DEFAULT_MAX_TOKENS,
            context_tokens: 32_768,
        }
    }
}

/// `⌈m × S_p⌉`, tolerant of float error in the product.
pub fn min_index_count(workload_len: usize, budget_fraction: f64) -> usize {
    (workload_len as f64 * budget_fraction - 1e-9).ceil().max(0.0) as usize
}

pub fn build_prompt(state: &PromptState, opts: &PromptOptions) -> ChatRequest {
    let mut system_text = SYSTEM_INSTRUCTION.to_string();
    if state.first_iteration {
        let n = min_index_count(state.workload_len, state.budget_fraction);
        write!(system_text, "\n\nRecommend at least {n} indexes.").unwrap();
    }
    let limit = (opts.context_tokens as f64 * CONTEXT_FILL) as usize * CHARS_PER_TOKEN;
    let mut demos = &state.demos[..state.demos.len().min(2)];
    let mut features = state.features.clone();
    let mut user_text = render_user(state, demos, &features, false);
    while system_text.len() + user_text.len() > limit && !demos.is_empty() {
        demos = &demos[..demos.len() - 1];
        user_text = render_user(state, demos, &features, false);
    }
    if system_text.len() + user_text.len() > limit {
        features.per_query.clear();
        user_text = render_user(state, demos, &features, true);
        while system_text.len() + user_text.len() > limit && !features.where_selectivities.is_empty() {
            let keep = features.where_selectivities.len() / 2;
            features.where_selectivities.truncate(keep);
            user_text = render_user(state, demos, &features, true);
        }
    }
    ChatRequest {
        system_text,
        user_text,
        temperature: opts.temperature,
        n_samples: opts.n_samples,
        max_tokens: opts.max_tokens,
    }
}

fn render_user(state: &PromptState, demos: &[PromptDemo], features: &WorkloadFeatures, truncated: bool) -> String {
    let mut s = String::new();
    s.push_str("## Demonstrations\n");
    if demos.is_empty() {
        s.push_str("none\n");
    }
    for (i, d) in demos.iter().enumerate() {
        writeln!(s, "### Demonstration {}", i + 1).unwrap();
        writeln!(s, "Workload features: {}", d.features_text).unwrap();
        writeln!(s, "Storage budget: {} of database size", percent(d.budget_fraction)).unwrap();
        write_existing(&mut s, &d.initial_state);
        s.push_str("Recommended indexes:\n```sql\n");
        s.push_str(&render_actions(&d.label));
        s.push_str("```\n");
    }
    s.push_str("\n## Input Information\n");
    writeln!(s, "Workload features: {}", features.to_json()).unwrap();
    if truncated {
        s.push_str("(workload features truncated)\n");
    }
    writeln!(
        s,
        "Table rows: {}",
        serde_json::to_string(&state.table_rows).expect("rows serialize")
    )
    .unwrap();
    writeln!(s, "Storage budget: {} of database size", percent(state.budget_fraction)).unwrap();
    write_existing(&mut s, &state.existing);
    writeln!(s, "Remaining storage: {:.2} MB", state.remaining_budget_mb.max(0.0)).unwrap();
    if state.history.is_empty() {
        s.push_str("History: none\n");
    } else {
        s.push_str("History:\n");
        for h in &state.history {
            let rec: Vec<String> = h.recommended.iter().map(IndexAction::to_ddl).collect();
            let used: Vec<&str> = h.used_indexes.iter().map(String::as_str).collect();
            writeln!(
                s,
                "- iteration {}: cost {:.2} -> {:.2}; recommended: {}; used indexes: {}",
                h.iteration,
                h.cost_before,
                h.cost_after,
                if rec.is_empty() { "none".into() } else { rec.join(" ") },
                if used.is_empty() {
                    "none".into()
                } else {
                    used.join(", ")
                },
            )
            .unwrap();
        }
    }
    s
}

fn write_existing(s: &mut String, existing: &BTreeSet<IndexDef>) {
    if existing.is_empty() {
        s.push_str("Existing indexes: none\n");
        return;
    }
    s.push_str("Existing indexes:\n");
    for d in existing {
        writeln!(s, "- {} ON {} ({})", d.name(), d.table(), d.columns().join(", ")).unwrap();
    }
}

fn percent(f: f64) -> String {
    format!("{:.0}%", f * 100.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn state() -> PromptState {
        PromptState {
            features: WorkloadFeatures::default(),
            table_rows: BTreeMap::from([("t".to_string(), 10)]),
            existing: BTreeSet::new(),
            remaining_budget_mb: 12.5,
            history: Vec::new(),
            demos: Vec::new(),
            budget_fraction: 0.3,
            workload_len: 19,
            first_iteration: true,
        }
    }

    #[test]
    fn minimum_count_clause() {
        assert_eq!(min_index_count(19, 0.3), 6);
        assert_eq!(min_index_count(10, 0.3), 3);
        let r = build_prompt(&state(), &PromptOptions::default());
        assert!(r.system_text.contains("at least 6 indexes"));
        let mut later = state();
        later.first_iteration = false;
        assert!(!build_prompt(&later, &PromptOptions::default())
            .system_text
            .contains("at least"));
    }

    #[test]
    fn history_and_existing_sections() {
        let r = build_prompt(&state(), &PromptOptions::default());
        assert!(r.user_text.contains("History: none\n"));
        assert!(r.user_text.contains("Existing indexes: none\n"));
        let mut s = state();
        s.existing.insert(IndexDef::single("t", "a"));
        s.history.push(HistoryEntry {
            iteration: 1,
            recommended: vec![IndexAction::Create(IndexDef::single("t", "a"))],
            cost_before: 100.0,
            cost_after: 40.0,
            used_indexes: BTreeSet::from(["t_a_idx".to_string()]),
        });
        let r = build_prompt(&s, &PromptOptions::default());
        assert!(r.user_text.contains("- t_a_idx ON t (a)\n"));
        assert!(r
            .user_text
            .contains("- iteration 1: cost 100.00 -> 40.00; recommended: CREATE INDEX t_a_idx ON t (a);"));
        assert_eq!(r, build_prompt(&s, &PromptOptions::default()));
    }

    #[test]
    fn demonstrations_are_trimmed_before_features() {
        let mut s = state();
        for i in 0..3 {
            s.demos.push(PromptDemo {
                id: format!("d{i}"),
                features_text: "x".repeat(4000),
                budget_fraction: 0.3,
                initial_state: BTreeSet::new(),
                label: vec![IndexAction::Create(IndexDef::single("t", "a"))],
            });
        }
        let roomy = build_prompt(&s, &PromptOptions::default());
        assert!(roomy.user_text.contains("### Demonstration 2") && !roomy.user_text.contains("### Demonstration 3"));
        let tight = PromptOptions {
            context_tokens: 2000,
            ..PromptOptions::default()
        };
        let r = build_prompt(&s, &tight);
        assert!(r.user_text.contains("### Demonstration 1") && !r.user_text.contains("### Demonstration 2"));
        assert!(r.user_text.contains("Workload features: {"));
    }
}

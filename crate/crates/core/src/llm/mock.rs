//! Deterministic stand-in for a chat model.
//!
//! Recommendation prompts are answered from the `## Input Information`
//! section: CREATEs on the highest-scoring filter and join columns, DROPs for
//! existing indexes the workload never touches. Generation prompts are
//! answered with template-instantiated SELECTs over the schema in the prompt.
//! Each sample is seeded from the backend seed, a digest of the request and
//! the sample index; temperature controls how far samples stray from the
//! zero-temperature answer.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write;
use std::sync::LazyLock;

use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use regex::Regex;
use sha2::{Digest, Sha256};

use crate::catalog::{Catalog, ColumnRef, DataType};
use crate::error::LlmError;
use crate::index::{IndexAction, IndexDef};
use crate::llm::{ChatRequest, LlmBackend, GENERATION_MARKER};
use crate::sql::WorkloadFeatures;

static MIN_COUNT: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"at least (\d+) indexes").unwrap());
static EXISTING: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"(?m)^- \S+ ON (\w+) \(([^)]*)\)$").unwrap());
static DEMO_CREATE: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"(?m)^CREATE INDEX \S+ ON (\w+) \(([^)]*)\);$").unwrap());
static QUERY_COUNT: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"(?m)^Number of queries: (\d+)$").unwrap());

/// Indexes suggested when the prompt sets no minimum.
const DEFAULT_COUNT: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MockLlm {
    seed: u64,
}

impl MockLlm {
    pub fn new(seed: u64) -> Self {
        MockLlm { seed }
    }

    fn sample_rng(&self, digest: u64, sample: usize) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(self.seed ^ digest ^ (sample as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15))
    }
}

fn request_digest(r: &ChatRequest) -> u64 {
    let mut h = Sha256::new();
    h.update(r.system_text.as_bytes());
    h.update([0]);
    h.update(r.user_text.as_bytes());
    h.update(r.temperature.to_bits().to_le_bytes());
    let out = h.finalize();
    u64::from_le_bytes(out[..8].try_into().unwrap())
}

impl LlmBackend for MockLlm {
    fn name(&self) -> &'static str {
        "mock"
    }

    fn chat(&self, request: &ChatRequest) -> Result<Vec<String>, LlmError> {
        request.validate()?;
        let digest = request_digest(request);
        let generate = request.user_text.contains(GENERATION_MARKER);
        let view = if generate {
            None
        } else {
            Some(PromptView::parse(request))
        };
        (0..request.n_samples)
            .map(|j| {
                let mut rng = self.sample_rng(digest, j);
                Ok(match &view {
                    Some(v) => v.recommend(request.temperature, &mut rng),
                    None => generate_queries(request, &mut rng),
                })
            })
            .collect()
    }
}

/// What the mock reads out of a recommendation prompt.
struct PromptView {
    features: Option<WorkloadFeatures>,
    existing: Vec<IndexDef>,
    demo_creates: Vec<IndexDef>,
    min_count: Option<usize>,
}

fn def_from(table: &str, cols: &str) -> Option<IndexDef> {
    IndexDef::new(table, cols.split(',').map(|c| c.trim().to_string())).ok()
}

impl PromptView {
    fn parse(r: &ChatRequest) -> Self {
        let (demo_part, input) = match r.user_text.split_once("## Input Information") {
            Some((d, i)) => (d, i),
            None => ("", r.user_text.as_str()),
        };
        let features = input
            .lines()
            .find_map(|l| l.strip_prefix("Workload features: "))
            .and_then(|j| serde_json::from_str(j).ok());
        PromptView {
            features,
            existing: EXISTING
                .captures_iter(input)
                .filter_map(|c| def_from(&c[1], &c[2]))
                .collect(),
            demo_creates: DEMO_CREATE
                .captures_iter(demo_part)
                .filter_map(|c| def_from(&c[1], &c[2]))
                .collect(),
            min_count: MIN_COUNT.captures(&r.system_text).and_then(|c| c[1].parse().ok()),
        }
    }

    fn recommend(&self, temperature: f64, rng: &mut ChaCha8Rng) -> String {
        let Some(f) = &self.features else {
            return "The workload description could not be read, so no indexes are recommended.".into();
        };
        let t = temperature.clamp(0.0, 2.0);
        let where_f = f.where_freq();
        let min_sel = f.min_selectivity();
        let mut score: BTreeMap<ColumnRef, f64> = BTreeMap::new();
        for (c, n) in &where_f {
            *score.entry(c.clone()).or_default() += 3.0 * *n as f64 + (1.0 - min_sel.get(c).copied().unwrap_or(1.0));
        }
        for (m, w) in [(&f.join_freq, 2.0), (&f.groupby_freq, 1.0), (&f.orderby_freq, 1.0)] {
            for (c, n) in m {
                *score.entry(c.clone()).or_default() += w * *n as f64;
            }
        }
        let filtered = |c: &ColumnRef| where_f.contains_key(c) || f.join_freq.contains_key(c);
        let by_score = |a: &ColumnRef, b: &ColumnRef| score[b].total_cmp(&score[a]).then_with(|| a.cmp(b));
        let mut leads: Vec<ColumnRef> = score.keys().filter(|c| filtered(c)).cloned().collect();
        if leads.is_empty() {
            leads = score.keys().cloned().collect();
        }
        leads.sort_by(by_score);
        let mut actions: Vec<IndexAction> = Vec::new();
        let existing: BTreeSet<&IndexDef> = self.existing.iter().collect();
        for d in &self.existing {
            let touched = d
                .columns()
                .iter()
                .any(|c| score.contains_key(&ColumnRef::new(d.table(), c)));
            if !touched {
                actions.push(IndexAction::Drop(d.clone()));
            }
        }
        if leads.is_empty() {
            return render(&actions);
        }

        // Order jitter: adjacent swaps after the anchor.
        for i in 1..leads.len().saturating_sub(1) {
            if rng.random_bool((0.5 * t).min(1.0)) {
                leads.swap(i, i + 1);
            }
        }
        let base = self.min_count.unwrap_or(DEFAULT_COUNT).max(1);
        let extra = (2.0 * t).round() as usize;
        let count = base + if extra > 0 { rng.random_range(0..=extra) } else { 0 };

        let mut creates: Vec<IndexDef> = Vec::new();
        for lead in leads.iter().take(count) {
            let partner = f
                .per_query
                .iter()
                .filter(|q| q.columns_on(&lead.table).any(|c| c == lead))
                .flat_map(|q| q.columns_on(&lead.table).cloned().collect::<Vec<_>>())
                .filter(|c| c != lead)
                .collect::<BTreeSet<_>>()
                .into_iter()
                .min_by(by_score);
            let mut wide = partner.as_ref().is_some_and(&filtered);
            if rng.random_bool((0.5 * t).min(1.0)) {
                wide = !wide;
            }
            let def = match (&partner, wide) {
                (Some(p), true) => IndexDef::new(&lead.table, [lead.column.as_str(), p.column.as_str()]).unwrap(),
                _ => IndexDef::single(&lead.table, &lead.column),
            };
            if !creates.contains(&def) {
                creates.push(def);
            }
        }
        if !self.demo_creates.is_empty() && rng.random_bool((0.5 * t).min(1.0)) {
            let known: BTreeSet<ColumnRef> = f.column_stats().into_keys().collect();
            if let Some(d) = self.demo_creates.iter().find(|d| {
                f.table_rows.contains_key(d.table())
                    && d.columns()
                        .iter()
                        .all(|c| known.contains(&ColumnRef::new(d.table(), c)))
                    && !creates.contains(d)
            }) {
                creates.push(d.clone());
            }
        }
        let anchor = creates[0].clone();
        creates.retain(|d| !existing.contains(d));
        if creates.is_empty() && actions.is_empty() {
            creates.push(anchor);
        }
        actions.extend(creates.into_iter().map(IndexAction::Create));
        render(&actions)
    }
}

fn render(actions: &[IndexAction]) -> String {
    if actions.is_empty() {
        return "The current indexes already suit this workload; no changes are recommended.".into();
    }
    let mut s = String::from("Recommended changes, most beneficial first:\n```sql\n");
    s.push_str(&crate::index::render_actions(actions));
    s.push_str("```\n");
    s
}

pub(crate) fn literal(rng: &mut ChaCha8Rng, ty: DataType, ndv: u64) -> String {
    let hi = ndv.max(1);
    match ty {
        DataType::Date => format!(
            "DATE '{}-{:02}-{:02}'",
            rng.random_range(1992..=1998),
            rng.random_range(1..=12),
            rng.random_range(1..=28)
        ),
        DataType::Text => format!("'v{}'", rng.random_range(1..=hi)),
        DataType::Decimal => format!("{}.{:02}", rng.random_range(1..=hi), rng.random_range(0..100)),
        _ => rng.random_range(1..=hi).to_string(),
    }
}

/// Columns sharing a name suffix after the first underscore join their tables.
fn join_pairs(cat: &Catalog) -> Vec<(ColumnRef, ColumnRef)> {
    let mut out = Vec::new();
    for (i, a) in cat.tables.iter().enumerate() {
        for b in &cat.tables[i + 1..] {
            for ca in &a.columns {
                for cb in &b.columns {
                    let sa = ca.name.split_once('_').map_or(ca.name.as_str(), |x| x.1);
                    let sb = cb.name.split_once('_').map_or(cb.name.as_str(), |x| x.1);
                    if sa == sb && ca.data_type == cb.data_type {
                        out.push((ColumnRef::new(&a.name, &ca.name), ColumnRef::new(&b.name, &cb.name)));
                    }
                }
            }
        }
    }
    out
}

fn generate_queries(r: &ChatRequest, rng: &mut ChaCha8Rng) -> String {
    let Some(cat) = r
        .user_text
        .lines()
        .find_map(|l| l.strip_prefix("Schema: "))
        .and_then(|j| Catalog::from_json(j).ok())
    else {
        return "No schema was provided, so no queries can be written.".into();
    };
    let n: usize = QUERY_COUNT
        .captures(&r.user_text)
        .and_then(|c| c[1].parse().ok())
        .unwrap_or(1);
    let joins = join_pairs(&cat);
    let ops = ["=", "<", ">", "<=", ">="];
    let mut s = String::from("```sql\n");
    for _ in 0..n {
        let template = rng.random_range(0..3);
        let q = if template == 2 && !joins.is_empty() {
            let (a, b) = joins.choose(rng).unwrap().clone();
            let ta = cat.table(&a.table).unwrap();
            let tb = cat.table(&b.table).unwrap();
            let filter = tb.columns.choose(rng).unwrap();
            let group = ta.columns.choose(rng).unwrap();
            format!(
                "SELECT {t1}.{g}, count(*) FROM {t1} JOIN {t2} ON {t1}.{c1} = {t2}.{c2} WHERE {t2}.{fc} {op} {v} GROUP BY {t1}.{g}",
                t1 = a.table,
                t2 = b.table,
                c1 = a.column,
                c2 = b.column,
                g = group.name,
                fc = filter.name,
                op = ops.choose(rng).unwrap(),
                v = literal(rng, filter.data_type, filter.ndv),
            )
        } else {
            let t = cat.tables.choose(rng).unwrap();
            let mut cols: Vec<_> = t.columns.iter().collect();
            cols.shuffle(rng);
            let f = cols[0];
            let mut q = format!(
                "SELECT * FROM {} WHERE {} {} {}",
                t.name,
                f.name,
                ops.choose(rng).unwrap(),
                literal(rng, f.data_type, f.ndv)
            );
            if let (1, Some(g)) = (template, cols.get(1)) {
                q = format!(
                    "SELECT {g}, count(*) FROM {t} WHERE {f} {op} {v} GROUP BY {g} ORDER BY {g}",
                    g = g.name,
                    t = t.name,
                    f = f.name,
                    op = ops.choose(rng).unwrap(),
                    v = literal(rng, f.data_type, f.ndv)
                );
            }
            q
        };
        writeln!(s, "{q};").unwrap();
    }
    s.push_str("```\n");
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bundled;
    use crate::llm::{build_prompt, parse_actions, PromptOptions, PromptState};
    use crate::sql::{extract_workload_features, SimEstimator, Workload};

    fn state(queries: &[&str]) -> (Catalog, PromptState) {
        let c = bundled::tpch_catalog();
        let w = Workload::new("w", queries.iter().map(|s| s.to_string()).collect()).unwrap();
        let f = extract_workload_features(&w, &c, &SimEstimator::new(c.clone())).unwrap();
        let s = PromptState {
            table_rows: f.table_rows.clone(),
            features: f,
            existing: BTreeSet::from([IndexDef::single("part", "p_size")]),
            remaining_budget_mb: 100.0,
            history: Vec::new(),
            demos: Vec::new(),
            budget_fraction: 0.3,
            workload_len: queries.len(),
            first_iteration: true,
        };
        (c, s)
    }

    #[test]
    fn deterministic_and_counted() {
        let (_, s) = state(&[
            "SELECT * FROM lineitem WHERE l_orderkey = 5 AND l_suppkey = 3",
            "SELECT * FROM orders WHERE o_custkey = 1 AND o_orderdate < DATE '1995-01-01' ORDER BY o_totalprice",
            "SELECT p_brand, count(*) FROM part WHERE p_size > 10 AND p_type = 'x' GROUP BY p_brand",
        ]);
        let req = build_prompt(&s, &PromptOptions::default());
        let m = MockLlm::new(7);
        let a = m.chat(&req).unwrap();
        assert_eq!(a.len(), 8);
        assert_eq!(a, m.chat(&req).unwrap());
        assert_ne!(a, MockLlm::new(8).chat(&req).unwrap());
    }

    #[test]
    fn top_where_column_always_leads_a_create() {
        let (c, s) = state(&[
            "SELECT * FROM lineitem WHERE l_orderkey = 5",
            "SELECT l_returnflag, count(*) FROM lineitem WHERE l_orderkey < 100 AND l_shipdate > DATE '1995-01-01' GROUP BY l_returnflag",
            "SELECT o_orderdate FROM orders WHERE o_totalprice > 1000 ORDER BY o_orderdate",
        ]);
        let req = build_prompt(&s, &PromptOptions::default());
        for text in MockLlm::new(1).chat(&req).unwrap() {
            assert!(text.contains("ON lineitem (l_orderkey"), "{text}");
            let p = parse_actions(&text, &c);
            assert!(!p.actions.is_empty());
            assert_eq!(p.warnings, 0);
            // part.p_size is never touched by the workload.
            assert!(p
                .actions
                .contains(&IndexAction::Drop(IndexDef::single("part", "p_size"))));
        }
    }

    #[test]
    fn zero_temperature_samples_agree() {
        let (_, s) = state(&["SELECT * FROM orders WHERE o_custkey = 1 AND o_orderdate < DATE '1995-01-01'"]);
        let opts = PromptOptions {
            temperature: 0.0,
            ..PromptOptions::default()
        };
        let out = MockLlm::new(3).chat(&build_prompt(&s, &opts)).unwrap();
        assert!(out.windows(2).all(|w| w[0] == w[1]));
    }

    #[test]
    fn generation_mode() {
        let c = bundled::tpch_catalog();
        let req = ChatRequest {
            system_text: "Write SQL.".into(),
            user_text: format!(
                "{GENERATION_MARKER}\nSchema: {}\nNumber of queries: 5\n",
                serde_json::to_string(&c).unwrap()
            ),
            temperature: 0.6,
            n_samples: 1,
            max_tokens: 100,
        };
        let out = MockLlm::new(9).chat(&req).unwrap();
        let body = &crate::llm::extract_fenced_sql(&out[0])[0];
        let queries = crate::sql::split_statements(body);
        assert_eq!(queries.len(), 5);
        for q in &queries {
            crate::sql::parse_query(q, &c).unwrap();
        }
    }

    #[test]
    fn rejects_invalid_request() {
        let r = ChatRequest {
            system_text: String::new(),
            user_text: String::new(),
            temperature: 0.5,
            n_samples: 0,
            max_tokens: 1,
        };
        assert!(MockLlm::new(0).chat(&r).is_err());
    }
}

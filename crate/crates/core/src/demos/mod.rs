//! Demonstration pool: construction from synthesized workloads, meta-features
//! and matching strategies for retrieval.

mod matching;
mod meta;
mod synth;

use std::collections::{BTreeSet, HashSet};
use std::fs;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::DemoError;
use crate::index::{apply_actions, IndexAction, IndexDef};
use crate::llm::PromptDemo;

pub use matching::{
    match_demonstrations, match_registry, CosineMatch, KMeansMatch, MatchArgs, MatchRegistry, MatchStrategy,
    RandomMatch, DEFAULT_KMEANS_K,
};
pub use meta::{build_meta_feature, cosine_similarity, MetaFeature, DEFAULT_META_LEN};
pub use synth::{
    build_pool, generate_workload_queries, sample_seeds, synthesize_queries, token_jaccard, validate_and_filter,
    FilterConfig, PoolConfig, SynthSeeds, SYNTH_INSTRUCTION,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RefinedLabel {
    pub initial_state: BTreeSet<IndexDef>,
    pub actions: Vec<IndexAction>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Demonstration {
    pub id: String,
    pub schema_id: String,
    pub meta: MetaFeature,
    pub features_text: String,
    /// CREATE actions only.
    pub default_label: Vec<IndexAction>,
    /// Each maps its initial state onto the default-label set.
    pub refined_labels: Vec<RefinedLabel>,
    pub budget_fraction: f64,
}

impl Demonstration {
    pub fn default_set(&self) -> BTreeSet<IndexDef> {
        apply_actions(&BTreeSet::new(), &self.default_label)
    }

    /// The label and the initial state it starts from, as shown in a prompt.
    pub fn prompt_demo(&self, existing: &BTreeSet<IndexDef>) -> PromptDemo {
        let (initial_state, label) = match pick_refined(self, existing) {
            Some(r) => (r.initial_state.clone(), r.actions.clone()),
            None => (BTreeSet::new(), self.default_label.clone()),
        };
        PromptDemo {
            id: self.id.clone(),
            features_text: self.features_text.clone(),
            budget_fraction: self.budget_fraction,
            initial_state,
            label,
        }
    }
}

fn jaccard(a: &BTreeSet<IndexDef>, b: &BTreeSet<IndexDef>) -> f64 {
    let union = a.union(b).count();
    if union == 0 {
        return 1.0;
    }
    a.intersection(b).count() as f64 / union as f64
}

fn pick_refined<'d>(demo: &'d Demonstration, existing: &BTreeSet<IndexDef>) -> Option<&'d RefinedLabel> {
    if existing.is_empty() {
        return None;
    }
    // Earliest wins among equal similarity and length.
    demo.refined_labels.iter().reduce(|best, r| {
        let (jb, jr) = (
            jaccard(&best.initial_state, existing),
            jaccard(&r.initial_state, existing),
        );
        if jr > jb || (jr == jb && r.actions.len() < best.actions.len()) {
            r
        } else {
            best
        }
    })
}

/// Default label for an empty state, else the refined label whose initial
/// state is most similar to `existing`.
pub fn select_label(demo: &Demonstration, existing: &BTreeSet<IndexDef>) -> Vec<IndexAction> {
    pick_refined(demo, existing).map_or_else(|| demo.default_label.clone(), |r| r.actions.clone())
}

/// Demonstrations with unique ids, stored as JSON lines.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct DemoPool {
    demos: Vec<Demonstration>,
}

impl DemoPool {
    pub fn new(demos: Vec<Demonstration>) -> Result<Self, DemoError> {
        let mut seen = HashSet::new();
        for d in &demos {
            if !seen.insert(d.id.as_str()) {
                return Err(DemoError::DuplicateId(d.id.clone()));
            }
        }
        Ok(DemoPool { demos })
    }

    pub fn demos(&self) -> &[Demonstration] {
        &self.demos
    }

    pub fn len(&self) -> usize {
        self.demos.len()
    }

    pub fn is_empty(&self) -> bool {
        self.demos.is_empty()
    }

    pub fn get(&self, id: &str) -> Option<&Demonstration> {
        self.demos.iter().find(|d| d.id == id)
    }

    pub fn schemas(&self) -> BTreeSet<&str> {
        self.demos.iter().map(|d| d.schema_id.as_str()).collect()
    }

    pub fn to_jsonl(&self) -> String {
        let mut s = String::new();
        for d in &self.demos {
            s.push_str(&serde_json::to_string(d).expect("demonstration serializes"));
            s.push('\n');
        }
        s
    }

    pub fn from_jsonl(text: &str) -> Result<Self, DemoError> {
        let demos = text
            .lines()
            .enumerate()
            .filter(|(_, l)| !l.trim().is_empty())
            .map(|(i, l)| {
                serde_json::from_str(l).map_err(|e| DemoError::Json {
                    line: i + 1,
                    message: e.to_string(),
                })
            })
            .collect::<Result<Vec<_>, _>>()?;
        DemoPool::new(demos)
    }

    pub fn load(path: &Path) -> Result<Self, DemoError> {
        let text = fs::read_to_string(path).map_err(|e| io_err(path, e))?;
        DemoPool::from_jsonl(&text)
    }

    pub fn save(&self, path: &Path) -> Result<(), DemoError> {
        let mut f = fs::File::create(path).map_err(|e| io_err(path, e))?;
        f.write_all(self.to_jsonl().as_bytes()).map_err(|e| io_err(path, e))
    }
}

fn io_err(path: &Path, e: std::io::Error) -> DemoError {
    DemoError::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    }
}

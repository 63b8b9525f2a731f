use std::collections::{BTreeMap, HashSet};
use std::sync::LazyLock;

use regex::Regex;

use crate::catalog::Catalog;
use crate::index::{IndexAction, IndexDef};

static DDL: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(
        r#"(?ix)
        \bCREATE \s+ (?:UNIQUE\s+)? INDEX \s+ (?:CONCURRENTLY\s+)? (?:IF\s+NOT\s+EXISTS\s+)?
            (?:[\w$."]+\s+)?? ON \s+ (?:ONLY\s+)? (?P<table>[\w$."]+) \s* (?:USING\s+\w+\s*)?
            \( (?P<cols>[^()]*) \)
        | \bDROP \s+ INDEX \s+ (?:CONCURRENTLY\s+)? (?:IF\s+EXISTS\s+)? (?P<drop>[\w$."]+)
        "#,
    )
    .expect("DDL pattern compiles")
});

static FENCE: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(r"(?s)```[ \t]*(?:sql|SQL|postgresql)?[ \t]*\n(.*?)```").expect("fence pattern compiles")
});

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ParsedActions {
    pub actions: Vec<IndexAction>,
    /// Statements that were recognised but could not be resolved against the catalog.
    pub warnings: usize,
}

/// Extracts CREATE INDEX and DROP INDEX statements in textual order.
///
/// DROP names resolve through the canonical naming scheme. Statements naming
/// unknown tables or columns are skipped and counted. Repeats keep the first.
pub fn parse_actions(text: &str, catalog: &Catalog) -> ParsedActions {
    parse_actions_with(text, catalog, &BTreeMap::new())
}

/// Like [`parse_actions`], resolving non-canonical DROP names through `known`.
pub fn parse_actions_with(text: &str, catalog: &Catalog, known: &BTreeMap<String, IndexDef>) -> ParsedActions {
    let mut out = ParsedActions::default();
    let mut seen = HashSet::new();
    for cap in DDL.captures_iter(text) {
        let action = if let Some(name) = cap.name("drop") {
            let name = unqualify(name.as_str());
            IndexDef::from_canonical_name(&name, catalog)
                .or_else(|| known.get(&name).cloned())
                .map(IndexAction::Drop)
        } else {
            let table = unqualify(&cap["table"]);
            let cols: Vec<String> = cap["cols"].split(',').map(column_name).collect();
            IndexDef::new(table, cols)
                .ok()
                .filter(|d| d.validate(catalog).is_ok())
                .map(IndexAction::Create)
        };
        match action {
            Some(a) => {
                if seen.insert(a.clone()) {
                    out.actions.push(a);
                }
            }
            None => {
                log::warn!("skipping unresolvable statement `{}`", &cap[0]);
                out.warnings += 1;
            }
        }
    }
    out
}

/// Strips quotes and a schema prefix, folding unquoted names to lower case.
fn unqualify(name: &str) -> String {
    let last = name.rsplit('.').next().unwrap_or(name);
    if last.starts_with('"') {
        last.trim_matches('"').to_string()
    } else {
        last.to_ascii_lowercase()
    }
}

fn column_name(raw: &str) -> String {
    let first = raw.split_whitespace().next().unwrap_or("");
    unqualify(first)
}

/// Bodies of fenced code blocks, in order.
pub fn extract_fenced_sql(text: &str) -> Vec<String> {
    FENCE.captures_iter(text).map(|c| c[1].to_string()).collect()
}

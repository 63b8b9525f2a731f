//! Index definitions and the CREATE/DROP actions that recommendations are made of.

use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::catalog::Catalog;
use crate::error::WhatIfError;

/// An ordered-column B-tree index on one table.
///
/// Ordering is `(table, columns)`, which gives every set of definitions a
/// canonical iteration order.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "RawIndexDef", into = "RawIndexDef")]
pub struct IndexDef {
    table: String,
    columns: Vec<String>,
}

#[derive(Serialize, Deserialize)]
struct RawIndexDef {
    table: String,
    columns: Vec<String>,
}

impl TryFrom<RawIndexDef> for IndexDef {
    type Error = String;
    fn try_from(r: RawIndexDef) -> Result<Self, String> {
        IndexDef::new(r.table, r.columns).map_err(|e| e.to_string())
    }
}

impl From<IndexDef> for RawIndexDef {
    fn from(d: IndexDef) -> Self {
        RawIndexDef {
            table: d.table,
            columns: d.columns,
        }
    }
}

impl IndexDef {
    /// Builds a definition, rejecting empty or repeated column lists.
    pub fn new<S: Into<String>>(
        table: impl Into<String>,
        columns: impl IntoIterator<Item = S>,
    ) -> Result<Self, WhatIfError> {
        let table = table.into();
        let columns: Vec<String> = columns.into_iter().map(Into::into).collect();
        if table.is_empty() {
            return Err(WhatIfError::InvalidIndex("empty table name".into()));
        }
        if columns.is_empty() {
            return Err(WhatIfError::InvalidIndex(format!("no columns for `{table}`")));
        }
        let mut seen = BTreeSet::new();
        for c in &columns {
            if c.is_empty() || !seen.insert(c.as_str()) {
                return Err(WhatIfError::InvalidIndex(format!(
                    "repeated or empty column `{c}` on `{table}`"
                )));
            }
        }
        Ok(IndexDef { table, columns })
    }

    pub fn single(table: &str, column: &str) -> Self {
        IndexDef {
            table: table.to_string(),
            columns: vec![column.to_string()],
        }
    }

    pub fn table(&self) -> &str {
        &self.table
    }

    pub fn columns(&self) -> &[String] {
        &self.columns
    }

    pub fn width(&self) -> usize {
        self.columns.len()
    }

    pub fn leading(&self) -> &str {
        &self.columns[0]
    }

    /// Canonical name: `<table>_<col1>_..._<colk>_idx`.
    pub fn name(&self) -> String {
        let mut s = self.table.clone();
        for c in &self.columns {
            s.push('_');
            s.push_str(c);
        }
        s.push_str("_idx");
        s
    }

    /// True when `self` is a same-table strict prefix of `other`.
    pub fn is_strict_prefix_of(&self, other: &IndexDef) -> bool {
        self.table == other.table
            && self.columns.len() < other.columns.len()
            && other.columns.starts_with(&self.columns)
    }

    pub fn validate(&self, catalog: &Catalog) -> Result<(), WhatIfError> {
        let t = catalog
            .table(&self.table)
            .ok_or_else(|| WhatIfError::UnknownColumn(format!("{}.*", self.table)))?;
        for c in &self.columns {
            if t.column(c).is_none() {
                return Err(WhatIfError::UnknownColumn(format!("{}.{}", self.table, c)));
            }
        }
        Ok(())
    }

    /// Resolves a canonical index name back to a definition using the catalog.
    ///
    /// Column names may themselves contain underscores, so the suffix after the
    /// table prefix is split by searching for a sequence of catalog columns.
    pub fn from_canonical_name(name: &str, catalog: &Catalog) -> Option<IndexDef> {
        let body = name.strip_suffix("_idx")?;
        // Longest table names first so `order_items` wins over `order`.
        let mut tables: Vec<_> = catalog.tables.iter().collect();
        tables.sort_by_key(|t| std::cmp::Reverse(t.name.len()));
        for t in tables {
            let Some(rest) = body.strip_prefix(t.name.as_str()) else {
                continue;
            };
            let Some(rest) = rest.strip_prefix('_') else {
                continue;
            };
            let names: Vec<&str> = t.columns.iter().map(|c| c.name.as_str()).collect();
            if let Some(cols) = split_columns(rest, &names) {
                if let Ok(def) = IndexDef::new(t.name.clone(), cols) {
                    return Some(def);
                }
            }
        }
        None
    }
}

fn split_columns(rest: &str, names: &[&str]) -> Option<Vec<String>> {
    if rest.is_empty() {
        return None;
    }
    let mut by_len: Vec<&str> = names.to_vec();
    by_len.sort_by_key(|n| std::cmp::Reverse(n.len()));
    for n in by_len {
        if rest == n {
            return Some(vec![n.to_string()]);
        }
        if let Some(tail) = rest.strip_prefix(n).and_then(|r| r.strip_prefix('_')) {
            if let Some(mut more) = split_columns(tail, names) {
                more.insert(0, n.to_string());
                return Some(more);
            }
        }
    }
    None
}

impl fmt::Display for IndexDef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}({})", self.table, self.columns.join(","))
    }
}

/// One step of a recommendation.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum IndexAction {
    Create(IndexDef),
    Drop(IndexDef),
}

#[derive(Serialize, Deserialize)]
struct RawAction {
    action: ActionKind,
    table: String,
    columns: Vec<String>,
}

#[derive(Serialize, Deserialize, Clone, Copy, PartialEq, Eq)]
#[serde(rename_all = "lowercase")]
enum ActionKind {
    Create,
    Drop,
}

impl Serialize for IndexAction {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        let (action, def) = match self {
            IndexAction::Create(d) => (ActionKind::Create, d),
            IndexAction::Drop(d) => (ActionKind::Drop, d),
        };
        RawAction {
            action,
            table: def.table.clone(),
            columns: def.columns.clone(),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for IndexAction {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let raw = RawAction::deserialize(d)?;
        let def = IndexDef::new(raw.table, raw.columns).map_err(serde::de::Error::custom)?;
        Ok(match raw.action {
            ActionKind::Create => IndexAction::Create(def),
            ActionKind::Drop => IndexAction::Drop(def),
        })
    }
}

impl IndexAction {
    pub fn def(&self) -> &IndexDef {
        match self {
            IndexAction::Create(d) | IndexAction::Drop(d) => d,
        }
    }

    pub fn is_drop(&self) -> bool {
        matches!(self, IndexAction::Drop(_))
    }

    /// Canonical DDL text for this action.
    pub fn to_ddl(&self) -> String {
        match self {
            IndexAction::Create(d) => format!("CREATE INDEX {} ON {} ({});", d.name(), d.table, d.columns.join(", ")),
            IndexAction::Drop(d) => format!("DROP INDEX {};", d.name()),
        }
    }
}

impl fmt::Display for IndexAction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_ddl())
    }
}

/// Renders an action list as one DDL statement per line.
pub fn render_actions(actions: &[IndexAction]) -> String {
    let mut out = String::new();
    for a in actions {
        out.push_str(&a.to_ddl());
        out.push('\n');
    }
    out
}

/// Applies actions to an index set: drops remove, creates insert.
pub fn apply_actions(state: &BTreeSet<IndexDef>, actions: &[IndexAction]) -> BTreeSet<IndexDef> {
    let mut out = state.clone();
    for a in actions {
        match a {
            IndexAction::Create(d) => {
                out.insert(d.clone());
            }
            IndexAction::Drop(d) => {
                out.remove(d);
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn canonical_names() {
        let d = IndexDef::single("lineitem", "l_orderkey");
        assert_eq!(d.name(), "lineitem_l_orderkey_idx");
        let d2 = IndexDef::new("lineitem", ["l_orderkey", "l_suppkey"]).unwrap();
        assert_eq!(d2.name(), "lineitem_l_orderkey_l_suppkey_idx");
        assert!(d.is_strict_prefix_of(&d2));
        assert!(!d2.is_strict_prefix_of(&d));
        assert!(!d.is_strict_prefix_of(&d));
    }

    #[test]
    fn rejects_bad_definitions() {
        assert!(IndexDef::new("t", Vec::<String>::new()).is_err());
        assert!(IndexDef::new("t", ["a", "a"]).is_err());
        assert!(serde_json::from_str::<IndexDef>(r#"{"table":"t","columns":[]}"#).is_err());
    }

    #[test]
    fn action_json_shape() {
        let a = IndexAction::Drop(IndexDef::new("t", ["a", "b"]).unwrap());
        let s = serde_json::to_string(&a).unwrap();
        assert_eq!(s, r#"{"action":"drop","table":"t","columns":["a","b"]}"#);
        assert_eq!(serde_json::from_str::<IndexAction>(&s).unwrap(), a);
    }

    #[test]
    fn resolves_names_with_underscored_columns() {
        let cat = Catalog::from_json(
            r#"{"tables":[
              {"name":"order","rows":10,"columns":[{"name":"items_id","type":"int","ndv":1}]},
              {"name":"order_items","rows":10,"columns":[
                 {"name":"oi_order","type":"int","ndv":1},
                 {"name":"oi","type":"int","ndv":1},
                 {"name":"order","type":"int","ndv":1}]}]}"#,
        )
        .unwrap();
        let d = IndexDef::new("order_items", ["oi_order", "oi"]).unwrap();
        assert_eq!(IndexDef::from_canonical_name(&d.name(), &cat), Some(d));
        let e = IndexDef::single("order", "items_id");
        assert_eq!(IndexDef::from_canonical_name(&e.name(), &cat), Some(e));
        assert_eq!(IndexDef::from_canonical_name("order_items_zz_idx", &cat), None);
    }
}

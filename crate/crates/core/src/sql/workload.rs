use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::SqlError;

/// An ordered list of SELECT statements.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Workload {
    pub name: String,
    pub queries: Vec<String>,
}

impl Workload {
    pub fn new(name: impl Into<String>, queries: Vec<String>) -> Result<Self, SqlError> {
        let queries: Vec<String> = queries
            .into_iter()
            .map(|q| q.trim().trim_end_matches(';').trim().to_string())
            .filter(|q| !q.is_empty())
            .collect();
        if queries.is_empty() {
            return Err(SqlError::EmptyWorkload);
        }
        Ok(Workload {
            name: name.into(),
            queries,
        })
    }

    /// Parses either the JSON form `{name, queries}` or semicolon-separated SQL text.
    pub fn parse(name: &str, text: &str) -> Result<Self, SqlError> {
        if text.trim_start().starts_with('{') {
            let w: Workload = serde_json::from_str(text).map_err(|e| SqlError::Parse(format!("workload JSON: {e}")))?;
            return Workload::new(w.name, w.queries);
        }
        Workload::new(name, split_statements(text))
    }

    pub fn load(path: &Path) -> Result<Self, SqlError> {
        let text = std::fs::read_to_string(path).map_err(|e| SqlError::Io {
            path: path.display().to_string(),
            message: e.to_string(),
        })?;
        let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or("workload");
        Workload::parse(stem, &text)
    }

    pub fn len(&self) -> usize {
        self.queries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.queries.is_empty()
    }
}

/// Splits SQL text on top-level semicolons, dropping `--` and `/* */` comments.
/// Quoted strings and identifiers are copied verbatim.
pub fn split_statements(text: &str) -> Vec<String> {
    let mut out = Vec::new();
    let mut cur = String::new();
    let mut chars = text.chars().peekable();
    while let Some(c) = chars.next() {
        match c {
            '\'' | '"' => {
                cur.push(c);
                while let Some(d) = chars.next() {
                    cur.push(d);
                    if d == c {
                        // doubled quote is an escape
                        if chars.peek() == Some(&c) {
                            cur.push(chars.next().unwrap());
                        } else {
                            break;
                        }
                    }
                }
            }
            '-' if chars.peek() == Some(&'-') => {
                for d in chars.by_ref() {
                    if d == '\n' {
                        cur.push('\n');
                        break;
                    }
                }
            }
            '/' if chars.peek() == Some(&'*') => {
                chars.next();
                let mut prev = '\0';
                for d in chars.by_ref() {
                    if prev == '*' && d == '/' {
                        break;
                    }
                    prev = d;
                }
                cur.push(' ');
            }
            ';' => {
                let s = cur.trim();
                if !s.is_empty() {
                    out.push(s.to_string());
                }
                cur.clear();
            }
            _ => cur.push(c),
        }
    }
    let s = cur.trim();
    if !s.is_empty() {
        out.push(s.to_string());
    }
    out
}

//! Schema catalog: tables, column statistics and storage-width estimates.
//!
//! The catalog file is JSON of the form
//! `{"tables": [{"name", "rows", "columns": [{"name", "type", "ndv"}]}]}`.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::CatalogError;

/// Per-row overhead charged to every index entry and table row, in bytes.
pub const ROW_OVERHEAD_BYTES: u64 = 8;

const BYTES_PER_MB: f64 = 1024.0 * 1024.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DataType {
    #[serde(alias = "integer", alias = "int4", alias = "smallint")]
    Int,
    #[serde(alias = "int8")]
    Bigint,
    Date,
    #[serde(alias = "numeric", alias = "float", alias = "double")]
    Decimal,
    #[serde(alias = "varchar", alias = "char", alias = "string")]
    Text,
}

impl DataType {
    /// Storage width of one value in bytes.
    pub fn width(self) -> u64 {
        match self {
            DataType::Int | DataType::Date => 4,
            DataType::Bigint | DataType::Decimal => 8,
            DataType::Text => 16,
        }
    }

    /// Maps a SQL type name (as reported by `information_schema`) to a tag.
    pub fn from_sql_name(name: &str) -> DataType {
        let lower = name.to_ascii_lowercase();
        if lower.contains("bigint") || lower == "int8" {
            DataType::Bigint
        } else if lower.contains("int") {
            DataType::Int
        } else if lower.contains("date") || lower.contains("time") {
            DataType::Date
        } else if lower.contains("numeric")
            || lower.contains("decimal")
            || lower.contains("double")
            || lower.contains("real")
            || lower.contains("float")
        {
            DataType::Decimal
        } else {
            DataType::Text
        }
    }
}

impl fmt::Display for DataType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            DataType::Int => "int",
            DataType::Bigint => "bigint",
            DataType::Date => "date",
            DataType::Decimal => "decimal",
            DataType::Text => "text",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ColumnDef {
    pub name: String,
    #[serde(rename = "type")]
    pub data_type: DataType,
    pub ndv: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TableDef {
    pub name: String,
    pub rows: u64,
    pub columns: Vec<ColumnDef>,
}

impl TableDef {
    pub fn column(&self, name: &str) -> Option<&ColumnDef> {
        self.columns.iter().find(|c| c.name == name)
    }

    /// Estimated row width: sum of column widths plus the row overhead.
    pub fn row_width(&self) -> u64 {
        self.columns.iter().map(|c| c.data_type.width()).sum::<u64>() + ROW_OVERHEAD_BYTES
    }

    pub fn size_mb(&self) -> f64 {
        (self.rows as f64 * self.row_width() as f64) / BYTES_PER_MB
    }
}

/// A `(table, column)` reference. Serialized as `"table.column"` so it can key JSON maps.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(into = "String", try_from = "String")]
pub struct ColumnRef {
    pub table: String,
    pub column: String,
}

impl ColumnRef {
    pub fn new(table: impl Into<String>, column: impl Into<String>) -> Self {
        ColumnRef {
            table: table.into(),
            column: column.into(),
        }
    }
}

impl fmt::Display for ColumnRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}.{}", self.table, self.column)
    }
}

impl From<ColumnRef> for String {
    fn from(c: ColumnRef) -> String {
        c.to_string()
    }
}

impl TryFrom<String> for ColumnRef {
    type Error = String;

    fn try_from(s: String) -> Result<Self, Self::Error> {
        match s.split_once('.') {
            Some((t, c)) if !t.is_empty() && !c.is_empty() => Ok(ColumnRef::new(t, c)),
            _ => Err(format!("expected `table.column`, got `{s}`")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Catalog {
    pub tables: Vec<TableDef>,
    #[serde(skip)]
    by_name: BTreeMap<String, usize>,
}

impl Catalog {
    pub fn new(tables: Vec<TableDef>) -> Result<Self, CatalogError> {
        let mut by_name = BTreeMap::new();
        for (i, t) in tables.iter().enumerate() {
            if by_name.insert(t.name.clone(), i).is_some() {
                return Err(CatalogError::Invalid(format!("duplicate table `{}`", t.name)));
            }
            let mut seen = std::collections::BTreeSet::new();
            for c in &t.columns {
                if !seen.insert(&c.name) {
                    return Err(CatalogError::Invalid(format!(
                        "duplicate column `{}.{}`",
                        t.name, c.name
                    )));
                }
                if c.ndv > t.rows {
                    return Err(CatalogError::Invalid(format!(
                        "ndv of `{}.{}` exceeds table rows ({} > {})",
                        t.name, c.name, c.ndv, t.rows
                    )));
                }
            }
        }
        Ok(Catalog { tables, by_name })
    }

    pub fn from_json(text: &str) -> Result<Self, CatalogError> {
        #[derive(Deserialize)]
        struct Raw {
            tables: Vec<TableDef>,
        }
        let raw: Raw = serde_json::from_str(text)?;
        Catalog::new(raw.tables)
    }

    pub fn load(path: &Path) -> Result<Self, CatalogError> {
        let text = std::fs::read_to_string(path).map_err(|e| CatalogError::Io {
            path: path.display().to_string(),
            source: e,
        })?;
        Catalog::from_json(&text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("catalog serializes")
    }

    pub fn table(&self, name: &str) -> Option<&TableDef> {
        self.by_name.get(name).map(|&i| &self.tables[i])
    }

    pub fn column(&self, table: &str, column: &str) -> Option<&ColumnDef> {
        self.table(table).and_then(|t| t.column(column))
    }

    pub fn has_column(&self, table: &str, column: &str) -> bool {
        self.column(table, column).is_some()
    }

    pub fn rows(&self, table: &str) -> u64 {
        self.table(table).map_or(0, |t| t.rows)
    }

    pub fn ndv(&self, table: &str, column: &str) -> u64 {
        self.column(table, column).map_or(0, |c| c.ndv)
    }

    /// Tables that own a column with this name, in catalog order.
    pub fn tables_with_column(&self, column: &str) -> Vec<&str> {
        self.tables
            .iter()
            .filter(|t| t.column(column).is_some())
            .map(|t| t.name.as_str())
            .collect()
    }

    /// Estimated database size: Σ rows × row width, in MB.
    pub fn database_size_mb(&self) -> f64 {
        self.tables.iter().map(TableDef::size_mb).sum()
    }

    /// Estimated size of a B-tree index over `columns` of `table`, in MB.
    /// Empty tables are charged one entry so that sizes stay positive.
    pub fn index_size_mb(&self, table: &str, columns: &[String]) -> Option<f64> {
        let t = self.table(table)?;
        let mut width = ROW_OVERHEAD_BYTES;
        for c in columns {
            width += t.column(c)?.data_type.width();
        }
        Some(t.rows.max(1) as f64 * width as f64 / BYTES_PER_MB)
    }
}

impl<'de> Deserialize<'de> for Catalog {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        struct Raw {
            tables: Vec<TableDef>,
        }
        let raw = Raw::deserialize(d)?;
        Catalog::new(raw.tables).map_err(serde::de::Error::custom)
    }
}

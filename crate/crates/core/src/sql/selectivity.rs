//! Predicate selectivity estimation.
//!
//! The simulated estimator applies a fixed column-value model:
//! equality `1/ndv`, ranges `1/3`, prefix LIKE `1/10`, `IN` lists
//! `min(1, k/ndv)`, conjunctions multiply, anything unrecognised `1/2`.

use sqlparser::ast::{BinaryOperator, Expr, SetExpr, Statement, UnaryOperator, Value};
use sqlparser::dialect::PostgreSqlDialect;
use sqlparser::parser::Parser;

use crate::catalog::Catalog;
use crate::error::SelectivityError;
use crate::sql::WherePredicate;

/// Selectivity assigned to predicates the model cannot interpret.
pub const UNKNOWN_SELECTIVITY: f64 = 0.5;
pub const RANGE_SELECTIVITY: f64 = 1.0 / 3.0;
pub const PREFIX_LIKE_SELECTIVITY: f64 = 0.1;

pub trait SelectivityEstimator: Send + Sync {
    /// Fraction of `table` rows satisfying `predicate`, clamped to `[0, 1]`.
    fn estimate(&self, table: &str, alias: Option<&str>, predicate: &str) -> Result<f64, SelectivityError>;

    fn estimate_predicate(&self, p: &WherePredicate) -> Result<f64, SelectivityError> {
        if !p.standalone {
            // Cannot be probed against a single table.
            return Ok(UNKNOWN_SELECTIVITY);
        }
        self.estimate(&p.table, p.alias.as_deref(), &p.text)
    }
}

/// Column-value model over catalog statistics.
#[derive(Debug, Clone)]
pub struct SimEstimator {
    catalog: Catalog,
}

impl SimEstimator {
    pub fn new(catalog: Catalog) -> Self {
        SimEstimator { catalog }
    }
}

impl SelectivityEstimator for SimEstimator {
    fn estimate(&self, table: &str, alias: Option<&str>, predicate: &str) -> Result<f64, SelectivityError> {
        let rows = self.catalog.rows(table);
        if self.catalog.table(table).is_none() || rows == 0 {
            return Err(SelectivityError::PredicateError {
                predicate: predicate.to_string(),
                message: format!("table `{table}` is missing or empty"),
            });
        }
        let expr = parse_predicate(table, alias, predicate)?;
        let model = Model {
            catalog: &self.catalog,
            table,
            predicate,
        };
        Ok(model.selectivity(&expr)?.clamp(0.0, 1.0))
    }
}

fn parse_predicate(table: &str, alias: Option<&str>, predicate: &str) -> Result<Expr, SelectivityError> {
    let sql = match alias {
        Some(a) => format!("SELECT * FROM {table} AS {a} WHERE {predicate}"),
        None => format!("SELECT * FROM {table} WHERE {predicate}"),
    };
    let err = |m: String| SelectivityError::PredicateError {
        predicate: predicate.to_string(),
        message: m,
    };
    let stmts = Parser::parse_sql(&PostgreSqlDialect {}, &sql).map_err(|e| err(e.to_string()))?;
    if let [Statement::Query(q)] = stmts.as_slice() {
        if let SetExpr::Select(sel) = q.body.as_ref() {
            if let Some(e) = &sel.selection {
                return Ok(e.clone());
            }
        }
    }
    Err(err("not a single predicate".into()))
}

struct Model<'a> {
    catalog: &'a Catalog,
    table: &'a str,
    predicate: &'a str,
}

enum Operand {
    Column(u64),
    Literal(Literal),
    Other,
}

#[derive(PartialEq, PartialOrd)]
enum Literal {
    Number(f64),
    Text(String),
    Bool(bool),
    Null,
}

impl<'a> Model<'a> {
    fn operand(&self, e: &Expr) -> Result<Operand, SelectivityError> {
        match e {
            Expr::Nested(inner) => self.operand(inner),
            Expr::Identifier(id) => self.column(&id.value),
            Expr::CompoundIdentifier(ids) => self.column(&ids.last().unwrap().value),
            Expr::Value(v) => Ok(Operand::Literal(match &v.value {
                Value::Number(n, _) => n.parse().map(Literal::Number).unwrap_or(Literal::Null),
                Value::SingleQuotedString(s) => Literal::Text(s.clone()),
                Value::Boolean(b) => Literal::Bool(*b),
                Value::Null => Literal::Null,
                _ => return Ok(Operand::Other),
            })),
            Expr::UnaryOp {
                op: UnaryOperator::Minus,
                expr,
            } => match self.operand(expr)? {
                Operand::Literal(Literal::Number(n)) => Ok(Operand::Literal(Literal::Number(-n))),
                _ => Ok(Operand::Other),
            },
            _ => Ok(Operand::Other),
        }
    }

    fn column(&self, name: &str) -> Result<Operand, SelectivityError> {
        let name = name.to_ascii_lowercase();
        match self.catalog.column(self.table, &name) {
            Some(c) => Ok(Operand::Column(c.ndv.max(1))),
            None if name == "true" => Ok(Operand::Literal(Literal::Bool(true))),
            None if name == "false" => Ok(Operand::Literal(Literal::Bool(false))),
            None => Err(SelectivityError::PredicateError {
                predicate: self.predicate.to_string(),
                message: format!("column `{name}` not in `{}`", self.table),
            }),
        }
    }

    fn selectivity(&self, e: &Expr) -> Result<f64, SelectivityError> {
        Ok(match e {
            Expr::Nested(inner) => self.selectivity(inner)?,
            Expr::BinaryOp {
                left,
                op: BinaryOperator::And,
                right,
            } => self.selectivity(left)? * self.selectivity(right)?,
            Expr::BinaryOp {
                left,
                op: BinaryOperator::Or,
                right,
            } => {
                let (a, b) = (self.selectivity(left)?, self.selectivity(right)?);
                a + b - a * b
            }
            Expr::UnaryOp {
                op: UnaryOperator::Not,
                expr,
            } => 1.0 - self.selectivity(expr)?,
            Expr::Value(v) => match &v.value {
                Value::Boolean(true) => 1.0,
                Value::Boolean(false) | Value::Null => 0.0,
                _ => UNKNOWN_SELECTIVITY,
            },
            Expr::Identifier(id) if id.value.eq_ignore_ascii_case("true") => 1.0,
            Expr::Identifier(id) if id.value.eq_ignore_ascii_case("false") => 0.0,
            Expr::BinaryOp { left, op, right } => self.comparison(left, op, right)?,
            Expr::Between {
                expr,
                negated,
                low,
                high,
            } => {
                let s = match (self.operand(expr)?, self.operand(low)?, self.operand(high)?) {
                    (Operand::Literal(v), Operand::Literal(lo), Operand::Literal(hi)) => bool_sel(lo <= v && v <= hi),
                    (Operand::Column(_), _, _) => RANGE_SELECTIVITY,
                    _ => UNKNOWN_SELECTIVITY,
                };
                negate(s, *negated)
            }
            Expr::InList { expr, list, negated } => {
                let s = match self.operand(expr)? {
                    Operand::Column(ndv) => (list.len() as f64 / ndv as f64).min(1.0),
                    _ => UNKNOWN_SELECTIVITY,
                };
                negate(s, *negated)
            }
            Expr::Like {
                expr, pattern, negated, ..
            }
            | Expr::ILike {
                expr, pattern, negated, ..
            } => {
                let s = match (self.operand(expr)?, self.operand(pattern)?) {
                    (Operand::Column(_), Operand::Literal(Literal::Text(p)))
                        if !p.starts_with('%') && !p.starts_with('_') =>
                    {
                        PREFIX_LIKE_SELECTIVITY
                    }
                    _ => UNKNOWN_SELECTIVITY,
                };
                negate(s, *negated)
            }
            _ => UNKNOWN_SELECTIVITY,
        })
    }

    fn comparison(&self, left: &Expr, op: &BinaryOperator, right: &Expr) -> Result<f64, SelectivityError> {
        use BinaryOperator::*;
        let (l, r) = (self.operand(left)?, self.operand(right)?);
        Ok(match (l, r) {
            (Operand::Literal(a), Operand::Literal(b)) => match op {
                Eq => bool_sel(a == b),
                NotEq => bool_sel(a != b),
                Lt => bool_sel(a < b),
                LtEq => bool_sel(a <= b),
                Gt => bool_sel(a > b),
                GtEq => bool_sel(a >= b),
                _ => UNKNOWN_SELECTIVITY,
            },
            (Operand::Column(_), Operand::Column(_)) => UNKNOWN_SELECTIVITY,
            (Operand::Column(ndv), _) | (_, Operand::Column(ndv)) => match op {
                Eq => 1.0 / ndv as f64,
                NotEq => 1.0 - 1.0 / ndv as f64,
                Lt | LtEq | Gt | GtEq => RANGE_SELECTIVITY,
                _ => UNKNOWN_SELECTIVITY,
            },
            _ => UNKNOWN_SELECTIVITY,
        })
    }
}

fn bool_sel(b: bool) -> f64 {
    if b {
        1.0
    } else {
        0.0
    }
}

fn negate(s: f64, negated: bool) -> f64 {
    if negated {
        1.0 - s
    } else {
        s
    }
}

//! Clause-classifying SQL parser.
//!
//! Walks a SELECT statement (with joins, derived tables, CTEs and nested
//! subqueries) and records which base-table columns appear under WHERE, JOIN,
//! GROUP BY and ORDER BY. All nested query blocks contribute to one flat
//! [`QueryShape`].

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::ops::ControlFlow;

use serde::{Deserialize, Serialize};
use sqlparser::ast::{
    BinaryOperator, Expr, GroupByExpr, Ident, JoinConstraint, JoinOperator, ObjectName, ObjectNamePart, OrderByKind,
    Query, Select, SelectItem, SelectItemQualifiedWildcardKind, SetExpr, Statement, TableFactor, TableWithJoins, Value,
    Visit, Visitor,
};
use sqlparser::dialect::PostgreSqlDialect;
use sqlparser::parser::Parser;

use crate::catalog::{Catalog, ColumnRef};
use crate::error::SqlError;

/// One WHERE (or non-equi ON) conjunct, attributed to a single base table.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct WherePredicate {
    pub table: String,
    /// Columns of `table` referenced by the predicate, in first-appearance order.
    pub columns: Vec<String>,
    pub text: String,
    /// Range-variable name to use when probing the predicate on its own.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alias: Option<String>,
    /// Every column of `table` appears as a bare operand (not inside an expression).
    pub indexable: bool,
    /// The predicate references only this one range variable, so it can be probed alone.
    pub standalone: bool,
}

impl WherePredicate {
    /// Single-column predicate usable by a B-tree index on that column.
    pub fn index_column(&self) -> Option<&str> {
        (self.indexable && self.columns.len() == 1).then(|| self.columns[0].as_str())
    }

    /// Probe query for selectivity estimation.
    pub fn probe_sql(&self) -> String {
        match &self.alias {
            Some(a) => format!("SELECT * FROM {} AS {} WHERE {}", self.table, a, self.text),
            None => format!("SELECT * FROM {} WHERE {}", self.table, self.text),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct QueryShape {
    pub tables: BTreeSet<String>,
    pub where_predicates: Vec<WherePredicate>,
    /// One entry per column occurrence in an equi-join condition.
    pub join_columns: Vec<ColumnRef>,
    pub group_by: Vec<ColumnRef>,
    pub order_by: Vec<ColumnRef>,
    pub all_columns: BTreeSet<ColumnRef>,
}

impl QueryShape {
    pub fn where_columns(&self) -> impl Iterator<Item = ColumnRef> + '_ {
        self.where_predicates
            .iter()
            .flat_map(|p| p.columns.iter().map(|c| ColumnRef::new(&p.table, c)))
    }
}

/// Parses one SELECT statement against the catalog.
pub fn parse_query(sql: &str, catalog: &Catalog) -> Result<QueryShape, SqlError> {
    let stmts = Parser::parse_sql(&PostgreSqlDialect {}, sql).map_err(|e| SqlError::Parse(e.to_string()))?;
    let query = match stmts.as_slice() {
        [Statement::Query(q)] => q,
        [] => return Err(SqlError::Parse("no statement".into())),
        [other] => {
            let kind = other.to_string();
            let head: String = kind.split_whitespace().take(2).collect::<Vec<_>>().join(" ");
            return Err(SqlError::Unsupported(head));
        }
        _ => return Err(SqlError::Unsupported("multiple statements".into())),
    };
    let mut ex = Extractor {
        catalog,
        shape: QueryShape::default(),
        frames: Vec::new(),
        ctes: Vec::new(),
    };
    ex.query(query)?;
    Ok(ex.shape)
}

type OutputColumns = Vec<(String, Option<ColumnRef>)>;
/// Per-table predicate atom: columns, whether every operand is bare, range vars.
type TableAtom = (Vec<String>, bool, BTreeSet<(usize, usize)>);

#[derive(Debug, Clone)]
enum Source {
    Base(String),
    Derived(OutputColumns),
}

#[derive(Debug, Clone)]
struct RangeVar {
    name: String,
    source: Source,
}

impl RangeVar {
    /// `None` if the column is absent; `Some(None)` for a derived column that is not a base column.
    fn lookup(&self, column: &str, catalog: &Catalog) -> Option<Option<ColumnRef>> {
        match &self.source {
            Source::Base(t) => catalog.has_column(t, column).then(|| Some(ColumnRef::new(t, column))),
            Source::Derived(cols) => cols.iter().find(|(n, _)| n == column).map(|(_, r)| r.clone()),
        }
    }

    fn all_columns(&self, catalog: &Catalog) -> OutputColumns {
        match &self.source {
            Source::Base(t) => catalog
                .table(t)
                .map(|td| {
                    td.columns
                        .iter()
                        .map(|c| (c.name.clone(), Some(ColumnRef::new(t, &c.name))))
                        .collect()
                })
                .unwrap_or_default(),
            Source::Derived(cols) => cols.clone(),
        }
    }
}

#[derive(Debug, Default)]
struct Frame {
    vars: Vec<RangeVar>,
    /// Output aliases of the select list, usable from GROUP BY / ORDER BY / HAVING.
    aliases: BTreeMap<String, Option<ColumnRef>>,
    projection: OutputColumns,
    /// Indices into `shape.where_predicates` created by this block, for merging.
    block_predicates: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq)]
struct Resolved {
    /// (frame, var) identifying the range variable.
    var: Option<(usize, usize)>,
    column: Option<ColumnRef>,
}

struct Extractor<'a> {
    catalog: &'a Catalog,
    shape: QueryShape,
    frames: Vec<Frame>,
    ctes: Vec<BTreeMap<String, OutputColumns>>,
}

const NILADIC: &[&str] = &[
    "current_date",
    "current_time",
    "current_timestamp",
    "localtime",
    "localtimestamp",
    "current_user",
    "true",
    "false",
];

fn ident_value(id: &Ident) -> String {
    if id.quote_style.is_some() {
        id.value.clone()
    } else {
        id.value.to_ascii_lowercase()
    }
}

fn object_name_parts(name: &ObjectName) -> Vec<String> {
    name.0
        .iter()
        .filter_map(|p| match p {
            ObjectNamePart::Identifier(id) => Some(ident_value(id)),
            _ => None,
        })
        .collect()
}

fn column_parts(expr: &Expr) -> Option<Vec<String>> {
    match expr {
        Expr::Identifier(id) => Some(vec![ident_value(id)]),
        Expr::CompoundIdentifier(ids) => Some(ids.iter().map(ident_value).collect()),
        Expr::Nested(inner) => column_parts(inner),
        _ => None,
    }
}

fn split_conjuncts(expr: &Expr, out: &mut Vec<Expr>) {
    match expr {
        Expr::BinaryOp {
            left,
            op: BinaryOperator::And,
            right,
        } => {
            split_conjuncts(left, out);
            split_conjuncts(right, out);
        }
        Expr::Nested(inner)
            if matches!(
                **inner,
                Expr::BinaryOp {
                    op: BinaryOperator::And,
                    ..
                }
            ) =>
        {
            split_conjuncts(inner, out)
        }
        other => out.push(other.clone()),
    }
}

fn is_comparison(op: &BinaryOperator) -> bool {
    matches!(
        op,
        BinaryOperator::Eq
            | BinaryOperator::NotEq
            | BinaryOperator::Lt
            | BinaryOperator::LtEq
            | BinaryOperator::Gt
            | BinaryOperator::GtEq
    )
}

fn mark_bare(e: &Expr, out: &mut HashSet<usize>) {
    let mut e = e;
    while let Expr::Nested(inner) = e {
        e = inner;
    }
    if column_parts(e).is_some() {
        out.insert(e as *const Expr as usize);
    }
}

/// Addresses of column expressions that appear as direct predicate operands.
fn bare_operands(expr: &Expr, out: &mut HashSet<usize>) {
    match expr {
        Expr::BinaryOp { left, op, right } => match op {
            BinaryOperator::And | BinaryOperator::Or => {
                bare_operands(left, out);
                bare_operands(right, out);
            }
            op if is_comparison(op) => {
                mark_bare(left, out);
                mark_bare(right, out);
            }
            _ => {}
        },
        Expr::Nested(inner) => bare_operands(inner, out),
        Expr::UnaryOp { expr, .. } => bare_operands(expr, out),
        Expr::Between { expr, .. }
        | Expr::InList { expr, .. }
        | Expr::InSubquery { expr, .. }
        | Expr::Like { expr, .. }
        | Expr::ILike { expr, .. } => mark_bare(expr, out),
        Expr::IsNull(e) | Expr::IsNotNull(e) | Expr::IsTrue(e) | Expr::IsFalse(e) => mark_bare(e, out),
        _ => {}
    }
}

/// Collects column references and subqueries at the current query depth.
#[derive(Default)]
struct RefCollector {
    depth: usize,
    columns: Vec<(Vec<String>, usize)>,
    subqueries: Vec<Query>,
}

impl Visitor for RefCollector {
    type Break = ();

    fn pre_visit_query(&mut self, query: &Query) -> ControlFlow<()> {
        if self.depth == 0 {
            self.subqueries.push(query.clone());
        }
        self.depth += 1;
        ControlFlow::Continue(())
    }

    fn post_visit_query(&mut self, _query: &Query) -> ControlFlow<()> {
        self.depth -= 1;
        ControlFlow::Continue(())
    }

    fn pre_visit_expr(&mut self, expr: &Expr) -> ControlFlow<()> {
        if self.depth == 0 {
            if let Some(parts) = column_parts(expr) {
                if !matches!(expr, Expr::Nested(_)) {
                    self.columns.push((parts, expr as *const Expr as usize));
                }
            }
        }
        ControlFlow::Continue(())
    }
}

fn collect_refs(expr: &Expr) -> RefCollector {
    let mut c = RefCollector::default();
    let _ = expr.visit(&mut c);
    c
}

impl<'a> Extractor<'a> {
    fn query(&mut self, q: &Query) -> Result<OutputColumns, SqlError> {
        let mut pushed_ctes = false;
        if let Some(with) = &q.with {
            self.ctes.push(BTreeMap::new());
            pushed_ctes = true;
            for cte in &with.cte_tables {
                let mut out = self.query(&cte.query)?;
                rename_outputs(
                    &mut out,
                    &cte.alias
                        .columns
                        .iter()
                        .map(|c| ident_value(&c.name))
                        .collect::<Vec<_>>(),
                );
                let name = ident_value(&cte.alias.name);
                self.ctes.last_mut().unwrap().insert(name, out);
            }
        }
        let order_by: Vec<&Expr> = match &q.order_by {
            Some(ob) => match &ob.kind {
                OrderByKind::Expressions(es) => es.iter().map(|e| &e.expr).collect(),
                OrderByKind::All(_) => Vec::new(),
            },
            None => Vec::new(),
        };
        let out = self.set_expr(&q.body, &order_by);
        if pushed_ctes {
            self.ctes.pop();
        }
        out
    }

    fn set_expr(&mut self, body: &SetExpr, order_by: &[&Expr]) -> Result<OutputColumns, SqlError> {
        match body {
            SetExpr::Select(sel) => self.select(sel, order_by),
            SetExpr::Query(q) => {
                let out = self.query(q)?;
                self.order_by_outputs(&out, order_by)?;
                Ok(out)
            }
            SetExpr::SetOperation { left, right, .. } => {
                let out = self.set_expr(left, &[])?;
                self.set_expr(right, &[])?;
                self.order_by_outputs(&out, order_by)?;
                Ok(out)
            }
            SetExpr::Values(_) => Ok(Vec::new()),
            other => Err(SqlError::Unsupported(
                other.to_string().split_whitespace().next().unwrap_or("").to_string(),
            )),
        }
    }

    /// ORDER BY over a set operation refers to output names only.
    fn order_by_outputs(&mut self, out: &OutputColumns, order_by: &[&Expr]) -> Result<(), SqlError> {
        let mut seen = BTreeSet::new();
        for e in order_by {
            if let Some(parts) = column_parts(e) {
                let name = parts.last().unwrap();
                if let Some((_, Some(c))) = out.iter().find(|(n, _)| n == name) {
                    if seen.insert(c.clone()) {
                        self.shape.order_by.push(c.clone());
                    }
                }
            }
        }
        Ok(())
    }

    fn select(&mut self, sel: &Select, order_by: &[&Expr]) -> Result<OutputColumns, SqlError> {
        self.frames.push(Frame::default());
        let result = self.select_inner(sel, order_by);
        let frame = self.frames.pop().unwrap();
        result.map(|_| frame.projection)
    }

    fn select_inner(&mut self, sel: &Select, order_by: &[&Expr]) -> Result<(), SqlError> {
        for twj in &sel.from {
            self.table_with_joins(twj)?;
        }
        if let Some(w) = &sel.selection {
            self.filter(w)?;
        }
        self.projection(&sel.projection)?;
        if let GroupByExpr::Expressions(exprs, _) = &sel.group_by {
            let cols = self.sort_columns(exprs.iter())?;
            self.shape.group_by.extend(cols);
        }
        if let Some(h) = &sel.having {
            self.expression(h, true)?;
        }
        let cols = self.sort_columns(order_by.iter().copied())?;
        self.shape.order_by.extend(cols);
        Ok(())
    }

    fn table_with_joins(&mut self, twj: &TableWithJoins) -> Result<(), SqlError> {
        self.table_factor(&twj.relation)?;
        for join in &twj.joins {
            let left_vars = self.frames.last().unwrap().vars.len();
            self.table_factor(&join.relation)?;
            let constraint = match &join.join_operator {
                JoinOperator::Join(c)
                | JoinOperator::Inner(c)
                | JoinOperator::Left(c)
                | JoinOperator::LeftOuter(c)
                | JoinOperator::Right(c)
                | JoinOperator::RightOuter(c)
                | JoinOperator::FullOuter(c)
                | JoinOperator::CrossJoin(c)
                | JoinOperator::Semi(c)
                | JoinOperator::LeftSemi(c)
                | JoinOperator::RightSemi(c)
                | JoinOperator::Anti(c)
                | JoinOperator::LeftAnti(c)
                | JoinOperator::RightAnti(c)
                | JoinOperator::StraightJoin(c) => Some(c),
                _ => None,
            };
            match constraint {
                Some(JoinConstraint::On(e)) => self.filter(e)?,
                Some(JoinConstraint::Using(names)) => {
                    for n in names {
                        let parts = object_name_parts(n);
                        let col = parts.last().cloned().unwrap_or_default();
                        self.using_column(&col, left_vars)?;
                    }
                }
                _ => {}
            }
        }
        Ok(())
    }

    fn using_column(&mut self, col: &str, left_vars: usize) -> Result<(), SqlError> {
        let frame = self.frames.last().unwrap();
        let right = frame.vars.last().and_then(|v| v.lookup(col, self.catalog)).flatten();
        let left = frame.vars[..left_vars]
            .iter()
            .rev()
            .find_map(|v| v.lookup(col, self.catalog))
            .flatten();
        match (left, right) {
            (Some(l), Some(r)) => {
                self.add_join(l);
                self.add_join(r);
                Ok(())
            }
            _ => Err(SqlError::UnknownColumn(col.to_string())),
        }
    }

    fn table_factor(&mut self, tf: &TableFactor) -> Result<(), SqlError> {
        match tf {
            TableFactor::Table { name, alias, .. } => {
                let parts = object_name_parts(name);
                let tname = parts.last().cloned().unwrap_or_default();
                let var_name = alias
                    .as_ref()
                    .map(|a| ident_value(&a.name))
                    .unwrap_or_else(|| tname.clone());
                let source = if let Some(cols) = self.cte(&tname) {
                    let mut cols = cols.clone();
                    if let Some(a) = alias {
                        rename_outputs(
                            &mut cols,
                            &a.columns.iter().map(|c| ident_value(&c.name)).collect::<Vec<_>>(),
                        );
                    }
                    Source::Derived(cols)
                } else if self.catalog.table(&tname).is_some() {
                    self.shape.tables.insert(tname.clone());
                    Source::Base(tname)
                } else {
                    return Err(SqlError::UnknownTable(tname));
                };
                self.frames
                    .last_mut()
                    .unwrap()
                    .vars
                    .push(RangeVar { name: var_name, source });
            }
            TableFactor::Derived { subquery, alias, .. } => {
                let mut cols = self.query(subquery)?;
                let name = match alias {
                    Some(a) => {
                        rename_outputs(
                            &mut cols,
                            &a.columns.iter().map(|c| ident_value(&c.name)).collect::<Vec<_>>(),
                        );
                        ident_value(&a.name)
                    }
                    None => String::new(),
                };
                self.frames.last_mut().unwrap().vars.push(RangeVar {
                    name,
                    source: Source::Derived(cols),
                });
            }
            TableFactor::NestedJoin { table_with_joins, .. } => self.table_with_joins(table_with_joins)?,
            other => {
                return Err(SqlError::Unsupported(format!("table factor `{other}`")));
            }
        }
        Ok(())
    }

    fn cte(&self, name: &str) -> Option<&OutputColumns> {
        self.ctes.iter().rev().find_map(|m| m.get(name))
    }

    fn resolve(&self, parts: &[String], allow_alias: bool) -> Result<Option<Resolved>, SqlError> {
        let column = parts.last().unwrap();
        if parts.len() >= 2 {
            let qualifier = &parts[parts.len() - 2];
            for (fi, frame) in self.frames.iter().enumerate().rev() {
                if let Some((vi, var)) = frame.vars.iter().enumerate().find(|(_, v)| &v.name == qualifier) {
                    return match var.lookup(column, self.catalog) {
                        Some(c) => Ok(Some(Resolved {
                            var: Some((fi, vi)),
                            column: c,
                        })),
                        None => Err(SqlError::UnknownColumn(format!("{qualifier}.{column}"))),
                    };
                }
            }
            return Err(SqlError::UnknownColumn(format!("{qualifier}.{column}")));
        }
        for (fi, frame) in self.frames.iter().enumerate().rev() {
            let hits: Vec<(usize, Option<ColumnRef>)> = frame
                .vars
                .iter()
                .enumerate()
                .filter_map(|(vi, v)| v.lookup(column, self.catalog).map(|c| (vi, c)))
                .collect();
            match hits.len() {
                0 => {}
                1 => {
                    let (vi, c) = hits.into_iter().next().unwrap();
                    return Ok(Some(Resolved {
                        var: Some((fi, vi)),
                        column: c,
                    }));
                }
                _ => {
                    let candidates = hits
                        .iter()
                        .map(|(vi, _)| frame.vars[*vi].name.clone())
                        .collect::<Vec<_>>()
                        .join(", ");
                    return Err(SqlError::AmbiguousColumn {
                        column: column.clone(),
                        candidates,
                    });
                }
            }
            if allow_alias && fi + 1 == self.frames.len() {
                if let Some(c) = frame.aliases.get(column) {
                    return Ok(Some(Resolved {
                        var: None,
                        column: c.clone(),
                    }));
                }
            }
        }
        if NILADIC.contains(&column.as_str()) {
            return Ok(None);
        }
        Err(SqlError::UnknownColumn(column.clone()))
    }

    fn add_join(&mut self, c: ColumnRef) {
        self.shape.all_columns.insert(c.clone());
        self.shape.join_columns.push(c);
    }

    /// WHERE / ON conditions: equi-joins across range variables become join
    /// columns, everything else becomes per-table predicates.
    fn filter(&mut self, expr: &Expr) -> Result<(), SqlError> {
        let mut conjuncts = Vec::new();
        split_conjuncts(expr, &mut conjuncts);
        for c in &conjuncts {
            if self.try_equi_join(c)? {
                continue;
            }
            self.predicate(c)?;
        }
        Ok(())
    }

    fn try_equi_join(&mut self, expr: &Expr) -> Result<bool, SqlError> {
        let Expr::BinaryOp {
            left,
            op: BinaryOperator::Eq,
            right,
        } = expr
        else {
            return Ok(false);
        };
        let (Some(lp), Some(rp)) = (column_parts(left), column_parts(right)) else {
            return Ok(false);
        };
        let (Some(l), Some(r)) = (self.resolve(&lp, false)?, self.resolve(&rp, false)?) else {
            return Ok(false);
        };
        if l.var == r.var {
            return Ok(false);
        }
        match (l.column, r.column) {
            (Some(lc), Some(rc)) => {
                self.add_join(lc);
                self.add_join(rc);
                Ok(true)
            }
            _ => Ok(false),
        }
    }

    fn predicate(&mut self, expr: &Expr) -> Result<(), SqlError> {
        let refs = collect_refs(expr);
        let mut bare = HashSet::new();
        bare_operands(expr, &mut bare);

        let mut by_table: BTreeMap<String, TableAtom> = BTreeMap::new();
        let mut table_order = Vec::new();
        let mut vars = BTreeSet::new();
        for (parts, addr) in &refs.columns {
            let Some(res) = self.resolve(parts, false)? else {
                continue;
            };
            if let Some(v) = res.var {
                vars.insert(v);
            }
            let Some(col) = res.column else { continue };
            self.shape.all_columns.insert(col.clone());
            let entry = by_table.entry(col.table.clone()).or_insert_with(|| {
                table_order.push(col.table.clone());
                (Vec::new(), true, BTreeSet::new())
            });
            if !entry.0.contains(&col.column) {
                entry.0.push(col.column.clone());
            }
            entry.1 &= bare.contains(addr);
            if let Some(v) = res.var {
                entry.2.insert(v);
            }
        }
        let text = expr.to_string();
        let standalone_expr = vars.len() <= 1;
        for table in table_order {
            let (columns, indexable, tvars) = by_table.remove(&table).unwrap();
            let alias = match tvars.iter().next() {
                Some(&(fi, vi)) if tvars.len() == 1 => {
                    let name = &self.frames[fi].vars[vi].name;
                    (name != &table).then(|| name.clone())
                }
                _ => None,
            };
            let pred = WherePredicate {
                table,
                columns,
                text: text.clone(),
                alias,
                indexable,
                standalone: standalone_expr && tvars.len() == 1,
            };
            self.push_predicate(pred);
        }
        for sub in &refs.subqueries {
            self.query(sub)?;
        }
        Ok(())
    }

    /// Conjuncts of one block on the same table and column set merge into one predicate.
    fn push_predicate(&mut self, pred: WherePredicate) {
        let frame = self.frames.last_mut().unwrap();
        for &i in &frame.block_predicates {
            let p = &mut self.shape.where_predicates[i];
            if p.table == pred.table
                && p.columns == pred.columns
                && p.alias == pred.alias
                && p.standalone == pred.standalone
            {
                p.text = format!("{} AND {}", p.text, pred.text);
                p.indexable &= pred.indexable;
                return;
            }
        }
        frame.block_predicates.push(self.shape.where_predicates.len());
        self.shape.where_predicates.push(pred);
    }

    /// Any expression outside filter/sort positions: columns count toward
    /// `all_columns` only; nested subqueries are walked.
    fn expression(&mut self, expr: &Expr, allow_alias: bool) -> Result<(), SqlError> {
        let refs = collect_refs(expr);
        for (parts, _) in &refs.columns {
            if let Some(Resolved { column: Some(c), .. }) = self.resolve(parts, allow_alias)? {
                self.shape.all_columns.insert(c);
            }
        }
        for sub in &refs.subqueries {
            self.query(sub)?;
        }
        Ok(())
    }

    fn projection(&mut self, items: &[SelectItem]) -> Result<(), SqlError> {
        let mut out: OutputColumns = Vec::new();
        for item in items {
            match item {
                SelectItem::UnnamedExpr(e) => {
                    self.expression(e, false)?;
                    match column_parts(e) {
                        Some(parts) => {
                            let c = self.resolve(&parts, false)?.and_then(|r| r.column);
                            out.push((parts.last().unwrap().clone(), c));
                        }
                        None => out.push((e.to_string(), None)),
                    }
                }
                SelectItem::ExprWithAlias { expr, alias } => {
                    self.expression(expr, false)?;
                    let c = match column_parts(expr) {
                        Some(parts) => self.resolve(&parts, false)?.and_then(|r| r.column),
                        None => None,
                    };
                    out.push((ident_value(alias), c));
                }
                SelectItem::Wildcard(_) => {
                    let frame = self.frames.last().unwrap();
                    for v in &frame.vars {
                        out.extend(v.all_columns(self.catalog));
                    }
                }
                SelectItem::QualifiedWildcard(SelectItemQualifiedWildcardKind::ObjectName(name), _) => {
                    let q = object_name_parts(name).pop().unwrap_or_default();
                    let frame = self.frames.last().unwrap();
                    if let Some(v) = frame.vars.iter().find(|v| v.name == q) {
                        out.extend(v.all_columns(self.catalog));
                    }
                }
                _ => {}
            }
        }
        let frame = self.frames.last_mut().unwrap();
        for (name, c) in &out {
            frame.aliases.entry(name.clone()).or_insert_with(|| c.clone());
        }
        frame.projection = out;
        Ok(())
    }

    /// GROUP BY / ORDER BY items: plain columns, select aliases and ordinals are
    /// recorded; expressions only feed `all_columns`.
    fn sort_columns<'e>(&mut self, exprs: impl Iterator<Item = &'e Expr>) -> Result<Vec<ColumnRef>, SqlError> {
        let mut out = Vec::new();
        for e in exprs {
            let col = if let Some(parts) = column_parts(e) {
                self.resolve(&parts, true)?.and_then(|r| r.column)
            } else if let Expr::Value(v) = e {
                match &v.value {
                    Value::Number(n, _) => n
                        .parse::<usize>()
                        .ok()
                        .and_then(|i| i.checked_sub(1))
                        .and_then(|i| self.frames.last().unwrap().projection.get(i).cloned())
                        .and_then(|(_, c)| c),
                    _ => None,
                }
            } else {
                self.expression(e, true)?;
                None
            };
            if let Some(c) = col {
                self.shape.all_columns.insert(c.clone());
                if !out.contains(&c) {
                    out.push(c);
                }
            }
        }
        Ok(out)
    }
}

fn rename_outputs(cols: &mut OutputColumns, names: &[String]) {
    for (slot, name) in cols.iter_mut().zip(names) {
        slot.0 = name.clone();
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cat() -> Catalog {
        Catalog::from_json(
            r#"{"tables":[
            {"name":"t","rows":1000,"columns":[{"name":"a","type":"int","ndv":10},{"name":"b","type":"int","ndv":100},{"name":"x","type":"int","ndv":5}]},
            {"name":"u","rows":500,"columns":[{"name":"c","type":"int","ndv":50},{"name":"d","type":"int","ndv":50},{"name":"x","type":"int","ndv":5}]}]}"#,
        )
        .unwrap()
    }

    fn cr(t: &str, c: &str) -> ColumnRef {
        ColumnRef::new(t, c)
    }

    #[test]
    fn single_where_predicate() {
        let s = parse_query("SELECT * FROM t WHERE t.a = 5", &cat()).unwrap();
        assert_eq!(s.where_predicates.len(), 1);
        let p = &s.where_predicates[0];
        assert_eq!(
            (p.table.as_str(), p.columns.as_slice(), p.text.as_str()),
            ("t", &["a".to_string()][..], "t.a = 5")
        );
        assert!(p.indexable && p.standalone);
        assert!(s.join_columns.is_empty() && s.group_by.is_empty() && s.order_by.is_empty());
    }

    #[test]
    fn in_subquery_contributes_to_same_shape() {
        let s = parse_query("SELECT a FROM t WHERE b IN (SELECT c FROM u WHERE d > 1)", &cat()).unwrap();
        let preds: Vec<_> = s
            .where_predicates
            .iter()
            .map(|p| (p.table.as_str(), p.columns[0].as_str()))
            .collect();
        assert_eq!(preds, vec![("t", "b"), ("u", "d")]);
        assert_eq!(s.where_predicates[1].text, "d > 1");
        let all: BTreeSet<_> = [cr("t", "a"), cr("t", "b"), cr("u", "c"), cr("u", "d")].into();
        assert_eq!(s.all_columns, all);
    }

    #[test]
    fn resolution_errors() {
        assert!(matches!(
            parse_query("SELECT zz FROM t", &cat()),
            Err(SqlError::UnknownColumn(_))
        ));
        assert!(matches!(
            parse_query("SELECT a FROM t, u WHERE x = 1", &cat()),
            Err(SqlError::AmbiguousColumn { .. })
        ));
        assert!(matches!(
            parse_query("SELECT a FROM nope", &cat()),
            Err(SqlError::UnknownTable(_))
        ));
        assert!(matches!(parse_query("SELEC a FROM t", &cat()), Err(SqlError::Parse(_))));
        assert!(matches!(
            parse_query("DELETE FROM t", &cat()),
            Err(SqlError::Unsupported(_))
        ));
        assert!(matches!(
            parse_query("CREATE INDEX ON t (a)", &cat()),
            Err(SqlError::Unsupported(_))
        ));
    }

    #[test]
    fn equi_join_in_where_is_a_join() {
        let s = parse_query("SELECT t.a FROM t, u WHERE t.x = u.x AND u.c < 3 ORDER BY 1", &cat()).unwrap();
        assert_eq!(s.join_columns, vec![cr("t", "x"), cr("u", "x")]);
        assert_eq!(s.where_predicates.len(), 1);
        assert_eq!(s.order_by, vec![cr("t", "a")]);
    }

    #[test]
    fn expression_columns_are_not_indexable() {
        let s = parse_query("SELECT a FROM t WHERE abs(b) = 3 AND a + 1 > 2 AND a < 9", &cat()).unwrap();
        let flags: Vec<_> = s
            .where_predicates
            .iter()
            .map(|p| (p.columns[0].as_str(), p.indexable))
            .collect();
        // `a + 1 > 2` and `a < 9` share a column set and merge.
        assert_eq!(flags, vec![("b", false), ("a", false)]);
    }

    #[test]
    fn same_column_conjuncts_merge_within_a_block() {
        let s = parse_query("SELECT a FROM t WHERE a >= 1 AND a < 5 AND b = 2", &cat()).unwrap();
        assert_eq!(s.where_predicates.len(), 2);
        assert_eq!(s.where_predicates[0].text, "a >= 1 AND a < 5");
        assert!(s.where_predicates[0].indexable);
    }

    #[test]
    fn multi_table_non_equi_predicate_attributed_to_each_table() {
        let s = parse_query(
            "SELECT t.a FROM t JOIN u ON t.x = u.x WHERE t.a < u.c OR u.d = 1",
            &cat(),
        )
        .unwrap();
        let tables: Vec<_> = s.where_predicates.iter().map(|p| p.table.as_str()).collect();
        assert_eq!(tables, vec!["t", "u"]);
        assert!(s.where_predicates.iter().all(|p| !p.standalone));
    }

    #[test]
    fn cte_and_derived_columns_map_to_base_columns() {
        let s = parse_query(
            "WITH w (k, n) AS (SELECT a, count(*) FROM t WHERE b > 3 GROUP BY a) \
             SELECT k FROM w JOIN u ON w.k = u.c GROUP BY k ORDER BY n",
            &cat(),
        )
        .unwrap();
        assert_eq!(s.join_columns, vec![cr("t", "a"), cr("u", "c")]);
        assert_eq!(s.group_by, vec![cr("t", "a"), cr("t", "a")]);
        assert!(s.order_by.is_empty());
        assert_eq!(s.where_predicates.len(), 1);
    }

    #[test]
    fn aliases_and_self_joins() {
        let s = parse_query(
            "SELECT t1.a FROM t t1, t t2 WHERE t1.a = t2.a AND t1.b > 2 AND t2.b < 9",
            &cat(),
        )
        .unwrap();
        assert_eq!(s.join_columns, vec![cr("t", "a"), cr("t", "a")]);
        assert_eq!(s.where_predicates.len(), 2);
        assert_eq!(s.where_predicates[0].alias.as_deref(), Some("t1"));
        assert_eq!(
            s.where_predicates[0].probe_sql(),
            "SELECT * FROM t AS t1 WHERE t1.b > 2"
        );
    }
}

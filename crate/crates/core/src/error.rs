use thiserror::Error;

#[derive(Debug, Error)]
pub enum CatalogError {
    #[error("cannot read {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("malformed catalog JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error("invalid catalog: {0}")]
    Invalid(String),
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SqlError {
    #[error("parse error: {0}")]
    Parse(String),
    #[error("unsupported statement: {0}")]
    Unsupported(String),
    #[error("unknown column `{0}`")]
    UnknownColumn(String),
    #[error("unknown table `{0}`")]
    UnknownTable(String),
    #[error("ambiguous column `{column}` (candidates: {candidates})")]
    AmbiguousColumn { column: String, candidates: String },
    #[error("workload is empty")]
    EmptyWorkload,
    #[error("cannot read workload {path}: {message}")]
    Io { path: String, message: String },
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SelectivityError {
    #[error("selectivity estimator unavailable: {0}")]
    EstimatorUnavailable(String),
    #[error("predicate probe failed for `{predicate}`: {message}")]
    PredicateError { predicate: String, message: String },
}

#[derive(Debug, Error)]
pub enum FeatureError {
    #[error("query {index}: {source}")]
    Sql { index: usize, source: SqlError },
    #[error("query {index}: {source}")]
    Selectivity { index: usize, source: SelectivityError },
}

#[derive(Debug, Error)]
pub enum WhatIfError {
    #[error("index `{0}` already exists in session")]
    DuplicateIndex(String),
    #[error("index `{0}` not found in session")]
    NotFound(String),
    #[error("unknown column `{0}`")]
    UnknownColumn(String),
    #[error("invalid index definition: {0}")]
    InvalidIndex(String),
    #[error("backend error: {0}")]
    Backend(String),
    #[error(transparent)]
    Sql(#[from] SqlError),
    #[error("baseline cost is zero")]
    ZeroBaseline,
    #[error(transparent)]
    Registry(#[from] RegistryError),
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LlmError {
    #[error("LLM transport error: {0}")]
    Transport(String),
    #[error("LLM returned status {status}: {body}")]
    Status { status: u16, body: String },
    #[error("LLM returned no completion content")]
    EmptyCompletion,
    #[error("no SQL queries found in completion")]
    NoQueriesParsed,
    #[error("LLM configuration error: {0}")]
    Config(String),
    #[error(transparent)]
    Registry(#[from] RegistryError),
}

#[derive(Debug, Error)]
pub enum DemoError {
    #[error("no demonstrations available for matching")]
    MatchEmpty,
    #[error("duplicate demonstration id `{0}`")]
    DuplicateId(String),
    #[error("cannot access demo pool {path}: {message}")]
    Io { path: String, message: String },
    #[error("malformed demonstration at line {line}: {message}")]
    Json { line: usize, message: String },
    #[error(transparent)]
    Llm(#[from] LlmError),
    #[error(transparent)]
    WhatIf(#[from] WhatIfError),
    #[error(transparent)]
    Features(#[from] FeatureError),
    #[error(transparent)]
    Registry(#[from] RegistryError),
}

#[derive(Debug, Error)]
pub enum ScalingError {
    #[error("best-of-N called with no options")]
    EmptyOptions,
    #[error(transparent)]
    WhatIf(#[from] WhatIfError),
    #[error(transparent)]
    Demo(#[from] DemoError),
}

#[derive(Debug, Error, Clone, PartialEq)]
#[error("unknown {family} `{name}` (known: {known})")]
pub struct RegistryError {
    pub family: &'static str,
    pub name: String,
    pub known: String,
}

//! Layered settings: command-line flags override the config file, which
//! overrides `IDXADVISE_*` environment variables, which override defaults.

use std::path::{Path, PathBuf};

use clap::{Args, ValueEnum};
use serde::{Deserialize, Serialize};

use idxadvise_core::heuristics::DEFAULT_BUDGET_GRID;
use idxadvise_core::llm::{DEFAULT_MAX_TOKENS, DEFAULT_SAMPLES, DEFAULT_TEMPERATURE, DEFAULT_TIMEOUT_SECS};

use crate::error::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    /// Demonstrations may come from the workload's own schema.
    InSchema,
    /// Demonstrations from the excluded schema are never used.
    CrossSchema,
}

/// Every setting, each optional so sources can be layered.
#[derive(Debug, Clone, Default, PartialEq, Args, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Settings {
    /// Workload file: SQL statements separated by semicolons.
    #[arg(long, global = true)]
    pub workload: Option<PathBuf>,
    /// Catalog JSON with tables, row counts and column statistics.
    #[arg(long, global = true)]
    pub catalog: Option<PathBuf>,
    /// PostgreSQL connection string for the live backend.
    #[arg(long, global = true)]
    pub dsn: Option<String>,
    /// What-if backend: sim or live.
    #[arg(long, global = true)]
    pub backend: Option<String>,
    /// Storage budget as a fraction of the database size, in (0, 1].
    #[arg(long, global = true)]
    pub storage_pct: Option<f64>,
    /// LLM backend: mock or http.
    #[arg(long, global = true)]
    pub llm: Option<String>,
    #[arg(long, global = true)]
    pub model: Option<String>,
    /// Chat-completions URL for the http backend.
    #[arg(long, global = true)]
    pub endpoint: Option<String>,
    #[arg(long, global = true)]
    pub api_key: Option<String>,
    #[arg(long, global = true)]
    pub timeout_secs: Option<u64>,
    #[arg(long, global = true)]
    pub samples: Option<usize>,
    #[arg(long, global = true)]
    pub temperature: Option<f64>,
    #[arg(long, global = true)]
    pub max_tokens: Option<usize>,
    #[arg(long, global = true)]
    pub context_tokens: Option<usize>,
    #[arg(long, global = true)]
    pub max_iters: Option<usize>,
    /// Demonstration pool (JSON lines).
    #[arg(long, global = true)]
    pub demos: Option<PathBuf>,
    /// Matching strategy: cosine, random or kmeans.
    #[arg(long = "match", global = true)]
    #[serde(rename = "match")]
    pub match_strategy: Option<String>,
    #[arg(long, global = true)]
    pub kmeans_k: Option<usize>,
    #[arg(long, global = true, value_enum)]
    pub mode: Option<Mode>,
    /// Schema whose demonstrations are skipped in cross-schema mode.
    #[arg(long, global = true)]
    pub exclude_schema: Option<String>,
    /// Schema id of the workload; names demonstrations built by `build-demos`.
    #[arg(long, global = true)]
    pub schema_id: Option<String>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Primary output file.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Run without demonstrations.
    #[arg(long, global = true, num_args = 0..=1, default_missing_value = "true")]
    pub zero_shot: Option<bool>,
    /// Disable the voted option.
    #[arg(long, global = true, num_args = 0..=1, default_missing_value = "true")]
    pub no_vote: Option<bool>,
    /// Maximum candidate index width for label collection.
    #[arg(long, global = true)]
    pub max_width: Option<usize>,
    /// Budget fractions for label collection, comma separated.
    #[arg(long, global = true, value_delimiter = ',')]
    pub budget_grid: Option<Vec<f64>>,
    /// DDL file evaluated by `eval`.
    #[arg(long, global = true)]
    pub ddl: Option<PathBuf>,
    /// Heuristic advisor evaluated by `eval`: greedy or density.
    #[arg(long, global = true)]
    pub advisor: Option<String>,
    /// Queries written by `gen-workload`.
    #[arg(long, global = true)]
    pub count: Option<usize>,
    /// Queries synthesized per schema by `build-demos`.
    #[arg(long, global = true)]
    pub queries: Option<usize>,
    /// Workloads sampled by `build-demos`.
    #[arg(long, global = true)]
    pub workloads: Option<usize>,
    #[arg(long, global = true)]
    pub workload_min: Option<usize>,
    #[arg(long, global = true)]
    pub workload_max: Option<usize>,
}

macro_rules! layer {
    ($hi:expr, $lo:expr; $($f:ident),* $(,)?) => {
        Settings { $($f: $hi.$f.or($lo.$f)),* }
    };
}

/// Keys read from the environment as `IDXADVISE_<KEY>`.
pub const ENV_KEYS: &[&str] = &[
    "workload",
    "catalog",
    "dsn",
    "backend",
    "storage_pct",
    "llm",
    "model",
    "endpoint",
    "api_key",
    "timeout_secs",
    "samples",
    "temperature",
    "max_tokens",
    "context_tokens",
    "max_iters",
    "demos",
    "match",
    "kmeans_k",
    "mode",
    "exclude_schema",
    "schema_id",
    "seed",
    "out",
    "zero_shot",
    "no_vote",
    "max_width",
    "budget_grid",
    "ddl",
    "advisor",
    "count",
    "queries",
    "workloads",
    "workload_min",
    "workload_max",
];

impl Settings {
    /// Fields set in `self` win over those in `lower`.
    pub fn over(self, lower: Settings) -> Settings {
        layer!(self, lower;
            workload, catalog, dsn, backend, storage_pct, llm, model, endpoint, api_key, timeout_secs,
            samples, temperature, max_tokens, context_tokens, max_iters, demos, match_strategy, kmeans_k,
            mode, exclude_schema, schema_id, seed, out, zero_shot, no_vote, max_width, budget_grid, ddl,
            advisor, count, queries, workloads, workload_min, workload_max)
    }

    pub fn from_toml(text: &str) -> Result<Settings, CliError> {
        toml::from_str(text).map_err(|e| CliError::Config(format!("config file: {e}")))
    }

    pub fn from_file(path: &Path) -> Result<Settings, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        Settings::from_toml(&text)
    }

    /// Reads `IDXADVISE_*` through `lookup`; values are TOML literals or bare strings.
    pub fn from_env_with(lookup: impl Fn(&str) -> Option<String>) -> Result<Settings, CliError> {
        let mut table = toml::Table::new();
        for key in ENV_KEYS {
            let Some(raw) = lookup(&format!("IDXADVISE_{}", key.to_ascii_uppercase())) else {
                continue;
            };
            let value = toml::from_str::<toml::Table>(&format!("v = {raw}"))
                .ok()
                .and_then(|mut t| t.remove("v"))
                .filter(|v| !v.is_table())
                .unwrap_or(toml::Value::String(raw));
            let value = match (*key, value) {
                ("budget_grid", toml::Value::String(s)) => toml::Value::Array(
                    s.split(',')
                        .map(|p| p.trim().parse::<f64>().map(toml::Value::Float))
                        .collect::<Result<_, _>>()
                        .map_err(|e| CliError::Config(format!("IDXADVISE_BUDGET_GRID: {e}")))?,
                ),
                (_, v) => v,
            };
            table.insert(key.to_string(), value);
        }
        toml::Value::Table(table)
            .try_into()
            .map_err(|e: toml::de::Error| CliError::Config(format!("environment: {e}")))
    }

    pub fn from_env() -> Result<Settings, CliError> {
        Settings::from_env_with(|k| std::env::var(k).ok())
    }

    pub fn resolve(self) -> Result<AdvisorConfig, CliError> {
        let c = AdvisorConfig {
            workload: self.workload,
            catalog: self.catalog,
            dsn: self.dsn,
            backend: self.backend.unwrap_or_else(|| "sim".into()),
            storage_pct: self.storage_pct.unwrap_or(0.3),
            llm: self.llm.unwrap_or_else(|| "mock".into()),
            model: self.model,
            endpoint: self.endpoint,
            api_key: self.api_key,
            timeout_secs: self.timeout_secs.unwrap_or(DEFAULT_TIMEOUT_SECS),
            samples: self.samples.unwrap_or(DEFAULT_SAMPLES),
            temperature: self.temperature.unwrap_or(DEFAULT_TEMPERATURE),
            max_tokens: self.max_tokens.unwrap_or(DEFAULT_MAX_TOKENS),
            context_tokens: self.context_tokens.unwrap_or(32_768),
            max_iters: self.max_iters.unwrap_or(4),
            demos: self.demos,
            match_strategy: self.match_strategy.unwrap_or_else(|| "cosine".into()),
            kmeans_k: self.kmeans_k.unwrap_or(8),
            mode: self.mode.unwrap_or(Mode::InSchema),
            exclude_schema: self.exclude_schema,
            schema_id: self.schema_id,
            seed: self.seed.unwrap_or(0),
            out: self.out,
            zero_shot: self.zero_shot.unwrap_or(false),
            vote: !self.no_vote.unwrap_or(false),
            max_width: self.max_width.unwrap_or(2),
            budget_grid: self.budget_grid.unwrap_or_else(|| DEFAULT_BUDGET_GRID.to_vec()),
            ddl: self.ddl,
            advisor: self.advisor,
            count: self.count.unwrap_or(20),
            queries: self.queries.unwrap_or(60),
            workloads: self.workloads.unwrap_or(40),
            workload_size: (self.workload_min.unwrap_or(3), self.workload_max.unwrap_or(10)),
        };
        c.validate()?;
        Ok(c)
    }
}

/// Fully resolved settings.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AdvisorConfig {
    pub workload: Option<PathBuf>,
    pub catalog: Option<PathBuf>,
    pub dsn: Option<String>,
    pub backend: String,
    pub storage_pct: f64,
    pub llm: String,
    pub model: Option<String>,
    pub endpoint: Option<String>,
    #[serde(skip)]
    pub api_key: Option<String>,
    pub timeout_secs: u64,
    pub samples: usize,
    pub temperature: f64,
    pub max_tokens: usize,
    pub context_tokens: usize,
    pub max_iters: usize,
    pub demos: Option<PathBuf>,
    pub match_strategy: String,
    pub kmeans_k: usize,
    pub mode: Mode,
    pub exclude_schema: Option<String>,
    pub schema_id: Option<String>,
    pub seed: u64,
    /// Not echoed: reports written to different paths stay byte-identical.
    #[serde(skip)]
    pub out: Option<PathBuf>,
    pub zero_shot: bool,
    pub vote: bool,
    pub max_width: usize,
    pub budget_grid: Vec<f64>,
    pub ddl: Option<PathBuf>,
    pub advisor: Option<String>,
    pub count: usize,
    pub queries: usize,
    pub workloads: usize,
    pub workload_size: (usize, usize),
}

impl AdvisorConfig {
    pub fn validate(&self) -> Result<(), CliError> {
        let bad = |m: String| Err(CliError::Config(m));
        if !(self.storage_pct > 0.0 && self.storage_pct <= 1.0) {
            return bad(format!("storage_pct must be in (0, 1], got {}", self.storage_pct));
        }
        if self.samples == 0 {
            return bad("samples must be at least 1".into());
        }
        if self.max_iters == 0 {
            return bad("max_iters must be at least 1".into());
        }
        if self.temperature.is_nan() || self.temperature < 0.0 {
            return bad(format!("temperature must be non-negative, got {}", self.temperature));
        }
        if self.max_width == 0 {
            return bad("max_width must be at least 1".into());
        }
        if self.budget_grid.iter().any(|b| !(*b > 0.0 && *b <= 1.0)) {
            return bad(format!(
                "budget_grid entries must be in (0, 1], got {:?}",
                self.budget_grid
            ));
        }
        if self.workload_size.0 == 0 || self.workload_size.0 > self.workload_size.1 {
            return bad(format!("invalid workload size range {:?}", self.workload_size));
        }
        Ok(())
    }

    /// Schema excluded from matching, if any.
    pub fn excluded_schema(&self) -> Result<Option<&str>, CliError> {
        match self.mode {
            Mode::InSchema => Ok(None),
            Mode::CrossSchema => self
                .exclude_schema
                .as_deref()
                .or(self.schema_id.as_deref())
                .map(Some)
                .ok_or_else(|| CliError::Config("cross-schema mode needs --exclude-schema or --schema-id".into())),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn precedence() {
        let flags = Settings {
            seed: Some(1),
            ..Settings::default()
        };
        let file = Settings::from_toml("seed = 2\nsamples = 3\nmatch = \"kmeans\"").unwrap();
        let env = Settings::from_env_with(|k| match k {
            "IDXADVISE_SEED" => Some("9".into()),
            "IDXADVISE_SAMPLES" => Some("5".into()),
            "IDXADVISE_LLM" => Some("http".into()),
            "IDXADVISE_BUDGET_GRID" => Some("0.1, 0.2".into()),
            _ => None,
        })
        .unwrap();
        let c = flags.over(file.over(env)).resolve().unwrap();
        assert_eq!((c.seed, c.samples, c.llm.as_str()), (1, 3, "http"));
        assert_eq!(c.match_strategy, "kmeans");
        assert_eq!(c.budget_grid, vec![0.1, 0.2]);
        assert_eq!(c.max_iters, 4);
    }

    #[test]
    fn validation() {
        let s = |t: &str| Settings::from_toml(t).unwrap().resolve();
        assert!(s("storage_pct = 0.0").is_err());
        assert!(s("storage_pct = 1.0").is_ok());
        assert!(s("samples = 0").is_err());
        assert!(s("max_iters = 0").is_err());
        assert!(Settings::from_toml("bogus = 1").is_err());
        let cross = s("mode = \"cross-schema\"").unwrap();
        assert!(cross.excluded_schema().is_err());
        let cross = s("mode = \"cross-schema\"\nschema_id = \"tpch\"").unwrap();
        assert_eq!(cross.excluded_schema().unwrap(), Some("tpch"));
    }
}

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rand_chacha::rand_core::SeedableRng;
use serde::{Deserialize, Serialize};

use idxadvise_core::demos::{
    build_meta_feature, build_pool, generate_workload_queries, match_demonstrations, match_registry, DemoPool,
    MatchArgs, PoolConfig, RefinedLabel, DEFAULT_META_LEN,
};
use idxadvise_core::heuristics::{
    advisor_registry, collect_default_label, generate_candidates, make_refined_label, PoolMember,
};
use idxadvise_core::index::{apply_actions, IndexAction, IndexDef};
use idxadvise_core::llm::{llm_registry, parse_actions, LlmArgs, LlmBackend, PromptOptions};
use idxadvise_core::scaling::{self_optimize, SelfOptConfig};
use idxadvise_core::sql::{AnalyzedWorkload, Workload};
use idxadvise_core::whatif::{backend_registry, BackendArgs, WhatIfBackend};
use idxadvise_core::Catalog;

use crate::config::AdvisorConfig;
use crate::error::CliError;
use crate::report::{relative_reduction, sibling, write_json, write_text, Report, Timing};

pub fn open_backend(cfg: &AdvisorConfig) -> Result<Box<dyn WhatIfBackend>, CliError> {
    let catalog = cfg.catalog.as_deref().map(Catalog::load).transpose()?;
    if cfg.backend == "sim" && catalog.is_none() {
        return Err(CliError::Config("the sim backend needs --catalog".into()));
    }
    let args = BackendArgs {
        catalog,
        dsn: cfg.dsn.clone(),
    };
    Ok(backend_registry().build(&cfg.backend, &args)?)
}

pub fn open_llm(cfg: &AdvisorConfig) -> Result<Box<dyn LlmBackend>, CliError> {
    let args = LlmArgs {
        seed: cfg.seed,
        endpoint: cfg.endpoint.clone(),
        model: cfg.model.clone(),
        api_key: cfg.api_key.clone(),
        timeout_secs: Some(cfg.timeout_secs),
    };
    Ok(llm_registry().build(&cfg.llm, &args)?)
}

fn workload_path(cfg: &AdvisorConfig) -> Result<&Path, CliError> {
    cfg.workload
        .as_deref()
        .ok_or_else(|| CliError::Config("--workload is required".into()))
}

fn analyze(cfg: &AdvisorConfig, backend: &dyn WhatIfBackend) -> Result<AnalyzedWorkload, CliError> {
    let w = Workload::load(workload_path(cfg)?)?;
    Ok(backend.analyze(&w)?)
}

fn out_or(cfg: &AdvisorConfig, default: &str) -> PathBuf {
    cfg.out.clone().unwrap_or_else(|| PathBuf::from(default))
}

fn config_echo(cfg: &AdvisorConfig) -> serde_json::Value {
    serde_json::to_value(cfg).expect("config serializes")
}

fn size_of(backend: &dyn WhatIfBackend, set: &BTreeSet<IndexDef>) -> Result<f64, CliError> {
    Ok(set.iter().map(|d| backend.index_size_mb(d)).sum::<Result<f64, _>>()?)
}

fn ddl(set: &BTreeSet<IndexDef>) -> Vec<String> {
    set.iter().cloned().map(|d| IndexAction::Create(d).to_ddl()).collect()
}

/// Writes the report, its DDL and timing siblings and, when given, the trace.
fn persist(out: &Path, report: &Report, runtime: f64, trace: Option<String>) -> Result<(), CliError> {
    write_json(out, report)?;
    let mut sql = report.recommended_ddl.join("\n");
    if !sql.is_empty() {
        sql.push('\n');
    }
    write_text(&sibling(out, "sql"), &sql)?;
    write_json(
        &sibling(out, "timing.json"),
        &Timing {
            command: report.command.clone(),
            runtime_seconds: runtime,
        },
    )?;
    if let Some(t) = trace {
        write_text(&sibling(out, "trace.jsonl"), &t)?;
    }
    Ok(())
}

/// Extraction, matching and self-optimization; writes the report files.
pub fn cmd_advise(cfg: &AdvisorConfig) -> Result<Report, CliError> {
    let backend = open_backend(cfg)?;
    let llm = open_llm(cfg)?;
    let workload = analyze(cfg, backend.as_ref())?;
    let pool = match (&cfg.demos, cfg.zero_shot) {
        (_, true) => DemoPool::default(),
        (Some(p), false) => DemoPool::load(p)?,
        (None, false) => return Err(CliError::Config("--demos is required unless --zero-shot is set".into())),
    };
    let db = backend.catalog().database_size_mb();
    let budget = cfg.storage_pct * db;

    let started = Instant::now();
    let ranked = if cfg.zero_shot {
        Vec::new()
    } else {
        let meta = build_meta_feature(&workload.features, DEFAULT_META_LEN);
        let strategy = match_registry().build(
            &cfg.match_strategy,
            &MatchArgs {
                seed: cfg.seed,
                k: cfg.kmeans_k,
            },
        )?;
        match_demonstrations(&pool, &meta, strategy.as_ref(), cfg.excluded_schema()?)?
    };
    let opt = SelfOptConfig {
        max_iters: cfg.max_iters,
        vote: cfg.vote,
        prompt: PromptOptions {
            temperature: cfg.temperature,
            n_samples: cfg.samples,
            max_tokens: cfg.max_tokens,
            context_tokens: cfg.context_tokens,
        },
    };
    let result = self_optimize(
        backend.as_ref(),
        llm.as_ref(),
        &workload,
        budget,
        cfg.storage_pct,
        &ranked,
        &opt,
    )?;
    let runtime = started.elapsed().as_secs_f64();

    let report = Report {
        command: "advise".into(),
        workload: workload_path(cfg)?.display().to_string(),
        queries: workload.len(),
        backend: backend.name().into(),
        storage_pct: cfg.storage_pct,
        database_size_mb: db,
        budget_mb: budget,
        recommended_ddl: ddl(&result.indexes),
        index_size_mb: size_of(backend.as_ref(), &result.indexes)?,
        baseline_cost: result.baseline_cost,
        final_cost: result.cost,
        relative_reduction: relative_reduction(result.baseline_cost, result.cost),
        demonstrations: ranked.iter().take(2).map(|d| d.id.clone()).collect(),
        iterations: result.trace.clone(),
        aborted: result.aborted.clone(),
        config: config_echo(cfg),
    };
    persist(
        &out_or(cfg, "report.json"),
        &report,
        runtime,
        Some(result.trace_jsonl()),
    )?;
    if let Some(e) = &result.aborted {
        return Err(CliError::Llm(format!("{e} (best-so-far report written)")));
    }
    Ok(report)
}

/// Evaluates a DDL file or a heuristic advisor's recommendation.
pub fn cmd_eval(cfg: &AdvisorConfig) -> Result<Report, CliError> {
    let backend = open_backend(cfg)?;
    let workload = analyze(cfg, backend.as_ref())?;
    let db = backend.catalog().database_size_mb();
    let budget = cfg.storage_pct * db;
    let started = Instant::now();
    let set: BTreeSet<IndexDef> = match (&cfg.advisor, &cfg.ddl) {
        (Some(name), _) => {
            let advisor = advisor_registry().build(name, &())?;
            let candidates = generate_candidates(&workload.features, cfg.max_width).candidates;
            advisor
                .advise(backend.as_ref(), &workload, &candidates, budget)?
                .into_iter()
                .collect()
        }
        (None, Some(path)) => {
            let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
            let parsed = parse_actions(&text, backend.catalog());
            if parsed.warnings > 0 {
                log::warn!(
                    "{} statements in {} could not be resolved",
                    parsed.warnings,
                    path.display()
                );
            }
            apply_actions(&BTreeSet::new(), &parsed.actions)
        }
        (None, None) => return Err(CliError::Config("eval needs --ddl or --advisor".into())),
    };
    let baseline = backend.cost_with(&workload, &BTreeSet::new())?.total;
    let cost = backend.cost_with(&workload, &set)?.total;
    let runtime = started.elapsed().as_secs_f64();
    let report = Report {
        command: "eval".into(),
        workload: workload_path(cfg)?.display().to_string(),
        queries: workload.len(),
        backend: backend.name().into(),
        storage_pct: cfg.storage_pct,
        database_size_mb: db,
        budget_mb: budget,
        recommended_ddl: ddl(&set),
        index_size_mb: size_of(backend.as_ref(), &set)?,
        baseline_cost: baseline,
        final_cost: cost,
        relative_reduction: relative_reduction(baseline, cost),
        demonstrations: Vec::new(),
        iterations: Vec::new(),
        aborted: None,
        config: config_echo(cfg),
    };
    if report.index_size_mb > budget {
        log::warn!(
            "evaluated indexes use {:.2} MB of a {:.2} MB budget",
            report.index_size_mb,
            budget
        );
    }
    persist(&out_or(cfg, "eval.json"), &report, runtime, None)?;
    Ok(report)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabelEntry {
    pub budget_fraction: f64,
    pub default_ddl: Vec<String>,
    pub cost: f64,
    pub baseline_cost: f64,
    pub pool: Vec<PoolMember>,
    pub refined_labels: Vec<RefinedLabel>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabelsFile {
    pub workload: String,
    pub entries: Vec<LabelEntry>,
}

/// Default and refined labels for the workload at every grid budget.
pub fn cmd_labels(cfg: &AdvisorConfig) -> Result<LabelsFile, CliError> {
    let backend = open_backend(cfg)?;
    let workload = analyze(cfg, backend.as_ref())?;
    let db = backend.catalog().database_size_mb();
    let candidates = generate_candidates(&workload.features, cfg.max_width).candidates;
    let mut entries = Vec::new();
    for &b in &cfg.budget_grid {
        let label = collect_default_label(backend.as_ref(), &workload, &candidates, &cfg.budget_grid, b, db)?;
        let refined_labels = label
            .suboptimal()
            .map(|m| RefinedLabel {
                initial_state: m.indexes.clone(),
                actions: make_refined_label(&m.indexes, &label.chosen),
            })
            .collect();
        entries.push(LabelEntry {
            budget_fraction: b,
            default_ddl: ddl(&label.chosen),
            cost: label.cost,
            baseline_cost: label.baseline_cost,
            pool: label.pool,
            refined_labels,
        });
    }
    let file = LabelsFile {
        workload: workload_path(cfg)?.display().to_string(),
        entries,
    };
    write_json(&out_or(cfg, "labels.json"), &file)?;
    Ok(file)
}

fn pool_config(cfg: &AdvisorConfig, queries: usize) -> Result<PoolConfig, CliError> {
    let templates = match &cfg.workload {
        Some(p) => Workload::load(p)?.queries,
        None => Vec::new(),
    };
    Ok(PoolConfig {
        queries_per_schema: queries,
        workloads: cfg.workloads,
        workload_size: cfg.workload_size,
        budget_grid: cfg.budget_grid.clone(),
        max_width: cfg.max_width,
        temperature: cfg.temperature,
        seed: cfg.seed,
        templates,
        ..PoolConfig::default()
    })
}

fn schema_id(cfg: &AdvisorConfig) -> String {
    cfg.schema_id
        .clone()
        .or_else(|| {
            cfg.catalog
                .as_deref()
                .and_then(|p| p.parent())
                .and_then(|d| d.file_name())
                .map(|n| n.to_string_lossy().into_owned())
        })
        .unwrap_or_else(|| "schema".into())
}

/// Builds a demonstration pool for one schema.
pub fn cmd_build_demos(cfg: &AdvisorConfig) -> Result<DemoPool, CliError> {
    let backend = open_backend(cfg)?;
    let llm = open_llm(cfg)?;
    let pool = build_pool(
        &schema_id(cfg),
        backend.as_ref(),
        llm.as_ref(),
        &pool_config(cfg, cfg.queries)?,
    )?;
    let out = out_or(cfg, "demos.jsonl");
    write_text(&out, &pool.to_jsonl())?;
    Ok(pool)
}

/// Synthesizes and filters queries into a workload file.
pub fn cmd_gen_workload(cfg: &AdvisorConfig) -> Result<Vec<String>, CliError> {
    let backend = open_backend(cfg)?;
    let llm = open_llm(cfg)?;
    let pc = pool_config(cfg, cfg.count)?;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(cfg.seed);
    let queries = generate_workload_queries(backend.as_ref(), llm.as_ref(), &pc, &mut rng)?;
    let text: String = queries.iter().map(|q| format!("{q};\n")).collect();
    write_text(&out_or(cfg, "generated.sql"), &text)?;
    Ok(queries)
}

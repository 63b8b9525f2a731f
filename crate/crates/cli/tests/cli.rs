//! Drives the binary end to end in temporary directories.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn data(rel: &str) -> String {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../../data")
        .join(rel)
        .display()
        .to_string()
}

fn run(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_idxadvise"))
        .current_dir(dir)
        .args(args)
        .env_remove("IDXADVISE_SEED")
        .env_remove("IDXADVISE_LLM")
        .output()
        .unwrap()
}

fn ok(dir: &Path, args: &[&str]) -> String {
    let out = run(dir, args);
    assert!(
        out.status.success(),
        "{args:?}: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn json(path: &Path) -> serde_json::Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

/// Builds a small TPC-H pool in `dir` and returns its file name.
fn pool(dir: &Path) -> &'static str {
    let catalog = data("tpch/catalog.json");
    ok(
        dir,
        &[
            "build-demos",
            "--catalog",
            &catalog,
            "--schema-id",
            "tpch",
            "--queries",
            "24",
            "--workloads",
            "3",
            "--workload-min",
            "3",
            "--workload-max",
            "6",
            "--budget-grid",
            "0.2,0.3",
            "--out",
            "pool.jsonl",
        ],
    );
    "pool.jsonl"
}

#[test]
fn advise_is_byte_identical_and_consistent_with_eval() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    let pool = pool(dir);
    assert_eq!(std::fs::read_to_string(dir.join(pool)).unwrap().lines().count(), 6);
    let (catalog, workload) = (data("tpch/catalog.json"), data("tpch/workload.sql"));
    let base = [
        "advise",
        "--catalog",
        &catalog,
        "--workload",
        &workload,
        "--demos",
        pool,
        "--seed",
        "3",
    ];
    for out in ["a.json", "b.json"] {
        let mut args = base.to_vec();
        args.extend(["--out", out]);
        ok(dir, &args);
    }
    let a = std::fs::read(dir.join("a.json")).unwrap();
    assert_eq!(a, std::fs::read(dir.join("b.json")).unwrap());
    assert_eq!(
        std::fs::read(dir.join("a.trace.jsonl")).unwrap(),
        std::fs::read(dir.join("b.trace.jsonl")).unwrap()
    );
    let timing = json(&dir.join("a.timing.json"));
    assert!(timing["runtime_seconds"].as_f64().unwrap() >= 0.0);

    let report = json(&dir.join("a.json"));
    assert!(report["final_cost"].as_f64().unwrap() <= report["baseline_cost"].as_f64().unwrap());
    assert!(report["index_size_mb"].as_f64().unwrap() <= report["budget_mb"].as_f64().unwrap());
    let ddl = std::fs::read_to_string(dir.join("a.sql")).unwrap();
    assert_eq!(ddl.lines().count(), report["recommended_ddl"].as_array().unwrap().len());

    ok(
        dir,
        &[
            "eval",
            "--catalog",
            &catalog,
            "--workload",
            &workload,
            "--ddl",
            "a.sql",
            "--out",
            "e.json",
        ],
    );
    let eval = json(&dir.join("e.json"));
    assert_eq!(eval["final_cost"], report["final_cost"]);
    assert_eq!(eval["baseline_cost"], report["baseline_cost"]);
}

#[test]
fn config_file_env_and_flags_layer() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    let pool = pool(dir);
    let toml = format!(
        "catalog = {:?}\nworkload = {:?}\ndemos = {pool:?}\nsamples = 2\nmax_iters = 1\nstorage_pct = 0.2\n",
        data("tpch/catalog.json"),
        data("tpch/workload.sql")
    );
    std::fs::write(dir.join("advisor.toml"), toml).unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_idxadvise"))
        .current_dir(dir)
        .args([
            "advise",
            "--config",
            "advisor.toml",
            "--storage-pct",
            "0.25",
            "--out",
            "r.json",
        ])
        .env("IDXADVISE_SAMPLES", "5")
        .env("IDXADVISE_MAX_ITERS", "3")
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let r = json(&dir.join("r.json"));
    // Flag over file, file over environment.
    assert_eq!(r["storage_pct"], 0.25);
    assert_eq!(r["config"]["samples"], 2);
    assert_eq!(r["config"]["max_iters"], 1);
    assert_eq!(r["iterations"].as_array().unwrap().len(), 1);
    assert!(r["config"].get("api_key").is_none());
}

#[test]
fn exit_codes() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    let (catalog, workload) = (data("tpch/catalog.json"), data("tpch/workload.sql"));
    let code = |args: &[&str]| run(dir, args).status.code();

    assert_eq!(
        code(&["advise", "--catalog", &catalog, "--workload", &workload]),
        Some(2)
    );
    assert_eq!(
        code(&[
            "eval",
            "--catalog",
            &catalog,
            "--workload",
            &workload,
            "--storage-pct",
            "2"
        ]),
        Some(2)
    );
    assert_eq!(code(&["advise", "--bogus-flag"]), Some(2));
    std::fs::write(dir.join("bad.sql"), "delete from orders;").unwrap();
    assert_eq!(code(&["eval", "--catalog", &catalog, "--workload", "bad.sql"]), Some(2));
    assert_eq!(
        code(&[
            "eval",
            "--catalog",
            &catalog,
            "--workload",
            &workload,
            "--llm",
            "http",
            "--advisor",
            "greedy"
        ]),
        Some(0)
    );
    let pool = pool(dir);
    assert_eq!(
        code(&[
            "advise",
            "--catalog",
            &catalog,
            "--workload",
            &workload,
            "--demos",
            pool,
            "--llm",
            "http"
        ]),
        Some(2)
    );
    assert_eq!(
        code(&[
            "advise",
            "--catalog",
            &catalog,
            "--workload",
            &workload,
            "--demos",
            pool,
            "--llm",
            "http",
            "--endpoint",
            "http://127.0.0.1:9/v1/chat/completions",
            "--model",
            "m",
            "--timeout-secs",
            "2",
            "--out",
            "x.json",
        ]),
        Some(4)
    );
    assert_eq!(
        code(&[
            "eval",
            "--backend",
            "live",
            "--dsn",
            "host=127.0.0.1 port=9 user=nobody connect_timeout=2",
            "--workload",
            &workload,
            "--advisor",
            "greedy",
        ]),
        Some(3)
    );
}

#[test]
fn labels_and_generation() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    let (catalog, workload) = (data("toy/catalog.json"), data("toy/workload.sql"));
    let out = ok(
        dir,
        &[
            "labels",
            "--catalog",
            &catalog,
            "--workload",
            &workload,
            "--out",
            "labels.json",
        ],
    );
    assert_eq!(out.trim(), "5 labels");
    let labels = json(&dir.join("labels.json"));
    let entries = labels["entries"].as_array().unwrap();
    let costs: Vec<f64> = entries.iter().map(|e| e["cost"].as_f64().unwrap()).collect();
    // Larger budgets never cost more.
    assert!(costs.windows(2).all(|w| w[1] <= w[0]), "{costs:?}");
    let first = std::fs::read(dir.join("labels.json")).unwrap();
    ok(
        dir,
        &[
            "labels",
            "--catalog",
            &catalog,
            "--workload",
            &workload,
            "--out",
            "labels.json",
        ],
    );
    assert_eq!(std::fs::read(dir.join("labels.json")).unwrap(), first);

    let out = ok(
        dir,
        &[
            "gen-workload",
            "--catalog",
            &catalog,
            "--count",
            "8",
            "--out",
            "gen.sql",
        ],
    );
    let n: usize = out.split_whitespace().next().unwrap().parse().unwrap();
    assert!(n >= 1);
    ok(
        dir,
        &[
            "eval",
            "--catalog",
            &catalog,
            "--workload",
            "gen.sql",
            "--advisor",
            "density",
            "--out",
            "g.json",
        ],
    );
}

#[test]
fn pool_rebuild_is_identical() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    let first = std::fs::read(dir.join(pool(dir))).unwrap();
    let second = std::fs::read(dir.join(pool(dir))).unwrap();
    assert!(!first.is_empty());
    assert_eq!(first, second);
}

#[test]
fn tiny_budget_yields_empty_recommendation() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    let (catalog, workload) = (data("toy/catalog.json"), data("toy/workload.sql"));
    let args = [
        "--catalog",
        &catalog,
        "--workload",
        &workload,
        "--storage-pct",
        "0.00001",
    ];
    ok(
        dir,
        &[&["advise", "--zero-shot", "--out", "r.json"], &args[..]].concat(),
    );
    let r = json(&dir.join("r.json"));
    assert_eq!(r["recommended_ddl"].as_array().unwrap().len(), 0);
    assert_eq!(r["relative_reduction"], 0.0);
    assert_eq!(std::fs::read_to_string(dir.join("r.sql")).unwrap(), "");

    std::fs::write(dir.join("none.sql"), "").unwrap();
    ok(
        dir,
        &[&["eval", "--ddl", "none.sql", "--out", "e.json"], &args[..]].concat(),
    );
    assert_eq!(json(&dir.join("e.json"))["relative_reduction"], 0.0);
}

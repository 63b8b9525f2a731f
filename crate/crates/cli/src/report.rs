use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use idxadvise_core::scaling::IterationTrace;

use crate::error::CliError;

/// Outcome of `advise` or `eval`.
///
/// Contains nothing time-dependent, so identical inputs give identical bytes;
/// wall-clock runtime goes to a separate timing file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub command: String,
    pub workload: String,
    pub queries: usize,
    pub backend: String,
    pub storage_pct: f64,
    pub database_size_mb: f64,
    pub budget_mb: f64,
    pub recommended_ddl: Vec<String>,
    pub index_size_mb: f64,
    pub baseline_cost: f64,
    pub final_cost: f64,
    /// `(baseline_cost - final_cost) / baseline_cost`; 0 for a zero baseline.
    pub relative_reduction: f64,
    pub demonstrations: Vec<String>,
    pub iterations: Vec<IterationTrace>,
    pub aborted: Option<String>,
    pub config: serde_json::Value,
}

pub fn relative_reduction(baseline: f64, current: f64) -> f64 {
    if baseline > 0.0 {
        (baseline - current) / baseline
    } else {
        0.0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Timing {
    pub command: String,
    pub runtime_seconds: f64,
}

/// Sibling of `out` with its extension replaced by `ext`.
pub fn sibling(out: &Path, ext: &str) -> PathBuf {
    out.with_extension(ext)
}

pub fn write_text(path: &Path, text: &str) -> Result<(), CliError> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    }
    std::fs::write(path, text).map_err(|e| CliError::io(path, e))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(value).expect("report serializes");
    text.push('\n');
    write_text(path, &text)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reduction_arithmetic() {
        assert_eq!(relative_reduction(100.0, 25.0), 0.75);
        assert_eq!(relative_reduction(0.0, 0.0), 0.0);
        assert_eq!(relative_reduction(10.0, 10.0), 0.0);
    }

    #[test]
    fn siblings() {
        assert_eq!(
            sibling(Path::new("out/report.json"), "sql"),
            PathBuf::from("out/report.sql")
        );
        assert_eq!(
            sibling(Path::new("report.json"), "timing.json"),
            PathBuf::from("report.timing.json")
        );
    }
}

use thiserror::Error;

use idxadvise_core::error::{
    CatalogError, DemoError, FeatureError, LlmError, RegistryError, ScalingError, SqlError, WhatIfError,
};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("{0}")]
    Backend(String),
    #[error("LLM error: {0}")]
    Llm(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Backend(_) => 3,
            CliError::Llm(_) => 4,
        }
    }

    pub(crate) fn io(path: &std::path::Path, e: std::io::Error) -> CliError {
        CliError::Config(format!("{}: {e}", path.display()))
    }
}

impl From<RegistryError> for CliError {
    fn from(e: RegistryError) -> Self {
        CliError::Config(e.to_string())
    }
}

impl From<CatalogError> for CliError {
    fn from(e: CatalogError) -> Self {
        CliError::Config(e.to_string())
    }
}

impl From<SqlError> for CliError {
    fn from(e: SqlError) -> Self {
        CliError::Config(e.to_string())
    }
}

impl From<WhatIfError> for CliError {
    fn from(e: WhatIfError) -> Self {
        match e {
            WhatIfError::Registry(r) => r.into(),
            other => CliError::Backend(other.to_string()),
        }
    }
}

impl From<FeatureError> for CliError {
    fn from(e: FeatureError) -> Self {
        match e {
            FeatureError::Sql { .. } => CliError::Config(e.to_string()),
            FeatureError::Selectivity { .. } => CliError::Backend(e.to_string()),
        }
    }
}

impl From<LlmError> for CliError {
    fn from(e: LlmError) -> Self {
        match e {
            LlmError::Registry(r) => r.into(),
            LlmError::Config(_) => CliError::Config(e.to_string()),
            other => CliError::Llm(other.to_string()),
        }
    }
}

impl From<DemoError> for CliError {
    fn from(e: DemoError) -> Self {
        match e {
            DemoError::Llm(l) => l.into(),
            DemoError::WhatIf(w) => w.into(),
            DemoError::Features(f) => f.into(),
            DemoError::Registry(r) => r.into(),
            other => CliError::Config(other.to_string()),
        }
    }
}

impl From<ScalingError> for CliError {
    fn from(e: ScalingError) -> Self {
        match e {
            ScalingError::WhatIf(w) => w.into(),
            ScalingError::Demo(d) => d.into(),
            other => CliError::Backend(other.to_string()),
        }
    }
}

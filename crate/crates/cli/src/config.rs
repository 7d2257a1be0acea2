use std::path::{Path, PathBuf};

use lardo_core::alignment::AlignmentConfig;
use lardo_core::downstream::FinetuneConfig;
use lardo_core::encoders::EncoderConfig;
use lardo_core::prompting::{DatasetCard, PromptSettings};
use lardo_core::TaskType;
use lardo_llm::{Backend, LiveClient, RetryPolicy};
use serde::{Deserialize, Serialize};

use crate::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetSection {
    /// CSV file; relative paths resolve against the config file.
    pub path: PathBuf,
    pub name: String,
    pub description: String,
    pub task_type: TaskType,
    pub target_variable: String,
    #[serde(default = "default_smiles_column")]
    pub smiles_column: String,
    pub label_columns: Vec<String>,
}

fn default_smiles_column() -> String {
    "smiles".into()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LlmSection {
    pub use_mock: bool,
    /// Base URL; `/chat/completions` is appended.
    pub endpoint: Option<String>,
    pub model_id: String,
    /// Name of the environment variable holding the API key.
    pub api_key_env: Option<String>,
    pub max_tokens: u32,
    pub temperature: f64,
    pub seed: Option<u64>,
    pub max_in_flight: usize,
    pub timeout_secs: u64,
    pub max_attempts: u32,
}

impl Default for LlmSection {
    fn default() -> Self {
        let p = PromptSettings::default();
        LlmSection {
            use_mock: false,
            endpoint: None,
            model_id: p.model_id,
            api_key_env: None,
            max_tokens: p.max_tokens,
            temperature: p.temperature,
            seed: p.seed,
            max_in_flight: p.max_in_flight,
            timeout_secs: 120,
            max_attempts: 3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub dataset: DatasetSection,
    #[serde(default)]
    pub llm: LlmSection,
    #[serde(default)]
    pub encoder: EncoderConfig,
    #[serde(default)]
    pub alignment: AlignmentConfig,
    #[serde(default)]
    pub finetune: FinetuneConfig,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("runs")
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        let mut cfg: RunConfig =
            serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new("."));
        if cfg.dataset.path.is_relative() {
            cfg.dataset.path = base.join(&cfg.dataset.path);
        }
        if cfg.output_dir.is_relative() {
            cfg.output_dir = base.join(&cfg.output_dir);
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let bad = |m: String| Err(CliError::Config(m));
        if !self.dataset.path.is_file() {
            return bad(format!("dataset file {} does not exist", self.dataset.path.display()));
        }
        if self.dataset.label_columns.is_empty() {
            return bad("dataset.label_columns is empty".into());
        }
        self.card()?;
        self.encoder.validate().map_err(CliError::Config)?;
        self.alignment.validate().map_err(|e| CliError::Config(e.to_string()))?;
        self.finetune.validate().map_err(|e| CliError::Config(e.to_string()))?;
        let r = self.finetune.split_ratios;
        if r.iter().any(|v| !(v.is_finite() && *v >= 0.0)) || r.iter().sum::<f64>() <= 0.0 {
            return bad(format!("finetune.split_ratios {r:?}"));
        }
        let l = &self.llm;
        if l.max_tokens == 0 || l.max_in_flight == 0 || l.max_attempts == 0 || !(0.0..=2.0).contains(&l.temperature) {
            return bad("llm: max_tokens, max_in_flight and max_attempts must be positive, temperature in [0, 2]".into());
        }
        Ok(())
    }

    pub fn card(&self) -> Result<DatasetCard, CliError> {
        let d = &self.dataset;
        DatasetCard::new(&d.name, &d.description, d.task_type, &d.target_variable).map_err(|e| CliError::Config(e.to_string()))
    }

    pub fn prompt_settings(&self) -> PromptSettings {
        PromptSettings {
            model_id: self.llm.model_id.clone(),
            max_tokens: self.llm.max_tokens,
            temperature: self.llm.temperature,
            seed: self.llm.seed,
            max_in_flight: self.llm.max_in_flight,
        }
    }

    pub fn backend(&self) -> Result<Backend, CliError> {
        if self.llm.use_mock {
            return Ok(Backend::Mock);
        }
        let endpoint = self.llm.endpoint.as_deref().ok_or_else(|| CliError::Config("llm.endpoint is required unless the mock is used".into()))?;
        let api_key = match &self.llm.api_key_env {
            Some(var) => Some(std::env::var(var).map_err(|_| CliError::Config(format!("environment variable {var} is not set")))?),
            None => None,
        };
        let policy = RetryPolicy {
            max_attempts: self.llm.max_attempts,
            timeout: std::time::Duration::from_secs(self.llm.timeout_secs),
            ..RetryPolicy::default()
        };
        Ok(Backend::Live(LiveClient::new(endpoint, api_key, policy, self.llm.max_in_flight)))
    }
}

//! Two-stage description prompting.
//!
//! Stage 1 asks the model, once per dataset, which molecular properties
//! matter for the prediction target. Properties the descriptor calculator
//! can compute are then calibrated with exact values, and stage 2 asks for a
//! per-molecule description that restates those values.

use std::collections::{BTreeMap, HashSet};
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::OnceLock;
use std::thread;

use lardo_chem::dsm::{compute_report, format_calibrated, CalibratedKnowledge, DsmError, MetricId};
use lardo_chem::{parse_smiles, SmilesError};
use lardo_llm::protocol::{CALIBRATED_HEADING, PROPERTIES_HEADING, SMILES_HEADING, STAGE1_MARKER, STAGE2_MARKER};
use lardo_llm::{cached_complete, Backend, CompletionSource, GatewayError, PromptRequest, ReplayCache};
use regex::Regex;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::TaskType;

pub const MAX_TEMPLATE_PROPERTIES: usize = 10;
pub const REQUESTED_PROPERTIES: usize = 5;

#[derive(Debug, Error)]
pub enum PromptingError {
    #[error("dataset card field {0:?} is empty")]
    EmptyCardField(&'static str),
    #[error("stage {stage} failed{}: {source}", molecule.map(|i| format!(" for molecule {i}")).unwrap_or_default())]
    Gateway {
        stage: u8,
        molecule: Option<usize>,
        #[source]
        source: GatewayError,
    },
    #[error("stage 1 answer contains no numbered \"N. Property: relevance\" lines:\n{raw}")]
    TemplateParse { raw: String },
    #[error("molecule {index}: {source}")]
    Smiles {
        index: usize,
        #[source]
        source: SmilesError,
    },
    #[error("molecule {index}: {source}")]
    Calibration {
        index: usize,
        #[source]
        source: DsmError,
    },
    #[error("MD-Text store {path} line {line}: {message}")]
    StoreCorrupt { path: String, line: usize, message: String },
    #[error("MD-Text store i/o: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatasetCard {
    pub name: String,
    pub description: String,
    pub task_type: TaskType,
    pub target_variable: String,
}

impl DatasetCard {
    pub fn new(name: &str, description: &str, task_type: TaskType, target_variable: &str) -> Result<Self, PromptingError> {
        let card = DatasetCard {
            name: name.to_string(),
            description: description.to_string(),
            task_type,
            target_variable: target_variable.to_string(),
        };
        card.validate()?;
        Ok(card)
    }

    pub fn validate(&self) -> Result<(), PromptingError> {
        for (field, value) in [
            ("name", &self.name),
            ("description", &self.description),
            ("target_variable", &self.target_variable),
        ] {
            if value.trim().is_empty() {
                return Err(PromptingError::EmptyCardField(field));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TemplateProperty {
    pub name: String,
    pub rationale: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MDTemplate {
    pub dataset_name: String,
    pub properties: Vec<TemplateProperty>,
}

impl MDTemplate {
    /// SHA-256 of the canonical JSON form.
    pub fn hash(&self) -> String {
        let json = serde_json::to_string(self).unwrap_or_default();
        hex::encode(Sha256::digest(json.as_bytes()))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MDText {
    pub smiles: String,
    pub body: String,
    pub template_hash: String,
    pub source: CompletionSource,
}

/// Model and sampling settings shared by both stages.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PromptSettings {
    pub model_id: String,
    pub max_tokens: u32,
    pub temperature: f64,
    pub seed: Option<u64>,
    /// Concurrent stage-2 requests.
    pub max_in_flight: usize,
}

impl Default for PromptSettings {
    fn default() -> Self {
        PromptSettings {
            model_id: "mistral-7b-instruct-v0.2".into(),
            max_tokens: 512,
            temperature: 0.0,
            seed: None,
            max_in_flight: 4,
        }
    }
}

const SYSTEM_TEXT: &str = "You are an expert medicinal chemist who explains molecular properties precisely.";

fn request(user_text: String, settings: &PromptSettings) -> PromptRequest {
    PromptRequest {
        system_text: SYSTEM_TEXT.to_string(),
        user_text,
        model_id: settings.model_id.clone(),
        max_tokens: settings.max_tokens,
        temperature: settings.temperature,
        seed: settings.seed,
    }
}

pub fn build_stage1_prompt(card: &DatasetCard, settings: &PromptSettings) -> PromptRequest {
    let task = match card.task_type {
        TaskType::Classification => "classification",
        TaskType::Regression => "regression",
    };
    let user = format!(
        "{STAGE1_MARKER}\n\
         We are building a model that predicts a molecular property for the dataset below.\n\n\
         Dataset name:\n{}\n\n\
         Dataset description:\n{}\n\n\
         Task type:\n{task}\n\n\
         Target variable:\n{}\n\n\
         List up to {REQUESTED_PROPERTIES} general molecular properties that are most relevant to the target variable, \
         with a one-sentence reason for each. Answer only with a numbered list, one property per line, in the form\n\
         N. <Property>: <relevance>\n",
        card.name.trim(),
        card.description.trim(),
        card.target_variable.trim(),
    );
    request(user, settings)
}

fn template_line() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"^\s*\d+[.)]\s*(.+?)\s*[:：]\s*(.+)$").expect("valid pattern"))
}

fn strip_markup(s: &str) -> String {
    s.trim().trim_matches(|c: char| matches!(c, '*' | '_' | '`' | '#' | '"')).trim().to_string()
}

pub fn parse_md_template(completion: &str, card: &DatasetCard) -> Result<MDTemplate, PromptingError> {
    let mut seen = HashSet::new();
    let mut properties = Vec::new();
    for line in completion.lines() {
        let Some(caps) = template_line().captures(line) else { continue };
        let name = strip_markup(&caps[1]);
        let rationale = strip_markup(&caps[2]);
        if name.is_empty() || !seen.insert(name.to_lowercase()) {
            continue;
        }
        properties.push(TemplateProperty { name, rationale });
        if properties.len() == MAX_TEMPLATE_PROPERTIES {
            break;
        }
    }
    if properties.is_empty() {
        return Err(PromptingError::TemplateParse { raw: completion.to_string() });
    }
    Ok(MDTemplate { dataset_name: card.name.clone(), properties })
}

/// `alias` occurs in `text` with no letter or digit on either side.
fn contains_word(text: &str, alias: &str) -> bool {
    text.match_indices(alias).any(|(i, _)| {
        let before = text[..i].chars().next_back();
        let after = text[i + alias.len()..].chars().next();
        !before.is_some_and(char::is_alphanumeric) && !after.is_some_and(char::is_alphanumeric)
    })
}

/// Registry metrics named by the template's properties, in template order.
pub fn match_calibratable(template: &MDTemplate, registry: &[MetricId]) -> Vec<MetricId> {
    let mut out = Vec::new();
    for property in &template.properties {
        let name = property.name.to_lowercase();
        for &metric in registry {
            if !out.contains(&metric) && metric.aliases().iter().any(|a| contains_word(&name, a)) {
                out.push(metric);
            }
        }
    }
    out
}

pub fn build_stage2_prompt(
    template: &MDTemplate,
    calibrated: &CalibratedKnowledge,
    smiles: &str,
    settings: &PromptSettings,
) -> Result<PromptRequest, SmilesError> {
    parse_smiles(smiles)?;
    let mut user = format!(
        "{STAGE2_MARKER}\nWrite a molecular description for a molecule from the {} dataset.\n\n{PROPERTIES_HEADING}\n",
        template.dataset_name
    );
    for p in &template.properties {
        user.push_str(&format!("- {}\n", p.name));
    }
    if !calibrated.is_empty() {
        user.push_str(&format!("\n{CALIBRATED_HEADING}\n"));
        user.push_str(&calibrated.to_text());
        user.push_str(
            "\nThe calibrated values above were computed exactly by a cheminformatics tool. \
             Treat them as authoritative, restate each line verbatim, and do not contradict them.\n",
        );
    }
    user.push_str(&format!(
        "\n{SMILES_HEADING}\n{smiles}\n\nDescribe each listed property for this molecule, one short paragraph per property.\n"
    ));
    Ok(request(user, settings))
}

/// Stage 1: obtain and parse the dataset's MD-Template.
pub fn obtain_template(
    card: &DatasetCard,
    backend: &Backend,
    cache: &ReplayCache,
    settings: &PromptSettings,
) -> Result<MDTemplate, PromptingError> {
    card.validate()?;
    let req = build_stage1_prompt(card, settings);
    let answer = cached_complete(&req, backend, cache)
        .map_err(|source| PromptingError::Gateway { stage: 1, molecule: None, source })?;
    parse_md_template(&answer.text, card)
}

/// Calibrate, then run stage 2 for one molecule.
pub fn generate_md_text(
    template: &MDTemplate,
    smiles: &str,
    index: usize,
    registry: &[MetricId],
    backend: &Backend,
    cache: &ReplayCache,
    settings: &PromptSettings,
) -> Result<MDText, PromptingError> {
    let calibrated = calibrate(template, smiles, index, registry)?;
    let req = build_stage2_prompt(template, &calibrated, smiles, settings)
        .map_err(|source| PromptingError::Smiles { index, source })?;
    let answer = cached_complete(&req, backend, cache)
        .map_err(|source| PromptingError::Gateway { stage: 2, molecule: Some(index), source })?;
    Ok(MDText { smiles: smiles.to_string(), body: answer.text, template_hash: template.hash(), source: answer.source })
}

/// Calibrated-knowledge lines for one molecule under a template.
pub fn calibrated_knowledge(
    template: &MDTemplate,
    smiles: &str,
    registry: &[MetricId],
) -> Result<CalibratedKnowledge, PromptingError> {
    calibrate(template, smiles, 0, registry)
}

fn calibrate(
    template: &MDTemplate,
    smiles: &str,
    index: usize,
    registry: &[MetricId],
) -> Result<CalibratedKnowledge, PromptingError> {
    let molecule = parse_smiles(smiles).map_err(|source| PromptingError::Smiles { index, source })?;
    let metrics = match_calibratable(template, registry);
    if metrics.is_empty() {
        return Ok(CalibratedKnowledge::default());
    }
    let report = compute_report(&molecule, &metrics).map_err(|source| PromptingError::Calibration { index, source })?;
    Ok(format_calibrated(&report))
}

/// Stage 1 once, then stage 2 for every molecule with up to
/// `settings.max_in_flight` requests at a time. Output follows input order.
pub fn describe_dataset(
    card: &DatasetCard,
    smiles: &[String],
    registry: &[MetricId],
    backend: &Backend,
    cache: &ReplayCache,
    settings: &PromptSettings,
) -> Result<(MDTemplate, Vec<MDText>), PromptingError> {
    let template = obtain_template(card, backend, cache, settings)?;
    let workers = settings.max_in_flight.clamp(1, smiles.len().max(1));
    let mut slots: Vec<Option<Result<MDText, PromptingError>>> = Vec::new();
    slots.resize_with(smiles.len(), || None);
    thread::scope(|scope| {
        for (w, chunk) in slots.chunks_mut(smiles.len().div_ceil(workers).max(1)).enumerate() {
            let template = &template;
            let offset = w * smiles.len().div_ceil(workers).max(1);
            scope.spawn(move || {
                for (k, slot) in chunk.iter_mut().enumerate() {
                    let i = offset + k;
                    *slot = Some(generate_md_text(template, &smiles[i], i, registry, backend, cache, settings));
                }
            });
        }
    });
    let texts = slots
        .into_iter()
        .map(|s| s.expect("every slot is filled"))
        .collect::<Result<Vec<_>, _>>()?;
    Ok((template, texts))
}

/// `mdtext/<dataset>.jsonl`: one MD-Text per line, keyed by SMILES.
#[derive(Debug)]
pub struct MdTextStore {
    path: PathBuf,
    entries: BTreeMap<String, MDText>,
}

impl MdTextStore {
    pub fn path_for(root: &Path, dataset: &str) -> PathBuf {
        root.join("mdtext").join(format!("{dataset}.jsonl"))
    }

    pub fn open(path: &Path) -> Result<Self, PromptingError> {
        let mut entries = BTreeMap::new();
        if path.exists() {
            for (i, line) in BufReader::new(File::open(path)?).lines().enumerate() {
                let line = line?;
                if line.trim().is_empty() {
                    continue;
                }
                let text: MDText = serde_json::from_str(&line).map_err(|e| PromptingError::StoreCorrupt {
                    path: path.display().to_string(),
                    line: i + 1,
                    message: e.to_string(),
                })?;
                entries.entry(text.smiles.clone()).or_insert(text);
            }
        }
        Ok(MdTextStore { path: path.to_path_buf(), entries })
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    pub fn get(&self, smiles: &str) -> Option<&MDText> {
        self.entries.get(smiles)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Append texts whose SMILES are not stored yet. Returns how many were new.
    pub fn append(&mut self, texts: &[MDText]) -> Result<usize, PromptingError> {
        if let Some(dir) = self.path.parent() {
            std::fs::create_dir_all(dir)?;
        }
        let mut file = OpenOptions::new().create(true).append(true).open(&self.path)?;
        let mut added = 0;
        for t in texts {
            if self.entries.contains_key(&t.smiles) {
                continue;
            }
            let line = serde_json::to_string(t).map_err(|e| std::io::Error::other(e.to_string()))?;
            writeln!(file, "{line}")?;
            self.entries.insert(t.smiles.clone(), t.clone());
            added += 1;
        }
        file.flush()?;
        Ok(added)
    }

    /// SMILES from `wanted` that have no stored text.
    pub fn missing<'a>(&self, wanted: &'a [String]) -> Vec<&'a str> {
        wanted.iter().filter(|s| !self.entries.contains_key(*s)).map(String::as_str).collect()
    }
}

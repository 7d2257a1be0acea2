use std::collections::{BTreeMap, BTreeSet};
use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use lardo_chem::dsm::{compute_report, format_calibrated, DescriptorReport, MetricId};
use lardo_chem::{featurize, parse_smiles, MolecularGraph};
use lardo_core::alignment::{pretrain, write_history_csv};
use lardo_core::downstream::{
    evaluate, finetune, metric_rows, scaffold_split, write_metrics_csv, CandidateRun, EvalReport, FinetunedModel,
    MetricRow, MoleculeDataset, SplitAssignment,
};
use lardo_core::encoders::init_params;
use lardo_core::prompting::{describe_dataset, MdTextStore};
use lardo_core::TaskType;
use lardo_llm::{CompletionSource, ReplayCache, CACHE_FILE_NAME};
use serde::Serialize;

use crate::checkpoint::{config_digest, load_checkpoint, save_checkpoint, Checkpoint};
use crate::config::RunConfig;
use crate::ingest::{ingest_csv, IngestReport};
use crate::CliError;

/// Artifact locations under the output directory.
#[derive(Debug, Clone)]
pub struct RunPaths {
    pub root: PathBuf,
}

impl RunPaths {
    pub fn new(root: &Path) -> Self {
        RunPaths { root: root.to_path_buf() }
    }
    pub fn llm_cache(&self) -> PathBuf {
        self.root.join(CACHE_FILE_NAME)
    }
    pub fn mdtext(&self, dataset: &str) -> PathBuf {
        MdTextStore::path_for(&self.root, dataset)
    }
    pub fn pretrained(&self) -> PathBuf {
        self.root.join("pretrained.ckpt")
    }
    pub fn history(&self) -> PathBuf {
        self.root.join("pretrain_history.csv")
    }
    pub fn finetuned(&self) -> PathBuf {
        self.root.join("finetuned.ckpt")
    }
    pub fn finetune_summary(&self) -> PathBuf {
        self.root.join("finetune_summary.json")
    }
    pub fn metrics(&self) -> PathBuf {
        self.root.join("metrics.csv")
    }
    pub fn split(&self) -> PathBuf {
        self.root.join("split.json")
    }
}

fn paths(cfg: &RunConfig) -> RunPaths {
    RunPaths::new(&cfg.output_dir)
}

pub fn load_dataset(cfg: &RunConfig) -> Result<(MoleculeDataset, IngestReport), CliError> {
    let d = &cfg.dataset;
    ingest_csv(&d.path, &d.smiles_column, &d.label_columns, &d.name, d.task_type)
}

/// Distinct SMILES in first-seen order.
fn unique_smiles(ds: &MoleculeDataset) -> Vec<String> {
    let mut seen = BTreeSet::new();
    ds.records.iter().filter(|r| seen.insert(r.smiles.clone())).map(|r| r.smiles.clone()).collect()
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir)?;
    }
    let mut text = serde_json::to_string_pretty(value).map_err(std::io::Error::other)?;
    text.push('\n');
    std::fs::write(path, text)?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DescribeSummary {
    pub ingest: IngestReport,
    pub molecules: usize,
    pub generated: usize,
    pub cache_hits: usize,
    pub store: PathBuf,
}

/// Fill the MD-Text store for every distinct molecule not yet described.
pub fn cmd_describe(cfg: &RunConfig) -> Result<DescribeSummary, CliError> {
    let (ds, ingest) = load_dataset(cfg)?;
    let p = paths(cfg);
    let mut store = MdTextStore::open(&p.mdtext(&ds.name))?;
    let wanted = unique_smiles(&ds);
    let missing: Vec<String> = store.missing(&wanted).into_iter().map(str::to_string).collect();
    let mut summary = DescribeSummary { ingest, molecules: wanted.len(), generated: 0, cache_hits: 0, store: store.path().to_path_buf() };
    if missing.is_empty() {
        return Ok(summary);
    }
    let backend = cfg.backend()?;
    let cache = ReplayCache::open(&p.llm_cache())?;
    let (_, texts) = describe_dataset(&cfg.card()?, &missing, &MetricId::ALL, &backend, &cache, &cfg.prompt_settings())?;
    summary.cache_hits = texts.iter().filter(|t| t.source == CompletionSource::Cache).count();
    summary.generated = store.append(&texts)?;
    Ok(summary)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PretrainSummary {
    pub pairs: usize,
    pub epochs: usize,
    pub best_epoch: usize,
    pub best_val_loss: f64,
    pub checkpoint: PathBuf,
}

/// (graph, MD-Text) pairs for every distinct molecule; all must be described.
pub fn training_pairs(cfg: &RunConfig, ds: &MoleculeDataset) -> Result<Vec<(MolecularGraph, String)>, CliError> {
    let store = MdTextStore::open(&paths(cfg).mdtext(&ds.name))?;
    let wanted = unique_smiles(ds);
    let missing = store.missing(&wanted);
    if !missing.is_empty() {
        let shown: Vec<&str> = missing.iter().take(5).copied().collect();
        return Err(CliError::Input(format!(
            "MD-Text store is missing {} molecule(s), run describe first: {}{}",
            missing.len(),
            shown.join(", "),
            if missing.len() > shown.len() { ", ..." } else { "" }
        )));
    }
    wanted
        .iter()
        .map(|s| {
            let m = parse_smiles(s).map_err(|e| CliError::Input(e.to_string()))?;
            let g = featurize(&m).map_err(|e| CliError::Input(e.to_string()))?;
            Ok((g, store.get(s).expect("checked above").body.clone()))
        })
        .collect()
}

pub fn cmd_pretrain(cfg: &RunConfig) -> Result<PretrainSummary, CliError> {
    let (ds, _) = load_dataset(cfg)?;
    let pairs = training_pairs(cfg, &ds)?;
    let init = init_params(&cfg.encoder, cfg.seed).map_err(|e| CliError::Training(e.to_string()))?;
    let out = pretrain(&pairs, &cfg.encoder, &cfg.alignment, init, cfg.seed).map_err(|e| CliError::Training(e.to_string()))?;
    let p = paths(cfg);
    let ckpt = Checkpoint {
        config_digest: config_digest(&cfg.encoder),
        metadata: BTreeMap::from([
            ("kind".to_string(), "pretrained".to_string()),
            ("best_epoch".to_string(), out.best_epoch.to_string()),
        ]),
        store: out.best,
    };
    save_checkpoint(&p.pretrained(), &ckpt)?;
    write_history_csv(&out.history, BufWriter::new(File::create(p.history())?)).map_err(|e| CliError::Training(e.to_string()))?;
    Ok(PretrainSummary {
        pairs: pairs.len(),
        epochs: out.history.len(),
        best_epoch: out.best_epoch,
        best_val_loss: out.best_val_loss,
        checkpoint: p.pretrained(),
    })
}

pub fn cmd_split(cfg: &RunConfig) -> Result<SplitAssignment, CliError> {
    let (ds, _) = load_dataset(cfg)?;
    let split = scaffold_split(&ds, cfg.finetune.split_ratios, cfg.seed)?;
    write_json(&paths(cfg).split(), &split)?;
    Ok(split)
}

/// Everything that fixes the fine-tuned parameter shapes.
fn finetuned_digest(cfg: &RunConfig, ds: &MoleculeDataset) -> String {
    config_digest(&(&cfg.encoder, cfg.finetune.head_hidden, &ds.task_names, ds.task_type))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FinetuneSummary {
    pub best_lr: f64,
    pub candidates: Vec<CandidateRun>,
    pub split_sizes: [usize; 3],
    pub test: EvalReport,
}

fn test_report(cfg: &RunConfig, ds: &MoleculeDataset, model: &FinetunedModel, split: &SplitAssignment) -> Result<EvalReport, CliError> {
    let graphs = ds.graphs()?;
    let metric = cfg.finetune.metric_for(ds.task_type);
    Ok(evaluate(model, ds, &graphs, &split.test, metric)?)
}

fn write_metrics(cfg: &RunConfig, ds: &MoleculeDataset, report: &EvalReport) -> Result<Vec<MetricRow>, CliError> {
    let rows = metric_rows(&ds.name, report, cfg.seed);
    write_metrics_csv(&rows, BufWriter::new(File::create(paths(cfg).metrics())?))?;
    Ok(rows)
}

/// Scaffold split, fine-tune from the pretrained checkpoint, evaluate on
/// the test partition.
pub fn cmd_finetune(cfg: &RunConfig) -> Result<FinetuneSummary, CliError> {
    let p = paths(cfg);
    let pretrained = load_checkpoint(&p.pretrained())?;
    pretrained.check_digest(&config_digest(&cfg.encoder))?;
    let (ds, _) = load_dataset(cfg)?;
    let split = scaffold_split(&ds, cfg.finetune.split_ratios, cfg.seed)?;
    write_json(&p.split(), &split)?;
    let out = finetune(&pretrained.store, &cfg.encoder.gin, &ds, &split, &cfg.finetune, cfg.seed)?;

    let mut metadata = BTreeMap::from([
        ("kind".to_string(), "finetuned".to_string()),
        ("best_lr".to_string(), format!("{:e}", out.best_lr)),
    ]);
    if let Some(std) = &out.model.standardization {
        metadata.insert("standardization".into(), serde_json::to_string(std).map_err(std::io::Error::other)?);
    }
    let ckpt = Checkpoint { config_digest: finetuned_digest(cfg, &ds), metadata, store: out.model.store.clone() };
    save_checkpoint(&p.finetuned(), &ckpt)?;

    let test = test_report(cfg, &ds, &out.model, &split)?;
    write_metrics(cfg, &ds, &test)?;
    let summary = FinetuneSummary {
        best_lr: out.best_lr,
        candidates: out.candidates,
        split_sizes: [split.train.len(), split.valid.len(), split.test.len()],
        test,
    };
    write_json(&p.finetune_summary(), &summary)?;
    Ok(summary)
}

/// Rebuild a fine-tuned model from its checkpoint.
pub fn load_finetuned(cfg: &RunConfig, ds: &MoleculeDataset, path: &Path) -> Result<FinetunedModel, CliError> {
    let ckpt = load_checkpoint(path)?;
    ckpt.check_digest(&finetuned_digest(cfg, ds))?;
    let standardization = match (ds.task_type, ckpt.metadata.get("standardization")) {
        (TaskType::Regression, Some(s)) => {
            Some(serde_json::from_str(s).map_err(|e| CliError::Input(format!("checkpoint standardization: {e}")))?)
        }
        (TaskType::Regression, None) => return Err(CliError::Input("regression checkpoint lacks label standardization".into())),
        (TaskType::Classification, _) => None,
    };
    Ok(FinetunedModel {
        store: ckpt.store,
        gin: cfg.encoder.gin.clone(),
        task_type: ds.task_type,
        n_tasks: ds.n_tasks(),
        standardization,
    })
}

/// Re-evaluate the fine-tuned checkpoint on the test partition.
pub fn cmd_eval(cfg: &RunConfig) -> Result<Vec<MetricRow>, CliError> {
    let (ds, _) = load_dataset(cfg)?;
    let model = load_finetuned(cfg, &ds, &paths(cfg).finetuned())?;
    let split = scaffold_split(&ds, cfg.finetune.split_ratios, cfg.seed)?;
    let report = test_report(cfg, &ds, &model, &split)?;
    write_metrics(cfg, &ds, &report)
}

/// Full descriptor report and its calibrated-knowledge lines.
pub fn cmd_calibrate(smiles: &str) -> Result<(DescriptorReport, Vec<String>), CliError> {
    let m = parse_smiles(smiles).map_err(|e| CliError::Input(e.to_string()))?;
    let report = compute_report(&m, &MetricId::ALL).map_err(|e| CliError::Input(e.to_string()))?;
    let lines = format_calibrated(&report).lines;
    Ok((report, lines))
}

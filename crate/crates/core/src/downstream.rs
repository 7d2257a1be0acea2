//! Scaffold split, fine-tuning of the graph encoder with a task head, and the
//! evaluation metrics.

use std::collections::BTreeMap;
use std::io::Write;

use lardo_chem::{featurize, murcko_scaffold, parse_smiles, MolecularGraph, ScaffoldKey};
use lardo_nn::{adam_step, AdamState, NnError, ParameterStore, Tape, Tensor, Var};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::encoders::{encode_graphs, GinConfig, GraphBatch};
use crate::TaskType;

#[derive(Debug, Error)]
pub enum DownstreamError {
    #[error("record {index}: {message}")]
    Record { index: usize, message: String },
    #[error("task {task:?} has no labelled example in the training split")]
    UnlabelledTask { task: String },
    #[error("{0}")]
    Metric(String),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Nn(#[from] NnError),
    #[error("metrics i/o: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Record {
    pub smiles: String,
    /// `None` marks a missing label.
    pub labels: Vec<Option<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MoleculeDataset {
    pub name: String,
    pub task_type: TaskType,
    pub task_names: Vec<String>,
    pub records: Vec<Record>,
}

impl MoleculeDataset {
    pub fn n_tasks(&self) -> usize {
        self.task_names.len()
    }

    pub fn validate(&self) -> Result<(), DownstreamError> {
        for (i, r) in self.records.iter().enumerate() {
            if r.labels.len() != self.n_tasks() {
                return Err(DownstreamError::Record {
                    index: i,
                    message: format!("{} labels for {} tasks", r.labels.len(), self.n_tasks()),
                });
            }
            if r.labels.iter().all(Option::is_none) {
                return Err(DownstreamError::Record { index: i, message: "every label is missing".into() });
            }
        }
        Ok(())
    }

    pub fn graphs(&self) -> Result<Vec<MolecularGraph>, DownstreamError> {
        self.records
            .iter()
            .enumerate()
            .map(|(index, r)| {
                let m = parse_smiles(&r.smiles).map_err(|e| DownstreamError::Record { index, message: e.to_string() })?;
                featurize(&m).map_err(|e| DownstreamError::Record { index, message: e.to_string() })
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitAssignment {
    pub train: Vec<usize>,
    pub valid: Vec<usize>,
    pub test: Vec<usize>,
    pub ratios: [f64; 3],
    pub seed: u64,
}

/// Whole scaffold groups, largest first (ties by key), each to the first
/// partition still below its target size. The seed is recorded only; the
/// assignment is fully determined by the data.
pub fn scaffold_split(dataset: &MoleculeDataset, ratios: [f64; 3], seed: u64) -> Result<SplitAssignment, DownstreamError> {
    if ratios.iter().any(|r| !(r.is_finite() && *r >= 0.0)) || ratios.iter().sum::<f64>() <= 0.0 {
        return Err(DownstreamError::Config(format!("bad split ratios {ratios:?}")));
    }
    let mut groups: BTreeMap<ScaffoldKey, Vec<usize>> = BTreeMap::new();
    for (index, r) in dataset.records.iter().enumerate() {
        let m = parse_smiles(&r.smiles).map_err(|e| DownstreamError::Record { index, message: e.to_string() })?;
        groups.entry(murcko_scaffold(&m)).or_default().push(index);
    }
    let mut ordered: Vec<(ScaffoldKey, Vec<usize>)> = groups.into_iter().collect();
    ordered.sort_by(|a, b| b.1.len().cmp(&a.1.len()).then_with(|| a.0.cmp(&b.0)));

    let n = dataset.records.len() as f64;
    let total: f64 = ratios.iter().sum();
    let targets = ratios.map(|r| r / total * n);
    let mut parts: [Vec<usize>; 3] = Default::default();
    for (_, members) in ordered {
        let k = (0..3).find(|&k| (parts[k].len() as f64) < targets[k]).unwrap_or(2);
        parts[k].extend(members);
    }
    for p in &mut parts {
        p.sort_unstable();
    }
    let [train, valid, test] = parts;
    Ok(SplitAssignment { train, valid, test, ratios, seed })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Metric {
    #[serde(rename = "roc_auc")]
    RocAuc,
    #[serde(rename = "rmse")]
    Rmse,
    #[serde(rename = "mae")]
    Mae,
}

impl Metric {
    pub fn default_for(task: TaskType) -> Self {
        match task {
            TaskType::Classification => Metric::RocAuc,
            TaskType::Regression => Metric::Rmse,
        }
    }

    pub fn higher_is_better(self) -> bool {
        self == Metric::RocAuc
    }

    pub fn name(self) -> &'static str {
        match self {
            Metric::RocAuc => "ROC-AUC",
            Metric::Rmse => "RMSE",
            Metric::Mae => "MAE",
        }
    }
}

/// Probability that a random positive outscores a random negative, ties
/// counting one half; computed from midranks.
pub fn roc_auc(scores: &[f64], labels: &[bool]) -> Result<f64, DownstreamError> {
    if scores.len() != labels.len() {
        return Err(DownstreamError::Metric(format!("{} scores for {} labels", scores.len(), labels.len())));
    }
    if scores.iter().any(|s| s.is_nan()) {
        return Err(DownstreamError::Metric("NaN score".into()));
    }
    let pos = labels.iter().filter(|&&l| l).count();
    let neg = labels.len() - pos;
    if pos == 0 || neg == 0 {
        return Err(DownstreamError::Metric("ROC-AUC needs both classes".into()));
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    // Twice the midrank keeps everything integral.
    let mut rank_sum2 = 0u64;
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && scores[order[j + 1]] == scores[order[i]] {
            j += 1;
        }
        let twice_mid = (i + 1 + j + 1) as u64;
        rank_sum2 += twice_mid * order[i..=j].iter().filter(|&&k| labels[k]).count() as u64;
        i = j + 1;
    }
    let p = pos as u64;
    let u2 = rank_sum2 - p * (p + 1);
    Ok(u2 as f64 / (2 * p * neg as u64) as f64)
}

fn check_lengths(pred: &[f64], truth: &[f64]) -> Result<(), DownstreamError> {
    if pred.len() != truth.len() || pred.is_empty() {
        return Err(DownstreamError::Metric(format!("lengths {} and {}", pred.len(), truth.len())));
    }
    Ok(())
}

pub fn rmse(pred: &[f64], truth: &[f64]) -> Result<f64, DownstreamError> {
    check_lengths(pred, truth)?;
    let mse = pred.iter().zip(truth).map(|(p, t)| (p - t) * (p - t)).sum::<f64>() / pred.len() as f64;
    Ok(mse.sqrt())
}

pub fn mae(pred: &[f64], truth: &[f64]) -> Result<f64, DownstreamError> {
    check_lengths(pred, truth)?;
    Ok(pred.iter().zip(truth).map(|(p, t)| (p - t).abs()).sum::<f64>() / pred.len() as f64)
}

/// Mean and population standard deviation.
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    if values.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    (mean, var.sqrt())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FinetuneConfig {
    pub lr_candidates: Vec<f64>,
    pub max_epochs: usize,
    pub batch_size: usize,
    pub patience: usize,
    pub head_hidden: usize,
    /// Defaults to ROC-AUC for classification and RMSE for regression.
    pub metric: Option<Metric>,
    pub split_ratios: [f64; 3],
}

impl Default for FinetuneConfig {
    fn default() -> Self {
        FinetuneConfig {
            lr_candidates: vec![1e-4, 5e-4],
            max_epochs: 100,
            batch_size: 32,
            patience: 10,
            head_hidden: 256,
            metric: None,
            split_ratios: [0.8, 0.1, 0.1],
        }
    }
}

impl FinetuneConfig {
    pub fn validate(&self) -> Result<(), DownstreamError> {
        if self.lr_candidates.is_empty() || self.lr_candidates.iter().any(|l| !(l.is_finite() && *l >= 0.0)) {
            return Err(DownstreamError::Config("lr_candidates must be non-empty and non-negative".into()));
        }
        if self.batch_size == 0 || self.head_hidden == 0 {
            return Err(DownstreamError::Config("batch_size and head_hidden must be positive".into()));
        }
        Ok(())
    }

    pub fn metric_for(&self, task: TaskType) -> Metric {
        self.metric.unwrap_or(Metric::default_for(task))
    }
}

const HEAD: [(&str, &str); 2] = [("head.mlp0.weight", "head.mlp0.bias"), ("head.mlp1.weight", "head.mlp1.bias")];

#[derive(Debug, Clone)]
pub struct FinetunedModel {
    pub store: ParameterStore,
    pub gin: GinConfig,
    pub task_type: TaskType,
    pub n_tasks: usize,
    /// Per-task (mean, std) of training labels, regression only.
    pub standardization: Option<Vec<(f64, f64)>>,
}

fn head_forward(tape: &mut Tape, store: &ParameterStore, pooled: Var) -> Result<Var, NnError> {
    let mut x = pooled;
    for (k, (w, b)) in HEAD.iter().enumerate() {
        let wv = tape.param(store, w)?;
        let bv = tape.param(store, b)?;
        x = tape.matmul_nt(x, wv)?;
        x = tape.add_row(x, bv)?;
        if k == 0 {
            x = tape.relu(x)?;
        }
    }
    Ok(x)
}

impl FinetunedModel {
    fn outputs(&self, tape: &mut Tape, graphs: &[&MolecularGraph]) -> Result<Var, NnError> {
        let batch = GraphBatch::new(graphs)?;
        let pooled = encode_graphs(tape, &self.store, &batch, &self.gin)?;
        head_forward(tape, &self.store, pooled)
    }

    /// Probabilities for classification, labels in original units for
    /// regression. One row per requested index.
    pub fn predict(&self, graphs: &[MolecularGraph], idx: &[usize]) -> Result<Vec<Vec<f64>>, NnError> {
        let mut out = Vec::with_capacity(idx.len());
        for chunk in idx.chunks(256) {
            let gs: Vec<&MolecularGraph> = chunk.iter().map(|&i| &graphs[i]).collect();
            let mut tape = Tape::new();
            let y = self.outputs(&mut tape, &gs)?;
            let y = tape.value(y);
            for r in 0..y.rows() {
                let row = y.row(r).iter().enumerate().map(|(t, &v)| match (&self.task_type, &self.standardization) {
                    (TaskType::Classification, _) => 1.0 / (1.0 + (-v).exp()),
                    (TaskType::Regression, Some(s)) => v * s[t].1 + s[t].0,
                    (TaskType::Regression, None) => v,
                });
                out.push(row.collect());
            }
        }
        Ok(out)
    }

    /// Training loss (standardized for regression) averaged over `idx`.
    pub fn loss(&self, dataset: &MoleculeDataset, graphs: &[MolecularGraph], idx: &[usize]) -> Result<f64, NnError> {
        let gs: Vec<&MolecularGraph> = idx.iter().map(|&i| &graphs[i]).collect();
        let mut tape = Tape::new();
        let y = self.outputs(&mut tape, &gs)?;
        let (targets, mask) = self.targets(dataset, idx);
        let l = self.loss_on_tape(&mut tape, y, &targets, &mask)?;
        Ok(tape.value(l).item())
    }

    fn targets(&self, dataset: &MoleculeDataset, idx: &[usize]) -> (Vec<f64>, Vec<bool>) {
        let mut targets = Vec::with_capacity(idx.len() * self.n_tasks);
        let mut mask = Vec::with_capacity(idx.len() * self.n_tasks);
        for &i in idx {
            for (t, label) in dataset.records[i].labels.iter().enumerate() {
                let v = match (label, &self.standardization) {
                    (Some(v), Some(s)) => (v - s[t].0) / s[t].1,
                    (Some(v), None) => *v,
                    (None, _) => 0.0,
                };
                targets.push(v);
                mask.push(label.is_some());
            }
        }
        (targets, mask)
    }

    fn loss_on_tape(&self, tape: &mut Tape, y: Var, targets: &[f64], mask: &[bool]) -> Result<Var, NnError> {
        match self.task_type {
            TaskType::Classification => tape.bce_with_logits(y, targets, mask),
            TaskType::Regression => tape.masked_mse(y, targets, mask),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskScore {
    pub task: String,
    /// `None` when the task cannot be scored on this split.
    pub value: Option<f64>,
    pub note: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub metric: Metric,
    pub per_task: Vec<TaskScore>,
    /// Unweighted mean over scored tasks.
    pub mean: Option<f64>,
}

pub fn evaluate(
    model: &FinetunedModel,
    dataset: &MoleculeDataset,
    graphs: &[MolecularGraph],
    idx: &[usize],
    metric: Metric,
) -> Result<EvalReport, DownstreamError> {
    let preds = model.predict(graphs, idx)?;
    let mut per_task = Vec::with_capacity(dataset.n_tasks());
    for (t, task) in dataset.task_names.iter().enumerate() {
        let mut p = Vec::new();
        let mut y = Vec::new();
        for (row, &i) in idx.iter().enumerate() {
            if let Some(label) = dataset.records[i].labels[t] {
                p.push(preds[row][t]);
                y.push(label);
            }
        }
        let scored = if y.is_empty() {
            Err("no labelled examples".to_string())
        } else {
            match metric {
                Metric::RocAuc => {
                    let classes: Vec<bool> = y.iter().map(|&v| v > 0.5).collect();
                    roc_auc(&p, &classes).map_err(|_| "single class in split".to_string())
                }
                Metric::Rmse => rmse(&p, &y).map_err(|e| e.to_string()),
                Metric::Mae => mae(&p, &y).map_err(|e| e.to_string()),
            }
        };
        per_task.push(match scored {
            Ok(v) => TaskScore { task: task.clone(), value: Some(v), note: None },
            Err(note) => TaskScore { task: task.clone(), value: None, note: Some(note) },
        });
    }
    let values: Vec<f64> = per_task.iter().filter_map(|s| s.value).collect();
    let mean = if values.is_empty() { None } else { Some(values.iter().sum::<f64>() / values.len() as f64) };
    Ok(EvalReport { metric, per_task, mean })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateRun {
    pub lr: f64,
    pub initial_val_loss: f64,
    pub best_val_metric: Option<f64>,
    pub best_epoch: usize,
    pub epochs_run: usize,
}

#[derive(Debug, Clone)]
pub struct FinetuneOutcome {
    pub model: FinetunedModel,
    pub best_lr: f64,
    pub candidates: Vec<CandidateRun>,
}

/// Graph-encoder entries of `source`, plus a fresh seeded head.
fn initial_store(source: &ParameterStore, hidden: usize, gin: &GinConfig, n_tasks: usize, seed: u64) -> Result<ParameterStore, NnError> {
    let mut store = ParameterStore::new();
    for (name, e) in source.iter().filter(|(n, _)| n.starts_with("gin.")) {
        store.insert(name, e.value.clone(), true)?;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let d = gin.hidden_dim;
    let bound = |i: usize, o: usize| (6.0 / (i + o) as f64).sqrt();
    store.insert_uniform(HEAD[0].0, &[hidden, d], bound(d, hidden), true, &mut rng)?;
    store.insert(HEAD[0].1, Tensor::zeros(&[hidden]), true)?;
    store.insert_uniform(HEAD[1].0, &[n_tasks, hidden], bound(hidden, n_tasks), true, &mut rng)?;
    store.insert(HEAD[1].1, Tensor::zeros(&[n_tasks]), true)?;
    Ok(store)
}

fn standardization(dataset: &MoleculeDataset, train: &[usize]) -> Vec<(f64, f64)> {
    (0..dataset.n_tasks())
        .map(|t| {
            let v: Vec<f64> = train.iter().filter_map(|&i| dataset.records[i].labels[t]).collect();
            let (m, s) = mean_std(&v);
            (m, if s > 1e-12 { s } else { 1.0 })
        })
        .collect()
}

/// Score where larger is better: the metric itself for ROC-AUC, its negation
/// for errors, and the negated loss when the metric is undefined.
fn selection_score(
    model: &FinetunedModel,
    dataset: &MoleculeDataset,
    graphs: &[MolecularGraph],
    valid: &[usize],
    metric: Metric,
) -> Result<(f64, Option<f64>), DownstreamError> {
    let report = evaluate(model, dataset, graphs, valid, metric)?;
    Ok(match report.mean {
        Some(m) if metric.higher_is_better() => (m, Some(m)),
        Some(m) => (-m, Some(m)),
        None => (-model.loss(dataset, graphs, valid)?, None),
    })
}

/// Fine-tune encoder and head for every learning-rate candidate and keep
/// the one with the best validation metric.
pub fn finetune(
    encoder: &ParameterStore,
    gin: &GinConfig,
    dataset: &MoleculeDataset,
    split: &SplitAssignment,
    cfg: &FinetuneConfig,
    seed: u64,
) -> Result<FinetuneOutcome, DownstreamError> {
    cfg.validate()?;
    dataset.validate()?;
    if split.train.is_empty() {
        return Err(DownstreamError::Config("training split is empty".into()));
    }
    for (t, task) in dataset.task_names.iter().enumerate() {
        if split.train.iter().all(|&i| dataset.records[i].labels[t].is_none()) {
            return Err(DownstreamError::UnlabelledTask { task: task.clone() });
        }
    }
    let graphs = dataset.graphs()?;
    let metric = cfg.metric_for(dataset.task_type);
    let valid: &[usize] = if split.valid.is_empty() { &split.train } else { &split.valid };
    let std = match dataset.task_type {
        TaskType::Regression => Some(standardization(dataset, &split.train)),
        TaskType::Classification => None,
    };

    let mut best: Option<(f64, FinetunedModel, f64)> = None;
    let mut candidates = Vec::new();
    for &lr in &cfg.lr_candidates {
        let mut model = FinetunedModel {
            store: initial_store(encoder, cfg.head_hidden, gin, dataset.n_tasks(), seed)?,
            gin: gin.clone(),
            task_type: dataset.task_type,
            n_tasks: dataset.n_tasks(),
            standardization: std.clone(),
        };
        let initial_val_loss = model.loss(dataset, &graphs, valid)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(17));
        let mut adam = AdamState::new();
        let mut order = split.train.clone();
        let mut best_run: Option<(f64, Option<f64>, usize, ParameterStore)> = None;
        let mut since_best = 0;
        let mut epochs_run = 0;
        for epoch in 0..cfg.max_epochs {
            order.shuffle(&mut rng);
            for chunk in order.chunks(cfg.batch_size) {
                let gs: Vec<&MolecularGraph> = chunk.iter().map(|&i| &graphs[i]).collect();
                let (targets, mask) = model.targets(dataset, chunk);
                let mut tape = Tape::new();
                let y = model.outputs(&mut tape, &gs)?;
                let l = model.loss_on_tape(&mut tape, y, &targets, &mask)?;
                let grads = tape.backward(l)?;
                model.store.accumulate(&grads)?;
                adam_step(&mut model.store, &mut adam, lr);
            }
            epochs_run = epoch + 1;
            let (score, value) = selection_score(&model, dataset, &graphs, valid, metric)?;
            if best_run.as_ref().is_none_or(|(s, ..)| score > *s) {
                best_run = Some((score, value, epoch, model.store.clone()));
                since_best = 0;
            } else {
                since_best += 1;
                if since_best >= cfg.patience {
                    break;
                }
            }
        }
        let (score, value, best_epoch) = match best_run {
            Some((s, v, e, store)) => {
                model.store = store;
                (s, v, e)
            }
            None => {
                let (s, v) = selection_score(&model, dataset, &graphs, valid, metric)?;
                (s, v, 0)
            }
        };
        candidates.push(CandidateRun { lr, initial_val_loss, best_val_metric: value, best_epoch, epochs_run });
        if best.as_ref().is_none_or(|(s, ..)| score > *s) {
            best = Some((score, model, lr));
        }
    }
    let (_, model, best_lr) = best.expect("at least one candidate");
    Ok(FinetuneOutcome { model, best_lr, candidates })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricRow {
    pub dataset: String,
    pub task: String,
    pub metric: String,
    pub value: f64,
    pub seed: u64,
}

/// Per-task rows followed by an `average` row.
pub fn metric_rows(dataset: &str, report: &EvalReport, seed: u64) -> Vec<MetricRow> {
    let mut rows: Vec<MetricRow> = report
        .per_task
        .iter()
        .filter_map(|s| {
            s.value.map(|value| MetricRow {
                dataset: dataset.to_string(),
                task: s.task.clone(),
                metric: report.metric.name().to_string(),
                value,
                seed,
            })
        })
        .collect();
    if let Some(mean) = report.mean {
        rows.push(MetricRow {
            dataset: dataset.to_string(),
            task: "average".into(),
            metric: report.metric.name().to_string(),
            value: mean,
            seed,
        });
    }
    rows
}

pub fn write_metrics_csv(rows: &[MetricRow], out: impl Write) -> Result<(), DownstreamError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["dataset", "task", "metric", "value", "seed"]).map_err(std::io::Error::other)?;
    for r in rows {
        w.write_record([r.dataset.clone(), r.task.clone(), r.metric.clone(), format!("{:.10}", r.value), r.seed.to_string()])
            .map_err(std::io::Error::other)?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn auc_examples() {
        assert_eq!(roc_auc(&[0.9, 0.8, 0.1], &[true, true, false]).unwrap(), 1.0);
        assert_eq!(roc_auc(&[0.3; 4], &[true, false, true, false]).unwrap(), 0.5);
        assert!(roc_auc(&[0.1, 0.2], &[true, true]).is_err());
        assert_eq!(roc_auc(&[0.1, 0.9], &[true, false]).unwrap(), 0.0);
    }

    #[test]
    fn error_metrics() {
        let t = [1.0, -2.0, 3.5];
        assert_eq!(rmse(&t, &t).unwrap(), 0.0);
        assert_eq!(mae(&t, &t).unwrap(), 0.0);
        let shifted: Vec<f64> = t.iter().map(|v| v + 1.0).collect();
        assert_eq!(rmse(&shifted, &t).unwrap(), 1.0);
        assert_eq!(mae(&shifted, &t).unwrap(), 1.0);
        assert!(rmse(&t, &t[..2]).is_err());
    }

    #[test]
    fn mean_and_std() {
        let (m, s) = mean_std(&[0.7, 0.8, 0.9]);
        assert!((m - 0.8).abs() < 1e-15);
        assert!((s - (0.02f64 / 3.0).sqrt()).abs() < 1e-15);
    }
}

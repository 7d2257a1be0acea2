use std::collections::BTreeMap;

use lardo_chem::{murcko_scaffold, parse_smiles};
use lardo_core::downstream::{
    evaluate, finetune, mae, mean_std, metric_rows, rmse, roc_auc, scaffold_split, write_metrics_csv, DownstreamError,
    FinetuneConfig, Metric, MoleculeDataset, Record, SplitAssignment,
};
use lardo_core::encoders::{init_params, EncoderConfig, GinConfig, ProjectionConfig, Readout, TextEncoderConfig};
use lardo_core::TaskType;
use proptest::prelude::*;

fn dataset(smiles: &[String], labels: Vec<Vec<Option<f64>>>, task: TaskType) -> MoleculeDataset {
    let n_tasks = labels[0].len();
    MoleculeDataset {
        name: "toy".into(),
        task_type: task,
        task_names: (0..n_tasks).map(|t| format!("t{t}")).collect(),
        records: smiles.iter().zip(labels).map(|(s, l)| Record { smiles: s.clone(), labels: l }).collect(),
    }
}

fn varied_smiles() -> Vec<String> {
    let cores = ["c1ccccc1", "C1CCCCC1", "c1ccncc1", "C1CCOC1", "c1ccc2ccccc2c1", "C1CC1", "c1ccsc1", "C1CCNCC1"];
    let tails = ["", "C", "CC", "O", "N", "CO", "CCC", "C(=O)O", "Cl", "CCN"];
    let mut out = Vec::new();
    for (i, core) in cores.iter().enumerate() {
        for tail in tails.iter().take(3 + i) {
            out.push(format!("{tail}{core}"));
        }
    }
    for k in 1..8 {
        out.push("C".repeat(k) + "O");
    }
    out
}

fn check_split(ds: &MoleculeDataset, s: &SplitAssignment) {
    let mut owner = BTreeMap::new();
    for (p, part) in [&s.train, &s.valid, &s.test].iter().enumerate() {
        for &i in part.iter() {
            let key = murcko_scaffold(&parse_smiles(&ds.records[i].smiles).unwrap());
            assert_eq!(*owner.entry(key).or_insert(p), p, "scaffold crosses partitions");
        }
    }
    let mut all: Vec<usize> = s.train.iter().chain(&s.valid).chain(&s.test).copied().collect();
    all.sort_unstable();
    assert_eq!(all, (0..ds.records.len()).collect::<Vec<_>>());
}

#[test]
fn scaffold_split_keeps_groups_whole() {
    let smiles = varied_smiles();
    let labels = vec![vec![Some(1.0)]; smiles.len()];
    let ds = dataset(&smiles, labels, TaskType::Classification);
    let a = scaffold_split(&ds, [0.8, 0.1, 0.1], 0).unwrap();
    check_split(&ds, &a);
    assert_eq!(a, scaffold_split(&ds, [0.8, 0.1, 0.1], 0).unwrap());
    assert!(a.train.len() > a.valid.len());
}

#[test]
fn split_rejects_bad_input() {
    let ds = dataset(&["C1CC1".to_string(), "C1CC".to_string()], vec![vec![Some(0.0)]; 2], TaskType::Classification);
    assert!(matches!(scaffold_split(&ds, [0.8, 0.1, 0.1], 0), Err(DownstreamError::Record { index: 1, .. })));
    let ok = dataset(&["C".to_string()], vec![vec![Some(0.0)]], TaskType::Classification);
    assert!(scaffold_split(&ok, [-1.0, 1.0, 1.0], 0).is_err());
    assert!(scaffold_split(&ok, [0.0, 0.0, 0.0], 0).is_err());
}

fn brute_auc(scores: &[f64], labels: &[bool]) -> f64 {
    let mut wins = 0.0;
    let mut pairs = 0.0;
    for (i, &li) in labels.iter().enumerate() {
        for (j, &lj) in labels.iter().enumerate() {
            if li && !lj {
                pairs += 1.0;
                wins += if scores[i] > scores[j] {
                    1.0
                } else if scores[i] == scores[j] {
                    0.5
                } else {
                    0.0
                };
            }
        }
    }
    wins / pairs
}

proptest! {
    #[test]
    fn auc_equals_pair_counting(data in prop::collection::vec((0u8..6, any::<bool>()), 2..20)) {
        let scores: Vec<f64> = data.iter().map(|(s, _)| f64::from(*s) / 5.0).collect();
        let labels: Vec<bool> = data.iter().map(|(_, l)| *l).collect();
        let both = labels.iter().any(|&l| l) && labels.iter().any(|&l| !l);
        match roc_auc(&scores, &labels) {
            Ok(v) => { prop_assert!(both); prop_assert_eq!(v, brute_auc(&scores, &labels)); }
            Err(_) => prop_assert!(!both),
        }
    }

    #[test]
    fn error_metrics_match_arithmetic(pairs in prop::collection::vec((-1e3f64..1e3, -1e3f64..1e3), 1..30)) {
        let (p, t): (Vec<f64>, Vec<f64>) = pairs.iter().copied().unzip();
        let n = p.len() as f64;
        let mse: f64 = pairs.iter().map(|(a, b)| (a - b).powi(2)).sum::<f64>() / n;
        let abs: f64 = pairs.iter().map(|(a, b)| (a - b).abs()).sum::<f64>() / n;
        prop_assert!((rmse(&p, &t).unwrap() - mse.sqrt()).abs() <= 1e-12 * mse.sqrt().max(1.0));
        prop_assert!((mae(&p, &t).unwrap() - abs).abs() <= 1e-12 * abs.max(1.0));
    }
}

fn gin(hidden: usize) -> GinConfig {
    GinConfig { layers: 2, hidden_dim: hidden, epsilon: 0.0, readout: Readout::Mean }
}

fn encoder(hidden: usize, seed: u64) -> lardo_nn::ParameterStore {
    let cfg = EncoderConfig {
        gin: gin(hidden),
        text: TextEncoderConfig { vocab_buckets: 16, embed_dim: 4, output_dim: 4, body_trainable: false, head_trainable: true },
        projection: ProjectionConfig { joint_dim: 4, normalize: true },
    };
    init_params(&cfg, seed).unwrap()
}

/// Label 1 when the molecule contains nitrogen: separable from the atom
/// embeddings alone.
fn nitrogen_task() -> MoleculeDataset {
    let smiles: Vec<String> = ["CCO", "CCN", "CCCO", "CCCN", "OCCO", "NCCN", "c1ccccc1", "c1ccncc1", "CC(=O)O", "CC(=O)N", "COC", "CNC"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    let labels = smiles.iter().map(|s| vec![Some(if s.contains('N') || s.contains('n') { 1.0 } else { 0.0 })]).collect();
    dataset(&smiles, labels, TaskType::Classification)
}

fn everything(n: usize) -> SplitAssignment {
    SplitAssignment { train: (0..n).collect(), valid: (0..n).collect(), test: (0..n).collect(), ratios: [1.0, 0.0, 0.0], seed: 0 }
}

#[test]
fn separable_task_reaches_perfect_auc() {
    let ds = nitrogen_task();
    let split = everything(ds.records.len());
    let cfg = FinetuneConfig { lr_candidates: vec![5e-3], max_epochs: 100, batch_size: 4, patience: 100, head_hidden: 8, ..Default::default() };
    let out = finetune(&encoder(8, 1), &gin(8), &ds, &split, &cfg, 1).unwrap();
    let graphs = ds.graphs().unwrap();
    let report = evaluate(&out.model, &ds, &graphs, &split.train, Metric::RocAuc).unwrap();
    assert_eq!(report.mean, Some(1.0));
    assert_eq!(out.candidates.len(), 1);
}

#[test]
fn initialization_changes_initial_loss() {
    let ds = nitrogen_task();
    let split = everything(ds.records.len());
    let cfg = FinetuneConfig { lr_candidates: vec![1e-3], max_epochs: 1, batch_size: 4, head_hidden: 8, ..Default::default() };
    let a = finetune(&encoder(8, 1), &gin(8), &ds, &split, &cfg, 7).unwrap();
    let b = finetune(&encoder(8, 2), &gin(8), &ds, &split, &cfg, 7).unwrap();
    let c = finetune(&encoder(8, 1), &gin(8), &ds, &split, &cfg, 7).unwrap();
    assert_ne!(a.candidates[0].initial_val_loss, b.candidates[0].initial_val_loss);
    assert_eq!(a.candidates, c.candidates);
}

#[test]
fn regression_with_missing_labels() {
    let smiles: Vec<String> = ["C", "CC", "CCC", "CCCC", "CCCCC", "CCCCCC", "CO", "CCO"].iter().map(|s| s.to_string()).collect();
    let labels: Vec<Vec<Option<f64>>> = smiles
        .iter()
        .enumerate()
        .map(|(i, s)| vec![Some(10.0 * s.len() as f64), if i % 2 == 0 { Some(1.0) } else { None }])
        .collect();
    let ds = MoleculeDataset { task_type: TaskType::Regression, ..dataset(&smiles, labels, TaskType::Regression) };
    let split = everything(smiles.len());
    let cfg = FinetuneConfig { lr_candidates: vec![1e-3, 1e-2], max_epochs: 40, batch_size: 4, patience: 40, head_hidden: 8, ..Default::default() };
    let out = finetune(&encoder(8, 3), &gin(8), &ds, &split, &cfg, 3).unwrap();
    assert_eq!(out.candidates.len(), 2);
    let std = out.model.standardization.as_ref().unwrap();
    assert_eq!(std[1], (1.0, 1.0)); // constant task keeps unit scale
    let graphs = ds.graphs().unwrap();
    let report = evaluate(&out.model, &ds, &graphs, &split.train, Metric::Rmse).unwrap();
    assert!(report.per_task.iter().all(|s| s.value.is_some()));
    assert!(report.per_task[0].value.unwrap() < mean_std(&[10.0, 20.0, 30.0, 40.0, 50.0, 60.0, 20.0, 30.0]).1);
}

#[test]
fn unlabelled_task_is_an_error() {
    let smiles: Vec<String> = ["C", "CC", "CCC"].iter().map(|s| s.to_string()).collect();
    let labels = vec![vec![Some(0.0), None], vec![Some(1.0), None], vec![Some(1.0), Some(0.0)]];
    let ds = dataset(&smiles, labels, TaskType::Classification);
    let split = SplitAssignment { train: vec![0, 1], valid: vec![2], test: vec![2], ratios: [0.8, 0.1, 0.1], seed: 0 };
    let err = finetune(&encoder(4, 0), &gin(4), &ds, &split, &FinetuneConfig::default(), 0).unwrap_err();
    assert!(matches!(err, DownstreamError::UnlabelledTask { ref task } if task == "t1"), "{err}");
}

#[test]
fn single_class_tasks_are_flagged() {
    let ds = nitrogen_task();
    let split = everything(ds.records.len());
    let cfg = FinetuneConfig { lr_candidates: vec![1e-3], max_epochs: 1, head_hidden: 4, ..Default::default() };
    let out = finetune(&encoder(4, 0), &gin(4), &ds, &split, &cfg, 0).unwrap();
    let graphs = ds.graphs().unwrap();
    let report = evaluate(&out.model, &ds, &graphs, &[0, 2], Metric::RocAuc).unwrap();
    assert_eq!(report.mean, None);
    assert!(report.per_task[0].note.is_some());
}

#[test]
fn metrics_csv_layout() {
    let ds = nitrogen_task();
    let split = everything(ds.records.len());
    let cfg = FinetuneConfig { lr_candidates: vec![1e-3], max_epochs: 2, head_hidden: 4, ..Default::default() };
    let out = finetune(&encoder(4, 0), &gin(4), &ds, &split, &cfg, 0).unwrap();
    let graphs = ds.graphs().unwrap();
    let report = evaluate(&out.model, &ds, &graphs, &split.test, Metric::RocAuc).unwrap();
    let mut buf = Vec::new();
    write_metrics_csv(&metric_rows("toy", &report, 42), &mut buf).unwrap();
    let text = String::from_utf8(buf).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "dataset,task,metric,value,seed");
    assert!(lines[1].starts_with("toy,t0,ROC-AUC,"));
    assert!(lines[2].starts_with("toy,average,ROC-AUC,") && lines[2].ends_with(",42"));
}

#[test]
fn population_std() {
    assert_eq!(mean_std(&[2.0, 4.0, 4.0, 4.0, 5.0, 5.0, 7.0, 9.0]), (5.0, 2.0));
    assert_eq!(mean_std(&[3.0]), (3.0, 0.0));
}

//! Symmetric InfoNCE between graph and text embeddings and the pretraining
//! loop that minimizes it.

use std::io::Write;

use lardo_chem::MolecularGraph;
use lardo_nn::{adam_step, AdamState, Decay, LrSchedule, NnError, ParameterStore, Tape, Tensor, Var};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::encoders::{embed_pairs, tokenize, EncoderConfig, GraphBatch};

#[derive(Debug, Error)]
pub enum AlignmentError {
    #[error("temperature must be positive, got {0}")]
    Temperature(f64),
    #[error("need at least {needed} pairs, got {got}")]
    TooFewPairs { needed: usize, got: usize },
    #[error("epoch {epoch}, batch {batch}: {source}")]
    Training {
        epoch: usize,
        batch: usize,
        #[source]
        source: NnError,
    },
    #[error(transparent)]
    Nn(#[from] NnError),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("history i/o: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AlignmentConfig {
    pub temperature: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub warmup_epochs: usize,
    pub base_lr: f64,
    pub cosine_decay: bool,
    pub validation_fraction: f64,
}

impl Default for AlignmentConfig {
    fn default() -> Self {
        AlignmentConfig {
            temperature: 0.1,
            batch_size: 32,
            epochs: 100,
            warmup_epochs: 10,
            base_lr: 0.005,
            cosine_decay: true,
            validation_fraction: 0.1,
        }
    }
}

impl AlignmentConfig {
    pub fn schedule(&self) -> Result<LrSchedule, NnError> {
        let decay = if self.cosine_decay { Decay::Cosine } else { Decay::Constant };
        LrSchedule::new(self.base_lr, self.warmup_epochs, self.epochs, decay)
    }

    pub fn validate(&self) -> Result<(), AlignmentError> {
        if !(self.temperature > 0.0 && self.temperature.is_finite()) {
            return Err(AlignmentError::Temperature(self.temperature));
        }
        if self.batch_size == 0 {
            return Err(AlignmentError::Config("batch_size must be at least 1".into()));
        }
        if !(0.0..1.0).contains(&self.validation_fraction) {
            return Err(AlignmentError::Config("validation_fraction must lie in [0, 1)".into()));
        }
        self.schedule()?;
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossReport {
    pub loss_g: f64,
    pub loss_t: f64,
    pub loss: f64,
    pub retrieval_acc_g2t: f64,
    pub retrieval_acc_t2g: f64,
}

/// `(Hg_i · Ht_j) / τ`.
pub fn similarity_logits(hg: &Tensor, ht: &Tensor, temperature: f64) -> Result<Tensor, AlignmentError> {
    if temperature.is_nan() || temperature <= 0.0 {
        return Err(AlignmentError::Temperature(temperature));
    }
    if hg.shape() != ht.shape() {
        return Err(NnError::ShapeMismatch { op: "similarity_logits", left: hg.shape().to_vec(), right: ht.shape().to_vec() }.into());
    }
    let mut tape = Tape::new();
    let (g, t) = (tape.constant(hg.clone())?, tape.constant(ht.clone())?);
    let s = tape.matmul_nt(g, t)?;
    let s = tape.scale(s, 1.0 / temperature)?;
    Ok(tape.value(s).clone())
}

/// Loss terms on the tape: `(L, L_g, L_t)` with `L = (L_g + L_t) / 2`.
pub fn info_nce(tape: &mut Tape, zg: Var, zt: Var, temperature: f64) -> Result<(Var, Var, Var), NnError> {
    let logits = tape.matmul_nt(zg, zt)?;
    let logits = tape.scale(logits, 1.0 / temperature)?;
    let rows = tape.log_softmax_rows(logits)?;
    let dg = tape.diag(rows)?;
    let mg = tape.mean(dg)?;
    let loss_g = tape.scale(mg, -1.0)?;
    let transposed = tape.transpose(logits)?;
    let cols = tape.log_softmax_rows(transposed)?;
    let dt = tape.diag(cols)?;
    let mt = tape.mean(dt)?;
    let loss_t = tape.scale(mt, -1.0)?;
    let total = tape.add(loss_g, loss_t)?;
    let loss = tape.scale(total, 0.5)?;
    Ok((loss, loss_g, loss_t))
}

pub fn symmetric_info_nce(hg: &Tensor, ht: &Tensor, temperature: f64) -> Result<LossReport, AlignmentError> {
    if temperature.is_nan() || temperature <= 0.0 {
        return Err(AlignmentError::Temperature(temperature));
    }
    if hg.shape() != ht.shape() || hg.rows() == 0 {
        return Err(NnError::ShapeMismatch { op: "symmetric_info_nce", left: hg.shape().to_vec(), right: ht.shape().to_vec() }.into());
    }
    let mut tape = Tape::new();
    let (g, t) = (tape.constant(hg.clone())?, tape.constant(ht.clone())?);
    let (l, lg, lt) = info_nce(&mut tape, g, t, temperature)?;
    let (g2t, t2g) = retrieval_accuracy(hg, ht);
    Ok(LossReport {
        loss_g: tape.value(lg).item(),
        loss_t: tape.value(lt).item(),
        loss: tape.value(l).item(),
        retrieval_acc_g2t: g2t,
        retrieval_acc_t2g: t2g,
    })
}

/// Fraction of rows whose own partner strictly beats every other candidate;
/// ties count as misses.
pub fn retrieval_accuracy(hg: &Tensor, ht: &Tensor) -> (f64, f64) {
    let n = hg.rows();
    if n == 0 {
        return (0.0, 0.0);
    }
    let dot = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>();
    let sim: Vec<Vec<f64>> = (0..n).map(|i| (0..n).map(|j| dot(hg.row(i), ht.row(j))).collect()).collect();
    let hit_row = |i: usize| (0..n).all(|j| j == i || sim[i][i] > sim[i][j]);
    let hit_col = |j: usize| (0..n).all(|i| i == j || sim[j][j] > sim[i][j]);
    let g2t = (0..n).filter(|&i| hit_row(i)).count() as f64 / n as f64;
    let t2g = (0..n).filter(|&j| hit_col(j)).count() as f64 / n as f64;
    (g2t, t2g)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub lr: f64,
    pub train_loss: f64,
    pub val_loss: f64,
    pub train_acc_g2t: f64,
    pub train_acc_t2g: f64,
    pub val_acc_g2t: f64,
    pub val_acc_t2g: f64,
}

#[derive(Debug, Clone)]
pub struct PretrainOutcome {
    /// Parameters at the epoch with the lowest validation loss.
    pub best: ParameterStore,
    pub best_epoch: usize,
    pub best_val_loss: f64,
    pub history: Vec<EpochRecord>,
    pub train_indices: Vec<usize>,
    pub val_indices: Vec<usize>,
}

/// Graph and tokenized text for every pair.
pub struct PairSet<'a> {
    pub graphs: Vec<&'a MolecularGraph>,
    pub tokens: Vec<Vec<usize>>,
}

impl<'a> PairSet<'a> {
    pub fn new(pairs: &'a [(MolecularGraph, String)], cfg: &EncoderConfig) -> Self {
        PairSet {
            graphs: pairs.iter().map(|(g, _)| g).collect(),
            tokens: pairs.iter().map(|(_, t)| tokenize(t, cfg.text.vocab_buckets)).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.graphs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.graphs.is_empty()
    }

    fn batch(&self, idx: &[usize]) -> Result<(GraphBatch, Vec<Vec<usize>>), NnError> {
        let graphs: Vec<&MolecularGraph> = idx.iter().map(|&i| self.graphs[i]).collect();
        Ok((GraphBatch::new(&graphs)?, idx.iter().map(|&i| self.tokens[i].clone()).collect()))
    }
}

/// Joint-space embeddings `(Zg, Zt)` for the given pairs.
pub fn embed(store: &ParameterStore, pairs: &PairSet, idx: &[usize], cfg: &EncoderConfig) -> Result<(Tensor, Tensor), NnError> {
    let (graphs, tokens) = pairs.batch(idx)?;
    let mut tape = Tape::new();
    let (zg, zt) = embed_pairs(&mut tape, store, &graphs, &tokens, cfg)?;
    Ok((tape.value(zg).clone(), tape.value(zt).clone()))
}

/// Consecutive chunks of `size`; a short remainder joins the last chunk.
pub fn eval_chunks(idx: &[usize], size: usize) -> Vec<&[usize]> {
    if idx.len() <= size {
        return if idx.is_empty() { Vec::new() } else { vec![idx] };
    }
    let full = idx.len() / size;
    (0..full).map(|k| if k + 1 == full { &idx[k * size..] } else { &idx[k * size..(k + 1) * size] }).collect()
}

/// Mean loss report over evaluation chunks.
pub fn evaluate(
    store: &ParameterStore,
    pairs: &PairSet,
    idx: &[usize],
    enc: &EncoderConfig,
    cfg: &AlignmentConfig,
) -> Result<LossReport, AlignmentError> {
    let chunks = eval_chunks(idx, cfg.batch_size);
    let mut acc = LossReport { loss_g: 0.0, loss_t: 0.0, loss: 0.0, retrieval_acc_g2t: 0.0, retrieval_acc_t2g: 0.0 };
    for chunk in &chunks {
        let (zg, zt) = embed(store, pairs, chunk, enc)?;
        let r = symmetric_info_nce(&zg, &zt, cfg.temperature)?;
        acc.loss_g += r.loss_g;
        acc.loss_t += r.loss_t;
        acc.loss += r.loss;
        acc.retrieval_acc_g2t += r.retrieval_acc_g2t;
        acc.retrieval_acc_t2g += r.retrieval_acc_t2g;
    }
    let k = chunks.len().max(1) as f64;
    Ok(LossReport {
        loss_g: acc.loss_g / k,
        loss_t: acc.loss_t / k,
        loss: acc.loss / k,
        retrieval_acc_g2t: acc.retrieval_acc_g2t / k,
        retrieval_acc_t2g: acc.retrieval_acc_t2g / k,
    })
}

/// Seeded shuffle, then the first `round(fraction·n)` indices (at least one)
/// become the validation slice.
pub fn validation_split(n: usize, fraction: f64, seed: u64) -> (Vec<usize>, Vec<usize>) {
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let n_val = ((fraction * n as f64).round() as usize).clamp(1, n.saturating_sub(1).max(1));
    let val = idx[..n_val].to_vec();
    let train = idx[n_val..].to_vec();
    (train, val)
}

/// Contrastive pretraining. Per epoch: seeded shuffle, full batches only,
/// Adam at the scheduled rate, then validation; the snapshot with the lowest
/// validation loss is kept.
pub fn pretrain(
    pairs: &[(MolecularGraph, String)],
    enc: &EncoderConfig,
    cfg: &AlignmentConfig,
    params: ParameterStore,
    seed: u64,
) -> Result<PretrainOutcome, AlignmentError> {
    cfg.validate()?;
    if pairs.len() < 2 {
        return Err(AlignmentError::TooFewPairs { needed: 2, got: pairs.len() });
    }
    let set = PairSet::new(pairs, enc);
    let (mut train, val) = validation_split(pairs.len(), cfg.validation_fraction, seed);
    let train_indices = train.clone();
    // A training set smaller than one batch trains as a single batch.
    let batch_size = cfg.batch_size.min(train.len());
    let schedule = cfg.schedule()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(1));
    let mut store = params;
    let mut adam = AdamState::new();
    let mut history = Vec::with_capacity(cfg.epochs);
    let mut best: Option<(usize, f64, ParameterStore)> = None;

    for epoch in 0..cfg.epochs {
        let lr = schedule.lr_at(epoch)?;
        train.shuffle(&mut rng);
        let (mut loss_sum, mut g2t_sum, mut t2g_sum, mut batches) = (0.0, 0.0, 0.0, 0usize);
        for (b, chunk) in train.chunks_exact(batch_size).enumerate() {
            let wrap = |source| AlignmentError::Training { epoch, batch: b, source };
            let (graphs, tokens) = set.batch(chunk).map_err(wrap)?;
            let mut tape = Tape::new();
            let (zg, zt) = embed_pairs(&mut tape, &store, &graphs, &tokens, enc).map_err(wrap)?;
            let (loss, _, _) = info_nce(&mut tape, zg, zt, cfg.temperature).map_err(wrap)?;
            let grads = tape.backward(loss).map_err(wrap)?;
            store.accumulate(&grads).map_err(wrap)?;
            adam_step(&mut store, &mut adam, lr);
            let (g2t, t2g) = retrieval_accuracy(tape.value(zg), tape.value(zt));
            loss_sum += tape.value(loss).item();
            g2t_sum += g2t;
            t2g_sum += t2g;
            batches += 1;
        }
        let v = evaluate(&store, &set, &val, enc, cfg)?;
        if !v.loss.is_finite() {
            return Err(AlignmentError::Training { epoch, batch: 0, source: NnError::NonFinite { op: "validation" } });
        }
        let k = batches.max(1) as f64;
        history.push(EpochRecord {
            epoch,
            lr,
            train_loss: loss_sum / k,
            val_loss: v.loss,
            train_acc_g2t: g2t_sum / k,
            train_acc_t2g: t2g_sum / k,
            val_acc_g2t: v.retrieval_acc_g2t,
            val_acc_t2g: v.retrieval_acc_t2g,
        });
        if best.as_ref().is_none_or(|(_, l, _)| v.loss < *l) {
            best = Some((epoch, v.loss, store.clone()));
        }
    }
    let (best_epoch, best_val_loss, mut best_store) = match best {
        Some(b) => b,
        None => (0, f64::NAN, store),
    };
    best_store.zero_grad();
    Ok(PretrainOutcome { best: best_store, best_epoch, best_val_loss, history, train_indices, val_indices: val })
}

pub fn write_history_csv(history: &[EpochRecord], out: impl Write) -> Result<(), AlignmentError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["epoch", "lr", "train_L", "val_L", "train_acc_g2t", "train_acc_t2g", "val_acc_g2t", "val_acc_t2g"])
        .map_err(std::io::Error::other)?;
    for r in history {
        w.write_record([
            r.epoch.to_string(),
            format!("{:.10e}", r.lr),
            format!("{:.10}", r.train_loss),
            format!("{:.10}", r.val_loss),
            format!("{:.6}", r.train_acc_g2t),
            format!("{:.6}", r.train_acc_t2g),
            format!("{:.6}", r.val_acc_g2t),
            format!("{:.6}", r.val_acc_t2g),
        ])
        .map_err(std::io::Error::other)?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_pair_has_zero_loss() {
        let h = Tensor::matrix(1, 3, vec![0.6, 0.0, 0.8]).unwrap();
        let r = symmetric_info_nce(&h, &h, 0.1).unwrap();
        assert_eq!((r.loss_g, r.loss_t, r.loss), (0.0, 0.0, 0.0));
    }

    #[test]
    fn logits_scale_with_temperature() {
        let eye = Tensor::matrix(2, 2, vec![1.0, 0.0, 0.0, 1.0]).unwrap();
        assert_eq!(similarity_logits(&eye, &eye, 1.0).unwrap(), eye);
        let half = similarity_logits(&eye, &eye, 0.5).unwrap();
        assert_eq!(half.data(), &[2.0, 0.0, 0.0, 2.0]);
        assert!(similarity_logits(&eye, &eye, 0.0).is_err());
    }

    #[test]
    fn retrieval_tie_rule() {
        let eye = Tensor::matrix(3, 3, vec![1., 0., 0., 0., 1., 0., 0., 0., 1.]).unwrap();
        assert_eq!(retrieval_accuracy(&eye, &eye), (1.0, 1.0));
        let same = Tensor::matrix(3, 2, vec![1.0, 0.0, 1.0, 0.0, 1.0, 0.0]).unwrap();
        assert_eq!(retrieval_accuracy(&same, &same), (0.0, 0.0));
        let one = Tensor::matrix(1, 2, vec![1.0, 0.0]).unwrap();
        assert_eq!(retrieval_accuracy(&one, &one), (1.0, 1.0));
    }

    #[test]
    fn chunking() {
        let idx: Vec<usize> = (0..10).collect();
        let c = eval_chunks(&idx, 4);
        assert_eq!(c.iter().map(|c| c.len()).collect::<Vec<_>>(), vec![4, 6]);
        assert_eq!(eval_chunks(&idx[..3], 4).len(), 1);
        let (train, val) = validation_split(20, 0.1, 3);
        assert_eq!((train.len(), val.len()), (18, 2));
        assert_eq!(validation_split(20, 0.1, 3), (train, val));
    }
}

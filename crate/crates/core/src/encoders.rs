//! Graph encoder (GIN with edge embeddings), hashed-bag text encoder with a
//! frozen body and trainable head, and the projections into the joint space.

use lardo_chem::graph::{ATOM_VOCAB, BOND_DIRECTION_VOCAB, BOND_TYPE_VOCAB, CHIRALITY_VOCAB};
use lardo_chem::MolecularGraph;
use lardo_nn::{NnError, ParameterStore, Tape, Tensor, Var};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Readout {
    Mean,
    Sum,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GinConfig {
    pub layers: usize,
    pub hidden_dim: usize,
    pub epsilon: f64,
    pub readout: Readout,
}

impl Default for GinConfig {
    fn default() -> Self {
        GinConfig { layers: 5, hidden_dim: 256, epsilon: 0.0, readout: Readout::Mean }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TextEncoderConfig {
    pub vocab_buckets: usize,
    pub embed_dim: usize,
    pub output_dim: usize,
    pub body_trainable: bool,
    pub head_trainable: bool,
}

impl Default for TextEncoderConfig {
    fn default() -> Self {
        TextEncoderConfig {
            vocab_buckets: 32768,
            embed_dim: 128,
            output_dim: 256,
            body_trainable: false,
            head_trainable: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ProjectionConfig {
    pub joint_dim: usize,
    pub normalize: bool,
}

impl Default for ProjectionConfig {
    fn default() -> Self {
        ProjectionConfig { joint_dim: 128, normalize: true }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EncoderConfig {
    pub gin: GinConfig,
    pub text: TextEncoderConfig,
    pub projection: ProjectionConfig,
}

impl EncoderConfig {
    pub fn validate(&self) -> Result<(), String> {
        if self.gin.layers == 0 || self.gin.hidden_dim == 0 {
            return Err("gin layers and hidden_dim must be at least 1".into());
        }
        if !self.text.vocab_buckets.is_power_of_two() {
            return Err(format!("vocab_buckets {} is not a power of two", self.text.vocab_buckets));
        }
        if self.text.embed_dim == 0 || self.text.output_dim == 0 || self.projection.joint_dim == 0 {
            return Err("encoder dimensions must be at least 1".into());
        }
        if !self.gin.epsilon.is_finite() {
            return Err("gin epsilon must be finite".into());
        }
        Ok(())
    }
}

pub mod names {
    pub const ATOM_EMBEDDING: &str = "gin.atom_embedding";
    pub const CHIRALITY_EMBEDDING: &str = "gin.chirality_embedding";
    pub const TEXT_EMBEDDING: &str = "text.embedding";
    pub const TEXT_HEAD_WEIGHT: &str = "text.head.weight";
    pub const TEXT_HEAD_BIAS: &str = "text.head.bias";
    pub const PROJ_GRAPH: &str = "proj.graph";
    pub const PROJ_TEXT: &str = "proj.text";

    pub fn layer(l: usize, part: &str) -> String {
        format!("gin.layer{l}.{part}")
    }
}

fn glorot(fan_in: usize, fan_out: usize) -> f64 {
    (6.0 / (fan_in + fan_out) as f64).sqrt()
}

/// Graph-encoder parameters only (used by fine-tuning as well).
pub fn init_graph_encoder(store: &mut ParameterStore, cfg: &GinConfig, rng: &mut ChaCha8Rng) -> Result<(), NnError> {
    let d = cfg.hidden_dim;
    store.insert_uniform(names::ATOM_EMBEDDING, &[ATOM_VOCAB, d], glorot(ATOM_VOCAB, d), true, rng)?;
    store.insert_uniform(names::CHIRALITY_EMBEDDING, &[CHIRALITY_VOCAB, d], glorot(CHIRALITY_VOCAB, d), true, rng)?;
    for l in 0..cfg.layers {
        store.insert_uniform(&names::layer(l, "bond_type"), &[BOND_TYPE_VOCAB, d], glorot(BOND_TYPE_VOCAB, d), true, rng)?;
        store.insert_uniform(
            &names::layer(l, "bond_direction"),
            &[BOND_DIRECTION_VOCAB, d],
            glorot(BOND_DIRECTION_VOCAB, d),
            true,
            rng,
        )?;
        for k in 0..2 {
            store.insert_uniform(&names::layer(l, &format!("mlp{k}.weight")), &[d, d], glorot(d, d), true, rng)?;
            store.insert(&names::layer(l, &format!("mlp{k}.bias")), Tensor::zeros(&[d]), true)?;
        }
    }
    Ok(())
}

/// Every encoder and projection parameter, seeded.
pub fn init_params(cfg: &EncoderConfig, seed: u64) -> Result<ParameterStore, NnError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut store = ParameterStore::new();
    init_graph_encoder(&mut store, &cfg.gin, &mut rng)?;
    let t = &cfg.text;
    // Unit-variance bucket vectors.
    store.insert_uniform(names::TEXT_EMBEDDING, &[t.vocab_buckets, t.embed_dim], 3f64.sqrt(), t.body_trainable, &mut rng)?;
    store.insert_uniform(
        names::TEXT_HEAD_WEIGHT,
        &[t.output_dim, t.embed_dim],
        glorot(t.embed_dim, t.output_dim),
        t.head_trainable,
        &mut rng,
    )?;
    store.insert(names::TEXT_HEAD_BIAS, Tensor::zeros(&[t.output_dim]), t.head_trainable)?;
    let p = cfg.projection.joint_dim;
    store.insert_uniform(names::PROJ_GRAPH, &[p, cfg.gin.hidden_dim], glorot(cfg.gin.hidden_dim, p), true, &mut rng)?;
    store.insert_uniform(names::PROJ_TEXT, &[p, t.output_dim], glorot(t.output_dim, p), true, &mut rng)?;
    Ok(store)
}

/// Several molecular graphs merged into one disjoint graph.
#[derive(Debug, Clone, PartialEq)]
pub struct GraphBatch {
    pub atom_index: Vec<usize>,
    pub chirality_index: Vec<usize>,
    pub src: Vec<usize>,
    pub dst: Vec<usize>,
    pub bond_type_index: Vec<usize>,
    pub bond_direction_index: Vec<usize>,
    pub graph_of_node: Vec<usize>,
    pub graph_sizes: Vec<usize>,
}

impl GraphBatch {
    pub fn new(graphs: &[&MolecularGraph]) -> Result<Self, NnError> {
        let mut b = GraphBatch {
            atom_index: Vec::new(),
            chirality_index: Vec::new(),
            src: Vec::new(),
            dst: Vec::new(),
            bond_type_index: Vec::new(),
            bond_direction_index: Vec::new(),
            graph_of_node: Vec::new(),
            graph_sizes: Vec::with_capacity(graphs.len()),
        };
        for (g, graph) in graphs.iter().enumerate() {
            let n = graph.node_count();
            if n == 0 {
                return Err(NnError::Empty { op: "encode_graph" });
            }
            let offset = b.atom_index.len();
            for f in &graph.node_features {
                b.atom_index.push(f.atomic_number_index);
                b.chirality_index.push(f.chirality_index);
                b.graph_of_node.push(g);
            }
            for (&(u, v), f) in graph.edge_list.iter().zip(&graph.edge_features) {
                if u >= n || v >= n {
                    return Err(NnError::IndexOutOfRange { op: "graph edge", index: u.max(v), len: n });
                }
                b.src.push(offset + u);
                b.dst.push(offset + v);
                b.bond_type_index.push(f.bond_type_index);
                b.bond_direction_index.push(f.bond_direction_index);
            }
            b.graph_sizes.push(n);
        }
        Ok(b)
    }

    pub fn node_count(&self) -> usize {
        self.atom_index.len()
    }
}

/// `m_v = (1+ε)·h_v + Σ_{u→v} relu(h_u + e_uv)`, then
/// linear–relu–linear, then relu unless `last`.
pub fn gin_layer(
    tape: &mut Tape,
    store: &ParameterStore,
    h: Var,
    batch: &GraphBatch,
    layer: usize,
    cfg: &GinConfig,
    last: bool,
) -> Result<Var, NnError> {
    let bond = tape.param(store, &names::layer(layer, "bond_type"))?;
    let dir = tape.param(store, &names::layer(layer, "bond_direction"))?;
    let mut m = if cfg.epsilon == 0.0 { h } else { tape.scale(h, 1.0 + cfg.epsilon)? };
    if !batch.src.is_empty() {
        let eb = tape.gather_rows(bond, &batch.bond_type_index)?;
        let ed = tape.gather_rows(dir, &batch.bond_direction_index)?;
        let e = tape.add(eb, ed)?;
        let hu = tape.gather_rows(h, &batch.src)?;
        let msg = tape.add(hu, e)?;
        let msg = tape.relu(msg)?;
        let agg = tape.scatter_add_rows(msg, &batch.dst, batch.node_count())?;
        m = tape.add(m, agg)?;
    }
    let mut x = m;
    for k in 0..2 {
        let w = tape.param(store, &names::layer(layer, &format!("mlp{k}.weight")))?;
        let b = tape.param(store, &names::layer(layer, &format!("mlp{k}.bias")))?;
        x = tape.matmul_nt(x, w)?;
        x = tape.add_row(x, b)?;
        if k == 0 || !last {
            x = tape.relu(x)?;
        }
    }
    Ok(x)
}

/// Node states after all layers, `nodes × hidden_dim`.
pub fn encode_nodes(tape: &mut Tape, store: &ParameterStore, batch: &GraphBatch, cfg: &GinConfig) -> Result<Var, NnError> {
    if batch.node_count() == 0 {
        return Err(NnError::Empty { op: "encode_graph" });
    }
    let atom = tape.param(store, names::ATOM_EMBEDDING)?;
    let chir = tape.param(store, names::CHIRALITY_EMBEDDING)?;
    let ha = tape.gather_rows(atom, &batch.atom_index)?;
    let hc = tape.gather_rows(chir, &batch.chirality_index)?;
    let mut h = tape.add(ha, hc)?;
    for l in 0..cfg.layers {
        h = gin_layer(tape, store, h, batch, l, cfg, l + 1 == cfg.layers)?;
    }
    Ok(h)
}

/// Pooled graph embeddings, `graphs × hidden_dim`.
pub fn encode_graphs(tape: &mut Tape, store: &ParameterStore, batch: &GraphBatch, cfg: &GinConfig) -> Result<Var, NnError> {
    let h = encode_nodes(tape, store, batch, cfg)?;
    let pooled = tape.scatter_add_rows(h, &batch.graph_of_node, batch.graph_sizes.len())?;
    match cfg.readout {
        Readout::Sum => Ok(pooled),
        Readout::Mean => {
            let inv: Vec<f64> = batch.graph_sizes.iter().map(|&n| 1.0 / n as f64).collect();
            tape.scale_rows(pooled, &inv)
        }
    }
}

/// 64-bit FNV-1a; stable across processes and platforms.
fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

/// Lowercased alphanumeric runs.
pub fn words(text: &str) -> Vec<String> {
    text.to_lowercase()
        .split(|c: char| !c.is_alphanumeric())
        .filter(|w| !w.is_empty())
        .map(str::to_string)
        .collect()
}

pub fn tokenize(text: &str, vocab_buckets: usize) -> Vec<usize> {
    words(text).iter().map(|w| (fnv1a(w.as_bytes()) % vocab_buckets as u64) as usize).collect()
}

/// Mean bucket embedding per token list (zero row for an empty list).
fn bag_features(tape: &mut Tape, store: &ParameterStore, tokens: &[Vec<usize>]) -> Result<Var, NnError> {
    let entry = store.entry(names::TEXT_EMBEDDING)?;
    let inv: Vec<f64> = tokens.iter().map(|t| if t.is_empty() { 0.0 } else { 1.0 / t.len() as f64 }).collect();
    if entry.trainable {
        let table = tape.param(store, names::TEXT_EMBEDDING)?;
        let flat: Vec<usize> = tokens.iter().flatten().copied().collect();
        let owner: Vec<usize> = tokens.iter().enumerate().flat_map(|(i, t)| std::iter::repeat_n(i, t.len())).collect();
        let rows = tape.gather_rows(table, &flat)?;
        let sums = tape.scatter_add_rows(rows, &owner, tokens.len())?;
        return tape.scale_rows(sums, &inv);
    }
    // Frozen body: evaluate outside the tape instead of copying the table.
    let table = &entry.value;
    let dim = table.cols();
    let mut data = vec![0.0; tokens.len() * dim];
    for (i, list) in tokens.iter().enumerate() {
        let row = &mut data[i * dim..(i + 1) * dim];
        for &t in list {
            if t >= table.rows() {
                return Err(NnError::IndexOutOfRange { op: "text embedding", index: t, len: table.rows() });
            }
            for (o, x) in row.iter_mut().zip(table.row(t)) {
                *o += x;
            }
        }
        row.iter_mut().for_each(|v| *v *= inv[i]);
    }
    tape.constant(Tensor::matrix(tokens.len(), dim, data)?)
}

/// Text embeddings, `texts × output_dim`.
pub fn encode_texts(tape: &mut Tape, store: &ParameterStore, tokens: &[Vec<usize>]) -> Result<Var, NnError> {
    let x = bag_features(tape, store, tokens)?;
    let w = tape.param(store, names::TEXT_HEAD_WEIGHT)?;
    let b = tape.param(store, names::TEXT_HEAD_BIAS)?;
    let y = tape.matmul_nt(x, w)?;
    let y = tape.add_row(y, b)?;
    tape.relu(y)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Modality {
    Graph,
    Text,
}

/// `W·h` per row, optionally scaled to unit norm.
pub fn project(
    tape: &mut Tape,
    store: &ParameterStore,
    h: Var,
    which: Modality,
    cfg: &ProjectionConfig,
) -> Result<Var, NnError> {
    let name = match which {
        Modality::Graph => names::PROJ_GRAPH,
        Modality::Text => names::PROJ_TEXT,
    };
    let w = tape.param(store, name)?;
    let z = tape.matmul_nt(h, w)?;
    if cfg.normalize {
        tape.l2_normalize_rows(z)
    } else {
        Ok(z)
    }
}

/// Joint-space embeddings of graphs and texts for one batch.
pub fn embed_pairs(
    tape: &mut Tape,
    store: &ParameterStore,
    graphs: &GraphBatch,
    tokens: &[Vec<usize>],
    cfg: &EncoderConfig,
) -> Result<(Var, Var), NnError> {
    let hg = encode_graphs(tape, store, graphs, &cfg.gin)?;
    let zg = project(tape, store, hg, Modality::Graph, &cfg.projection)?;
    let ht = encode_texts(tape, store, tokens)?;
    let zt = project(tape, store, ht, Modality::Text, &cfg.projection)?;
    Ok((zg, zt))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tokenizer_rules() {
        assert_eq!(words("LogP: 4.635"), vec!["logp", "4", "635"]);
        assert!(tokenize("", 1024).is_empty());
        assert_eq!(tokenize("Molecular weight of CCO", 32768), tokenize("Molecular weight of CCO", 32768));
        assert!(tokenize("a b c", 8).iter().all(|&t| t < 8));
        // reference FNV-1a values
        assert_eq!(fnv1a(b""), 0xcbf29ce484222325);
        assert_eq!(fnv1a(b"a"), 0xaf63dc4c8601ec8c);
    }
}

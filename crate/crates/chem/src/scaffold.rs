//! Bemis–Murcko scaffolds and an atom-order-independent text key for them.
//!
//! Side chains are pruned by repeatedly deleting non-ring atoms of degree at
//! most one. The residual graph is labeled canonically by color refinement;
//! remaining ties are broken by individualizing each candidate of the first
//! tied class and keeping the lexicographically smallest encoding.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::molecule::Molecule;

/// Upper bound on explored leaves of the individualization tree. Only highly
/// symmetric cages get anywhere near it.
const LEAF_BUDGET: usize = 4096;

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Default, Serialize, Deserialize)]
pub struct ScaffoldKey(String);

impl ScaffoldKey {
    pub fn as_str(&self) -> &str {
        &self.0
    }

    /// Acyclic molecules have the empty scaffold.
    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

impl fmt::Display for ScaffoldKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// Residual scaffold graph with local indices.
struct Residual {
    labels: Vec<String>,
    /// (neighbor, bond symbol)
    adjacency: Vec<Vec<(usize, char)>>,
}

pub fn murcko_scaffold(molecule: &Molecule) -> ScaffoldKey {
    let residual = prune(molecule);
    if residual.labels.is_empty() {
        return ScaffoldKey::default();
    }
    ScaffoldKey(canonical_encoding(&residual))
}

fn prune(molecule: &Molecule) -> Residual {
    let n = molecule.atom_count();
    let mut alive = vec![true; n];
    let mut degree: Vec<usize> = (0..n).map(|i| molecule.degree(i)).collect();
    let ring: Vec<bool> = (0..n).map(|i| molecule.is_ring_atom(i)).collect();
    let mut queue: Vec<usize> = (0..n).filter(|&i| !ring[i] && degree[i] <= 1).collect();
    while let Some(v) = queue.pop() {
        if !alive[v] {
            continue;
        }
        alive[v] = false;
        for &(w, _) in molecule.neighbors(v) {
            if alive[w] {
                degree[w] -= 1;
                if !ring[w] && degree[w] <= 1 {
                    queue.push(w);
                }
            }
        }
    }

    let mut local = vec![usize::MAX; n];
    let mut labels = Vec::new();
    for (i, atom) in molecule.atoms().iter().enumerate() {
        if alive[i] {
            local[i] = labels.len();
            let label = if atom.aromatic {
                atom.element.to_ascii_lowercase()
            } else {
                atom.element.clone()
            };
            labels.push(label);
        }
    }
    let mut adjacency = vec![Vec::new(); labels.len()];
    for bond in molecule.bonds() {
        if alive[bond.a] && alive[bond.b] {
            let (a, b) = (local[bond.a], local[bond.b]);
            adjacency[a].push((b, bond.order.symbol()));
            adjacency[b].push((a, bond.order.symbol()));
        }
    }
    Residual { labels, adjacency }
}

/// Replace arbitrary sortable signatures by their dense rank.
fn rank<T: Ord + Clone>(signatures: &[T]) -> Vec<usize> {
    let mut sorted = signatures.to_vec();
    sorted.sort();
    sorted.dedup();
    signatures
        .iter()
        .map(|s| sorted.binary_search(s).unwrap_or_default())
        .collect()
}

fn class_count(colors: &[usize]) -> usize {
    colors.iter().copied().max().map_or(0, |m| m + 1)
}

fn refine(graph: &Residual, mut colors: Vec<usize>) -> Vec<usize> {
    loop {
        let signatures: Vec<(usize, Vec<(char, usize)>)> = (0..colors.len())
            .map(|v| {
                let mut around: Vec<(char, usize)> =
                    graph.adjacency[v].iter().map(|&(w, b)| (b, colors[w])).collect();
                around.sort_unstable();
                (colors[v], around)
            })
            .collect();
        let next = rank(&signatures);
        if class_count(&next) == class_count(&colors) {
            return next;
        }
        colors = next;
    }
}

fn canonical_encoding(graph: &Residual) -> String {
    let initial: Vec<(String, usize)> = graph
        .labels
        .iter()
        .zip(&graph.adjacency)
        .map(|(l, adj)| (l.clone(), adj.len()))
        .collect();
    let colors = refine(graph, rank(&initial));
    let mut best: Option<String> = None;
    let mut leaves = 0;
    search(graph, colors, &mut best, &mut leaves);
    best.unwrap_or_default()
}

fn search(graph: &Residual, colors: Vec<usize>, best: &mut Option<String>, leaves: &mut usize) {
    if *leaves >= LEAF_BUDGET && best.is_some() {
        return;
    }
    // First (lowest-colored) class with more than one member.
    let mut sizes = vec![0usize; class_count(&colors)];
    for &c in &colors {
        sizes[c] += 1;
    }
    let Some(target) = sizes.iter().position(|&s| s > 1) else {
        *leaves += 1;
        let encoding = encode(graph, &colors);
        if best.as_ref().is_none_or(|b| encoding < *b) {
            *best = Some(encoding);
        }
        return;
    };
    for v in (0..colors.len()).filter(|&v| colors[v] == target) {
        let split: Vec<(usize, bool)> = colors
            .iter()
            .enumerate()
            .map(|(w, &c)| (c, !(c == target && w == v)))
            .collect();
        search(graph, refine(graph, rank(&split)), best, leaves);
    }
}

/// Encoding of a discrete coloring: the element/bond multiset, atom labels in
/// canonical order, then the sorted canonical edge list.
fn encode(graph: &Residual, order: &[usize]) -> String {
    let n = order.len();
    let mut by_rank = vec![0usize; n];
    for (v, &r) in order.iter().enumerate() {
        by_rank[r] = v;
    }
    let mut elements: Vec<&str> = graph.labels.iter().map(String::as_str).collect();
    elements.sort_unstable();
    let mut edges = Vec::new();
    for (v, adj) in graph.adjacency.iter().enumerate() {
        for &(w, b) in adj {
            if order[v] < order[w] {
                edges.push((order[v], order[w], b));
            }
        }
    }
    edges.sort_unstable();
    let mut bond_symbols: Vec<char> = edges.iter().map(|e| e.2).collect();
    bond_symbols.sort_unstable();

    let atoms: Vec<&str> = by_rank.iter().map(|&v| graph.labels[v].as_str()).collect();
    let edge_text: Vec<String> = edges.iter().map(|(a, b, s)| format!("{a}{s}{b}")).collect();
    format!(
        "{}|{}|{}|{}",
        elements.join(","),
        bond_symbols.iter().collect::<String>(),
        atoms.join(","),
        edge_text.join(",")
    )
}

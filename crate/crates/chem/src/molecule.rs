//! Atoms, bonds and the molecule graph.

use serde::{Deserialize, Serialize};

use crate::element;
use crate::error::ChemError;

/// Tetrahedral chirality as written in SMILES (`@` is counterclockwise,
/// `@@` clockwise).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
pub enum Chirality {
    #[default]
    None,
    Clockwise,
    CounterClockwise,
}

impl Chirality {
    pub fn index(self) -> usize {
        match self {
            Chirality::None => 0,
            Chirality::Clockwise => 1,
            Chirality::CounterClockwise => 2,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum BondOrder {
    Single,
    Double,
    Triple,
    Aromatic,
}

impl BondOrder {
    pub fn index(self) -> usize {
        match self {
            BondOrder::Single => 0,
            BondOrder::Double => 1,
            BondOrder::Triple => 2,
            BondOrder::Aromatic => 3,
        }
    }

    /// Contribution to an atom's bonded valence. Aromatic bonds count as one.
    pub fn valence(self) -> u32 {
        match self {
            BondOrder::Single | BondOrder::Aromatic => 1,
            BondOrder::Double => 2,
            BondOrder::Triple => 3,
        }
    }

    pub fn symbol(self) -> char {
        match self {
            BondOrder::Single => '-',
            BondOrder::Double => '=',
            BondOrder::Triple => '#',
            BondOrder::Aromatic => ':',
        }
    }
}

/// Cis/trans marker of a single bond, read in the direction `a -> b`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
pub enum BondDirection {
    #[default]
    None,
    Up,
    Down,
}

impl BondDirection {
    pub fn index(self) -> usize {
        match self {
            BondDirection::None => 0,
            BondDirection::Up => 1,
            BondDirection::Down => 2,
        }
    }

    pub fn reversed(self) -> Self {
        match self {
            BondDirection::None => BondDirection::None,
            BondDirection::Up => BondDirection::Down,
            BondDirection::Down => BondDirection::Up,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Atom {
    pub element: String,
    pub atomic_number: u8,
    pub formal_charge: i8,
    pub isotope: Option<u16>,
    pub aromatic: bool,
    pub chirality: Chirality,
    /// Hydrogen count written inside a bracket atom. `None` for organic-subset
    /// atoms, whose hydrogens are implied by valence.
    pub explicit_h: Option<u8>,
}

impl Atom {
    /// Organic-subset atom as written outside brackets.
    pub fn organic(atomic_number: u8, aromatic: bool) -> Self {
        Atom {
            element: element::symbol(atomic_number).unwrap_or("*").to_string(),
            atomic_number,
            formal_charge: 0,
            isotope: None,
            aromatic,
            chirality: Chirality::None,
            explicit_h: None,
        }
    }

    pub fn is_bracket(&self) -> bool {
        self.explicit_h.is_some()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Bond {
    pub a: usize,
    pub b: usize,
    pub order: BondOrder,
    pub direction: BondDirection,
    pub in_ring: bool,
}

impl Bond {
    pub fn other(&self, atom: usize) -> usize {
        if self.a == atom {
            self.b
        } else {
            self.a
        }
    }
}

/// A parsed molecule. Construction validates the bond list and perceives
/// which bonds lie on a ring.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Molecule {
    atoms: Vec<Atom>,
    bonds: Vec<Bond>,
    smiles_source: String,
    /// Per atom: (neighbor atom, bond index).
    adjacency: Vec<Vec<(usize, usize)>>,
}

impl Molecule {
    pub fn new(
        atoms: Vec<Atom>,
        mut bonds: Vec<Bond>,
        smiles_source: impl Into<String>,
    ) -> Result<Self, ChemError> {
        if atoms.is_empty() {
            return Err(ChemError::EmptyMolecule);
        }
        let mut adjacency = vec![Vec::new(); atoms.len()];
        for (i, bond) in bonds.iter().enumerate() {
            if bond.a >= atoms.len() || bond.b >= atoms.len() || bond.a == bond.b {
                return Err(ChemError::InvalidBond { bond: i });
            }
            if bond.direction != BondDirection::None && bond.order != BondOrder::Single {
                return Err(ChemError::InvalidBond { bond: i });
            }
            if adjacency[bond.a].iter().any(|&(n, _)| n == bond.b) {
                return Err(ChemError::InvalidBond { bond: i });
            }
            adjacency[bond.a].push((bond.b, i));
            adjacency[bond.b].push((bond.a, i));
        }
        let ring = ring_bonds(&adjacency, bonds.len());
        for (bond, in_ring) in bonds.iter_mut().zip(ring) {
            bond.in_ring = in_ring;
        }
        Ok(Molecule {
            atoms,
            bonds,
            smiles_source: smiles_source.into(),
            adjacency,
        })
    }

    pub fn atoms(&self) -> &[Atom] {
        &self.atoms
    }

    pub fn bonds(&self) -> &[Bond] {
        &self.bonds
    }

    pub fn smiles_source(&self) -> &str {
        &self.smiles_source
    }

    pub fn atom_count(&self) -> usize {
        self.atoms.len()
    }

    pub fn bond_count(&self) -> usize {
        self.bonds.len()
    }

    /// Neighbors of `atom` as (neighbor index, bond index) pairs.
    pub fn neighbors(&self, atom: usize) -> &[(usize, usize)] {
        &self.adjacency[atom]
    }

    pub fn degree(&self, atom: usize) -> usize {
        self.adjacency[atom].len()
    }

    pub fn is_ring_atom(&self, atom: usize) -> bool {
        self.adjacency[atom]
            .iter()
            .any(|&(_, b)| self.bonds[b].in_ring)
    }

    /// Sum of bond valences around an atom, aromatic bonds counting one.
    pub fn bonded_valence(&self, atom: usize) -> u32 {
        self.adjacency[atom]
            .iter()
            .map(|&(_, b)| self.bonds[b].order.valence())
            .sum()
    }

    pub fn component_count(&self) -> usize {
        let mut seen = vec![false; self.atoms.len()];
        let mut count = 0;
        for start in 0..self.atoms.len() {
            if seen[start] {
                continue;
            }
            count += 1;
            let mut stack = vec![start];
            seen[start] = true;
            while let Some(v) = stack.pop() {
                for &(n, _) in &self.adjacency[v] {
                    if !seen[n] {
                        seen[n] = true;
                        stack.push(n);
                    }
                }
            }
        }
        count
    }

    /// Number of independent rings (cyclomatic number), which equals the size
    /// of the smallest set of smallest rings.
    pub fn ring_count(&self) -> usize {
        self.bonds.len() + self.component_count() - self.atoms.len()
    }

    /// Hydrogens implied on an atom: the bracket count for bracket atoms,
    /// otherwise filled up to the lowest normal valence that accommodates the
    /// bonded valence. Aromatic atoms reserve one extra valence for the
    /// aromatic system and are clamped at zero against their lowest normal
    /// valence, so pyrrole-type `n`, `o` and `s` carry no implicit hydrogen.
    pub fn implicit_hydrogens(&self, atom: usize) -> Result<u32, ChemError> {
        let a = self
            .atoms
            .get(atom)
            .ok_or(ChemError::AtomIndex { index: atom, len: self.atoms.len() })?;
        if let Some(h) = a.explicit_h {
            return Ok(u32::from(h));
        }
        let valences = element::normal_valences(a.atomic_number);
        let bonded = self.bonded_valence(atom);
        if a.aromatic {
            let lowest = valences.first().copied().unwrap_or(0);
            return Ok(lowest.saturating_sub(bonded + 1));
        }
        Ok(valences
            .iter()
            .find(|&&v| v >= bonded)
            .map_or(0, |&v| v - bonded))
    }

    /// Hydrogens attached to an atom, counting implicit ones and explicit
    /// hydrogen atoms in the graph.
    pub fn total_hydrogens(&self, atom: usize) -> Result<u32, ChemError> {
        let implicit = self.implicit_hydrogens(atom)?;
        let explicit = self.adjacency[atom]
            .iter()
            .filter(|&&(n, _)| self.atoms[n].atomic_number == 1)
            .count() as u32;
        Ok(implicit + explicit)
    }
}

/// Marks bonds that lie on a cycle, i.e. every bond that is not a bridge.
fn ring_bonds(adjacency: &[Vec<(usize, usize)>], bond_count: usize) -> Vec<bool> {
    let n = adjacency.len();
    let mut disc = vec![usize::MAX; n];
    let mut low = vec![0usize; n];
    let mut is_bridge = vec![false; bond_count];
    let mut timer = 0;
    for root in 0..n {
        if disc[root] != usize::MAX {
            continue;
        }
        // Iterative DFS: (vertex, bond used to enter, next neighbor cursor).
        let mut stack = vec![(root, usize::MAX, 0usize)];
        disc[root] = timer;
        low[root] = timer;
        timer += 1;
        while let Some(&(v, parent_bond, cursor)) = stack.last() {
            if cursor < adjacency[v].len() {
                let (w, b) = adjacency[v][cursor];
                if let Some(top) = stack.last_mut() {
                    top.2 += 1;
                }
                if b == parent_bond {
                    continue;
                }
                if disc[w] == usize::MAX {
                    disc[w] = timer;
                    low[w] = timer;
                    timer += 1;
                    stack.push((w, b, 0));
                } else {
                    low[v] = low[v].min(disc[w]);
                }
            } else {
                stack.pop();
                if let Some(&(u, _, _)) = stack.last() {
                    low[u] = low[u].min(low[v]);
                    if low[v] > disc[u] {
                        is_bridge[parent_bond] = true;
                    }
                }
            }
        }
    }
    is_bridge.into_iter().map(|b| !b).collect()
}

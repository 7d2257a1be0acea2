//! Featurized molecular graphs for the graph encoder.

use serde::{Deserialize, Serialize};

use crate::error::ChemError;
use crate::molecule::Molecule;

/// Atomic numbers 1..=118 map to indices 0..118.
pub const ATOM_VOCAB: usize = 118;
pub const CHIRALITY_VOCAB: usize = 3;
pub const BOND_TYPE_VOCAB: usize = 4;
pub const BOND_DIRECTION_VOCAB: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct NodeFeature {
    pub atomic_number_index: usize,
    pub chirality_index: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct EdgeFeature {
    pub bond_type_index: usize,
    pub bond_direction_index: usize,
}

/// Directed-edge graph view of a molecule. Every bond appears twice, once per
/// direction, with the cis/trans marker mirrored on the reversed edge.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MolecularGraph {
    pub node_features: Vec<NodeFeature>,
    pub edge_list: Vec<(usize, usize)>,
    pub edge_features: Vec<EdgeFeature>,
}

impl MolecularGraph {
    pub fn node_count(&self) -> usize {
        self.node_features.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edge_list.len()
    }
}

pub fn featurize(molecule: &Molecule) -> Result<MolecularGraph, ChemError> {
    let node_features = molecule
        .atoms()
        .iter()
        .map(|atom| {
            if atom.atomic_number == 0 || usize::from(atom.atomic_number) > ATOM_VOCAB {
                return Err(ChemError::AtomicNumberOutOfVocabulary(atom.atomic_number));
            }
            Ok(NodeFeature {
                atomic_number_index: usize::from(atom.atomic_number) - 1,
                chirality_index: atom.chirality.index(),
            })
        })
        .collect::<Result<Vec<_>, _>>()?;

    let mut edge_list = Vec::with_capacity(2 * molecule.bond_count());
    let mut edge_features = Vec::with_capacity(2 * molecule.bond_count());
    for bond in molecule.bonds() {
        let bond_type_index = bond.order.index();
        edge_list.push((bond.a, bond.b));
        edge_features.push(EdgeFeature {
            bond_type_index,
            bond_direction_index: bond.direction.index(),
        });
        edge_list.push((bond.b, bond.a));
        edge_features.push(EdgeFeature {
            bond_type_index,
            bond_direction_index: bond.direction.reversed().index(),
        });
    }
    Ok(MolecularGraph { node_features, edge_list, edge_features })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::molecule::{Atom, BondOrder};
    use crate::smiles::parse_smiles;

    #[test]
    fn single_atom() {
        let g = featurize(&parse_smiles("C").unwrap()).unwrap();
        assert_eq!(g.node_count(), 1);
        assert_eq!(g.edge_count(), 0);
        assert_eq!(g.node_features[0].atomic_number_index, 5);
    }

    #[test]
    fn formaldehyde_edges() {
        let g = featurize(&parse_smiles("C=O").unwrap()).unwrap();
        assert_eq!(g.edge_list, vec![(0, 1), (1, 0)]);
        let double = BondOrder::Double.index();
        assert!(g.edge_features.iter().all(|e| e.bond_type_index == double && e.bond_direction_index == 0));
    }

    #[test]
    fn directional_edges_are_mirrored() {
        let g = featurize(&parse_smiles("F/C=C/F").unwrap()).unwrap();
        assert_eq!(g.edge_count(), 6);
        // F->C is up, C->F is down.
        assert_eq!(g.edge_features[0].bond_direction_index, 1);
        assert_eq!(g.edge_features[1].bond_direction_index, 2);
        assert_eq!(g.edge_features[2].bond_direction_index, 0);
        assert_eq!(g.edge_features[4].bond_direction_index, 1);
        assert_eq!(g.edge_features[5].bond_direction_index, 2);
    }

    #[test]
    fn chirality_feature() {
        let g = featurize(&parse_smiles("N[C@@H](C)C(=O)O").unwrap()).unwrap();
        assert_eq!(g.node_features[1].chirality_index, 1);
        assert_eq!(g.node_features[0].chirality_index, 0);
    }

    #[test]
    fn rejects_atomic_number_outside_vocabulary() {
        let mut atom = Atom::organic(6, false);
        atom.atomic_number = 0;
        let m = Molecule::new(vec![atom], vec![], "").unwrap();
        assert_eq!(featurize(&m), Err(ChemError::AtomicNumberOutOfVocabulary(0)));
    }
}

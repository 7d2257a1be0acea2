//! Exact composition and topology descriptors.

use crate::element;
use crate::error::ChemError;
use crate::molecule::{BondOrder, Molecule};

/// Molecular weight in g/mol: standard atomic weights of every atom plus its
/// implicit hydrogens. Isotope-labeled atoms weigh their mass number.
pub fn molecular_weight(molecule: &Molecule) -> Result<f64, ChemError> {
    let hydrogen = element::atomic_weight(1).unwrap_or(1.008);
    let mut total = 0.0;
    for (i, atom) in molecule.atoms().iter().enumerate() {
        let mass = match atom.isotope {
            Some(mass_number) => f64::from(mass_number),
            None => element::atomic_weight(atom.atomic_number)
                .ok_or_else(|| ChemError::MissingAtomicWeight(atom.element.clone()))?,
        };
        total += mass + f64::from(molecule.implicit_hydrogens(i)?) * hydrogen;
    }
    Ok(total)
}

/// Lipinski donors: N or O atoms carrying at least one hydrogen.
pub fn hbd_count(molecule: &Molecule) -> usize {
    (0..molecule.atom_count())
        .filter(|&i| {
            matches!(molecule.atoms()[i].atomic_number, 7 | 8)
                && molecule.total_hydrogens(i).unwrap_or_default() > 0
        })
        .count()
}

/// Lipinski acceptors: all N and O atoms.
pub fn hba_count(molecule: &Molecule) -> usize {
    molecule
        .atoms()
        .iter()
        .filter(|a| matches!(a.atomic_number, 7 | 8))
        .count()
}

/// Single, acyclic bonds between two non-terminal heavy atoms.
pub fn rotatable_bonds(molecule: &Molecule) -> usize {
    let heavy_degree = |i: usize| {
        molecule
            .neighbors(i)
            .iter()
            .filter(|&&(n, _)| molecule.atoms()[n].atomic_number != 1)
            .count()
    };
    molecule
        .bonds()
        .iter()
        .filter(|b| {
            b.order == BondOrder::Single
                && !b.in_ring
                && molecule.atoms()[b.a].atomic_number != 1
                && molecule.atoms()[b.b].atomic_number != 1
                && heavy_degree(b.a) >= 2
                && heavy_degree(b.b) >= 2
        })
        .count()
}

pub fn ring_count(molecule: &Molecule) -> usize {
    molecule.ring_count()
}

pub fn heavy_atom_count(molecule: &Molecule) -> usize {
    molecule.atoms().iter().filter(|a| a.atomic_number != 1).count()
}

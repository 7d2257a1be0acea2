//! Chemistry layer: SMILES parsing, graph featurization, Murcko scaffolds
//! and the descriptor calculator used for knowledge calibration.

pub mod dsm;
pub mod element;
mod error;
pub mod graph;
pub mod molecule;
pub mod scaffold;
pub mod smiles;

pub use error::{ChemError, SmilesError};
pub use graph::{featurize, EdgeFeature, MolecularGraph, NodeFeature};
pub use molecule::{Atom, Bond, BondDirection, BondOrder, Chirality, Molecule};
pub use scaffold::{murcko_scaffold, ScaffoldKey};
pub use smiles::parse_smiles;

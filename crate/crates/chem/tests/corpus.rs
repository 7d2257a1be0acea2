use std::path::PathBuf;

use lardo_chem::dsm::{
    crippen_logp, hba_count, hbd_count, heavy_atom_count, molecular_weight, ring_count,
    rotatable_bonds,
};
use lardo_chem::{element, featurize, murcko_scaffold, parse_smiles, Bond, Molecule, SmilesError};
use proptest::prelude::*;

fn testdata(name: &str) -> Vec<Vec<String>> {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../testdata").join(name);
    std::fs::read_to_string(&path)
        .unwrap_or_else(|e| panic!("{}: {e}", path.display()))
        .lines()
        .filter(|l| !l.starts_with('#') && !l.trim().is_empty())
        .map(|l| l.split('\t').map(str::to_string).collect())
        .collect()
}

type ErrorCheck = fn(&SmilesError) -> bool;

#[test]
fn hand_counted_corpus() {
    let rows = testdata("parse_corpus.tsv");
    assert_eq!(rows.len(), 30);
    for row in rows {
        let m = parse_smiles(&row[0]).unwrap();
        let hydrogens: u32 = (0..m.atom_count()).map(|i| m.implicit_hydrogens(i).unwrap()).sum();
        assert_eq!(
            (m.atom_count(), m.bond_count(), hydrogens),
            (row[1].parse().unwrap(), row[2].parse().unwrap(), row[3].parse().unwrap()),
            "{}",
            row[0]
        );
    }
}

#[test]
fn grammar_error_cases() {
    let cases: [(&str, ErrorCheck); 10] = [
        ("", |e| matches!(e, SmilesError::Empty)),
        ("CC(C", |e| matches!(e, SmilesError::UnbalancedParenthesis { .. })),
        ("CC)C", |e| matches!(e, SmilesError::UnbalancedParenthesis { .. })),
        ("C1CCC", |e| matches!(e, SmilesError::UnclosedRing { label: 1, .. })),
        ("CQC", |e| matches!(e, SmilesError::UnknownElement { .. })),
        ("C(C)(C)(C)(C)C", |e| matches!(e, SmilesError::ValenceOverflow { .. })),
        ("C[NH4+", |e| matches!(e, SmilesError::UnterminatedBracket { .. })),
        ("CC=", |e| matches!(e, SmilesError::DanglingBond { .. })),
        ("C11", |e| matches!(e, SmilesError::InvalidRingBond { .. })),
        ("C&C", |e| matches!(e, SmilesError::UnexpectedCharacter { character: '&', .. })),
    ];
    for (smiles, expected) in cases {
        let err = parse_smiles(smiles).expect_err(smiles);
        assert!(expected(&err), "{smiles:?} raised {err:?}");
    }
}

/// Weight of a Hill formula such as `C18H27Cl2NO2`.
fn formula_weight(formula: &str) -> f64 {
    let chars: Vec<char> = formula.chars().collect();
    let mut i = 0;
    let mut total = 0.0;
    while i < chars.len() {
        let mut symbol = chars[i].to_string();
        i += 1;
        if i < chars.len() && chars[i].is_ascii_lowercase() {
            symbol.push(chars[i]);
            i += 1;
        }
        let start = i;
        while i < chars.len() && chars[i].is_ascii_digit() {
            i += 1;
        }
        let count: f64 = if start == i { 1.0 } else { chars[start..i].iter().collect::<String>().parse().unwrap() };
        let z = element::atomic_number(&symbol).unwrap();
        total += count * element::atomic_weight(z).unwrap();
    }
    total
}

#[test]
fn molecular_weight_matches_formula_sums() {
    let rows = testdata("formulas.tsv");
    assert_eq!(rows.len(), 20);
    for row in rows {
        let m = parse_smiles(&row[0]).unwrap();
        let ours = molecular_weight(&m).unwrap();
        let expected = formula_weight(&row[1]);
        assert!((ours - expected).abs() < 0.01, "{}: {ours} vs {expected}", row[0]);
    }
}

fn descriptor_vector(m: &Molecule) -> (i64, i64, usize, usize, usize, usize, usize) {
    (
        (molecular_weight(m).unwrap() * 1e6).round() as i64,
        (crippen_logp(m) * 1e6).round() as i64,
        hbd_count(m),
        hba_count(m),
        rotatable_bonds(m),
        ring_count(m),
        heavy_atom_count(m),
    )
}

#[test]
fn equivalent_smiles_agree() {
    let rows = testdata("equivalent_pairs.tsv");
    assert!(rows.len() >= 40);
    for row in rows {
        let (a, b) = (parse_smiles(&row[0]).unwrap(), parse_smiles(&row[1]).unwrap());
        assert_eq!(murcko_scaffold(&a), murcko_scaffold(&b), "{} / {}", row[0], row[1]);
        assert_eq!(descriptor_vector(&a), descriptor_vector(&b), "{} / {}", row[0], row[1]);
        let (ga, gb) = (featurize(&a).unwrap(), featurize(&b).unwrap());
        assert_eq!((ga.node_count(), ga.edge_count()), (gb.node_count(), gb.edge_count()));
    }
}

#[test]
fn weight_is_additive_over_components() {
    for (a, b) in [("CCO", "O"), ("c1ccccc1C(=O)[O-]", "[Na+]"), ("CN", "Cl")] {
        let joined = parse_smiles(&format!("{a}.{b}")).unwrap();
        let parts = molecular_weight(&parse_smiles(a).unwrap()).unwrap()
            + molecular_weight(&parse_smiles(b).unwrap()).unwrap();
        assert!((molecular_weight(&joined).unwrap() - parts).abs() < 1e-9);
    }
}

fn permuted(m: &Molecule, order: &[usize]) -> Molecule {
    // order[new] = old
    let mut position = vec![0; order.len()];
    for (new, &old) in order.iter().enumerate() {
        position[old] = new;
    }
    let atoms = order.iter().map(|&old| m.atoms()[old].clone()).collect();
    let bonds = m
        .bonds()
        .iter()
        .map(|b| Bond { a: position[b.a], b: position[b.b], ..b.clone() })
        .rev()
        .collect();
    Molecule::new(atoms, bonds, m.smiles_source()).unwrap()
}

const PERMUTATION_POOL: [&str; 8] = [
    "CC(=O)Oc1ccccc1C(=O)O",
    "C(=O)(OC(C)(C)C)CCCc1ccc(cc1)N(CCCl)CCCl",
    "c1ccc2c(c1)[nH]c1ccccc12",
    "C1CC2CCC1C2",
    "O=C1CCCN1Cc1ccccc1",
    "Cc1cc(C)nc(NS(=O)(=O)c2ccc(N)cc2)n1",
    "CCCCO",
    "c1ccccc1Cc1ccccc1.[Na+]",
];

proptest! {
    #[test]
    fn atom_reordering_preserves_descriptors_and_scaffold(
        pick in 0..PERMUTATION_POOL.len(),
        seed in proptest::collection::vec(any::<u32>(), 64),
    ) {
        let m = parse_smiles(PERMUTATION_POOL[pick]).unwrap();
        let mut order: Vec<usize> = (0..m.atom_count()).collect();
        order.sort_by_key(|&i| (seed[i % seed.len()], i));
        let p = permuted(&m, &order);
        prop_assert_eq!(descriptor_vector(&m), descriptor_vector(&p));
        prop_assert_eq!(murcko_scaffold(&m), murcko_scaffold(&p));
        for (i, &o) in order.iter().enumerate() {
            prop_assert_eq!(p.implicit_hydrogens(i).unwrap(), m.implicit_hydrogens(o).unwrap());
        }
    }

    #[test]
    fn featurize_counts(pick in 0..PERMUTATION_POOL.len()) {
        let m = parse_smiles(PERMUTATION_POOL[pick]).unwrap();
        let g = featurize(&m).unwrap();
        prop_assert_eq!(g.node_count(), m.atom_count());
        prop_assert_eq!(g.edge_count(), 2 * m.bond_count());
        for (i, atom) in m.atoms().iter().enumerate() {
            prop_assert!(m.total_hydrogens(i).is_ok());
            prop_assert_eq!(g.node_features[i].atomic_number_index, usize::from(atom.atomic_number) - 1);
        }
        let nitrogen_oxygen = m.atoms().iter().filter(|a| matches!(a.atomic_number, 7 | 8)).count();
        prop_assert!(hbd_count(&m) <= nitrogen_oxygen);
    }

    #[test]
    fn parsing_is_deterministic(pick in 0..PERMUTATION_POOL.len()) {
        let s = PERMUTATION_POOL[pick];
        prop_assert_eq!(parse_smiles(s).unwrap(), parse_smiles(s).unwrap());
    }
}

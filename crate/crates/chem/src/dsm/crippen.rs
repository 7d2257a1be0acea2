//! Wildman–Crippen atom-contribution LogP.
//!
//! Each heavy atom is assigned the first matching atom type of the published
//! typing table (in table order) and contributes that type's value. Every
//! attached hydrogen contributes the value of the hydrogen type selected by
//! its heavy-atom environment. Atoms that match no type contribute zero.
//!
//! The table is expressed as SMARTS in the literature; here every pattern is
//! written out as a predicate over the atom's neighborhood. Unmarked SMARTS
//! bonds match single or aromatic bonds, uppercase symbols are aliphatic and
//! `H`/`X` count total hydrogens and total connections.

use crate::molecule::{BondOrder, Molecule};

/// A typed contribution for one atom and its hydrogens.
#[derive(Debug, Clone, PartialEq)]
pub struct AtomContribution {
    pub atom: usize,
    pub atom_type: &'static str,
    pub value: f64,
    pub hydrogen_type: &'static str,
    pub hydrogen_count: u32,
    pub hydrogen_value: f64,
}

impl AtomContribution {
    pub fn total(&self) -> f64 {
        self.value + f64::from(self.hydrogen_count) * self.hydrogen_value
    }
}

/// Sum of the per-atom contributions.
pub fn crippen_logp(molecule: &Molecule) -> f64 {
    crippen_contributions(molecule).iter().map(AtomContribution::total).sum()
}

pub fn crippen_contributions(molecule: &Molecule) -> Vec<AtomContribution> {
    let env = Env::new(molecule);
    (0..molecule.atom_count())
        .map(|atom| {
            let (atom_type, value) = if env.z[atom] == 1 {
                // Explicit hydrogen atoms in the graph are typed as hydrogens.
                match env.heavy[atom].first().or(env.all_nbrs(atom).first()) {
                    Some(&(parent, _)) => hydrogen_type(&env, parent),
                    None => ("HS", 0.1125),
                }
            } else {
                heavy_type(&env, atom)
            };
            let (hydrogen_type, hydrogen_value) = hydrogen_type(&env, atom);
            AtomContribution {
                atom,
                atom_type,
                value,
                hydrogen_type,
                hydrogen_count: env.implicit_h[atom],
                hydrogen_value,
            }
        })
        .collect()
}

/// Neighborhood view used by the typing predicates.
struct Env {
    z: Vec<u8>,
    aromatic: Vec<bool>,
    charge: Vec<i8>,
    /// Total hydrogens: implicit plus explicit hydrogen atoms.
    h: Vec<u32>,
    implicit_h: Vec<u32>,
    /// Total connections, hydrogens included.
    x: Vec<u32>,
    /// Non-hydrogen neighbors with the connecting bond order.
    heavy: Vec<Vec<(usize, BondOrder)>>,
    all: Vec<Vec<(usize, BondOrder)>>,
}

impl Env {
    fn new(m: &Molecule) -> Self {
        let n = m.atom_count();
        let implicit_h: Vec<u32> =
            (0..n).map(|i| m.implicit_hydrogens(i).unwrap_or_default()).collect();
        let all: Vec<Vec<(usize, BondOrder)>> = (0..n)
            .map(|i| m.neighbors(i).iter().map(|&(j, b)| (j, m.bonds()[b].order)).collect())
            .collect();
        let z: Vec<u8> = m.atoms().iter().map(|a| a.atomic_number).collect();
        let heavy = all
            .iter()
            .map(|nb| nb.iter().copied().filter(|&(j, _)| z[j] != 1).collect())
            .collect();
        let h = (0..n)
            .map(|i| implicit_h[i] + all[i].iter().filter(|&&(j, _)| z[j] == 1).count() as u32)
            .collect();
        let x = (0..n).map(|i| implicit_h[i] + all[i].len() as u32).collect();
        Env {
            aromatic: m.atoms().iter().map(|a| a.aromatic).collect(),
            charge: m.atoms().iter().map(|a| a.formal_charge).collect(),
            z,
            h,
            implicit_h,
            x,
            heavy,
            all,
        }
    }

    fn all_nbrs(&self, i: usize) -> &[(usize, BondOrder)] {
        &self.all[i]
    }

    fn is(&self, i: usize, z: u8, aromatic: bool) -> bool {
        self.z[i] == z && self.aromatic[i] == aromatic
    }

    /// Aliphatic carbon (`C`).
    fn c(&self, i: usize) -> bool {
        self.is(i, 6, false)
    }

    /// Aromatic carbon (`c`).
    fn ar_c(&self, i: usize) -> bool {
        self.is(i, 6, true)
    }

    /// `[A;!#1]`
    fn aliphatic(&self, i: usize) -> bool {
        !self.aromatic[i] && self.z[i] != 1
    }

    /// `a`
    fn arom(&self, i: usize) -> bool {
        self.aromatic[i]
    }

    /// `[!#1;A,a]`
    fn heavy_atom(&self, i: usize) -> bool {
        self.z[i] != 1
    }

    /// `[N,O,P,S,F,Cl,Br,I]`
    fn hetero(&self, i: usize) -> bool {
        !self.aromatic[i] && matches!(self.z[i], 7 | 8 | 15 | 16 | 9 | 17 | 35 | 53)
    }

    fn has(&self, i: usize, bond: Bond, pred: impl Fn(usize) -> bool) -> bool {
        self.heavy[i].iter().any(|&(j, o)| bond.matches(o) && pred(j))
    }

    /// True when distinct heavy neighbors can be assigned to every
    /// (bond, predicate) requirement.
    fn distinct(&self, i: usize, reqs: &[(Bond, &dyn Fn(usize) -> bool)]) -> bool {
        fn assign(
            nbrs: &[(usize, BondOrder)],
            reqs: &[(Bond, &dyn Fn(usize) -> bool)],
            used: &mut Vec<bool>,
        ) -> bool {
            let Some(((bond, pred), rest)) = reqs.split_first() else {
                return true;
            };
            for (k, &(j, o)) in nbrs.iter().enumerate() {
                if !used[k] && bond.matches(o) && pred(j) {
                    used[k] = true;
                    if assign(nbrs, rest, used) {
                        return true;
                    }
                    used[k] = false;
                }
            }
            false
        }
        let nbrs = &self.heavy[i];
        assign(nbrs, reqs, &mut vec![false; nbrs.len()])
    }
}

/// SMARTS bond primitive.
#[derive(Debug, Clone, Copy)]
enum Bond {
    /// Unmarked: single or aromatic.
    Default,
    Single,
    Double,
    Triple,
    Aromatic,
}

impl Bond {
    fn matches(self, order: BondOrder) -> bool {
        match self {
            Bond::Default => matches!(order, BondOrder::Single | BondOrder::Aromatic),
            Bond::Single => order == BondOrder::Single,
            Bond::Double => order == BondOrder::Double,
            Bond::Triple => order == BondOrder::Triple,
            Bond::Aromatic => order == BondOrder::Aromatic,
        }
    }
}

use Bond::{Aromatic as AR, Default as DF, Double as DB, Single as SG, Triple as TR};

fn heavy_type(e: &Env, i: usize) -> (&'static str, f64) {
    let typed = match (e.z[i], e.aromatic[i]) {
        (6, false) => aliphatic_carbon(e, i),
        (6, true) => aromatic_carbon(e, i),
        (7, _) => nitrogen(e, i),
        (8, _) => oxygen(e, i),
        (9 | 17 | 35 | 53, _) => halogen(e, i),
        (15, _) => Some(("P", 0.8612)),
        (16, _) => sulfur(e, i),
        _ => None,
    };
    typed.or_else(|| other_element(e, i)).or(match e.z[i] {
        6 => Some(("CS", 0.08129)),
        7 => Some(("NS", -0.4806)),
        8 => Some(("OS", -0.1188)),
        _ => None,
    })
    .unwrap_or(("", 0.0))
}

fn aliphatic_carbon(e: &Env, i: usize) -> Option<(&'static str, f64)> {
    let (h, x) = (e.h[i], e.x[i]);
    let c = |j| e.c(j);
    let het = |j| e.hetero(j);
    let al = |j| e.aliphatic(j);
    let ar = |j| e.arom(j);

    // C1
    if h == 4
        || (h == 3 && e.has(i, DF, c))
        || (h == 2 && e.distinct(i, &[(DF, &c), (DF, &c)]))
    {
        return Some(("C1", 0.1441));
    }
    // C2
    if (h == 1 && e.distinct(i, &[(DF, &c), (DF, &c), (DF, &c)]))
        || e.distinct(i, &[(DF, &c), (DF, &c), (DF, &c), (DF, &c)])
    {
        return Some(("C2", 0.0));
    }
    // C3
    if (h == 3 && e.has(i, DF, het)) || (h == 2 && x == 4 && e.distinct(i, &[(DF, &het), (DF, &al)])) {
        return Some(("C3", -0.2035));
    }
    // C4
    if (h == 1 && x == 4 && e.distinct(i, &[(DF, &het), (DF, &al), (DF, &al)]))
        || (h == 0 && x == 4 && e.distinct(i, &[(DF, &het), (DF, &al), (DF, &al), (DF, &al)]))
    {
        return Some(("C4", -0.2051));
    }
    // C5
    if e.has(i, DB, |j| e.aliphatic(j) && !e.c(j)) {
        return Some(("C5", -0.2783));
    }
    // C6
    if (h == 2 && e.has(i, DB, c))
        || (h == 1 && e.distinct(i, &[(DB, &c), (DF, &al)]))
        || (h == 0 && e.distinct(i, &[(DB, &c), (DF, &al), (DF, &al)]))
        || e.distinct(i, &[(DB, &c), (DB, &c)])
    {
        return Some(("C6", 0.1551));
    }
    // C7
    if x == 2 && e.has(i, TR, al) {
        return Some(("C7", 0.0017));
    }
    // C8 - C12
    if h == 3 && e.has(i, DF, |j| e.ar_c(j)) {
        return Some(("C8", 0.08452));
    }
    if h == 3 && e.has(i, DF, ar) {
        return Some(("C9", -0.1444));
    }
    if h == 2 && x == 4 && e.has(i, DF, ar) {
        return Some(("C10", -0.0516));
    }
    if h == 1 && x == 4 && e.has(i, DF, ar) {
        return Some(("C11", 0.1193));
    }
    if h == 0 && x == 4 && e.has(i, DF, ar) {
        return Some(("C12", -0.0967));
    }
    // C26
    let ac = |j| e.ar_c(j);
    if e.distinct(i, &[(DB, &c), (DF, &ar), (DF, &al)])
        || e.distinct(i, &[(DB, &c), (DF, &ac), (DF, &ar)])
        || (h == 1 && e.distinct(i, &[(DB, &c), (DF, &ar)]))
        || e.has(i, DB, ac)
    {
        return Some(("C26", 0.264));
    }
    // C27
    if x == 4 && e.has(i, DF, |j| e.aliphatic(j) && !matches!(e.z[j], 6..=8 | 15 | 16 | 9 | 17 | 35 | 53)) {
        return Some(("C27", 0.2148));
    }
    None
}

fn aromatic_carbon(e: &Env, i: usize) -> Option<(&'static str, f64)> {
    let h = e.h[i];
    if h == 0 && e.has(i, SG, |j| e.aliphatic(j) && !matches!(e.z[j], 6..=8 | 16 | 9 | 17 | 35 | 53)) {
        return Some(("C13", -0.5443));
    }
    for (z, label, value) in [(9, "C14", 0.0), (17, "C15", 0.245), (35, "C16", 0.198), (53, "C17", 0.0)] {
        if e.has(i, DF, |j| e.z[j] == z) {
            return Some((label, value));
        }
    }
    if h == 1 {
        return Some(("C18", 0.1581));
    }
    let ar = |j| e.arom(j);
    let two_ar = |extra: (Bond, &dyn Fn(usize) -> bool)| e.distinct(i, &[(AR, &ar), (AR, &ar), extra]);
    if two_ar((AR, &ar)) {
        return Some(("C19", 0.2955));
    }
    if two_ar((SG, &ar)) {
        return Some(("C20", 0.2713));
    }
    if two_ar((SG, &|j| e.c(j))) {
        return Some(("C21", 0.136));
    }
    if two_ar((SG, &|j| e.is(j, 7, false))) {
        return Some(("C22", 0.4619));
    }
    if two_ar((SG, &|j| e.is(j, 8, false))) {
        return Some(("C23", 0.5437));
    }
    if two_ar((SG, &|j| e.is(j, 16, false))) {
        return Some(("C24", 0.1893));
    }
    if two_ar((DB, &|j| !e.aromatic[j] && matches!(e.z[j], 6..=8))) {
        return Some(("C25", -0.8186));
    }
    None
}

fn nitrogen(e: &Env, i: usize) -> Option<(&'static str, f64)> {
    let (h, q) = (e.h[i], e.charge[i]);
    let al = |j| e.aliphatic(j);
    let ar = |j| e.arom(j);
    let hv = |j| e.heavy_atom(j);
    if e.aromatic[i] {
        return match q {
            0 => Some(("N11", -0.3239)),
            1..=3 => Some(("N12", -1.119)),
            _ => None,
        };
    }
    if q == 0 {
        if h == 2 && e.has(i, DF, al) {
            return Some(("N1", -1.019));
        }
        if h == 1 && e.distinct(i, &[(DF, &al), (DF, &al)]) {
            return Some(("N2", -0.7096));
        }
        if h == 2 && e.has(i, DF, ar) {
            return Some(("N3", -1.027));
        }
        if h == 1 && e.distinct(i, &[(DF, &hv), (DF, &ar)]) {
            return Some(("N4", -0.5188));
        }
        if h == 1 && e.has(i, DB, hv) {
            return Some(("N5", 0.08387));
        }
        if e.distinct(i, &[(DB, &hv), (DF, &hv)]) {
            return Some(("N6", 0.1836));
        }
        if e.distinct(i, &[(DF, &al), (DF, &al), (DF, &al)]) {
            return Some(("N7", -0.3187));
        }
        if e.distinct(i, &[(DF, &ar), (DF, &hv), (DF, &al)]) || e.distinct(i, &[(DF, &ar), (DF, &ar), (DF, &ar)]) {
            return Some(("N8", -0.4458));
        }
        if e.has(i, TR, al) {
            return Some(("N9", 0.01508));
        }
    }
    let positive = (1..=3).contains(&q);
    if positive && (1..=3).contains(&h) {
        return Some(("N10", -1.95));
    }
    if positive
        && h == 0
        && (e.distinct(i, &[(DF, &al), (DF, &al), (DF, &al), (DF, &al)])
            || e.distinct(i, &[(DB, &al), (DF, &al), (DF, &hv)])
            || e.distinct(i, &[(DB, &|j| e.z[j] == 6), (DB, &|j| e.z[j] == 7)]))
    {
        return Some(("N13", -0.3396));
    }
    let negative_n = |j: usize| e.is(j, 7, false) && (-3..=-1).contains(&e.charge[j]);
    if (positive && e.has(i, TR, al))
        || (-3..=-1).contains(&q)
        || (positive && e.distinct(i, &[(DB, &negative_n), (DB, &|j| e.is(j, 7, false))]))
    {
        return Some(("N14", 0.2887));
    }
    None
}

fn oxygen(e: &Env, i: usize) -> Option<(&'static str, f64)> {
    if e.aromatic[i] {
        return Some(("O1", 0.1552));
    }
    let (h, x, q) = (e.h[i], e.x[i], e.charge[i]);
    let al = |j| e.aliphatic(j);
    let hv = |j| e.heavy_atom(j);
    if h == 1 || h == 2 {
        return Some(("O2", -0.2893));
    }
    if e.distinct(i, &[(DF, &al), (DF, &al)]) {
        return Some(("O3", -0.0684));
    }
    if e.distinct(i, &[(DF, &|j| e.arom(j)), (DF, &hv)]) {
        return Some(("O4", -0.4195));
    }
    let negative = (-3..=-1).contains(&q);
    if e.has(i, DB, |j| matches!(e.z[j], 7 | 8)) || (x == 1 && negative && e.has(i, DF, |j| e.z[j] == 7)) {
        return Some(("O5", 0.0335));
    }
    if (x == 1 && (q == -1 || q == -2) && e.has(i, DF, |j| e.z[j] == 16))
        || (q == 0 && e.has(i, DB, |j| e.z[j] == 16 && e.charge[j] == 0))
    {
        return Some(("O6", -0.3339));
    }
    if q == -1 && e.has(i, DF, |j| e.c(j) && e.has(j, DB, |k| k != i && e.is(k, 8, false))) {
        return Some(("O12", -1.326));
    }
    if x == 1 && negative && e.has(i, DF, |j| e.heavy_atom(j) && !e.is(j, 7, false) && !e.is(j, 16, false)) {
        return Some(("O7", -1.189));
    }
    if e.has(i, DB, |j| e.ar_c(j)) {
        return Some(("O8", 0.1788));
    }
    // Carbonyl types: the carbon's other substituents decide.
    let carbonyl = |pred: &dyn Fn(usize) -> bool| e.has(i, DB, |j| e.c(j) && pred(j));
    let c = |j| e.c(j);
    let ac = |j| e.ar_c(j);
    let any_c = |j| e.z[j] == 6;
    let ar_heavy = |j| e.arom(j);
    let non_c = |j| e.z[j] != 6 && e.z[j] != 1;
    let o9 = carbonyl(&|j| e.h[j] == 1 && e.has(j, DF, c))
        || carbonyl(&|j| e.distinct(j, &[(DF, &c), (DF, &al)]))
        || carbonyl(&|j| e.h[j] == 1 && e.has(j, DF, |k| e.is(k, 7, false) || e.is(k, 8, false)))
        || carbonyl(&|j| e.h[j] == 2)
        || carbonyl(&|j| e.x[j] == 2 && e.has(j, DB, |k| k != i && e.is(k, 8, false)));
    if o9 {
        return Some(("O9", -0.1526));
    }
    let o10 = carbonyl(&|j| e.h[j] == 1 && e.has(j, DF, ac))
        || carbonyl(&|j| e.distinct(j, &[(DF, &any_c), (DF, &ar_heavy)]))
        || carbonyl(&|j| e.distinct(j, &[(DF, &ac), (DF, &al)]));
    if o10 {
        return Some(("O10", 0.1129));
    }
    if carbonyl(&|j| e.distinct(j, &[(DF, &non_c), (DF, &non_c)])) {
        return Some(("O11", 0.4833));
    }
    None
}

fn halogen(e: &Env, i: usize) -> Option<(&'static str, f64)> {
    match (e.z[i], e.charge[i]) {
        (9, 0) => Some(("F", 0.4202)),
        (17, 0) => Some(("Cl", 0.6895)),
        (35, 0) => Some(("Br", 0.8456)),
        (53, 0) => Some(("I", 0.8857)),
        (_, q) if q < 0 => Some(("Hal", -2.996)),
        (53, 1..=3) => Some(("Hal", -2.996)),
        _ => None,
    }
}

fn sulfur(e: &Env, i: usize) -> Option<(&'static str, f64)> {
    let q = e.charge[i];
    if e.aromatic[i] {
        return Some(("S3", 0.6237));
    }
    if matches!(q, -4..=-1 | 1..=3 | 5 | 6)
        || (q == 0 && e.has(i, DB, |j| !e.aromatic[j] && matches!(e.z[j], 7 | 8 | 15 | 16)))
    {
        return Some(("S2", -0.0024));
    }
    Some(("S1", 0.6482))
}

fn other_element(e: &Env, i: usize) -> Option<(&'static str, f64)> {
    let z = e.z[i];
    if e.charge[i] == 1 && matches!(z, 3 | 11 | 19 | 37 | 55) {
        return Some(("Hal", -2.996));
    }
    match z {
        3 | 11 | 19 | 37 | 55 | 4 | 12 | 20 | 38 | 56 | 5 | 13 | 31 | 49 | 81 | 14 | 32 | 50 | 82 | 33
        | 51 | 83 | 34 | 52 | 84 => Some(("Me1", -0.3808)),
        21..=30 | 39..=48 | 72..=80 => Some(("Me2", -0.0025)),
        _ => None,
    }
}

/// Type of the hydrogens attached to `parent`.
fn hydrogen_type(e: &Env, parent: usize) -> (&'static str, f64) {
    const H1: (&str, f64) = ("H1", 0.123);
    const H2: (&str, f64) = ("H2", -0.2677);
    const H3: (&str, f64) = ("H3", 0.2142);
    const H4: (&str, f64) = ("H4", 0.298);
    const HS: (&str, f64) = ("HS", 0.1125);
    let z = e.z[parent];
    if z == 6 || z == 1 {
        return H1;
    }
    let aliphatic_o = e.is(parent, 8, false);
    if aliphatic_o {
        // Other substituents of the oxygen besides the hydrogen being typed;
        // any further hydrogen counts as a `[!C;!N;!O;!S]` neighbor. The
        // negated primitives in the hydrogen patterns exclude both aliphatic
        // and aromatic forms of the element.
        let others: Vec<(usize, BondOrder)> = e.heavy[parent].clone();
        let extra_h = e.h[parent] > 1;
        let other = |pred: &dyn Fn(usize) -> bool| others.iter().any(|&(j, o)| DF.matches(o) && pred(j));
        if other(&|j| (e.c(j) && e.x[j] == 4) || e.ar_c(j))
            || extra_h
            || other(&|j| !matches!(e.z[j], 6..=8 | 16))
        {
            return H2;
        }
        if other(&|j| e.z[j] == 7) {
            return H3;
        }
        if other(&|j| e.c(j) && e.has(j, DB, |k| matches!(e.z[k], 6 | 7) || e.is(k, 8, false) || e.is(k, 16, false)))
            || other(&|j| e.is(j, 8, false) || e.is(j, 16, false))
        {
            return H4;
        }
        return HS;
    }
    if !matches!(z, 6..=8) {
        return H2;
    }
    if z == 7 {
        return H3;
    }
    HS
}

//! SMILES reader for the organic subset, bracket atoms, branches, ring
//! closures (including `%nn`), cis/trans bond markers and dot-disconnected
//! components.
//!
//! Aromaticity is taken as written: lowercase atoms are aromatic and an
//! unmarked bond between two aromatic atoms is aromatic. No kekulization or
//! aromaticity perception is attempted.

use std::collections::BTreeMap;

use crate::element;
use crate::error::SmilesError;
use crate::molecule::{Atom, Bond, BondDirection, BondOrder, Chirality, Molecule};

/// Bond symbol as written, before the default order is resolved.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum BondSpec {
    Order(BondOrder),
    Directional(BondDirection),
}

impl BondSpec {
    fn from_char(c: char) -> Option<Self> {
        Some(match c {
            '-' => BondSpec::Order(BondOrder::Single),
            '=' => BondSpec::Order(BondOrder::Double),
            '#' => BondSpec::Order(BondOrder::Triple),
            ':' => BondSpec::Order(BondOrder::Aromatic),
            '/' => BondSpec::Directional(BondDirection::Up),
            '\\' => BondSpec::Directional(BondDirection::Down),
            _ => return None,
        })
    }

    /// The same bond seen from the other end.
    fn reversed(self) -> Self {
        match self {
            BondSpec::Directional(d) => BondSpec::Directional(d.reversed()),
            other => other,
        }
    }
}

struct RingOpening {
    atom: usize,
    spec: Option<BondSpec>,
    position: usize,
}

struct Parser<'a> {
    chars: Vec<char>,
    pos: usize,
    source: &'a str,
    atoms: Vec<Atom>,
    bonds: Vec<Bond>,
    prev: Option<usize>,
    pending: Option<(BondSpec, usize)>,
    branches: Vec<(Option<usize>, usize)>,
    rings: BTreeMap<u32, RingOpening>,
    /// Set right after '(' so that an immediate ')' is reported.
    branch_opened: bool,
}

/// Parse a SMILES string into a [`Molecule`].
pub fn parse_smiles(smiles: &str) -> Result<Molecule, SmilesError> {
    let trimmed = smiles.trim();
    if trimmed.is_empty() {
        return Err(SmilesError::Empty);
    }
    Parser {
        chars: trimmed.chars().collect(),
        pos: 0,
        source: trimmed,
        atoms: Vec::new(),
        bonds: Vec::new(),
        prev: None,
        pending: None,
        branches: Vec::new(),
        rings: BTreeMap::new(),
        branch_opened: false,
    }
    .run()
}

impl<'a> Parser<'a> {
    fn run(mut self) -> Result<Molecule, SmilesError> {
        while let Some(&c) = self.chars.get(self.pos) {
            let position = self.pos;
            match c {
                '(' => {
                    let Some(prev) = self.prev else {
                        return Err(SmilesError::UnexpectedCharacter { character: c, position });
                    };
                    if let Some((_, at)) = self.pending {
                        return Err(SmilesError::DanglingBond { position: at });
                    }
                    self.branches.push((Some(prev), position));
                    self.branch_opened = true;
                    self.pos += 1;
                }
                ')' => {
                    if self.branch_opened {
                        return Err(SmilesError::EmptyBranch { position });
                    }
                    if let Some((_, at)) = self.pending {
                        return Err(SmilesError::DanglingBond { position: at });
                    }
                    let (anchor, _) = self
                        .branches
                        .pop()
                        .ok_or(SmilesError::UnbalancedParenthesis { position })?;
                    self.prev = anchor;
                    self.pos += 1;
                }
                '.' => {
                    if let Some((_, at)) = self.pending {
                        return Err(SmilesError::DanglingBond { position: at });
                    }
                    if self.prev.is_none() {
                        return Err(SmilesError::UnexpectedCharacter { character: c, position });
                    }
                    self.prev = None;
                    self.pos += 1;
                }
                '0'..='9' | '%' => self.ring_closure()?,
                '[' => {
                    let atom = self.bracket_atom()?;
                    self.add_atom(atom);
                }
                _ if BondSpec::from_char(c).is_some() => {
                    if self.prev.is_none() || self.pending.is_some() {
                        return Err(SmilesError::DanglingBond { position });
                    }
                    self.pending = BondSpec::from_char(c).map(|s| (s, position));
                    self.pos += 1;
                }
                _ if c.is_ascii_alphabetic() => {
                    let atom = self.organic_atom()?;
                    self.add_atom(atom);
                }
                _ => return Err(SmilesError::UnexpectedCharacter { character: c, position }),
            }
        }
        if let Some((_, at)) = self.pending {
            return Err(SmilesError::DanglingBond { position: at });
        }
        if let Some(&(_, position)) = self.branches.last() {
            return Err(SmilesError::UnbalancedParenthesis { position });
        }
        if let Some((&label, opening)) = self.rings.iter().next() {
            return Err(SmilesError::UnclosedRing { label, position: opening.position });
        }
        let molecule = Molecule::new(self.atoms, self.bonds, self.source)?;
        check_valences(&molecule)?;
        Ok(molecule)
    }

    fn add_atom(&mut self, atom: Atom) {
        let index = self.atoms.len();
        self.atoms.push(atom);
        if let Some(prev) = self.prev {
            let spec = self.pending.take().map(|(s, _)| s);
            let bond = self.make_bond(prev, index, spec);
            self.bonds.push(bond);
        }
        self.prev = Some(index);
        self.branch_opened = false;
    }

    fn make_bond(&self, a: usize, b: usize, spec: Option<BondSpec>) -> Bond {
        let (order, direction) = match spec {
            Some(BondSpec::Order(o)) => (o, BondDirection::None),
            Some(BondSpec::Directional(d)) => (BondOrder::Single, d),
            None if self.atoms[a].aromatic && self.atoms[b].aromatic => {
                (BondOrder::Aromatic, BondDirection::None)
            }
            None => (BondOrder::Single, BondDirection::None),
        };
        Bond { a, b, order, direction, in_ring: false }
    }

    fn ring_closure(&mut self) -> Result<(), SmilesError> {
        let position = self.pos;
        let label = if self.chars[self.pos] == '%' {
            let digits: String = self.chars.iter().skip(self.pos + 1).take(2).collect();
            if digits.len() != 2 || !digits.chars().all(|d| d.is_ascii_digit()) {
                return Err(SmilesError::UnexpectedCharacter { character: '%', position });
            }
            self.pos += 3;
            digits.parse::<u32>().unwrap_or_default()
        } else {
            self.pos += 1;
            self.chars[position].to_digit(10).unwrap_or_default()
        };
        let Some(current) = self.prev else {
            return Err(SmilesError::UnexpectedCharacter {
                character: self.chars[position],
                position,
            });
        };
        let spec = self.pending.take().map(|(s, _)| s);
        match self.rings.remove(&label) {
            None => {
                self.rings.insert(label, RingOpening { atom: current, spec, position });
            }
            Some(opening) => {
                let invalid = SmilesError::InvalidRingBond { label, position };
                if opening.atom == current {
                    return Err(invalid);
                }
                let already_bonded = self.bonds.iter().any(|b| {
                    (b.a == opening.atom && b.b == current) || (b.a == current && b.b == opening.atom)
                });
                if already_bonded {
                    return Err(invalid);
                }
                // Normalize both sides to the opening -> closing direction.
                let closing = spec.map(BondSpec::reversed);
                let spec = match (opening.spec, closing) {
                    (Some(x), Some(y)) if x != y => return Err(invalid),
                    (Some(x), _) => Some(x),
                    (None, y) => y,
                };
                let bond = self.make_bond(opening.atom, current, spec);
                self.bonds.push(bond);
            }
        }
        Ok(())
    }

    fn organic_atom(&mut self) -> Result<Atom, SmilesError> {
        let position = self.pos;
        let c = self.chars[self.pos];
        let next = self.chars.get(self.pos + 1).copied();
        let (symbol, aromatic, len) = match (c, next) {
            ('C', Some('l')) => ("Cl", false, 2),
            ('B', Some('r')) => ("Br", false, 2),
            ('B' | 'C' | 'N' | 'O' | 'P' | 'S' | 'F' | 'I', _) => (&self.source[position..position + 1], false, 1),
            ('b' | 'c' | 'n' | 'o' | 'p' | 's', _) => (&self.source[position..position + 1], true, 1),
            _ if c.is_ascii_uppercase() => {
                let len = if next.is_some_and(|n| n.is_ascii_lowercase()) { 2 } else { 1 };
                let symbol: String = self.chars[position..position + len].iter().collect();
                return Err(SmilesError::UnknownElement { symbol, position });
            }
            _ => return Err(SmilesError::UnexpectedCharacter { character: c, position }),
        };
        let canonical = capitalize(symbol);
        let z = element::atomic_number(&canonical)
            .ok_or_else(|| SmilesError::UnknownElement { symbol: symbol.to_string(), position })?;
        self.pos += len;
        Ok(Atom::organic(z, aromatic))
    }

    fn bracket_atom(&mut self) -> Result<Atom, SmilesError> {
        let start = self.pos;
        let end = self.chars[start..]
            .iter()
            .position(|&c| c == ']')
            .map(|off| start + off)
            .ok_or(SmilesError::UnterminatedBracket { position: start })?;
        let body: Vec<char> = self.chars[start + 1..end].to_vec();
        self.pos = end + 1;
        let malformed = SmilesError::InvalidBracketAtom { position: start };
        let mut i = 0;

        let mut isotope = None;
        let digits = take_digits(&body, &mut i);
        if !digits.is_empty() {
            isotope = Some(digits.parse::<u16>().map_err(|_| malformed.clone())?);
        }

        let first = *body.get(i).ok_or(malformed.clone())?;
        if !first.is_ascii_alphabetic() {
            return Err(malformed);
        }
        let aromatic = first.is_ascii_lowercase();
        // Two-letter symbols first (Cl, Se, se, as), then single letters.
        let mut symbol = first.to_string();
        if let Some(&second) = body.get(i + 1) {
            if second.is_ascii_lowercase() {
                let candidate = format!("{first}{second}");
                if element::atomic_number(&capitalize(&candidate)).is_some() && (!aromatic || is_aromatic_symbol(&candidate)) {
                    symbol = candidate;
                }
            }
        }
        if aromatic && !is_aromatic_symbol(&symbol) {
            return Err(SmilesError::UnknownElement { symbol, position: start + 1 + i });
        }
        let atomic_number = element::atomic_number(&capitalize(&symbol))
            .ok_or_else(|| SmilesError::UnknownElement { symbol: symbol.clone(), position: start + 1 + i })?;
        i += symbol.len();

        let mut chirality = Chirality::None;
        if body.get(i) == Some(&'@') {
            if body.get(i + 1) == Some(&'@') {
                chirality = Chirality::Clockwise;
                i += 2;
            } else {
                chirality = Chirality::CounterClockwise;
                i += 1;
            }
            if body.get(i) == Some(&'@') {
                return Err(malformed);
            }
        }

        let mut hydrogens = 0u8;
        if body.get(i) == Some(&'H') {
            i += 1;
            let digits = take_digits(&body, &mut i);
            hydrogens = if digits.is_empty() { 1 } else { digits.parse().map_err(|_| malformed.clone())? };
        }

        let mut charge: i8 = 0;
        if let Some(&sign) = body.get(i).filter(|c| **c == '+' || **c == '-') {
            let unit: i8 = if sign == '+' { 1 } else { -1 };
            i += 1;
            let digits = take_digits(&body, &mut i);
            if !digits.is_empty() {
                charge = unit * digits.parse::<i8>().map_err(|_| malformed.clone())?;
            } else {
                charge = unit;
                while body.get(i) == Some(&sign) {
                    charge += unit;
                    i += 1;
                }
            }
        }

        // Atom class is accepted and ignored.
        if body.get(i) == Some(&':') {
            i += 1;
            if take_digits(&body, &mut i).is_empty() {
                return Err(malformed);
            }
        }
        if i != body.len() {
            return Err(malformed);
        }

        Ok(Atom {
            element: capitalize(&symbol),
            atomic_number,
            formal_charge: charge,
            isotope,
            aromatic,
            chirality,
            explicit_h: Some(hydrogens),
        })
    }
}

fn take_digits(body: &[char], i: &mut usize) -> String {
    let start = *i;
    while body.get(*i).is_some_and(|c| c.is_ascii_digit()) {
        *i += 1;
    }
    body[start..*i].iter().collect()
}

fn capitalize(symbol: &str) -> String {
    let mut chars = symbol.chars();
    match chars.next() {
        Some(first) => first.to_ascii_uppercase().to_string() + chars.as_str(),
        None => String::new(),
    }
}

fn is_aromatic_symbol(symbol: &str) -> bool {
    matches!(symbol, "b" | "c" | "n" | "o" | "p" | "s" | "se" | "as" | "te")
}

fn check_valences(molecule: &Molecule) -> Result<(), SmilesError> {
    for (index, atom) in molecule.atoms().iter().enumerate() {
        if atom.is_bracket() {
            continue;
        }
        let Some(&max) = element::normal_valences(atom.atomic_number).last() else {
            continue;
        };
        let valence = molecule.bonded_valence(index);
        if valence > max {
            return Err(SmilesError::ValenceOverflow {
                atom: index,
                element: atom.element.clone(),
                valence,
            });
        }
    }
    Ok(())
}

//! Periodic table data: symbols, standard atomic weights and the normal
//! valences of the SMILES organic subset.

/// Element symbols indexed by atomic number minus one.
pub const SYMBOLS: [&str; 118] = [
    "H", "He", "Li", "Be", "B", "C", "N", "O", "F", "Ne",
    "Na", "Mg", "Al", "Si", "P", "S", "Cl", "Ar", "K", "Ca",
    "Sc", "Ti", "V", "Cr", "Mn", "Fe", "Co", "Ni", "Cu", "Zn",
    "Ga", "Ge", "As", "Se", "Br", "Kr", "Rb", "Sr", "Y", "Zr",
    "Nb", "Mo", "Tc", "Ru", "Rh", "Pd", "Ag", "Cd", "In", "Sn",
    "Sb", "Te", "I", "Xe", "Cs", "Ba", "La", "Ce", "Pr", "Nd",
    "Pm", "Sm", "Eu", "Gd", "Tb", "Dy", "Ho", "Er", "Tm", "Yb",
    "Lu", "Hf", "Ta", "W", "Re", "Os", "Ir", "Pt", "Au", "Hg",
    "Tl", "Pb", "Bi", "Po", "At", "Rn", "Fr", "Ra", "Ac", "Th",
    "Pa", "U", "Np", "Pu", "Am", "Cm", "Bk", "Cf", "Es", "Fm",
    "Md", "No", "Lr", "Rf", "Db", "Sg", "Bh", "Hs", "Mt", "Ds",
    "Rg", "Cn", "Nh", "Fl", "Mc", "Lv", "Ts", "Og",
];

/// Standard atomic weights in g/mol for Z = 1..=103. Heavier elements have no
/// tabulated weight.
const WEIGHTS: [f64; 103] = [
    1.008, 4.003, 6.941, 9.012, 10.812, 12.011, 14.007, 15.999,
    18.998, 20.18, 22.99, 24.305, 26.982, 28.086, 30.974, 32.067,
    35.453, 39.948, 39.098, 40.078, 44.956, 47.867, 50.944, 51.996,
    54.938, 55.845, 58.933, 58.693, 63.546, 65.39, 69.723, 72.61,
    74.922, 78.96, 79.904, 83.8, 85.468, 87.62, 88.906, 91.224,
    92.906, 95.94, 98.0, 101.07, 102.906, 106.42, 107.868, 112.412,
    114.818, 118.711, 121.76, 127.6, 126.904, 131.29, 132.905, 137.328,
    138.906, 140.116, 140.908, 144.24, 145.0, 150.36, 151.964, 157.25,
    158.925, 162.5, 164.93, 167.26, 168.934, 173.04, 174.967, 178.49,
    180.948, 183.84, 186.207, 190.23, 192.217, 195.078, 196.967, 200.59,
    204.383, 207.2, 208.98, 209.0, 210.0, 222.0, 223.0, 226.0,
    227.0, 232.038, 231.036, 238.029, 237.0, 244.0, 243.0, 247.0,
    247.0, 251.0, 252.0, 257.0, 258.0, 259.0, 262.0,
];

/// Atomic number for an element symbol (case-sensitive, e.g. `"Cl"`).
pub fn atomic_number(symbol: &str) -> Option<u8> {
    SYMBOLS
        .iter()
        .position(|s| *s == symbol)
        .map(|i| (i + 1) as u8)
}

/// Symbol for an atomic number in `1..=118`.
pub fn symbol(atomic_number: u8) -> Option<&'static str> {
    SYMBOLS.get(usize::from(atomic_number).checked_sub(1)?).copied()
}

/// Standard atomic weight, if tabulated.
pub fn atomic_weight(atomic_number: u8) -> Option<f64> {
    WEIGHTS
        .get(usize::from(atomic_number).checked_sub(1)?)
        .copied()
}

/// Normal valences of the organic-subset elements, ascending. Empty for
/// elements outside the subset.
pub fn normal_valences(atomic_number: u8) -> &'static [u32] {
    match atomic_number {
        5 => &[3],
        6 => &[4],
        7 => &[3, 5],
        8 => &[2],
        15 => &[3, 5],
        16 => &[2, 4, 6],
        9 | 17 | 35 | 53 => &[1],
        _ => &[],
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn symbol_lookup_round_trips() {
        for z in 1..=118u8 {
            assert_eq!(atomic_number(symbol(z).unwrap()), Some(z));
        }
        assert_eq!(atomic_number("Xx"), None);
        assert_eq!(symbol(0), None);
        assert_eq!(symbol(119), None);
    }

    #[test]
    fn common_weights() {
        assert_eq!(atomic_weight(1), Some(1.008));
        assert_eq!(atomic_weight(6), Some(12.011));
        assert_eq!(atomic_weight(8), Some(15.999));
        assert_eq!(atomic_weight(17), Some(35.453));
        assert_eq!(atomic_weight(118), None);
    }
}

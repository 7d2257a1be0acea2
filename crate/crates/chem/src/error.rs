use thiserror::Error;

/// Errors raised while reading SMILES text.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SmilesError {
    #[error("empty SMILES input")]
    Empty,
    #[error("unbalanced parenthesis at position {position}")]
    UnbalancedParenthesis { position: usize },
    #[error("empty branch at position {position}")]
    EmptyBranch { position: usize },
    #[error("ring closure {label} opened at position {position} is never closed")]
    UnclosedRing { label: u32, position: usize },
    #[error("invalid ring closure {label} at position {position}")]
    InvalidRingBond { label: u32, position: usize },
    #[error("unknown element symbol '{symbol}' at position {position}")]
    UnknownElement { symbol: String, position: usize },
    #[error("unterminated bracket atom starting at position {position}")]
    UnterminatedBracket { position: usize },
    #[error("malformed bracket atom at position {position}")]
    InvalidBracketAtom { position: usize },
    #[error("bond symbol at position {position} is not followed by an atom")]
    DanglingBond { position: usize },
    #[error("unexpected character '{character}' at position {position}")]
    UnexpectedCharacter { character: char, position: usize },
    #[error("valence of {element} atom {atom} is {valence}, above its maximum normal valence")]
    ValenceOverflow { atom: usize, element: String, valence: u32 },
    #[error(transparent)]
    Structure(#[from] ChemError),
}

/// Errors raised by molecule-level operations.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ChemError {
    #[error("molecule has no atoms")]
    EmptyMolecule,
    #[error("bond {bond} is invalid")]
    InvalidBond { bond: usize },
    #[error("atom index {index} out of range for {len} atoms")]
    AtomIndex { index: usize, len: usize },
    #[error("atomic number {0} is outside the feature vocabulary 1..=118")]
    AtomicNumberOutOfVocabulary(u8),
    #[error("no tabulated atomic weight for {0}")]
    MissingAtomicWeight(String),
}

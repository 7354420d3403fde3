use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("log base must be at least 2, got {0}")]
    InvalidBase(u32),

    #[error("distribution has no atoms")]
    Empty,

    #[error("duplicate atom label {0:?}")]
    DuplicateLabel(String),

    #[error("probability of atom {label:?} is invalid: {p}")]
    InvalidProbability { label: String, p: f64 },

    #[error("probabilities sum to {sum}, expected 1 within 1e-9")]
    NotNormalized { sum: f64 },

    #[error("log base mismatch: {left} vs {right}")]
    BaseMismatch { left: u32, right: u32 },

    #[error("{name} = {value} is out of range ({expected})")]
    OutOfRange {
        name: &'static str,
        value: f64,
        expected: &'static str,
    },

    #[error("type-class count {count} exceeds cap {cap}")]
    TypeClassCap { count: u128, cap: u64 },

    #[error("support size {size} exceeds limit {limit} for {what}")]
    SupportTooLarge {
        what: &'static str,
        size: usize,
        limit: usize,
    },

    #[error("slice length {m} needs {bits} bits per cell index, budget is {budget}")]
    CellBudget { m: u32, bits: u64, budget: u64 },

    #[error("length {0} is not an occupied slice")]
    UnoccupiedSlice(u32),

    #[error("cell index {cell} is outside 0..{base}^{m}")]
    CellOutOfRange { cell: String, base: u32, m: u32 },

    #[error("label {0:?} is not in the universe")]
    UnknownLabel(String),

    #[error("universe mismatch: {0}")]
    UniverseMismatch(String),

    #[error("malformed input: {0}")]
    Parse(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

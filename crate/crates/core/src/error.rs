use num_bigint::BigUint;
use thiserror::Error;

use crate::automata::Diagnostics;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("alphabet size {0} is not supported (need 2 <= b <= 256)")]
    BadAlphabet(u32),

    #[error("symbol {symbol} does not belong to an alphabet of size {size}")]
    SymbolOutOfRange { symbol: u32, size: u32 },

    #[error("alphabet mismatch: {left} vs {right}")]
    AlphabetMismatch { left: u32, right: u32 },

    #[error("the empty word is not a valid pattern")]
    EmptyPattern,

    #[error("invalid range w[{start}..{end}] of a word of length {len}")]
    BadRange { start: usize, end: usize, len: usize },

    #[error("explicit stream exhausted after {available} symbols ({requested} requested)")]
    StreamExhausted { available: usize, requested: usize },

    #[error("cannot parse word stream spec {0:?}")]
    BadStreamSpec(String),

    #[error("cannot parse rational {0:?}")]
    BadRational(String),

    #[error("malformed automaton: {0}")]
    Malformed(String),

    #[error("automaton failed validation")]
    Validation(Diagnostics),

    #[error("expected a {expected}-automaton, got k = {found}")]
    WrongArity { expected: usize, found: usize },

    #[error("the automaton is not strongly connected")]
    NotStronglyConnected,

    #[error("the automaton has a transition reading both tapes; normalize it first")]
    NotNormalized,

    #[error("empty run trace")]
    EmptyTrace,

    #[error("no symbol of the first input was consumed; the ratio is undefined")]
    NothingConsumed,

    #[error("unknown builtin machine {0:?}")]
    UnknownBuiltin(String),

    #[error("enumeration of {required} items exceeds the budget of {budget}")]
    BudgetExceeded { required: BigUint, budget: u128 },

    #[error("invalid parameters: {0}")]
    InvalidParameters(String),

    #[error("schedule invalid at step {step}: every child cylinder has measure zero")]
    DeadEnd { step: usize },

    #[error("checkpoint does not match the schedule (expected hash {expected}, found {found})")]
    CheckpointMismatch { expected: String, found: String },

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

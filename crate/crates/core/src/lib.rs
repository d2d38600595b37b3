//! Finite-state independence of normal words, made executable.
//!
//! k-tape automata and their runs on finite prefixes, stationary
//! distributions, selectors, shufflers and splitters, finite-prefix
//! normality statistics, exact measures of the good sets E, F and G, and the
//! nested-cylinder construction of a pair of independent normal words.

pub mod automata;
pub mod construction;
pub mod error;
pub mod machines;
pub mod markov;
pub mod normality;
pub mod rational;
pub mod words;

pub use automata::{
    normalize, run, run_from, validate_l_complete, validate_l_deterministic, DeterministicAutomaton,
    Diagnostics, HaltReason, KAutomaton, Label, RunTrace, Transition, Violation,
};
pub use error::{Error, Result};
pub use words::{alocc, occ, Alphabet, FiniteWord, StreamReader, Symbol, WordStream};

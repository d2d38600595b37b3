//! Canonical enumeration of complete shufflers.
//!
//! An m-state shuffler is coded by the digit string
//! `[type_0, next_0(0), …, next_0(b−1), type_1, …]` with type I = 0 and
//! II = 1. Machines are ordered by m, then lexicographically by code; the
//! index is 1-based.

use crate::error::{Error, Result};
use crate::machines::{Shuffler, ShufflerType};
use crate::words::Alphabet;

/// `(2·m^b)^m`, or `None` on overflow.
pub fn shufflers_with_states(b: u32, m: usize) -> Option<u128> {
    let per_state = (m as u128).checked_pow(b)?.checked_mul(2)?;
    per_state.checked_pow(m as u32)
}

pub fn decode_shuffler(alphabet: Alphabet, index: u128) -> Result<Shuffler> {
    if index == 0 {
        return Err(Error::InvalidParameters("shuffler indices start at 1".into()));
    }
    let b = alphabet.size();
    let mut rank = index - 1;
    let mut m = 1;
    loop {
        let count = shufflers_with_states(b, m)
            .ok_or_else(|| Error::InvalidParameters(format!("shuffler index {index} is too large")))?;
        if rank < count {
            break;
        }
        rank -= count;
        m += 1;
    }
    // least significant digit is next_{m-1}(b-1)
    let mut types = vec![ShufflerType::I; m];
    let mut next = vec![vec![0; b as usize]; m];
    for q in (0..m).rev() {
        for a in (0..b as usize).rev() {
            next[q][a] = (rank % m as u128) as usize;
            rank /= m as u128;
        }
        types[q] = if rank % 2 == 0 { ShufflerType::I } else { ShufflerType::II };
        rank /= 2;
    }
    Shuffler::from_table(alphabet, types, next)
}

pub fn encode_shuffler(s: &Shuffler) -> Result<u128> {
    let b = s.alphabet().size();
    let m = s.states();
    let overflow = || Error::InvalidParameters("shuffler too large to index".into());
    let mut index: u128 = 1;
    for k in 1..m {
        index = index.checked_add(shufflers_with_states(b, k).ok_or_else(overflow)?).ok_or_else(overflow)?;
    }
    let mut rank: u128 = 0;
    for q in 0..m {
        let ty = match s.types()[q] {
            ShufflerType::I => 0,
            ShufflerType::II => 1,
        };
        rank = rank.checked_mul(2).and_then(|r| r.checked_add(ty)).ok_or_else(overflow)?;
        for a in 0..b as usize {
            rank = rank
                .checked_mul(m as u128)
                .and_then(|r| r.checked_add(s.table()[q][a] as u128))
                .ok_or_else(overflow)?;
        }
    }
    index.checked_add(rank).ok_or_else(overflow)
}

/// Shufflers `S_from, …, S_{from+count−1}`.
pub fn enumerate_shufflers(alphabet: Alphabet, from: u128, count: usize) -> Result<Vec<Shuffler>> {
    (0..count as u128).map(|i| decode_shuffler(alphabet, from + i)).collect()
}

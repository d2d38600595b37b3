//! Shuffler enumeration, exact measures of the sets E, F and G, the
//! Hardy–Wright tail bound, and the nested-cylinder construction.

mod algorithm;
mod bounds;
mod enumerate;
mod measure;
mod schedule;

use std::cmp::Ordering;
use std::fmt;

use num_bigint::{BigInt, BigUint};
use num_rational::BigRational;
use num_traits::{One, Zero};
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::words::{Alphabet, FiniteWord, Symbol};

pub use algorithm::{
    construct_pair, required_pairs, CheckpointFile, ConstructOptions, Outcome, Refusal, SelectionRule, StepCounts,
    StepRecord,
};
pub use bounds::{
    count_p, count_p_bruteforce, hardy_bound, ln_big, membership_in_e, occurrence_distribution, tail_count, verify_bound_a,
    verify_bound_e, verify_bound_quad, window, BoundReport, HardyBound,
};
pub use enumerate::{decode_shuffler, encode_shuffler, enumerate_shufflers, shufflers_with_states};
pub use measure::{extension_size, measure, Check, ConstraintSystem, Engine, MeasureOptions, Patterns};
pub use schedule::{compute_n0, CheckLengths, ell, epsilon_upper, EllBase, Mode, Params, Schedule};

/// The pair of cylinders `([u], [v])`.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct CylinderPair {
    pub u: FiniteWord,
    pub v: FiniteWord,
}

impl CylinderPair {
    pub fn root(alphabet: Alphabet) -> Self {
        CylinderPair { u: FiniteWord::empty(alphabet), v: FiniteWord::empty(alphabet) }
    }

    pub fn new(u: FiniteWord, v: FiniteWord) -> Self {
        CylinderPair { u, v }
    }

    pub fn alphabet(&self) -> Alphabet {
        self.u.alphabet()
    }

    pub fn len(&self) -> usize {
        self.u.len() + self.v.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// `b^{−(|u|+|v|)}`.
    pub fn measure(&self) -> ExactMeasure {
        ExactMeasure::new(BigUint::one(), self.len() as u32, self.alphabet())
    }

    /// Whether `self ⊆ other`.
    pub fn within(&self, other: &CylinderPair) -> bool {
        other.u.is_prefix_of(&self.u) && other.v.is_prefix_of(&self.v)
    }

    pub fn extend_u(&self, a: Symbol) -> Self {
        let mut u = self.u.clone();
        u.push(a);
        CylinderPair { u, v: self.v.clone() }
    }

    pub fn extend_v(&self, a: Symbol) -> Self {
        let mut v = self.v.clone();
        v.push(a);
        CylinderPair { u: self.u.clone(), v }
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::json!({ "u": self.u.to_string(), "v": self.v.to_string() })
    }
}

impl fmt::Display for CylinderPair {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let show = |w: &FiniteWord| if w.is_empty() { "ε".to_string() } else { w.to_string() };
        write!(f, "([{}],[{}])", show(&self.u), show(&self.v))
    }
}

/// `count · b^{−exponent}`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExactMeasure {
    #[serde(with = "biguint_string")]
    pub count: BigUint,
    pub exponent: u32,
    pub base: u32,
}

impl ExactMeasure {
    pub fn new(count: BigUint, exponent: u32, alphabet: Alphabet) -> Self {
        ExactMeasure { count, exponent, base: alphabet.size() }
    }

    pub fn zero(alphabet: Alphabet) -> Self {
        Self::new(BigUint::zero(), 0, alphabet)
    }

    pub fn is_zero(&self) -> bool {
        self.count.is_zero()
    }

    pub fn to_rational(&self) -> BigRational {
        let den = num_traits::pow(BigInt::from(self.base), self.exponent as usize);
        BigRational::new(BigInt::from(self.count.clone()), den)
    }

    pub fn to_f64(&self) -> f64 {
        crate::rational::to_f64(&self.to_rational())
    }

    /// Same value with denominator `b^exponent`, if representable.
    pub fn rescale(&self, exponent: u32) -> Option<ExactMeasure> {
        (exponent >= self.exponent).then(|| ExactMeasure {
            count: &self.count * num_traits::pow(BigUint::from(self.base), (exponent - self.exponent) as usize),
            exponent,
            base: self.base,
        })
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::json!({
            "count": self.count.to_string(),
            "exponent": self.exponent,
            "base": self.base,
            "value": crate::rational::format_rational(&self.to_rational()),
        })
    }
}

impl PartialOrd for ExactMeasure {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for ExactMeasure {
    fn cmp(&self, other: &Self) -> Ordering {
        self.to_rational().cmp(&other.to_rational())
    }
}

impl fmt::Display for ExactMeasure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}·{}^-{}", self.count, self.base, self.exponent)
    }
}

pub(crate) mod biguint_string {
    use num_bigint::BigUint;
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &BigUint, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&v.to_string())
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<BigUint, D::Error> {
        let text = String::deserialize(d)?;
        text.parse().map_err(serde::de::Error::custom)
    }
}

/// `b^e` as a big integer.
pub(crate) fn big_pow(b: u32, e: usize) -> BigUint {
    num_traits::pow(BigUint::from(b), e)
}

pub(crate) fn parse_word(alphabet: Alphabet, text: &str) -> Result<FiniteWord> {
    if text.is_empty() || text == "ε" {
        Ok(FiniteWord::empty(alphabet))
    } else {
        FiniteWord::parse(alphabet, text)
    }
}

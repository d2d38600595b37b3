//! Parameter schedules for the construction: check lengths s_j and the
//! (ε, t, ℓ) used at each of them.

use num_bigint::{BigInt, BigUint};
use num_rational::BigRational;
use num_traits::{FromPrimitive, One};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::rational::{format_rational, parse_rational};
use crate::words::Alphabet;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Paper,
    Relaxed,
}

/// Logarithm base for ℓ_n = max(1, ⌊log n / 3⌋).
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EllBase {
    #[default]
    Alphabet,
    Natural,
}

/// `⌊log_b n⌋` for n ≥ 1, in integers.
fn ilog(b: u32, n: u128) -> u32 {
    let mut k = 0;
    let mut p: u128 = 1;
    while let Some(next) = p.checked_mul(b as u128) {
        if next > n {
            break;
        }
        p = next;
        k += 1;
    }
    k
}

pub fn ell(b: u32, n: u128, base: EllBase) -> usize {
    let l = match base {
        EllBase::Alphabet => (ilog(b, n.max(1)) / 3) as usize,
        EllBase::Natural => ((n.max(1) as f64).ln() / 3.0).floor() as usize,
    };
    l.max(1)
}

fn eps_f64(b: u32, n: u128) -> f64 {
    let n = n as f64;
    2.0 * (n.ln() * (n.ln() / f64::from(b).ln()) / n).sqrt()
}

/// Dyadic upper bound on `2√(ln n · log_b n / n)` with 64 fractional bits.
/// The f64 value is rounded up and padded by 2^-48 to absorb its error.
pub fn epsilon_upper(b: u32, n: u128) -> BigRational {
    let scale = 2f64.powi(64);
    let num = BigInt::from_f64((eps_f64(b, n) * scale).ceil()).unwrap_or_default() + BigInt::from(1u32 << 16);
    BigRational::new(num, BigInt::one() << 64)
}

/// `(n_0, n_min)`: n_min is the least n with ε_n ≥ 6/⌊n/ℓ_n⌋ and
/// n_0 = ⌈log_b n_min⌉.
pub fn compute_n0(b: u32, base: EllBase) -> (u32, u128) {
    let mut n: u128 = 1;
    loop {
        let l = ell(b, n, base) as u128;
        let blocks = n / l;
        // ε_n² ≥ 36/blocks²
        if blocks > 0 {
            let e = eps_f64(b, n);
            if e * e * (blocks * blocks) as f64 >= 36.0 {
                break;
            }
        }
        n += 1;
    }
    let mut n0 = ilog(b, n);
    if (b as u128).pow(n0) < n {
        n0 += 1;
    }
    (n0, n)
}

/// Parameters of the F-set checked at one length.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Params {
    pub s: usize,
    pub t: usize,
    pub l: usize,
    pub eps: BigRational,
}

impl Params {
    pub fn to_json(&self) -> serde_json::Value {
        serde_json::json!({ "s": self.s, "t": self.t, "l": self.l, "eps": format_rational(&self.eps) })
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum CheckLengths {
    Explicit(Vec<usize>),
    /// s_j = step·(j+1)
    Linear { step: usize },
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "lowercase")]
pub enum Schedule {
    Paper {
        alphabet: u32,
        #[serde(default)]
        ell_base: EllBase,
    },
    Relaxed {
        alphabet: u32,
        s: CheckLengths,
        t: usize,
        l: usize,
        eps: String,
    },
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RelaxedJson {
    #[serde(default)]
    mode: Option<Mode>,
    #[serde(default)]
    alphabet: Option<u32>,
    #[serde(default)]
    s: Option<CheckLengths>,
    #[serde(default)]
    t: Option<usize>,
    #[serde(default)]
    l: Option<usize>,
    #[serde(default)]
    eps: Option<String>,
}

impl Schedule {
    pub fn paper(alphabet: Alphabet, ell_base: EllBase) -> Self {
        Schedule::Paper { alphabet: alphabet.size(), ell_base }
    }

    /// s_j = 2(j+1), t = 2, ℓ = 1, ε = 9/20.
    pub fn relaxed_default(alphabet: Alphabet) -> Self {
        Schedule::Relaxed {
            alphabet: alphabet.size(),
            s: CheckLengths::Linear { step: 2 },
            t: 2,
            l: 1,
            eps: "9/20".into(),
        }
    }

    /// Relaxed parameters from JSON; absent fields take the defaults.
    pub fn relaxed_from_json(text: &str) -> Result<Self> {
        let j: RelaxedJson = serde_json::from_str(text)?;
        if j.mode == Some(Mode::Paper) {
            return Err(Error::InvalidParameters("a schedule file describes relaxed parameters".into()));
        }
        let alphabet = Alphabet::new(j.alphabet.unwrap_or(2))?;
        let Schedule::Relaxed { s, t, l, eps, .. } = Self::relaxed_default(alphabet) else { unreachable!() };
        let sched = Schedule::Relaxed {
            alphabet: alphabet.size(),
            s: j.s.unwrap_or(s),
            t: j.t.unwrap_or(t),
            l: j.l.unwrap_or(l),
            eps: j.eps.unwrap_or(eps),
        };
        sched.validate()?;
        Ok(sched)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidParameters(m.to_string()));
        Alphabet::new(self.alphabet_size())?;
        if let Schedule::Relaxed { s, t, l, eps, .. } = self {
            let eps = parse_rational(eps)?;
            if eps <= BigRational::from_integer(0.into()) {
                return bad("ε must be positive");
            }
            if *t == 0 || *l == 0 {
                return bad("t and ℓ must be at least 1");
            }
            match s {
                CheckLengths::Explicit(v) => {
                    if v.is_empty() || v[0] == 0 || v.windows(2).any(|w| w[0] >= w[1]) {
                        return bad("check lengths must be positive and strictly increasing");
                    }
                }
                CheckLengths::Linear { step } => {
                    if *step == 0 {
                        return bad("check-length step must be positive");
                    }
                }
            }
        }
        Ok(())
    }

    pub fn mode(&self) -> Mode {
        match self {
            Schedule::Paper { .. } => Mode::Paper,
            Schedule::Relaxed { .. } => Mode::Relaxed,
        }
    }

    fn alphabet_size(&self) -> u32 {
        match self {
            Schedule::Paper { alphabet, .. } | Schedule::Relaxed { alphabet, .. } => *alphabet,
        }
    }

    pub fn alphabet(&self) -> Result<Alphabet> {
        Alphabet::new(self.alphabet_size())
    }

    /// `n_0`, only meaningful in paper mode.
    pub fn n0(&self) -> Option<u32> {
        match self {
            Schedule::Paper { alphabet, ell_base } => Some(compute_n0(*alphabet, *ell_base).0),
            Schedule::Relaxed { .. } => None,
        }
    }

    /// Check length s_j (j ≥ 1) as a big integer; paper-mode lengths overflow fast.
    pub fn check_len_big(&self, j: usize) -> Result<BigUint> {
        match self {
            Schedule::Paper { alphabet, ell_base } => {
                let n0 = compute_n0(*alphabet, *ell_base).0 as usize;
                Ok(num_traits::pow(BigUint::from(*alphabet), n0 + j))
            }
            Schedule::Relaxed { .. } => Ok(BigUint::from(self.params(j)?.s)),
        }
    }

    /// Parameters at s_j, j ≥ 1.
    pub fn params(&self, j: usize) -> Result<Params> {
        if j == 0 {
            return Err(Error::InvalidParameters("check lengths are indexed from 1".into()));
        }
        match self {
            Schedule::Paper { alphabet, ell_base } => {
                let n0 = compute_n0(*alphabet, *ell_base).0;
                let s = (*alphabet as u128)
                    .checked_pow(n0 + j as u32)
                    .filter(|&s| s <= usize::MAX as u128)
                    .ok_or_else(|| Error::InvalidParameters(format!("s_{j} does not fit in memory")))?;
                Ok(Params {
                    s: s as usize,
                    t: s as usize,
                    l: ell(*alphabet, s, *ell_base),
                    eps: epsilon_upper(*alphabet, s),
                })
            }
            Schedule::Relaxed { s, t, l, eps, .. } => {
                let s = match s {
                    CheckLengths::Explicit(v) => *v.get(j - 1).ok_or_else(|| {
                        Error::InvalidParameters(format!("schedule lists {} check lengths, s_{j} requested", v.len()))
                    })?,
                    CheckLengths::Linear { step } => step * (j + 1),
                };
                Ok(Params { s, t: *t, l: *l, eps: parse_rational(eps)? })
            }
        }
    }

    /// Hex sha256 of the canonical JSON form.
    pub fn hash(&self) -> String {
        let text = serde_json::to_string(self).expect("schedule serializes");
        Sha256::digest(text.as_bytes()).iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::to_value(self).expect("schedule serializes")
    }
}

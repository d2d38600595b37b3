//! Occurrence distributions, the sets P(ε, γ, n), the Hardy–Wright tail
//! bound and the measure lower bounds built on it.

use num_bigint::{BigInt, BigUint};
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::Serialize;

use super::measure::{measure, ConstraintSystem, MeasureOptions};
use super::schedule::{ell, epsilon_upper, EllBase};
use super::{big_pow, CylinderPair, ExactMeasure};
use crate::error::{Error, Result};
use crate::machines::Shuffler;
use crate::rational::{format_rational, to_f64};
use crate::words::{occ, Alphabet, FiniteWord, Symbol};

/// Transition table of the pattern-matching automaton for γ: state = length
/// of the longest suffix of the text read so far that is a prefix of γ.
fn matcher(gamma: &[Symbol], b: usize) -> Vec<Vec<usize>> {
    let r = gamma.len();
    (0..=r)
        .map(|state| {
            (0..b)
                .map(|c| {
                    let mut text: Vec<Symbol> = gamma[..state].to_vec();
                    text.push(c as Symbol);
                    (0..=r.min(text.len()))
                        .rev()
                        .find(|&k| text[text.len() - k..] == gamma[..k])
                        .unwrap_or(0)
                })
                .collect()
        })
        .collect()
}

/// `N(γ, i, n) = |{w ∈ A^n : occ(w, γ) = i}|` for i = 0..=n.
pub fn occurrence_distribution(gamma: &FiniteWord, n: usize) -> Result<Vec<BigUint>> {
    if gamma.is_empty() {
        return Err(Error::EmptyPattern);
    }
    let b = gamma.alphabet().size() as usize;
    let g = gamma.to_vec();
    let r = g.len();
    let delta = matcher(&g, b);
    // dp[state][i]
    let mut dp = vec![vec![BigUint::zero(); n + 1]; r + 1];
    dp[0][0] = BigUint::one();
    for _ in 0..n {
        let mut next = vec![vec![BigUint::zero(); n + 1]; r + 1];
        for (state, row) in dp.iter().enumerate() {
            for (i, v) in row.iter().enumerate() {
                if v.is_zero() {
                    continue;
                }
                for c in 0..b {
                    let to = delta[state][c];
                    let j = i + usize::from(to == r);
                    next[to][j] += v;
                }
            }
        }
        dp = next;
    }
    let mut dist = vec![BigUint::zero(); n + 1];
    for row in dp {
        for (i, v) in row.into_iter().enumerate() {
            dist[i] += v;
        }
    }
    Ok(dist)
}

/// `|i − n/b^r| < εn`, exactly.
fn close(i: usize, n: usize, r: usize, b: u32, eps: &BigRational) -> bool {
    let br = num_traits::pow(BigInt::from(b), r);
    let dev = (BigInt::from(i) * &br - BigInt::from(n)).abs();
    BigRational::from_integer(dev) < eps * BigRational::from_integer(BigInt::from(n) * br)
}

/// `|P(ε, γ, n)|`, from the occurrence distribution.
pub fn count_p(eps: &BigRational, gamma: &FiniteWord, n: usize) -> Result<BigUint> {
    let b = gamma.alphabet().size();
    let dist = occurrence_distribution(gamma, n)?;
    Ok(dist
        .into_iter()
        .enumerate()
        .filter(|&(i, _)| close(i, n, gamma.len(), b, eps))
        .map(|(_, v)| v)
        .sum())
}

/// `|P(ε, γ, n)|` by listing A^n; refuses when n·b^n exceeds `budget`.
pub fn count_p_bruteforce(eps: &BigRational, gamma: &FiniteWord, n: usize, budget: u128) -> Result<BigUint> {
    let b = gamma.alphabet();
    let work = big_pow(b.size(), n) * BigUint::from(n.max(1));
    if work > BigUint::from(budget) {
        return Err(Error::BudgetExceeded { required: work, budget });
    }
    let mut count = 0u64;
    for w in b.words(n) {
        let i = if gamma.len() > n { 0 } else { occ(&w, gamma)? };
        count += u64::from(close(i, n, gamma.len(), b.size(), eps));
    }
    Ok(BigUint::from(count))
}

/// `Σ N(γ,i,n)` over `i ≤ n/b^r − εn` and `i ≥ n/b^r + εn`.
pub fn tail_count(gamma: &FiniteWord, eps: &BigRational, n: usize) -> Result<BigUint> {
    Ok(big_pow(gamma.alphabet().size(), n) - count_p(eps, gamma, n)?)
}

/// `2·b^{n+2r−2}·r·e^{−b^r ε² n/(6r)}`, kept as a natural logarithm.
#[derive(Clone, Debug, Serialize)]
pub struct HardyBound {
    pub ln: f64,
    pub value: f64,
    /// whether 6/⌊n/r⌋ ≤ ε ≤ 1/b^r
    pub in_window: bool,
}

pub fn window(b: u32, r: usize, eps: &BigRational, n: usize) -> bool {
    let blocks = n / r;
    if blocks == 0 {
        return false;
    }
    let lo = BigRational::new(6.into(), BigInt::from(blocks));
    let hi = BigRational::new(1.into(), num_traits::pow(BigInt::from(b), r));
    &lo <= eps && eps <= &hi
}

pub fn hardy_bound(b: u32, r: usize, eps: &BigRational, n: usize) -> HardyBound {
    let e = to_f64(eps);
    let bf = f64::from(b);
    let ln = std::f64::consts::LN_2 + (n as f64 + 2.0 * r as f64 - 2.0) * bf.ln() + (r as f64).ln()
        - bf.powi(r as i32) * e * e * n as f64 / (6.0 * r as f64);
    HardyBound { ln, value: ln.exp(), in_window: window(b, r, eps, n) }
}

pub fn ln_big(x: &BigUint) -> f64 {
    if x.is_zero() {
        return f64::NEG_INFINITY;
    }
    let bits = x.bits();
    if bits < 1000 {
        x.to_f64().unwrap_or(f64::INFINITY).ln()
    } else {
        let shift = bits - 64;
        (x >> shift).to_f64().unwrap_or(f64::INFINITY).ln() + shift as f64 * std::f64::consts::LN_2
    }
}

/// Runs `s` for n transitions on the given extensions and tests the E-set
/// inequality on the output.
pub fn membership_in_e(
    s: &Shuffler,
    eps: &BigRational,
    gamma: &FiniteWord,
    n: usize,
    x_ext: &FiniteWord,
    y_ext: &FiniteWord,
) -> Result<bool> {
    if x_ext.len() < n || y_ext.len() < n {
        return Err(Error::InvalidParameters(format!("extensions must have length at least {n}")));
    }
    if gamma.is_empty() {
        return Err(Error::EmptyPattern);
    }
    let (z, _, _) = s
        .shuffle_slices(&x_ext.to_vec(), &y_ext.to_vec(), n)
        .expect("a length-n run reads at most n symbols per tape");
    let z = FiniteWord::from_symbols(s.alphabet(), &z)?;
    let i = if gamma.len() > n { 0 } else { occ(&z, gamma)? };
    Ok(close(i, n, gamma.len(), s.alphabet().size(), eps))
}

/// Exact measure against a closed-form lower bound.
#[derive(Clone, Debug, Serialize)]
pub struct BoundReport {
    pub measure: String,
    pub measure_approx: f64,
    pub bound: f64,
    pub holds: bool,
    pub in_window: bool,
    /// false when the bound is ≤ 0 and says nothing
    pub informative: bool,
    pub note: String,
}

fn report(m: &BigRational, bound: f64, strict: bool, in_window: bool) -> BoundReport {
    let approx = to_f64(m);
    let holds = if strict { approx > bound } else { approx >= bound };
    let informative = bound > 0.0;
    let mut note = Vec::new();
    if !in_window {
        note.push("parameters outside the proposition's window; the bound is not asserted");
    }
    if !informative {
        note.push("bound ≤ 0, uninformative");
    }
    BoundReport {
        measure: format_rational(m),
        measure_approx: approx,
        bound,
        holds,
        in_window,
        informative,
        note: note.join("; "),
    }
}

/// `μ(E_S(ε,γ,n)) = |P(ε,γ,n)|·b^{−n} > 1 − 2 b^{2r−2} r e^{−b^r ε² n/(6r)}`.
pub fn verify_bound_e(eps: &BigRational, gamma: &FiniteWord, n: usize) -> Result<BoundReport> {
    let b = gamma.alphabet().size();
    let r = gamma.len();
    let p = count_p(eps, gamma, n)?;
    let m = BigRational::new(BigInt::from(p), num_traits::pow(BigInt::from(b), n));
    let e = to_f64(eps);
    let bf = f64::from(b);
    let tail = (std::f64::consts::LN_2 + (2.0 * r as f64 - 2.0) * bf.ln() + (r as f64).ln()
        - bf.powi(r as i32) * e * e * n as f64 / (6.0 * r as f64))
        .exp();
    Ok(report(&m, 1.0 - tail, true, window(b, r, eps, n)))
}

/// `μ(F(ε,t,ℓ,n)) > 1 − 2t b^{3ℓ−1} e^{−ε² n/(3ℓ)}`, with μ(F) counted exactly.
pub fn verify_bound_a(
    alphabet: Alphabet,
    shufflers: Vec<Shuffler>,
    eps: &BigRational,
    t: usize,
    l: usize,
    n: usize,
    opts: &MeasureOptions,
) -> Result<BoundReport> {
    let sys = ConstraintSystem::f_set(alphabet, shufflers, eps.clone(), t, l, n)?;
    let m: ExactMeasure = measure(&sys, &CylinderPair::root(alphabet), opts)?;
    let e = to_f64(eps);
    let bf = f64::from(alphabet.size());
    let tail = (std::f64::consts::LN_2 + (t as f64).ln() + (3.0 * l as f64 - 1.0) * bf.ln()
        - e * e * n as f64 / (3.0 * l as f64))
        .exp();
    Ok(report(&m.to_rational(), 1.0 - tail, true, window(alphabet.size(), l, eps, n)))
}

/// `μ(F_n) ≥ 1 − 1/n²` with the schedule's ε_n, t_n = n and ℓ_n.
pub fn verify_bound_quad(alphabet: Alphabet, n: usize, base: EllBase, opts: &MeasureOptions) -> Result<BoundReport> {
    let l = ell(alphabet.size(), n as u128, base);
    let eps = epsilon_upper(alphabet.size(), n as u128);
    let shufflers = super::enumerate_shufflers(alphabet, 1, n)?;
    let sys = ConstraintSystem::f_set(alphabet, shufflers, eps.clone(), n, l, n)?;
    let m = measure(&sys, &CylinderPair::root(alphabet), opts)?;
    let bound = BigRational::one() - BigRational::new(1.into(), BigInt::from(n * n));
    let mut rep = report(&m.to_rational(), to_f64(&bound), false, window(alphabet.size(), l, &eps, n));
    rep.holds = m.to_rational() >= bound;
    Ok(rep)
}

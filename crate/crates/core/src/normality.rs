//! Block-frequency statistics of finite prefixes.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{Signed, Zero};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::rational::{format_rational, to_f64};
use crate::words::FiniteWord;

const MAX_BLOCKS: u64 = 1 << 24;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Aligned,
    Sliding,
}

/// Deviations `|count/denominator − b^{−ℓ}|` for every block `u ∈ A^ℓ`,
/// indexed by the lexicographic code of `u`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DiscrepancyReport {
    pub n: usize,
    pub l: usize,
    pub mode: Mode,
    pub counts: Vec<u64>,
    pub denominator: u64,
    pub deviations: Vec<BigRational>,
    pub max: BigRational,
}

impl DiscrepancyReport {
    fn new(n: usize, l: usize, b: u32, mode: Mode, counts: Vec<u64>, denominator: u64) -> Self {
        let expect = BigRational::new(1.into(), num_traits::pow(BigInt::from(b), l));
        let deviations: Vec<BigRational> = counts
            .iter()
            .map(|&c| (BigRational::new(c.into(), denominator.into()) - &expect).abs())
            .collect();
        let max = deviations.iter().max().cloned().unwrap_or_else(BigRational::zero);
        DiscrepancyReport { n, l, mode, counts, denominator, deviations, max }
    }

    pub fn max_f64(&self) -> f64 {
        to_f64(&self.max)
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::json!({
            "n": self.n,
            "l": self.l,
            "mode": self.mode,
            "denominator": self.denominator,
            "counts": self.counts,
            "max_deviation": format_rational(&self.max),
            "max_deviation_approx": self.max_f64(),
        })
    }
}

fn block_space(w: &FiniteWord, l: usize) -> Result<usize> {
    if l == 0 {
        return Err(Error::EmptyPattern);
    }
    if l > w.len() {
        return Err(Error::BadRange { start: 1, end: l, len: w.len() });
    }
    let b = u64::from(w.alphabet().size());
    (0..l)
        .try_fold(1u64, |acc, _| acc.checked_mul(b).filter(|&v| v <= MAX_BLOCKS))
        .map(|v| v as usize)
        .ok_or_else(|| Error::InvalidParameters(format!("{l}-blocks are too many to tabulate")))
}

/// Aligned counts `alocc(w, u)` for all `u ∈ A^ℓ`.
pub fn aligned_counts(w: &FiniteWord, l: usize) -> Result<Vec<u64>> {
    let size = block_space(w, l)?;
    let b = w.alphabet().size() as usize;
    let mut counts = vec![0u64; size];
    let mut code = 0usize;
    for (i, s) in w.iter().enumerate() {
        code = code * b + s as usize;
        if (i + 1) % l == 0 {
            counts[code] += 1;
            code = 0;
        }
    }
    Ok(counts)
}

/// Sliding counts `occ(w, u)` for all `u ∈ A^ℓ`.
pub fn sliding_counts(w: &FiniteWord, l: usize) -> Result<Vec<u64>> {
    let size = block_space(w, l)?;
    let b = w.alphabet().size() as usize;
    let mut counts = vec![0u64; size];
    let mut code = 0usize;
    for (i, s) in w.iter().enumerate() {
        code = (code * b + s as usize) % size;
        if i + 1 >= l {
            counts[code] += 1;
        }
    }
    Ok(counts)
}

/// Aligned mode, denominator ⌊n/ℓ⌋.
pub fn simple_normality_discrepancy(w: &FiniteWord, l: usize) -> Result<DiscrepancyReport> {
    let counts = aligned_counts(w, l)?;
    let den = (w.len() / l) as u64;
    Ok(DiscrepancyReport::new(w.len(), l, w.alphabet().size(), Mode::Aligned, counts, den))
}

/// Sliding mode, denominator n as in `|occ(z[1..n], γ) − n/b^{|γ|}| < εn`.
pub fn sliding_discrepancy(w: &FiniteWord, l: usize) -> Result<DiscrepancyReport> {
    let counts = sliding_counts(w, l)?;
    Ok(DiscrepancyReport::new(w.len(), l, w.alphabet().size(), Mode::Sliding, counts, w.len() as u64))
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct CBoundVerdict {
    pub l: usize,
    pub pass: bool,
    /// the block with the largest count
    pub worst: String,
    pub worst_count: u64,
}

/// For each ℓ ≤ `l_max`, whether `occ(w,u)/|w| ≤ C/b^ℓ` for every `u ∈ A^ℓ`.
pub fn c_bound_check(w: &FiniteWord, l_max: usize, c: &BigRational) -> Result<Vec<CBoundVerdict>> {
    let b = w.alphabet();
    let n = BigInt::from(w.len());
    (1..=l_max.min(w.len()))
        .map(|l| {
            let counts = sliding_counts(w, l)?;
            let (code, &worst_count) =
                counts.iter().enumerate().max_by_key(|&(i, c)| (*c, std::cmp::Reverse(i))).expect("nonempty");
            let scale = num_traits::pow(BigInt::from(b.size()), l);
            let lhs = BigRational::from_integer(BigInt::from(worst_count) * scale);
            let pass = lhs <= c * BigRational::from_integer(n.clone());
            Ok(CBoundVerdict {
                l,
                pass,
                worst: FiniteWord::from_code(b, code as u64, l).to_string(),
                worst_count,
            })
        })
        .collect()
}

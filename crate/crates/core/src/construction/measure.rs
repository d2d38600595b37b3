//! Exact measure of `([u],[v]) ∩ ⋂ E_{S_i}(ε, γ, s)` for a finite family of
//! frequency constraints on shuffler outputs.
//!
//! Every constraint looks at the first `s` output symbols, which depend on at
//! most `s` symbols of each input; so the measure is a count of extension
//! pairs of a fixed length, times a power of b. Two counting engines are
//! provided: a memoized search over joint shuffler runs, and a plain grid
//! enumeration with y varying fastest.

use std::collections::HashMap;

use num_bigint::{BigInt, BigUint};
use num_rational::BigRational;
use num_traits::Signed;
use rayon::prelude::*;

use super::{big_pow, CylinderPair, ExactMeasure};
use crate::error::{Error, Result};
use crate::machines::{Shuffler, ShufflerType};
use crate::words::{Alphabet, FiniteWord, Symbol};

/// Which blocks γ a check constrains.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Patterns {
    /// every γ with 1 ≤ |γ| ≤ ℓ
    UpTo(usize),
    One(FiniteWord),
}

/// `|occ(S(x,y)[1..len], γ) − len/b^{|γ|}| < ε·len` for the given γ's.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Check {
    /// position in [`ConstraintSystem::shufflers`]
    pub shuffler: usize,
    pub len: usize,
    pub patterns: Patterns,
    pub eps: BigRational,
}

#[derive(Clone, Debug)]
pub struct ConstraintSystem {
    pub alphabet: Alphabet,
    pub shufflers: Vec<Shuffler>,
    pub checks: Vec<Check>,
}

impl ConstraintSystem {
    pub fn new(alphabet: Alphabet, shufflers: Vec<Shuffler>) -> Self {
        ConstraintSystem { alphabet, shufflers, checks: Vec::new() }
    }

    /// `E_S(ε, γ, n)`.
    pub fn e_set(s: Shuffler, eps: BigRational, gamma: FiniteWord, n: usize) -> Self {
        let mut sys = ConstraintSystem::new(s.alphabet(), vec![s]);
        sys.checks.push(Check { shuffler: 0, len: n, patterns: Patterns::One(gamma), eps });
        sys
    }

    /// `F(ε, t, ℓ, n)` over the first t shufflers of `shufflers`.
    pub fn f_set(alphabet: Alphabet, shufflers: Vec<Shuffler>, eps: BigRational, t: usize, l: usize, n: usize) -> Result<Self> {
        let mut sys = ConstraintSystem::new(alphabet, shufflers);
        sys.intersect_f(&eps, t, l, n)?;
        Ok(sys)
    }

    /// Intersects with `F(ε, t, ℓ, n)`.
    pub fn intersect_f(&mut self, eps: &BigRational, t: usize, l: usize, n: usize) -> Result<()> {
        if t > self.shufflers.len() {
            return Err(Error::InvalidParameters(format!("t = {t} but only {} shufflers supplied", self.shufflers.len())));
        }
        for i in 0..t {
            self.checks.push(Check { shuffler: i, len: n, patterns: Patterns::UpTo(l), eps: eps.clone() });
        }
        Ok(())
    }

    /// Input length that determines every check.
    pub fn tape_len(&self) -> usize {
        self.checks.iter().map(|c| c.len).max().unwrap_or(0)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Engine {
    Memo,
    Grid,
}

#[derive(Clone, Debug)]
pub struct MeasureOptions {
    pub engine: Engine,
    pub workers: usize,
    /// maximal number of extension pairs
    pub budget: u128,
}

impl Default for MeasureOptions {
    fn default() -> Self {
        MeasureOptions { engine: Engine::Memo, workers: 1, budget: 1 << 32 }
    }
}

/// Lengths of the extended x and y tapes, and the number of extension pairs.
pub fn extension_size(sys: &ConstraintSystem, cyl: &CylinderPair) -> (usize, usize, BigUint) {
    let s = sys.tape_len();
    let (sx, sy) = (s.max(cyl.u.len()), s.max(cyl.v.len()));
    let free = sx + sy - cyl.len();
    (sx, sy, big_pow(sys.alphabet.size(), free))
}

pub fn measure(sys: &ConstraintSystem, cyl: &CylinderPair, opts: &MeasureOptions) -> Result<ExactMeasure> {
    if cyl.alphabet() != sys.alphabet || cyl.v.alphabet() != sys.alphabet {
        return Err(Error::AlphabetMismatch { left: cyl.alphabet().size(), right: sys.alphabet.size() });
    }
    let (sx, sy, nominal) = extension_size(sys, cyl);
    if nominal > BigUint::from(opts.budget) {
        return Err(Error::BudgetExceeded { required: nominal, budget: opts.budget });
    }
    let plans = compile(sys)?;
    let b = sys.alphabet.size();
    let u = cyl.u.to_vec();
    let v = cyl.v.to_vec();
    let workers = opts.workers.max(1);
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::InvalidParameters(e.to_string()))?;
    let count: u128 = match opts.engine {
        Engine::Memo => {
            let parts = split(b, &u, &v, sx, sy, workers);
            pool.install(|| {
                parts
                    .par_iter()
                    .map(|(x, y)| Dfs::new(&plans, b, sx, sy).count(x.clone(), y.clone()))
                    .sum()
            })
        }
        Engine::Grid => {
            let nx = (b as u128).pow((sx - u.len()) as u32);
            let ny = (b as u128).pow((sy - v.len()) as u32);
            let total = nx * ny;
            let chunks = (workers as u128 * 8).min(total.max(1));
            let bounds: Vec<(u128, u128)> =
                (0..chunks).map(|c| (total * c / chunks, total * (c + 1) / chunks)).collect();
            pool.install(|| {
                bounds
                    .par_iter()
                    .map(|&(lo, hi)| grid_range(&plans, b, &u, &v, sx, sy, ny, lo, hi))
                    .sum()
            })
        }
    };
    Ok(ExactMeasure::new(BigUint::from(count), (sx + sy) as u32, sys.alphabet))
}

/// Sub-cylinders for parallel memo search: x is extended first, then y.
fn split(b: u32, u: &[Symbol], v: &[Symbol], sx: usize, sy: usize, workers: usize) -> Vec<(Vec<Symbol>, Vec<Symbol>)> {
    let mut parts = vec![(u.to_vec(), v.to_vec())];
    if workers <= 1 {
        return parts;
    }
    while parts.len() < 4 * workers {
        let (x, y) = &parts[0];
        let extend_x = x.len() < sx;
        if !extend_x && y.len() >= sy {
            break;
        }
        parts = parts
            .into_iter()
            .flat_map(|(x, y)| {
                (0..b as Symbol).map(move |a| {
                    let (mut x, mut y) = (x.clone(), y.clone());
                    if extend_x {
                        x.push(a);
                    } else {
                        y.push(a);
                    }
                    (x, y)
                })
            })
            .collect();
    }
    parts
}

#[derive(Clone, Debug)]
struct Test {
    slot: usize,
    lo: u32,
    hi: u32,
}

#[derive(Clone, Debug)]
struct Point {
    len: u32,
    impossible: bool,
    tests: Vec<Test>,
}

/// One shuffler together with the checks that concern it.
#[derive(Clone, Debug)]
struct Plan {
    reads_y: Vec<bool>,
    /// next[q·b + a]
    next: Vec<u32>,
    r_max: u32,
    pow: Vec<u64>,
    /// tracked (|γ|, code of γ)
    patterns: Vec<(u32, u64)>,
    points: Vec<Point>,
}

/// Range of occurrence counts o in [0, s−r+1] with |q(o·b^r − s)| < p·s·b^r.
fn admissible(s: usize, r: usize, b: u32, eps: &BigRational) -> Option<(u32, u32)> {
    let top = if s >= r { s - r + 1 } else { 0 };
    let br = num_traits::pow(BigInt::from(b), r);
    let (p, q) = (eps.numer(), eps.denom());
    let s_big = BigInt::from(s);
    let bound = p * &s_big * &br;
    let ok = |o: usize| (q * (BigInt::from(o) * &br - &s_big)).abs() < bound;
    let valid: Vec<u32> = (0..=top).filter(|&o| ok(o)).map(|o| o as u32).collect();
    Some((*valid.first()?, *valid.last()?))
}

fn compile(sys: &ConstraintSystem) -> Result<Vec<Plan>> {
    let b = sys.alphabet.size();
    let mut plans = Vec::new();
    for (idx, s) in sys.shufflers.iter().enumerate() {
        if s.alphabet() != sys.alphabet {
            return Err(Error::AlphabetMismatch { left: s.alphabet().size(), right: b });
        }
        let mut patterns: Vec<(u32, u64)> = Vec::new();
        let mut points: Vec<Point> = Vec::new();
        let mut checks: Vec<&Check> = sys.checks.iter().filter(|c| c.shuffler == idx).collect();
        checks.sort_by_key(|c| c.len);
        for c in checks {
            if c.eps.is_negative() || c.len == 0 {
                return Err(Error::InvalidParameters("checks need ε ≥ 0 and a positive length".into()));
            }
            let gammas: Vec<FiniteWord> = match &c.patterns {
                Patterns::UpTo(l) => (1..=*l).flat_map(|r| sys.alphabet.words(r)).collect(),
                Patterns::One(g) => {
                    if g.is_empty() {
                        return Err(Error::EmptyPattern);
                    }
                    vec![g.clone()]
                }
            };
            let mut point = Point { len: c.len as u32, impossible: false, tests: Vec::new() };
            for g in gammas {
                let r = g.len();
                if r > 12 {
                    return Err(Error::InvalidParameters("blocks longer than 12 are not supported".into()));
                }
                let top = if c.len >= r { (c.len - r + 1) as u32 } else { 0 };
                match admissible(c.len, r, b, &c.eps) {
                    None => point.impossible = true,
                    Some((0, hi)) if hi == top => {}
                    Some((lo, hi)) => {
                        let key = (r as u32, g.code());
                        let slot = match patterns.iter().position(|&p| p == key) {
                            Some(i) => i,
                            None => {
                                patterns.push(key);
                                patterns.len() - 1
                            }
                        };
                        point.tests.push(Test { slot, lo, hi });
                    }
                }
            }
            if point.impossible || !point.tests.is_empty() {
                match points.last_mut() {
                    Some(last) if last.len == point.len => {
                        last.impossible |= point.impossible;
                        last.tests.extend(point.tests);
                    }
                    _ => points.push(point),
                }
            }
        }
        if points.is_empty() {
            continue;
        }
        let r_max = patterns.iter().map(|p| p.0).max().unwrap_or(1);
        let pow = (0..=r_max).map(|k| u64::from(b).pow(k)).collect();
        let next = s
            .table()
            .iter()
            .flat_map(|row| row.iter().map(|&q| q as u32))
            .collect();
        let reads_y = s.types().iter().map(|&t| t == ShufflerType::II).collect();
        plans.push(Plan { reads_y, next, r_max, pow, patterns, points });
    }
    Ok(plans)
}

#[derive(Clone, Debug)]
struct Sim {
    q: u32,
    out: u32,
    xi: u32,
    yi: u32,
    window: u64,
    point: u32,
    done: bool,
    counts: Vec<u32>,
}

impl Sim {
    fn new(plan: &Plan) -> Self {
        Sim { q: 0, out: 0, xi: 0, yi: 0, window: 0, point: 0, done: false, counts: vec![0; plan.patterns.len()] }
    }

    fn reset(&mut self) {
        self.q = 0;
        self.out = 0;
        self.xi = 0;
        self.yi = 0;
        self.window = 0;
        self.point = 0;
        self.done = false;
        self.counts.iter_mut().for_each(|c| *c = 0);
    }
}

enum Advance {
    Fail,
    Blocked,
    Done,
}

/// Runs until the last check is passed, a check fails, or an unassigned
/// symbol is needed.
#[inline]
fn advance(plan: &Plan, b: u32, st: &mut Sim, x: &[Symbol], y: &[Symbol]) -> Advance {
    if st.done {
        return Advance::Done;
    }
    let b64 = u64::from(b);
    let win_mod = plan.pow[plan.r_max as usize];
    loop {
        let q = st.q as usize;
        let c = if plan.reads_y[q] {
            match y.get(st.yi as usize) {
                Some(&c) => {
                    st.yi += 1;
                    c
                }
                None => return Advance::Blocked,
            }
        } else {
            match x.get(st.xi as usize) {
                Some(&c) => {
                    st.xi += 1;
                    c
                }
                None => return Advance::Blocked,
            }
        };
        st.out += 1;
        st.q = plan.next[q * b as usize + c as usize];
        st.window = (st.window * b64 + u64::from(c)) % win_mod;
        for (k, &(r, code)) in plan.patterns.iter().enumerate() {
            if st.out >= r && st.window % plan.pow[r as usize] == code {
                st.counts[k] += 1;
            }
        }
        let pt = &plan.points[st.point as usize];
        if st.out == pt.len {
            if pt.impossible || pt.tests.iter().any(|t| st.counts[t.slot] < t.lo || st.counts[t.slot] > t.hi) {
                return Advance::Fail;
            }
            st.point += 1;
            if st.point as usize == plan.points.len() {
                st.done = true;
                return Advance::Done;
            }
        }
    }
}

struct Dfs<'a> {
    plans: &'a [Plan],
    b: u32,
    sx: usize,
    sy: usize,
    pow: Vec<u128>,
    memo: HashMap<Vec<u32>, u128>,
}

impl<'a> Dfs<'a> {
    fn new(plans: &'a [Plan], b: u32, sx: usize, sy: usize) -> Self {
        let pow = (0..=sx + sy)
            .map(|k| (b as u128).checked_pow(k as u32).unwrap_or(u128::MAX))
            .collect();
        Dfs { plans, b, sx, sy, pow, memo: HashMap::new() }
    }

    fn count(&mut self, x: Vec<Symbol>, y: Vec<Symbol>) -> u128 {
        let sims = self.plans.iter().map(Sim::new).collect();
        let mut x = x;
        let mut y = y;
        self.search(&mut x, &mut y, sims)
    }

    fn search(&mut self, x: &mut Vec<Symbol>, y: &mut Vec<Symbol>, mut sims: Vec<Sim>) -> u128 {
        let mut demand: Option<bool> = None;
        for (plan, st) in self.plans.iter().zip(sims.iter_mut()) {
            match advance(plan, self.b, st, x, y) {
                Advance::Fail => return 0,
                Advance::Done => {}
                Advance::Blocked => {
                    if demand.is_none() {
                        demand = Some(plan.reads_y[st.q as usize]);
                    }
                }
            }
        }
        let Some(want_y) = demand else {
            return self.pow[(self.sx - x.len()) + (self.sy - y.len())];
        };
        let key = self.key(x, y, &sims);
        if let Some(&v) = self.memo.get(&key) {
            return v;
        }
        let mut total = 0u128;
        for a in 0..self.b as Symbol {
            let tape = if want_y { &mut *y } else { &mut *x };
            tape.push(a);
            total += self.search(x, y, sims.clone());
            let tape = if want_y { &mut *y } else { &mut *x };
            tape.pop();
        }
        self.memo.insert(key, total);
        total
    }

    fn key(&self, x: &[Symbol], y: &[Symbol], sims: &[Sim]) -> Vec<u32> {
        let mut key = vec![x.len() as u32, y.len() as u32];
        let (mut min_x, mut min_y) = (x.len(), y.len());
        for (plan, st) in self.plans.iter().zip(sims) {
            if st.done {
                key.push(u32::MAX);
                continue;
            }
            min_x = min_x.min(st.xi as usize);
            min_y = min_y.min(st.yi as usize);
            let keep = plan.pow[plan.r_max as usize - 1];
            key.extend([st.q, st.out, st.xi, st.yi, (st.window % keep) as u32, st.point]);
            key.extend(&st.counts);
        }
        key.extend(x[min_x..].iter().map(|&s| u32::from(s)));
        key.push(u32::MAX);
        key.extend(y[min_y..].iter().map(|&s| u32::from(s)));
        key
    }
}

/// Pairs with index in `lo..hi`, where index = (x extension)·ny + (y extension).
#[allow(clippy::too_many_arguments)]
fn grid_range(plans: &[Plan], b: u32, u: &[Symbol], v: &[Symbol], sx: usize, sy: usize, ny: u128, lo: u128, hi: u128) -> u128 {
    if lo >= hi {
        return 0;
    }
    let decode = |mut code: u128, prefix: &[Symbol], len: usize| {
        let mut w = prefix.to_vec();
        w.resize(len, 0);
        for i in (prefix.len()..len).rev() {
            w[i] = (code % b as u128) as Symbol;
            code /= b as u128;
        }
        w
    };
    let mut x = decode(lo / ny, u, sx);
    let mut y = decode(lo % ny, v, sy);
    let mut sims: Vec<Sim> = plans.iter().map(Sim::new).collect();
    let mut count = 0u128;
    let mut idx = lo;
    loop {
        let ok = plans.iter().zip(sims.iter_mut()).all(|(plan, st)| {
            st.reset();
            matches!(advance(plan, b, st, &x, &y), Advance::Done)
        });
        count += u128::from(ok);
        idx += 1;
        if idx == hi {
            break;
        }
        // odometer: y fastest
        if !increment(&mut y, v.len(), b) {
            increment(&mut x, u.len(), b);
        }
    }
    count
}

/// Increments the free suffix of `w` as a base-b counter; false on wrap.
fn increment(w: &mut [Symbol], fixed: usize, b: u32) -> bool {
    for i in (fixed..w.len()).rev() {
        if u32::from(w[i]) + 1 < b {
            w[i] += 1;
            return true;
        }
        w[i] = 0;
    }
    false
}

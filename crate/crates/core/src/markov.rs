//! The Markov chain of a 2-deterministic 2-automaton: transition matrix,
//! connectivity, exact stationary distribution and block products.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Zero};
use petgraph::algo::kosaraju_scc;
use petgraph::graph::DiGraph;

use crate::automata::{validate_l_complete, validate_l_deterministic, KAutomaton, StateId, Transition};
use crate::error::{Error, Result};
use crate::words::{Alphabet, FiniteWord};

/// Row-stochastic matrix with exact entries, indexed `[p][q]`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct StochasticMatrix {
    pub entries: Vec<Vec<BigRational>>,
}

impl StochasticMatrix {
    pub fn dim(&self) -> usize {
        self.entries.len()
    }

    pub fn row_sums(&self) -> Vec<BigRational> {
        self.entries.iter().map(|row| row.iter().sum()).collect()
    }

    /// `π M`.
    pub fn left_mul(&self, pi: &[BigRational]) -> Vec<BigRational> {
        let n = self.dim();
        (0..n)
            .map(|q| (0..n).map(|p| &pi[p] * &self.entries[p][q]).sum())
            .collect()
    }
}

fn ratio(p: u64, q: u64) -> BigRational {
    BigRational::new(BigInt::from(p), BigInt::from(q))
}

fn require_two_deterministic(a: &KAutomaton) -> Result<()> {
    if a.k() != 2 {
        return Err(Error::WrongArity { expected: 2, found: a.k() });
    }
    validate_l_deterministic(a, 2).into_result()
}

/// Weight 1/|A| for (a,ε), 1/|B| for (ε,b) and 1/(|A||B|) for (a,b).
pub fn transition_matrix(a: &KAutomaton) -> Result<StochasticMatrix> {
    require_two_deterministic(a)?;
    let (sa, sb) = (u64::from(a.alphabet(0).size()), u64::from(a.alphabet(1).size()));
    let n = a.states();
    let mut entries = vec![vec![BigRational::zero(); n]; n];
    for t in a.transitions() {
        let w = match (t.label[0], t.label[1]) {
            (Some(_), None) => ratio(1, sa),
            (None, Some(_)) => ratio(1, sb),
            (Some(_), Some(_)) => ratio(1, sa * sb),
            (None, None) => BigRational::zero(),
        };
        entries[t.from][t.to] += w;
    }
    Ok(StochasticMatrix { entries })
}

fn graph(a: &KAutomaton) -> DiGraph<(), ()> {
    let mut g = DiGraph::new();
    let nodes: Vec<_> = (0..a.states()).map(|_| g.add_node(())).collect();
    for t in a.transitions() {
        g.update_edge(nodes[t.from], nodes[t.to], ());
    }
    g
}

pub fn is_strongly_connected(a: &KAutomaton) -> bool {
    a.states() > 0 && kosaraju_scc(&graph(a)).len() == 1
}

/// The restriction of `a` to a final (bottom) strongly connected component
/// reachable from its initial state, with states renumbered in increasing
/// order. Returns the sub-automaton and the original id of each new state.
pub fn final_scc(a: &KAutomaton) -> Result<(KAutomaton, Vec<StateId>)> {
    let g = graph(a);
    let sccs = kosaraju_scc(&g);
    let mut comp = vec![0usize; a.states()];
    for (c, members) in sccs.iter().enumerate() {
        for n in members {
            comp[n.index()] = c;
        }
    }
    let mut reach = vec![false; a.states()];
    let mut stack: Vec<StateId> = a.initial().to_vec();
    for &q in &stack {
        reach[q] = true;
    }
    let outgoing = a.outgoing();
    while let Some(p) = stack.pop() {
        for &id in &outgoing[p] {
            let q = a.transition(id).to;
            if !reach[q] {
                reach[q] = true;
                stack.push(q);
            }
        }
    }
    let is_final = |c: usize| {
        sccs[c]
            .iter()
            .all(|n| outgoing[n.index()].iter().all(|&id| comp[a.transition(id).to] == c))
    };
    let chosen = (0..a.states())
        .find(|&q| reach[q] && is_final(comp[q]))
        .map(|q| comp[q])
        .ok_or_else(|| Error::InvalidParameters("no reachable final component".into()))?;
    let mut members: Vec<StateId> = sccs[chosen].iter().map(|n| n.index()).collect();
    members.sort_unstable();
    restrict(a, &members).map(|k| (k, members))
}

/// Sub-automaton on `members` (sorted), keeping internal transitions; the
/// initial state becomes the first member.
fn restrict(a: &KAutomaton, members: &[StateId]) -> Result<KAutomaton> {
    let mut index = vec![usize::MAX; a.states()];
    for (i, &q) in members.iter().enumerate() {
        index[q] = i;
    }
    let transitions = a
        .transitions()
        .iter()
        .filter(|t| index[t.from] != usize::MAX && index[t.to] != usize::MAX)
        .map(|t| Transition::new(index[t.from], t.label.clone(), index[t.to]))
        .collect();
    KAutomaton::new(a.alphabets().to_vec(), members.len(), vec![0], transitions)
}

/// The unique π with πM = π and Σπ = 1, by exact Gaussian elimination.
pub fn stationary(a: &KAutomaton) -> Result<Vec<BigRational>> {
    require_two_deterministic(a)?;
    validate_l_complete(a, 2).into_result()?;
    if !is_strongly_connected(a) {
        return Err(Error::NotStronglyConnected);
    }
    let m = transition_matrix(a)?;
    solve_stationary(&m)
}

/// Solves π(M − I) = 0 with the last equation replaced by Σπ = 1.
pub fn solve_stationary(m: &StochasticMatrix) -> Result<Vec<BigRational>> {
    let n = m.dim();
    // row q of the system: Σ_p π_p (M[p][q] − δ_pq) = 0
    let mut sys: Vec<Vec<BigRational>> = (0..n)
        .map(|q| {
            let mut row: Vec<BigRational> = (0..n)
                .map(|p| {
                    let mut e = m.entries[p][q].clone();
                    if p == q {
                        e -= BigRational::one();
                    }
                    e
                })
                .collect();
            row.push(BigRational::zero());
            row
        })
        .collect();
    sys[n - 1] = vec![BigRational::one(); n + 1];
    for col in 0..n {
        let pivot = (col..n)
            .find(|&r| !sys[r][col].is_zero())
            .ok_or(Error::NotStronglyConnected)?;
        sys.swap(col, pivot);
        let inv = sys[col][col].recip();
        for e in sys[col].iter_mut() {
            *e *= &inv;
        }
        for r in 0..n {
            if r != col && !sys[r][col].is_zero() {
                let f = sys[r][col].clone();
                for c in col..=n {
                    let d = &f * &sys[col][c];
                    sys[r][c] -= d;
                }
            }
        }
    }
    Ok(sys.into_iter().map(|row| row[n].clone()).collect())
}

/// A state of the block product: (q, u, v).
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BlockState {
    pub q: StateId,
    pub u: FiniteWord,
    pub v: FiniteWord,
}

/// `A_{k,ℓ}`: the automaton `a` run with a look-ahead buffer of k symbols of
/// the first input and ℓ symbols of the second.
#[derive(Clone, Debug)]
pub struct BlockProduct {
    pub automaton: KAutomaton,
    pub states: Vec<BlockState>,
    pub k: usize,
    pub l: usize,
}

impl BlockProduct {
    /// Ids of the states in Q × A^k × B^ℓ.
    pub fn recurrent(&self) -> Vec<StateId> {
        (0..self.states.len())
            .filter(|&i| self.states[i].u.len() == self.k && self.states[i].v.len() == self.l)
            .collect()
    }

    /// The restriction to Q × A^k × B^ℓ, states in the order of
    /// [`recurrent`](Self::recurrent).
    pub fn restriction(&self) -> Result<KAutomaton> {
        restrict(&self.automaton, &self.recurrent())
    }
}

fn block_state_count(q: usize, sa: u128, sb: u128, k: usize, l: usize) -> Option<u128> {
    let mut total: u128 = 0;
    for i in 0..=k {
        total = total.checked_add(sa.checked_pow(i as u32)?)?;
    }
    let ak = sa.checked_pow(k as u32)?;
    for j in 1..=l {
        total = total.checked_add(ak.checked_mul(sb.checked_pow(j as u32)?)?)?;
    }
    total.checked_mul(q as u128)
}

/// Builds `A_{k,ℓ}` for a normalized 2-deterministic 2-automaton. State
/// `(q0, ε, ε)` gets id 0. Refuses when the state count exceeds `budget`.
pub fn block_product(a: &KAutomaton, k: usize, l: usize, budget: u128) -> Result<BlockProduct> {
    require_two_deterministic(a)?;
    if k == 0 || l == 0 {
        return Err(Error::InvalidParameters("k and ℓ must be at least 1".into()));
    }
    if a.transitions().iter().any(|t| t.label[0].is_some() && t.label[1].is_some()) {
        return Err(Error::NotNormalized);
    }
    let (al, bl) = (a.alphabet(0), a.alphabet(1));
    let (sa, sb) = (al.size() as usize, bl.size() as usize);
    let count = block_state_count(a.states(), sa as u128, sb as u128, k, l).unwrap_or(u128::MAX);
    if count > budget {
        return Err(Error::BudgetExceeded { required: count.into(), budget });
    }
    let q0 = a.initial()[0];
    let order: Vec<StateId> =
        std::iter::once(q0).chain((0..a.states()).filter(|&q| q != q0)).collect();

    let mut states = Vec::new();
    let empty = |al: Alphabet| FiniteWord::empty(al);
    for i in 0..k {
        for &q in &order {
            for u in al.words(i) {
                states.push(BlockState { q, u, v: empty(bl) });
            }
        }
    }
    for j in 0..=l {
        for &q in &order {
            for u in al.words(k) {
                for v in bl.words(j) {
                    states.push(BlockState { q, u: u.clone(), v });
                }
            }
        }
    }
    let key = |s: &BlockState| (s.q, s.u.len(), s.u.code(), s.v.len(), s.v.code());
    let index: std::collections::HashMap<_, usize> =
        states.iter().enumerate().map(|(i, s)| (key(s), i)).collect();
    let id_of = |q: StateId, u: &FiniteWord, v: &FiniteWord| index[&(q, u.len(), u.code(), v.len(), v.code())];

    let outgoing = a.outgoing();
    let mut transitions = Vec::new();
    for (id, s) in states.iter().enumerate() {
        if s.u.len() < k {
            for c in 0..sa as u8 {
                let mut u = s.u.clone();
                u.push(c);
                transitions.push(Transition::new(id, vec![Some(c), None], id_of(s.q, &u, &s.v)));
            }
        } else if s.v.len() < l {
            for c in 0..sb as u8 {
                let mut v = s.v.clone();
                v.push(c);
                transitions.push(Transition::new(id, vec![None, Some(c)], id_of(s.q, &s.u, &v)));
            }
        } else {
            for &tid in &outgoing[s.q] {
                let t = a.transition(tid);
                match (t.label[0], t.label[1]) {
                    (Some(x), None) if x == s.u.at(0) => {
                        for c in 0..sa as u8 {
                            let mut u = s.u.slice(2, k)?;
                            u.push(c);
                            transitions.push(Transition::new(id, vec![Some(c), None], id_of(t.to, &u, &s.v)));
                        }
                    }
                    (None, Some(y)) if y == s.v.at(0) => {
                        for c in 0..sb as u8 {
                            let mut v = s.v.slice(2, l)?;
                            v.push(c);
                            transitions.push(Transition::new(id, vec![None, Some(c)], id_of(t.to, &s.u, &v)));
                        }
                    }
                    _ => {}
                }
            }
        }
    }
    let automaton = KAutomaton::new(vec![al, bl], states.len(), vec![0], transitions)?;
    Ok(BlockProduct { automaton, states, k, l })
}

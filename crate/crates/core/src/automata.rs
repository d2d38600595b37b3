//! k-tape automata: representation, ℓ-determinism and ℓ-completeness checks,
//! normal form for 2-automata, and finite-prefix execution.

use std::collections::{BTreeMap, HashMap};
use std::fmt;

use num_rational::Ratio;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::words::{Alphabet, FiniteWord, StreamReader, Symbol};

pub type StateId = usize;
pub type TransitionId = usize;

/// One entry per tape; `None` is the empty word.
pub type Label = Vec<Option<Symbol>>;

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Transition {
    pub from: StateId,
    pub label: Label,
    pub to: StateId,
}

impl Transition {
    pub fn new(from: StateId, label: Label, to: StateId) -> Self {
        Transition { from, label, to }
    }

    /// Bitmask of the non-ε positions among the first `l` entries.
    pub fn support(&self, l: usize) -> u32 {
        self.label[..l]
            .iter()
            .enumerate()
            .filter(|(_, e)| e.is_some())
            .fold(0, |m, (i, _)| m | 1 << i)
    }
}

impl fmt::Display for Transition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self
            .label
            .iter()
            .map(|e| e.map_or_else(|| "ε".to_string(), |s| s.to_string()))
            .collect();
        write!(f, "q{} --{}--> q{}", self.from, parts.join(","), self.to)
    }
}

/// A k-automaton `<Q, A, δ, I>` with dense state ids `0..states`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct KAutomaton {
    alphabets: Vec<Alphabet>,
    states: usize,
    initial: Vec<StateId>,
    transitions: Vec<Transition>,
}

impl KAutomaton {
    pub fn new(
        alphabets: Vec<Alphabet>,
        states: usize,
        initial: Vec<StateId>,
        transitions: Vec<Transition>,
    ) -> Result<Self> {
        let k = alphabets.len();
        if k == 0 {
            return Err(Error::Malformed("k must be at least 1".into()));
        }
        if let Some(&q) = initial.iter().find(|&&q| q >= states) {
            return Err(Error::Malformed(format!("initial state {q} out of range")));
        }
        for (id, t) in transitions.iter().enumerate() {
            if t.from >= states || t.to >= states {
                return Err(Error::Malformed(format!("transition {id} has an endpoint out of range")));
            }
            if t.label.len() != k {
                return Err(Error::Malformed(format!(
                    "transition {id} has {} label entries, expected {k}",
                    t.label.len()
                )));
            }
            for (tape, e) in t.label.iter().enumerate() {
                if let Some(s) = *e {
                    if !alphabets[tape].contains(s) {
                        return Err(Error::Malformed(format!(
                            "transition {id}: symbol {s} not in the alphabet of tape {tape}"
                        )));
                    }
                }
            }
        }
        Ok(KAutomaton { alphabets, states, initial, transitions })
    }

    pub fn k(&self) -> usize {
        self.alphabets.len()
    }

    pub fn alphabets(&self) -> &[Alphabet] {
        &self.alphabets
    }

    pub fn alphabet(&self, tape: usize) -> Alphabet {
        self.alphabets[tape]
    }

    pub fn states(&self) -> usize {
        self.states
    }

    pub fn initial(&self) -> &[StateId] {
        &self.initial
    }

    pub fn transitions(&self) -> &[Transition] {
        &self.transitions
    }

    pub fn transition(&self, id: TransitionId) -> &Transition {
        &self.transitions[id]
    }

    /// Transition ids leaving each state.
    pub fn outgoing(&self) -> Vec<Vec<TransitionId>> {
        let mut out = vec![Vec::new(); self.states];
        for (id, t) in self.transitions.iter().enumerate() {
            out[t.from].push(id);
        }
        out
    }

    pub fn to_json(&self) -> AutomatonJson {
        AutomatonJson {
            k: self.k(),
            alphabets: self.alphabets.iter().map(|a| a.size()).collect(),
            states: self.states,
            initial: if self.initial.len() == 1 {
                InitialJson::Single(self.initial[0])
            } else {
                InitialJson::Set(self.initial.clone())
            },
            transitions: self
                .transitions
                .iter()
                .map(|t| TransitionJson {
                    from: t.from,
                    label: t.label.iter().map(|e| e.map(u32::from)).collect(),
                    to: t.to,
                })
                .collect(),
        }
    }

    pub fn from_json(json: &AutomatonJson) -> Result<Self> {
        if json.alphabets.len() != json.k {
            return Err(Error::Malformed(format!(
                "k = {} but {} alphabets given",
                json.k,
                json.alphabets.len()
            )));
        }
        let alphabets =
            json.alphabets.iter().map(|&b| Alphabet::new(b)).collect::<Result<Vec<_>>>()?;
        let mut transitions = Vec::with_capacity(json.transitions.len());
        for t in &json.transitions {
            let label = t
                .label
                .iter()
                .map(|e| match *e {
                    None => Ok(None),
                    Some(s) if s <= u32::from(u8::MAX) => Ok(Some(s as Symbol)),
                    Some(s) => Err(Error::Malformed(format!("symbol {s} too large"))),
                })
                .collect::<Result<Label>>()?;
            transitions.push(Transition::new(t.from, label, t.to));
        }
        let initial = match &json.initial {
            InitialJson::Single(q) => vec![*q],
            InitialJson::Set(v) => v.clone(),
        };
        KAutomaton::new(alphabets, json.states, initial, transitions)
    }

    pub fn from_json_str(text: &str) -> Result<Self> {
        Self::from_json(&serde_json::from_str(text)?)
    }

    pub fn to_json_string(&self) -> String {
        serde_json::to_string_pretty(&self.to_json()).expect("automaton serializes")
    }
}

/// Interchange format; `null` label entries encode ε.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct AutomatonJson {
    pub k: usize,
    pub alphabets: Vec<u32>,
    pub states: usize,
    pub initial: InitialJson,
    pub transitions: Vec<TransitionJson>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum InitialJson {
    Single(StateId),
    Set(Vec<StateId>),
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TransitionJson {
    pub from: StateId,
    pub label: Vec<Option<u32>>,
    pub to: StateId,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Violation {
    BadTapeCount { l: usize, k: usize },
    InitialNotSingleton { count: usize },
    MixedSupport { state: StateId, first: TransitionId, second: TransitionId },
    DuplicateLabel { state: StateId, first: TransitionId, second: TransitionId },
    NoOutgoing { state: StateId },
    MissingTuple { state: StateId, tuple: Vec<Option<u32>> },
    BadTransitionType { transition: TransitionId, reason: String },
    NotOblivious { state: StateId },
    AlphabetsDiffer,
}

/// Validation outcome: empty means ok.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Diagnostics {
    pub violations: Vec<Violation>,
}

impl Diagnostics {
    pub fn is_ok(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn into_result(self) -> Result<()> {
        if self.is_ok() {
            Ok(())
        } else {
            Err(Error::Validation(self))
        }
    }

    pub fn extend(&mut self, other: Diagnostics) {
        self.violations.extend(other.violations);
    }
}

/// Checks that `I` is a singleton and that, at each state, all outgoing
/// transitions share one ℓ-support and carry pairwise distinct ℓ-labels.
pub fn validate_l_deterministic(a: &KAutomaton, l: usize) -> Diagnostics {
    let mut diag = Diagnostics::default();
    if l == 0 || l > a.k() {
        diag.violations.push(Violation::BadTapeCount { l, k: a.k() });
        return diag;
    }
    if a.initial.len() != 1 {
        diag.violations.push(Violation::InitialNotSingleton { count: a.initial.len() });
    }
    for (state, out) in a.outgoing().into_iter().enumerate() {
        let Some(&first) = out.first() else { continue };
        let support = a.transitions[first].support(l);
        let mut seen: HashMap<&[Option<Symbol>], TransitionId> = HashMap::new();
        for &id in &out {
            let t = &a.transitions[id];
            if t.support(l) != support {
                diag.violations.push(Violation::MixedSupport { state, first, second: id });
            }
            if let Some(&prev) = seen.get(&t.label[..l]) {
                diag.violations.push(Violation::DuplicateLabel { state, first: prev, second: id });
            } else {
                seen.insert(&t.label[..l], id);
            }
        }
    }
    diag
}

/// Checks that every state has an outgoing transition for every ℓ-tuple that
/// matches the state's ℓ-support. Meaningful for ℓ-deterministic automata.
pub fn validate_l_complete(a: &KAutomaton, l: usize) -> Diagnostics {
    let mut diag = Diagnostics::default();
    if l == 0 || l > a.k() {
        diag.violations.push(Violation::BadTapeCount { l, k: a.k() });
        return diag;
    }
    for (state, out) in a.outgoing().into_iter().enumerate() {
        let Some(&first) = out.first() else {
            diag.violations.push(Violation::NoOutgoing { state });
            continue;
        };
        let support = a.transitions[first].support(l);
        let tapes: Vec<usize> = (0..l).filter(|i| support >> i & 1 == 1).collect();
        let present: std::collections::HashSet<&[Option<Symbol>]> =
            out.iter().map(|&id| &a.transitions[id].label[..l]).collect();
        let sizes: Vec<u32> = tapes.iter().map(|&t| a.alphabets[t].size()).collect();
        let total: u64 = sizes.iter().map(|&s| u64::from(s)).product();
        for code in 0..total {
            let mut tuple: Label = vec![None; l];
            let mut rest = code;
            for (&tape, &size) in tapes.iter().zip(&sizes).rev() {
                tuple[tape] = Some((rest % u64::from(size)) as Symbol);
                rest /= u64::from(size);
            }
            if !present.contains(tuple.as_slice()) {
                diag.violations.push(Violation::MissingTuple {
                    state,
                    tuple: tuple.iter().map(|e| e.map(u32::from)).collect(),
                });
            }
        }
    }
    diag
}

#[derive(Clone, Debug)]
struct CompiledState {
    /// input tapes read at this state, in increasing order
    tapes: Vec<usize>,
    /// mixed-radix key over `tapes` -> transition id, `u32::MAX` if absent
    table: Vec<u32>,
}

/// An automaton that passed [`validate_l_deterministic`], with a lookup
/// table per state. The first `l` tapes are inputs, the rest outputs.
#[derive(Clone, Debug)]
pub struct DeterministicAutomaton {
    automaton: KAutomaton,
    l: usize,
    compiled: Vec<CompiledState>,
}

impl DeterministicAutomaton {
    pub fn new(automaton: KAutomaton, l: usize) -> Result<Self> {
        validate_l_deterministic(&automaton, l).into_result()?;
        let mut compiled = Vec::with_capacity(automaton.states);
        for out in automaton.outgoing() {
            let tapes: Vec<usize> = match out.first() {
                Some(&id) => {
                    let s = automaton.transitions[id].support(l);
                    (0..l).filter(|i| s >> i & 1 == 1).collect()
                }
                None => Vec::new(),
            };
            let size: usize =
                tapes.iter().map(|&t| automaton.alphabets[t].size() as usize).product();
            let mut table = vec![u32::MAX; size];
            for &id in &out {
                let label = &automaton.transitions[id].label;
                let key = tapes.iter().fold(0usize, |acc, &t| {
                    acc * automaton.alphabets[t].size() as usize
                        + label[t].expect("support entry is present") as usize
                });
                table[key] = id as u32;
            }
            compiled.push(CompiledState { tapes, table });
        }
        Ok(DeterministicAutomaton { automaton, l, compiled })
    }

    pub fn automaton(&self) -> &KAutomaton {
        &self.automaton
    }

    pub fn l(&self) -> usize {
        self.l
    }

    pub fn initial(&self) -> StateId {
        self.automaton.initial[0]
    }

    /// Input tapes read at `state`.
    pub fn reads(&self, state: StateId) -> &[usize] {
        &self.compiled[state].tapes
    }

    /// The transition taken from `state` on the given input symbols (one per
    /// tape in `reads(state)`).
    pub fn step(&self, state: StateId, symbols: &[Symbol]) -> Option<TransitionId> {
        let c = &self.compiled[state];
        let key = c.tapes.iter().zip(symbols).fold(0usize, |acc, (&t, &s)| {
            acc * self.automaton.alphabets[t].size() as usize + s as usize
        });
        c.table.get(key).copied().filter(|&id| id != u32::MAX).map(|id| id as usize)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum HaltReason {
    Budget,
    InputExhausted,
    /// No transition matches the next input symbols.
    Stuck,
}

/// The realized prefix of a run.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RunTrace {
    pub start: StateId,
    pub end: StateId,
    pub transitions: Vec<u32>,
    /// symbols consumed (input tapes) or produced (output tapes), per tape
    pub consumed: Vec<usize>,
    /// one word per output tape
    pub outputs: Vec<FiniteWord>,
    pub halt: HaltReason,
    state_counts: Vec<u64>,
    transition_counts: Vec<u64>,
    last_read: Vec<Option<usize>>,
}

impl RunTrace {
    pub fn len(&self) -> usize {
        self.transitions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.transitions.is_empty()
    }

    /// `occ(γ[1..n], q)` for every state.
    pub fn state_counts(&self) -> &[u64] {
        &self.state_counts
    }

    /// `occ(γ[1..n], τ)` for every transition.
    pub fn transition_counts(&self) -> &[u64] {
        &self.transition_counts
    }

    pub fn state_frequencies(&self) -> Result<Vec<Ratio<u64>>> {
        frequencies(&self.state_counts, self.len())
    }

    pub fn transition_frequencies(&self) -> Result<Vec<Ratio<u64>>> {
        frequencies(&self.transition_counts, self.len())
    }

    /// Input tapes that were not read during the second half of the run.
    /// On an infinite run this would suggest a tape is read only finitely
    /// often; a finite prefix cannot decide it.
    pub fn starved_tapes(&self) -> Vec<usize> {
        let half = self.len() / 2;
        self.last_read
            .iter()
            .enumerate()
            .filter(|(_, last)| last.map_or(true, |i| i < half))
            .map(|(tape, _)| tape)
            .collect()
    }
}

fn frequencies(counts: &[u64], n: usize) -> Result<Vec<Ratio<u64>>> {
    if n == 0 {
        return Err(Error::EmptyTrace);
    }
    Ok(counts.iter().map(|&c| Ratio::new(c, n as u64)).collect())
}

/// Runs from the initial state. See [`run_from`].
pub fn run(a: &DeterministicAutomaton, inputs: &mut [StreamReader], budget: usize) -> Result<RunTrace> {
    run_from(a, a.initial(), inputs, budget)
}

/// Fires at most `budget` transitions. At each state the tapes of its
/// ℓ-support are peeked; the matching transition, if any, fires and only then
/// consumes its input symbols.
pub fn run_from(
    a: &DeterministicAutomaton,
    start: StateId,
    inputs: &mut [StreamReader],
    budget: usize,
) -> Result<RunTrace> {
    let aut = &a.automaton;
    if inputs.len() != a.l {
        return Err(Error::InvalidParameters(format!(
            "{} input streams given to a {}-deterministic automaton",
            inputs.len(),
            a.l
        )));
    }
    for (tape, r) in inputs.iter().enumerate() {
        if r.alphabet().size() > aut.alphabets[tape].size() {
            return Err(Error::AlphabetMismatch {
                left: r.alphabet().size(),
                right: aut.alphabets[tape].size(),
            });
        }
    }
    let k = aut.k();
    let mut trace = RunTrace {
        start,
        end: start,
        transitions: Vec::with_capacity(budget.min(1 << 24)),
        consumed: vec![0; k],
        outputs: aut.alphabets[a.l..].iter().map(|&al| FiniteWord::empty(al)).collect(),
        halt: HaltReason::Budget,
        state_counts: vec![0; aut.states],
        transition_counts: vec![0; aut.transitions.len()],
        last_read: vec![None; a.l],
    };
    let mut q = start;
    let mut peeked = [0 as Symbol; 8];
    loop {
        if trace.transitions.len() == budget {
            trace.halt = HaltReason::Budget;
            break;
        }
        let c = &a.compiled[q];
        let mut key = 0usize;
        let mut exhausted = false;
        for (slot, &tape) in c.tapes.iter().enumerate() {
            match inputs[tape].peek() {
                Some(s) => {
                    key = key * aut.alphabets[tape].size() as usize + s as usize;
                    if slot < peeked.len() {
                        peeked[slot] = s;
                    }
                }
                None => {
                    exhausted = true;
                    break;
                }
            }
        }
        if exhausted {
            trace.halt = HaltReason::InputExhausted;
            break;
        }
        let id = match c.table.get(key) {
            Some(&id) if id != u32::MAX => id as usize,
            _ => {
                trace.halt = HaltReason::Stuck;
                break;
            }
        };
        let n = trace.transitions.len();
        for &tape in &c.tapes {
            inputs[tape].advance();
            trace.consumed[tape] += 1;
            trace.last_read[tape] = Some(n);
        }
        let t = &aut.transitions[id];
        for (j, out) in trace.outputs.iter_mut().enumerate() {
            if let Some(s) = t.label[a.l + j] {
                out.push(s);
                trace.consumed[a.l + j] += 1;
            }
        }
        trace.state_counts[q] += 1;
        trace.transition_counts[id] += 1;
        trace.transitions.push(id as u32);
        q = t.to;
    }
    trace.end = q;
    Ok(trace)
}

/// How a transition of a normalized automaton relates to the original one.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TransitionOrigin {
    Kept(TransitionId),
    /// `p --a,ε--> q_a`, shared by all original `p --a,b--> q`
    FirstHalf,
    /// `q_a --ε,b--> q`, standing for the original transition
    SecondHalf(TransitionId),
}

/// A 2-automaton whose transitions each carry exactly one non-ε entry, with
/// the bookkeeping needed to map runs back to the original automaton.
#[derive(Clone, Debug)]
pub struct Normalized {
    pub automaton: KAutomaton,
    pub origin: Vec<TransitionOrigin>,
    /// (p, a) for each fresh state `q_a`, in id order after the original states
    pub fresh: Vec<(StateId, Symbol)>,
}

impl Normalized {
    /// Projects a run of the normalized automaton onto original transition ids.
    pub fn project(&self, trace: &RunTrace) -> Vec<TransitionId> {
        trace
            .transitions
            .iter()
            .filter_map(|&id| match self.origin[id as usize] {
                TransitionOrigin::Kept(o) | TransitionOrigin::SecondHalf(o) => Some(o),
                TransitionOrigin::FirstHalf => None,
            })
            .collect()
    }
}

/// Replaces each `p --a,b--> q` by `p --a,ε--> q_a --ε,b--> q`, with one fresh
/// state `q_a` per pair (p, a). Other transitions are kept as they are.
pub fn normalize(a: &KAutomaton) -> Result<Normalized> {
    if a.k() != 2 {
        return Err(Error::WrongArity { expected: 2, found: a.k() });
    }
    let mut fresh_ids: BTreeMap<(StateId, Symbol), StateId> = BTreeMap::new();
    for t in &a.transitions {
        if let [Some(x), Some(_)] = t.label[..] {
            let next = a.states + fresh_ids.len();
            fresh_ids.entry((t.from, x)).or_insert(next);
        }
    }
    // fresh ids follow (p, a) order
    let fresh: Vec<(StateId, Symbol)> = fresh_ids.keys().copied().collect();
    for (i, key) in fresh.iter().enumerate() {
        fresh_ids.insert(*key, a.states + i);
    }
    let mut transitions = Vec::new();
    let mut origin = Vec::new();
    let mut first_half_done = std::collections::HashSet::new();
    for (id, t) in a.transitions.iter().enumerate() {
        match t.label[..] {
            [Some(x), Some(y)] => {
                let mid = fresh_ids[&(t.from, x)];
                if first_half_done.insert(mid) {
                    transitions.push(Transition::new(t.from, vec![Some(x), None], mid));
                    origin.push(TransitionOrigin::FirstHalf);
                }
                transitions.push(Transition::new(mid, vec![None, Some(y)], t.to));
                origin.push(TransitionOrigin::SecondHalf(id));
            }
            _ => {
                transitions.push(t.clone());
                origin.push(TransitionOrigin::Kept(id));
            }
        }
    }
    let automaton = KAutomaton::new(
        a.alphabets.clone(),
        a.states + fresh.len(),
        a.initial.clone(),
        transitions,
    )?;
    Ok(Normalized { automaton, origin, fresh })
}

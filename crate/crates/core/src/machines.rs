//! Selectors, shufflers, splitters and conditional compressors, plus the
//! machines drawn in the figures.

use num_rational::Ratio;
use serde::Serialize;

use crate::automata::{
    run, run_from, validate_l_complete, validate_l_deterministic, DeterministicAutomaton, Diagnostics,
    HaltReason, KAutomaton, RunTrace, StateId, Transition, Violation,
};
use crate::error::{Error, Result};
use crate::words::{Alphabet, FiniteWord, StreamReader, Symbol, WordStream};

pub const BUILTIN_NAMES: [&str; 11] = [
    "fig2-join",
    "fig2-shuffle",
    "fig3",
    "fig4",
    "fig5",
    "fig6-selector",
    "fig7-shuffler",
    "copy-selector",
    "copy-compressor",
    "modsum-compressor",
    "half-compressor",
];

fn t(from: StateId, label: &[Option<Symbol>], to: StateId) -> Transition {
    Transition::new(from, label.to_vec(), to)
}

const E: Option<Symbol> = None;
const O: Option<Symbol> = Some(0);
const I: Option<Symbol> = Some(1);

/// Machines from the figures, binary alphabets throughout. State `q_i` of a
/// drawing is renumbered so that the initial state is 0.
pub fn builtin(name: &str) -> Result<KAutomaton> {
    let b = Alphabet::BINARY;
    let (k, states, ts) = match name {
        "fig2-join" => (3, 2, vec![
            t(0, &[O, E, O], 1),
            t(0, &[I, E, I], 1),
            t(1, &[E, O, O], 0),
            t(1, &[E, I, I], 0),
        ]),
        "fig2-shuffle" | "fig4" => (3, 1, vec![
            t(0, &[O, E, O], 0),
            t(0, &[I, E, I], 0),
            t(0, &[E, O, O], 0),
            t(0, &[E, I, I], 0),
        ]),
        "fig3" => (2, 2, vec![
            t(0, &[O, E], 0),
            t(0, &[I, E], 1),
            t(1, &[E, O], 0),
            t(1, &[E, I], 0),
        ]),
        "fig5" => (2, 4, vec![
            t(0, &[O, E], 2),
            t(0, &[I, E], 3),
            t(1, &[O, E], 2),
            t(1, &[I, E], 3),
            t(2, &[E, O], 0),
            t(2, &[E, I], 1),
            t(3, &[E, I], 0),
            t(3, &[E, O], 1),
        ]),
        "fig6-selector" => (3, 3, vec![
            t(0, &[E, O, E], 1),
            t(0, &[E, I, E], 2),
            t(1, &[O, E, E], 0),
            t(1, &[I, E, E], 0),
            t(2, &[O, E, O], 0),
            t(2, &[I, E, I], 0),
        ]),
        "fig7-shuffler" => (3, 2, vec![
            t(0, &[O, E, O], 0),
            t(0, &[I, E, I], 1),
            t(1, &[E, I, I], 0),
            t(1, &[E, O, O], 1),
        ]),
        "copy-selector" | "copy-compressor" => (3, 1, vec![t(0, &[O, E, O], 0), t(0, &[I, E, I], 0)]),
        "modsum-compressor" => (3, 1, vec![
            t(0, &[O, O, O], 0),
            t(0, &[O, I, I], 0),
            t(0, &[I, O, I], 0),
            t(0, &[I, I, O], 0),
        ]),
        // not injective; exercises the ratio only
        "half-compressor" => (3, 2, vec![
            t(0, &[O, E, E], 1),
            t(0, &[I, E, E], 1),
            t(1, &[O, E, O], 0),
            t(1, &[I, E, I], 0),
        ]),
        _ => return Err(Error::UnknownBuiltin(name.to_string())),
    };
    KAutomaton::new(vec![b; k], states, vec![0], ts)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum SelectorType {
    /// (a,ε|a)
    Copy,
    /// (a,ε|ε)
    SkipX,
    /// (ε,b|ε)
    SkipY,
}

fn selector_type(t: &Transition) -> Option<SelectorType> {
    match t.label[..] {
        [Some(a), None, Some(c)] if a == c => Some(SelectorType::Copy),
        [Some(_), None, None] => Some(SelectorType::SkipX),
        [None, Some(_), None] => Some(SelectorType::SkipY),
        _ => None,
    }
}

fn require_three(a: &KAutomaton, diag: &mut Diagnostics) -> bool {
    if a.k() != 3 {
        diag.violations.push(Violation::BadTapeCount { l: 2, k: a.k() });
        return false;
    }
    true
}

pub fn validate_selector(a: &KAutomaton) -> Diagnostics {
    let mut diag = Diagnostics::default();
    if !require_three(a, &mut diag) {
        return diag;
    }
    diag.extend(validate_l_deterministic(a, 2));
    if a.alphabet(2) != a.alphabet(0) {
        diag.violations.push(Violation::AlphabetsDiffer);
    }
    for (id, tr) in a.transitions().iter().enumerate() {
        if selector_type(tr).is_none() {
            diag.violations.push(Violation::BadTransitionType {
                transition: id,
                reason: "selector transitions are (a,ε|a), (a,ε|ε) or (ε,b|ε)".into(),
            });
        }
    }
    diag
}

/// All transitions leaving a state have the same selector type.
pub fn is_oblivious(a: &KAutomaton) -> bool {
    a.outgoing().iter().all(|out| {
        let types: Vec<_> = out.iter().map(|&id| selector_type(a.transition(id))).collect();
        types.windows(2).all(|w| w[0] == w[1])
    })
}

#[derive(Clone, Debug)]
pub struct Selector {
    det: DeterministicAutomaton,
    oblivious: bool,
}

impl Selector {
    pub fn new(a: KAutomaton) -> Result<Self> {
        validate_selector(&a).into_result()?;
        let oblivious = is_oblivious(&a);
        Ok(Selector { det: DeterministicAutomaton::new(a, 2)?, oblivious })
    }

    pub fn oblivious(&self) -> bool {
        self.oblivious
    }

    pub fn automaton(&self) -> &KAutomaton {
        self.det.automaton()
    }
}

/// Runs the selector for at most `budget` transitions; the output is
/// `outputs[0]` of the trace.
pub fn select(s: &Selector, x: &WordStream, y: &WordStream, budget: usize) -> Result<RunTrace> {
    run(&s.det, &mut [x.reader(), y.reader()], budget)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub enum ShufflerType {
    /// copies from x: (a,ε|a)
    I,
    /// copies from y: (ε,a|a)
    II,
}

pub fn validate_shuffler(a: &KAutomaton) -> Diagnostics {
    let mut diag = Diagnostics::default();
    if !require_three(a, &mut diag) {
        return diag;
    }
    if a.alphabet(0) != a.alphabet(1) || a.alphabet(0) != a.alphabet(2) {
        diag.violations.push(Violation::AlphabetsDiffer);
    }
    diag.extend(validate_l_deterministic(a, 2));
    for (id, tr) in a.transitions().iter().enumerate() {
        let ok = matches!(tr.label[..], [Some(p), None, Some(c)] | [None, Some(p), Some(c)] if p == c);
        if !ok {
            diag.violations.push(Violation::BadTransitionType {
                transition: id,
                reason: "shuffler transitions are (a,ε|a) or (ε,a|a)".into(),
            });
        }
    }
    if diag.is_ok() {
        diag.extend(validate_l_complete(a, 2));
    }
    diag
}

/// A validated shuffler with a dense table `next[q][a]`.
#[derive(Clone, Debug)]
pub struct Shuffler {
    det: DeterministicAutomaton,
    types: Vec<ShufflerType>,
    next: Vec<Vec<StateId>>,
}

impl Shuffler {
    pub fn new(a: KAutomaton) -> Result<Self> {
        validate_shuffler(&a).into_result()?;
        let b = a.alphabet(0).size() as usize;
        let mut types = vec![ShufflerType::I; a.states()];
        let mut next = vec![vec![0; b]; a.states()];
        for tr in a.transitions() {
            let c = tr.label[2].expect("validated") as usize;
            types[tr.from] = if tr.label[0].is_some() { ShufflerType::I } else { ShufflerType::II };
            next[tr.from][c] = tr.to;
        }
        let det = DeterministicAutomaton::new(a, 2)?;
        Ok(Shuffler { det, types, next })
    }

    /// Builds the shuffler with the given state types and targets; the
    /// transition for (q, a) gets id `q·b + a`.
    pub fn from_table(alphabet: Alphabet, types: Vec<ShufflerType>, next: Vec<Vec<StateId>>) -> Result<Self> {
        let b = alphabet.size() as usize;
        let mut ts = Vec::with_capacity(types.len() * b);
        for (q, ty) in types.iter().enumerate() {
            for a in 0..b {
                let s = Some(a as Symbol);
                let label = match ty {
                    ShufflerType::I => vec![s, None, s],
                    ShufflerType::II => vec![None, s, s],
                };
                ts.push(Transition::new(q, label, next[q][a]));
            }
        }
        Shuffler::new(KAutomaton::new(vec![alphabet; 3], types.len(), vec![0], ts)?)
    }

    pub fn automaton(&self) -> &KAutomaton {
        self.det.automaton()
    }

    pub fn alphabet(&self) -> Alphabet {
        self.automaton().alphabet(0)
    }

    pub fn states(&self) -> usize {
        self.types.len()
    }

    pub fn types(&self) -> &[ShufflerType] {
        &self.types
    }

    pub fn next(&self, q: StateId, a: Symbol) -> StateId {
        self.next[q][a as usize]
    }

    pub fn table(&self) -> &[Vec<StateId>] {
        &self.next
    }

    /// The first `n` output symbols on finite inputs, or `None` if a tape
    /// runs out first. Also returns the symbols consumed from x and y.
    pub fn shuffle_slices(&self, x: &[Symbol], y: &[Symbol], n: usize) -> Option<(Vec<Symbol>, usize, usize)> {
        let (mut i, mut j, mut q) = (0, 0, self.det.initial());
        let mut z = Vec::with_capacity(n);
        while z.len() < n {
            let a = match self.types[q] {
                ShufflerType::I => {
                    i += 1;
                    *x.get(i - 1)?
                }
                ShufflerType::II => {
                    j += 1;
                    *y.get(j - 1)?
                }
            };
            z.push(a);
            q = self.next[q][a as usize];
        }
        Some((z, i, j))
    }
}

/// Output of a shuffler run of exactly `n` transitions.
#[derive(Clone, Debug)]
pub struct Shuffled {
    pub output: FiniteWord,
    pub x_consumed: usize,
    pub y_consumed: usize,
    pub trace: RunTrace,
}

pub fn shuffle(s: &Shuffler, x: &WordStream, y: &WordStream, n: usize) -> Result<Shuffled> {
    let trace = run(&s.det, &mut [x.reader(), y.reader()], n)?;
    if trace.halt != HaltReason::Budget {
        return Err(Error::StreamExhausted { available: trace.len(), requested: n });
    }
    Ok(Shuffled {
        output: trace.outputs[0].clone(),
        x_consumed: trace.consumed[0],
        y_consumed: trace.consumed[1],
        trace,
    })
}

/// The shuffler with input and output tapes exchanged: reads z and writes x
/// and y. Transition ids coincide with those of the shuffler.
#[derive(Clone, Debug)]
pub struct Splitter {
    det: DeterministicAutomaton,
}

impl Splitter {
    pub fn automaton(&self) -> &KAutomaton {
        self.det.automaton()
    }
}

pub fn splitter_of(s: &Shuffler) -> Result<Splitter> {
    let a = s.automaton();
    let ts = a
        .transitions()
        .iter()
        .map(|tr| Transition::new(tr.from, vec![tr.label[2], tr.label[0], tr.label[1]], tr.to))
        .collect();
    let split = KAutomaton::new(a.alphabets().to_vec(), a.states(), a.initial().to_vec(), ts)?;
    Ok(Splitter { det: DeterministicAutomaton::new(split, 1)? })
}

/// Reads `n` symbols of z and returns the x and y parts.
pub fn split(sp: &Splitter, z: &WordStream, n: usize) -> Result<(FiniteWord, FiniteWord)> {
    let trace = run(&sp.det, &mut [z.reader()], n)?;
    if trace.halt != HaltReason::Budget {
        return Err(Error::StreamExhausted { available: trace.len(), requested: n });
    }
    let mut outs = trace.outputs.into_iter();
    Ok((outs.next().expect("x tape"), outs.next().expect("y tape")))
}

/// The only run of `s` from `q` that outputs `w`, found by running the
/// splitter on `w`. Its transition ids are shuffler transition ids.
pub fn unique_run_for_output(s: &Shuffler, q: StateId, w: &FiniteWord) -> Result<RunTrace> {
    let sp = splitter_of(s)?;
    let mut input = [StreamReader::new(WordStream::Explicit(w.clone()))];
    run_from(&sp.det, q, &mut input, w.len())
}

#[derive(Clone, Debug)]
pub struct Compressor3 {
    det: DeterministicAutomaton,
}

impl Compressor3 {
    /// Structural checks only; injectivity in x is the caller's claim.
    pub fn new(a: KAutomaton) -> Result<Self> {
        if a.k() != 3 {
            return Err(Error::WrongArity { expected: 3, found: a.k() });
        }
        Ok(Compressor3 { det: DeterministicAutomaton::new(a, 2)? })
    }

    pub fn automaton(&self) -> &KAutomaton {
        self.det.automaton()
    }
}

/// |output| / |x consumed| after n transitions and at the checkpoints
/// n, n/2, n/4, … (those where some x symbol was consumed).
#[derive(Clone, Debug, Serialize)]
pub struct CompressionReport {
    pub transitions: usize,
    pub x_consumed: usize,
    pub output_len: usize,
    #[serde(serialize_with = "ser_ratio")]
    pub ratio: Ratio<u64>,
    /// ratio times log|A| / log|B|
    pub corrected: f64,
    #[serde(serialize_with = "ser_ratio")]
    pub running_min: Ratio<u64>,
    pub checkpoints: Vec<Checkpoint>,
}

#[derive(Clone, Debug, Serialize)]
pub struct Checkpoint {
    pub n: usize,
    #[serde(serialize_with = "ser_ratio")]
    pub ratio: Ratio<u64>,
}

fn ser_ratio<S: serde::Serializer>(r: &Ratio<u64>, s: S) -> std::result::Result<S::Ok, S::Error> {
    s.serialize_str(&crate::rational::format_ratio(r))
}

pub fn conditional_compression_ratio(c: &Compressor3, x: &WordStream, y: &WordStream, n: usize) -> Result<CompressionReport> {
    let trace = run(&c.det, &mut [x.reader(), y.reader()], n)?;
    let a = c.automaton();
    let mut marks: Vec<usize> = std::iter::successors(Some(trace.len()), |&m| (m > 1).then_some(m / 2)).collect();
    marks.reverse();
    let (mut xs, mut out) = (0u64, 0u64);
    let mut checkpoints = Vec::new();
    let mut mi = 0;
    for (i, &id) in trace.transitions.iter().enumerate() {
        let label = &a.transition(id as usize).label;
        xs += u64::from(label[0].is_some());
        out += u64::from(label[2].is_some());
        while mi < marks.len() && marks[mi] == i + 1 {
            if xs > 0 {
                checkpoints.push(Checkpoint { n: i + 1, ratio: Ratio::new(out, xs) });
            }
            mi += 1;
        }
    }
    if xs == 0 {
        return Err(Error::NothingConsumed);
    }
    checkpoints.reverse();
    let ratio = Ratio::new(out, xs);
    let running_min = checkpoints.iter().map(|c| c.ratio).min().unwrap_or(ratio);
    let scale = f64::from(a.alphabet(0).size()).ln() / f64::from(a.alphabet(2).size()).ln();
    Ok(CompressionReport {
        transitions: trace.len(),
        x_consumed: xs as usize,
        output_len: out as usize,
        corrected: *ratio.numer() as f64 / *ratio.denom() as f64 * scale,
        ratio,
        running_min,
        checkpoints,
    })
}

//! `normfsi`: command-line front end.
//!
//! Exit codes: 0 ok, 1 usage, 2 budget refusal, 3 validation failure.
//! Diagnostics go to stderr as one JSON object.

use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use num_bigint::BigUint;
use serde::Deserialize;
use serde_json::{json, Value};

use normfsi_core::automata::{normalize, run, validate_l_complete, validate_l_deterministic};
use normfsi_core::construction::{
    compute_n0, construct_pair, decode_shuffler, enumerate_shufflers, extension_size, hardy_bound,
    ln_big, measure, required_pairs, tail_count, verify_bound_a, verify_bound_e, verify_bound_quad,
    CheckpointFile, ConstraintSystem, ConstructOptions, CylinderPair, EllBase, Engine, MeasureOptions,
    Schedule, SelectionRule,
};
use normfsi_core::machines::{
    builtin, conditional_compression_ratio, select, shuffle, split, splitter_of, Compressor3, Selector, Shuffler,
};
use normfsi_core::markov::{block_product, stationary};
use normfsi_core::normality::{c_bound_check, simple_normality_discrepancy, sliding_discrepancy, DiscrepancyReport};
use normfsi_core::rational::{format_ratio, format_rational, parse_rational};
use normfsi_core::{Alphabet, DeterministicAutomaton, Error, FiniteWord, KAutomaton, WordStream};

const DEFAULT_BUDGET: u128 = 1 << 32;

#[derive(Parser)]
#[command(name = "normfsi", version, about = "Finite-state independence of normal words")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Args)]
struct Source {
    /// automaton JSON file
    #[arg(long, conflicts_with = "builtin")]
    file: Option<PathBuf>,
    /// built-in machine name
    #[arg(long)]
    builtin: Option<String>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Digits,
    Json,
    Csv,
}

#[derive(Clone, Copy, ValueEnum)]
enum StatMode {
    Aligned,
    Sliding,
}

#[derive(Clone, Copy, ValueEnum)]
enum BoundKind {
    Hardy,
    E,
    A,
    Quad,
    N0,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Paper,
    Relaxed,
}

#[derive(Clone, Copy, ValueEnum)]
enum EngineArg {
    Memo,
    Grid,
}

#[derive(Clone, Copy, ValueEnum)]
enum RuleArg {
    Largest,
    Threshold,
}

#[derive(Clone, Copy, ValueEnum)]
enum EllBaseArg {
    Alphabet,
    Natural,
}

#[derive(Subcommand)]
enum Cmd {
    /// Print a prefix of a word stream
    Generate {
        #[arg(long)]
        stream: String,
        #[arg(long)]
        n: usize,
        #[arg(long, value_enum, default_value = "digits")]
        format: Format,
    },
    /// Check l-determinism (and l-completeness with --complete)
    Validate {
        #[command(flatten)]
        src: Source,
        #[arg(long, default_value_t = 2)]
        l: usize,
        #[arg(long)]
        complete: bool,
    },
    /// Split transitions that read both tapes of a 2-automaton
    Normalize {
        #[command(flatten)]
        src: Source,
    },
    /// Run an l-deterministic automaton on word streams
    Run {
        #[command(flatten)]
        src: Source,
        /// one stream spec per input tape
        #[arg(long = "input", required = true)]
        inputs: Vec<String>,
        #[arg(long)]
        n: usize,
    },
    /// Empirical state and transition frequencies of a run
    Freqs {
        #[command(flatten)]
        src: Source,
        #[arg(long = "input", required = true)]
        inputs: Vec<String>,
        #[arg(long)]
        n: usize,
        #[arg(long, value_enum, default_value = "json")]
        format: Format,
    },
    /// Exact stationary distribution of a 2-deterministic 2-automaton
    Stationary {
        #[command(flatten)]
        src: Source,
    },
    /// Look-ahead product automaton A_{k,l}
    BlockProduct {
        #[command(flatten)]
        src: Source,
        #[arg(long)]
        k: usize,
        #[arg(long)]
        l: usize,
        #[arg(long)]
        budget: Option<u128>,
        /// also print the stationary distribution of the recurrent part
        #[arg(long)]
        stationary: bool,
    },
    /// Output of a selector after n transitions
    Select {
        #[command(flatten)]
        src: Source,
        #[arg(long)]
        x: String,
        #[arg(long)]
        y: String,
        #[arg(long)]
        n: usize,
        #[arg(long, value_enum, default_value = "digits")]
        format: Format,
    },
    /// First n symbols of a shuffle
    Shuffle {
        #[command(flatten)]
        src: Source,
        #[arg(long)]
        x: String,
        #[arg(long)]
        y: String,
        #[arg(long)]
        n: usize,
        #[arg(long, value_enum, default_value = "digits")]
        format: Format,
    },
    /// Undo a shuffle: recover the x and y parts of n output symbols
    Split {
        #[command(flatten)]
        src: Source,
        #[arg(long)]
        z: String,
        #[arg(long)]
        n: usize,
        #[arg(long, value_enum, default_value = "json")]
        format: Format,
    },
    /// Conditional compression ratio of a 3-automaton
    CompressRatio {
        #[command(flatten)]
        src: Source,
        #[arg(long)]
        x: String,
        #[arg(long)]
        y: String,
        #[arg(long)]
        n: usize,
    },
    /// Block-frequency deviations of a stream prefix
    NormalityStats {
        #[arg(long)]
        stream: String,
        #[arg(long)]
        n: usize,
        #[arg(long, default_value_t = 3)]
        l_max: usize,
        #[arg(long, value_enum, default_value = "aligned")]
        mode: StatMode,
        /// also check occ(w,u)/|w| <= C/b^l
        #[arg(long)]
        c_bound: Option<String>,
        #[arg(long, value_enum, default_value = "json")]
        format: Format,
    },
    /// List shufflers S_from, ..., as automaton JSON lines
    EnumerateShufflers {
        #[arg(long, default_value_t = 1)]
        from: u128,
        #[arg(long)]
        count: usize,
        #[arg(long, default_value_t = 2)]
        alphabet: u32,
    },
    /// Exact measure of E, F or G intersected with a cylinder pair
    Measure {
        /// JSON text or a path to a JSON file
        #[arg(long)]
        params: String,
        #[arg(long)]
        budget: Option<u128>,
    },
    /// Tail bound and measure lower bounds
    Bounds {
        #[arg(long, value_enum)]
        kind: BoundKind,
        #[arg(long, default_value_t = 2)]
        b: u32,
        #[arg(long)]
        r: Option<usize>,
        #[arg(long)]
        gamma: Option<String>,
        #[arg(long)]
        eps: Option<String>,
        #[arg(long)]
        n: Option<usize>,
        #[arg(long)]
        t: Option<usize>,
        #[arg(long)]
        l: Option<usize>,
        #[arg(long, value_enum, default_value = "alphabet")]
        ell_base: EllBaseArg,
        #[arg(long)]
        budget: Option<u128>,
        #[arg(long, default_value_t = 1)]
        workers: usize,
    },
    /// Nested-cylinder construction of a pair of words
    ConstructPair {
        #[arg(long, value_enum, default_value = "relaxed")]
        mode: ModeArg,
        #[arg(long, default_value_t = 8)]
        steps: usize,
        /// relaxed parameters as JSON text or a path
        #[arg(long)]
        schedule: Option<String>,
        #[arg(long)]
        budget: Option<u128>,
        /// resumed from when present, rewritten after every step
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "digits")]
        emit: Format,
        #[arg(long, default_value_t = 1)]
        workers: usize,
        #[arg(long, value_enum, default_value = "memo")]
        engine: EngineArg,
        #[arg(long, value_enum, default_value = "largest")]
        rule: RuleArg,
        #[arg(long, value_enum, default_value = "alphabet")]
        ell_base: EllBaseArg,
        #[arg(long, default_value_t = 2)]
        alphabet: u32,
    },
}

enum Failure {
    Usage(String),
    Budget(Value),
    Validation(Value),
    Core(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Core(e)
    }
}

impl From<io::Error> for Failure {
    fn from(e: io::Error) -> Self {
        Failure::Usage(e.to_string())
    }
}

type Out = Result<(), Failure>;

impl Failure {
    fn report(self) -> (u8, Value) {
        match self {
            Failure::Usage(msg) => (1, json!({ "error": "usage", "message": msg })),
            Failure::Budget(v) => (2, v),
            Failure::Validation(v) => (3, v),
            Failure::Core(e) => match e {
                Error::BudgetExceeded { ref required, budget } => (
                    2,
                    json!({ "error": "budget", "required": required.to_string(), "budget": budget.to_string(), "message": e.to_string() }),
                ),
                Error::Validation(ref d) => (3, json!({ "error": "validation", "violations": d.violations })),
                Error::NotStronglyConnected | Error::NotNormalized | Error::WrongArity { .. } | Error::DeadEnd { .. } => {
                    (3, json!({ "error": "validation", "message": e.to_string() }))
                }
                other => (1, json!({ "error": "usage", "message": other.to_string() })),
            },
        }
    }
}

fn default_budget() -> u128 {
    std::env::var("NORMFSI_BUDGET").ok().and_then(|v| v.trim().parse().ok()).unwrap_or(DEFAULT_BUDGET)
}

fn load(src: &Source) -> Result<KAutomaton, Failure> {
    match (&src.file, &src.builtin) {
        (Some(p), None) => Ok(KAutomaton::from_json_str(&fs::read_to_string(p)?)?),
        (None, Some(name)) => Ok(builtin(name)?),
        _ => Err(Failure::Usage("give exactly one of --file and --builtin".into())),
    }
}

/// Inline JSON, or the contents of a file.
fn json_arg(text: &str) -> Result<String, Failure> {
    if text.trim_start().starts_with('{') {
        Ok(text.to_string())
    } else {
        Ok(fs::read_to_string(text)?)
    }
}

fn stream(spec: &str) -> Result<WordStream, Failure> {
    Ok(spec.parse()?)
}

fn print_json(v: &Value) {
    println!("{v}");
}

fn state_map<T, F: Fn(&T) -> String>(values: &[T], f: F) -> Value {
    let mut m = serde_json::Map::new();
    for (i, v) in values.iter().enumerate() {
        m.insert(format!("q{i}"), Value::String(f(v)));
    }
    Value::Object(m)
}

fn emit_word(w: &FiniteWord, format: Format, extra: Value) {
    match format {
        Format::Json => {
            let mut v = extra;
            v["output"] = Value::String(w.to_string());
            print_json(&v);
        }
        _ => println!("{w}"),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = match e.kind() {
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match dispatch(cli.cmd) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            let (code, v) = f.report();
            eprintln!("{v}");
            ExitCode::from(code)
        }
    }
}

fn dispatch(cmd: Cmd) -> Out {
    match cmd {
        Cmd::Generate { stream: spec, n, format } => {
            let w = stream(&spec)?.prefix(n)?;
            emit_word(&w, format, json!({ "stream": spec, "n": n }));
        }
        Cmd::Validate { src, l, complete } => {
            let a = load(&src)?;
            let mut d = validate_l_deterministic(&a, l);
            if complete {
                d.extend(validate_l_complete(&a, l));
            }
            if !d.is_ok() {
                return Err(Failure::Validation(json!({ "error": "validation", "violations": d.violations })));
            }
            print_json(&json!({ "ok": true, "l": l, "complete": complete }));
        }
        Cmd::Normalize { src } => {
            let norm = normalize(&load(&src)?)?;
            println!("{}", norm.automaton.to_json_string());
        }
        Cmd::Run { src, inputs, n } => {
            let a = load(&src)?;
            let det = DeterministicAutomaton::new(a, inputs.len())?;
            let mut readers = inputs.iter().map(|s| stream(s).map(|w| w.reader())).collect::<Result<Vec<_>, _>>()?;
            let tr = run(&det, &mut readers, n)?;
            print_json(&json!({
                "transitions": tr.len(),
                "end": tr.end,
                "halt": tr.halt,
                "consumed": tr.consumed,
                "outputs": tr.outputs.iter().map(FiniteWord::to_string).collect::<Vec<_>>(),
                "path": tr.transitions,
            }));
        }
        Cmd::Freqs { src, inputs, n, format } => {
            let a = load(&src)?;
            let det = DeterministicAutomaton::new(a, inputs.len())?;
            let mut readers = inputs.iter().map(|s| stream(s).map(|w| w.reader())).collect::<Result<Vec<_>, _>>()?;
            let tr = run(&det, &mut readers, n)?;
            let sf = tr.state_frequencies()?;
            let tf = tr.transition_frequencies()?;
            match format {
                Format::Csv => {
                    println!("kind,id,count,frequency");
                    for (i, f) in sf.iter().enumerate() {
                        println!("state,{i},{},{}", tr.state_counts()[i], format_ratio(f));
                    }
                    for (i, f) in tf.iter().enumerate() {
                        println!("transition,{i},{},{}", tr.transition_counts()[i], format_ratio(f));
                    }
                }
                _ => print_json(&json!({
                    "transitions": tr.len(),
                    "halt": tr.halt,
                    "states": state_map(&sf, format_ratio),
                    "transition_frequencies": tf.iter().map(format_ratio).collect::<Vec<_>>(),
                })),
            }
        }
        Cmd::Stationary { src } => {
            let pi = stationary(&load(&src)?)?;
            print_json(&state_map(&pi, format_rational));
        }
        Cmd::BlockProduct { src, k, l, budget, stationary: with_pi } => {
            let a = load(&src)?;
            let bp = block_product(&a, k, l, budget.unwrap_or_else(default_budget))?;
            let states: Vec<Value> = bp
                .states
                .iter()
                .enumerate()
                .map(|(i, s)| json!({ "id": i, "q": s.q, "u": s.u.to_string(), "v": s.v.to_string() }))
                .collect();
            let mut out = json!({
                "k": k,
                "l": l,
                "states": states,
                "recurrent": bp.recurrent(),
                "automaton": bp.automaton.to_json(),
            });
            if with_pi {
                let pi = stationary(&bp.restriction()?)?;
                let mut m = serde_json::Map::new();
                for (id, p) in bp.recurrent().into_iter().zip(pi) {
                    m.insert(id.to_string(), Value::String(format_rational(&p)));
                }
                out["stationary"] = Value::Object(m);
            }
            print_json(&out);
        }
        Cmd::Select { src, x, y, n, format } => {
            let sel = Selector::new(load(&src)?)?;
            let tr = select(&sel, &stream(&x)?, &stream(&y)?, n)?;
            emit_word(&tr.outputs[0], format, json!({ "transitions": tr.len(), "consumed": tr.consumed, "oblivious": sel.oblivious() }));
        }
        Cmd::Shuffle { src, x, y, n, format } => {
            let s = Shuffler::new(load(&src)?)?;
            let out = shuffle(&s, &stream(&x)?, &stream(&y)?, n)?;
            emit_word(&out.output, format, json!({ "x_consumed": out.x_consumed, "y_consumed": out.y_consumed }));
        }
        Cmd::Split { src, z, n, format } => {
            let s = Shuffler::new(load(&src)?)?;
            let (x, y) = split(&splitter_of(&s)?, &stream(&z)?, n)?;
            match format {
                Format::Json => print_json(&json!({ "x": x.to_string(), "y": y.to_string() })),
                _ => println!("{x}\n{y}"),
            }
        }
        Cmd::CompressRatio { src, x, y, n } => {
            let c = Compressor3::new(load(&src)?)?;
            let rep = conditional_compression_ratio(&c, &stream(&x)?, &stream(&y)?, n)?;
            print_json(&serde_json::to_value(&rep).map_err(Error::from)?);
        }
        Cmd::NormalityStats { stream: spec, n, l_max, mode, c_bound, format } => {
            let w = stream(&spec)?.prefix(n)?;
            let reports = (1..=l_max)
                .map(|l| match mode {
                    StatMode::Aligned => simple_normality_discrepancy(&w, l),
                    StatMode::Sliding => sliding_discrepancy(&w, l),
                })
                .collect::<Result<Vec<DiscrepancyReport>, _>>()?;
            let verdicts = match &c_bound {
                Some(c) => Some(c_bound_check(&w, l_max, &parse_rational(c)?)?),
                None => None,
            };
            match format {
                Format::Csv => {
                    println!("l,mode,block,count,denominator,deviation");
                    for r in &reports {
                        for (code, (c, d)) in r.counts.iter().zip(&r.deviations).enumerate() {
                            let block = FiniteWord::from_code(w.alphabet(), code as u64, r.l);
                            let mode = if matches!(mode, StatMode::Aligned) { "aligned" } else { "sliding" };
                            println!("{},{mode},{block},{c},{},{}", r.l, r.denominator, format_rational(d));
                        }
                    }
                }
                _ => {
                    let mut out = json!({
                        "stream": spec,
                        "n": n,
                        "reports": reports.iter().map(DiscrepancyReport::to_json).collect::<Vec<_>>(),
                    });
                    if let Some(v) = verdicts {
                        out["c_bound"] = json!({ "c": c_bound, "verdicts": v });
                    }
                    print_json(&out);
                }
            }
        }
        Cmd::EnumerateShufflers { from, count, alphabet } => {
            let al = Alphabet::new(alphabet)?;
            let list = enumerate_shufflers(al, from, count)?;
            let mut stdout = io::stdout().lock();
            for (i, s) in list.iter().enumerate() {
                let v = json!({ "index": (from + i as u128).to_string(), "automaton": s.automaton().to_json() });
                writeln!(stdout, "{v}")?;
            }
        }
        Cmd::Measure { params, budget } => measure_cmd(&json_arg(&params)?, budget.unwrap_or_else(default_budget))?,
        Cmd::Bounds { kind, b, r, gamma, eps, n, t, l, ell_base, budget, workers } => {
            let budget = budget.unwrap_or_else(default_budget);
            let need = |name: &str| Failure::Usage(format!("--{name} is required for this kind"));
            let al = Alphabet::new(b)?;
            let base = match ell_base {
                EllBaseArg::Alphabet => EllBase::Alphabet,
                EllBaseArg::Natural => EllBase::Natural,
            };
            let opts = MeasureOptions { engine: Engine::Memo, workers, budget };
            match kind {
                BoundKind::N0 => {
                    let (n0, n_min) = compute_n0(b, base);
                    print_json(&json!({ "b": b, "n_min": n_min.to_string(), "n0": n0 }));
                }
                BoundKind::Hardy => {
                    let r = r.ok_or_else(|| need("r"))?;
                    let n = n.ok_or_else(|| need("n"))?;
                    let eps = parse_rational(eps.as_deref().ok_or_else(|| need("eps"))?)?;
                    let gamma = match gamma {
                        Some(g) => FiniteWord::parse(al, &g)?,
                        None => FiniteWord::from_code(al, 0, r),
                    };
                    if gamma.len() != r {
                        return Err(Failure::Usage("--gamma must have length r".into()));
                    }
                    let h = hardy_bound(b, r, &eps, n);
                    let tail = tail_count(&gamma, &eps, n)?;
                    let tail_ln = ln_big(&tail);
                    print_json(&json!({
                        "b": b, "r": r, "n": n, "eps": format_rational(&eps), "gamma": gamma.to_string(),
                        "tail_count": tail.to_string(),
                        "ln_tail": if tail_ln.is_finite() { json!(tail_ln) } else { Value::Null },
                        "ln_bound": h.ln,
                        "in_window": h.in_window,
                        "holds": tail_ln < h.ln,
                    }));
                }
                BoundKind::E => {
                    let n = n.ok_or_else(|| need("n"))?;
                    let eps = parse_rational(eps.as_deref().ok_or_else(|| need("eps"))?)?;
                    let gamma = FiniteWord::parse(al, gamma.as_deref().ok_or_else(|| need("gamma"))?)?;
                    print_json(&serde_json::to_value(verify_bound_e(&eps, &gamma, n)?).map_err(Error::from)?);
                }
                BoundKind::A => {
                    let n = n.ok_or_else(|| need("n"))?;
                    let t = t.ok_or_else(|| need("t"))?;
                    let l = l.ok_or_else(|| need("l"))?;
                    let eps = parse_rational(eps.as_deref().ok_or_else(|| need("eps"))?)?;
                    let shufflers = enumerate_shufflers(al, 1, t)?;
                    let rep = verify_bound_a(al, shufflers, &eps, t, l, n, &opts)?;
                    print_json(&serde_json::to_value(rep).map_err(Error::from)?);
                }
                BoundKind::Quad => {
                    let n_min = compute_n0(b, base).1;
                    let n = match n {
                        Some(n) => n,
                        None => usize::try_from(n_min).map_err(|_| Failure::Usage("n_start too large".into()))?,
                    };
                    let required = big_pow(b, 2 * n);
                    if required > BigUint::from(budget) {
                        // too large to count: report the statement only
                        print_json(&json!({
                            "n": n,
                            "statement": format!("mu(F_{n}) >= 1 - 1/{}", n * n),
                            "bound": format!("{}/{}", n * n - 1, n * n),
                            "feasible": false,
                            "required_pairs": required.to_string(),
                            "budget": budget.to_string(),
                        }));
                    } else {
                        let rep = verify_bound_quad(al, n, base, &opts)?;
                        let mut v = serde_json::to_value(rep).map_err(Error::from)?;
                        v["n"] = json!(n);
                        v["feasible"] = json!(true);
                        print_json(&v);
                    }
                }
            }
        }
        Cmd::ConstructPair { mode, steps, schedule, budget, checkpoint, emit, workers, engine, rule, ell_base, alphabet } => {
            construct_cmd(ConstructArgs { mode, steps, schedule, budget, checkpoint, emit, workers, engine, rule, ell_base, alphabet })?
        }
    }
    Ok(())
}

fn big_pow(b: u32, e: usize) -> BigUint {
    BigUint::from(b).pow(e as u32)
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct CheckJson {
    s: usize,
    t: usize,
    l: usize,
    eps: String,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct MeasureJson {
    set: String,
    #[serde(default = "two")]
    alphabet: u32,
    #[serde(default)]
    u: String,
    #[serde(default)]
    v: String,
    // E
    shuffler: Option<u128>,
    gamma: Option<String>,
    // E and F
    eps: Option<String>,
    n: Option<usize>,
    t: Option<usize>,
    l: Option<usize>,
    // G
    checks: Option<Vec<CheckJson>>,
    #[serde(default)]
    engine: Option<String>,
    #[serde(default)]
    workers: Option<usize>,
}

fn two() -> u32 {
    2
}

fn word(al: Alphabet, text: &str) -> Result<FiniteWord, Failure> {
    if text.is_empty() || text == "ε" {
        Ok(FiniteWord::empty(al))
    } else {
        Ok(FiniteWord::parse(al, text)?)
    }
}

fn measure_cmd(text: &str, budget: u128) -> Out {
    let p: MeasureJson = serde_json::from_str(text).map_err(Error::from)?;
    let al = Alphabet::new(p.alphabet)?;
    let missing = |f: &str| Failure::Usage(format!("params field {f:?} is required for set {}", p.set));
    let sys = match p.set.as_str() {
        "E" => {
            let s = decode_shuffler(al, p.shuffler.ok_or_else(|| missing("shuffler"))?)?;
            let eps = parse_rational(p.eps.as_deref().ok_or_else(|| missing("eps"))?)?;
            let gamma = FiniteWord::parse(al, p.gamma.as_deref().ok_or_else(|| missing("gamma"))?)?;
            ConstraintSystem::e_set(s, eps, gamma, p.n.ok_or_else(|| missing("n"))?)
        }
        "F" => {
            let t = p.t.ok_or_else(|| missing("t"))?;
            let eps = parse_rational(p.eps.as_deref().ok_or_else(|| missing("eps"))?)?;
            let shufflers = enumerate_shufflers(al, 1, t)?;
            ConstraintSystem::f_set(al, shufflers, eps, t, p.l.ok_or_else(|| missing("l"))?, p.n.ok_or_else(|| missing("n"))?)?
        }
        "G" => {
            let checks = p.checks.as_ref().ok_or_else(|| missing("checks"))?;
            let t_max = checks.iter().map(|c| c.t).max().unwrap_or(0);
            let mut sys = ConstraintSystem::new(al, enumerate_shufflers(al, 1, t_max)?);
            for c in checks {
                sys.intersect_f(&parse_rational(&c.eps)?, c.t, c.l, c.s)?;
            }
            sys
        }
        other => return Err(Failure::Usage(format!("unknown set {other:?}; expected E, F or G"))),
    };
    let cyl = CylinderPair::new(word(al, &p.u)?, word(al, &p.v)?);
    let engine = match p.engine.as_deref() {
        None | Some("memo") => Engine::Memo,
        Some("grid") => Engine::Grid,
        Some(e) => return Err(Failure::Usage(format!("unknown engine {e:?}"))),
    };
    let opts = MeasureOptions { engine, workers: p.workers.unwrap_or(1), budget };
    let (_, _, nominal) = extension_size(&sys, &cyl);
    let m = measure(&sys, &cyl, &opts)?;
    print_json(&json!({
        "set": p.set,
        "cylinder": cyl.to_string(),
        "count": m.count.to_string(),
        "exponent": m.exponent,
        "base": m.base,
        "value": format_rational(&m.to_rational()),
        "approx": m.to_f64(),
        "pairs": nominal.to_string(),
    }));
    Ok(())
}

struct ConstructArgs {
    mode: ModeArg,
    steps: usize,
    schedule: Option<String>,
    budget: Option<u128>,
    checkpoint: Option<PathBuf>,
    emit: Format,
    workers: usize,
    engine: EngineArg,
    rule: RuleArg,
    ell_base: EllBaseArg,
    alphabet: u32,
}

fn write_checkpoint(path: &Path, cp: &CheckpointFile) -> io::Result<()> {
    let tmp = path.with_extension("tmp");
    fs::write(&tmp, serde_json::to_string_pretty(cp).expect("checkpoint serializes") + "\n")?;
    fs::rename(tmp, path)
}

fn construct_cmd(a: ConstructArgs) -> Out {
    let al = Alphabet::new(a.alphabet)?;
    let base = match a.ell_base {
        EllBaseArg::Alphabet => EllBase::Alphabet,
        EllBaseArg::Natural => EllBase::Natural,
    };
    let sched = match (a.mode, &a.schedule) {
        (ModeArg::Paper, Some(_)) => return Err(Failure::Usage("--schedule applies to relaxed mode only".into())),
        (ModeArg::Paper, None) => Schedule::paper(al, base),
        (ModeArg::Relaxed, None) => Schedule::relaxed_default(al),
        (ModeArg::Relaxed, Some(text)) => {
            let mut v: Value = serde_json::from_str(&json_arg(text)?).map_err(Error::from)?;
            if v.get("alphabet").is_none() {
                v["alphabet"] = json!(a.alphabet);
            }
            Schedule::relaxed_from_json(&v.to_string())?
        }
    };
    let opts = ConstructOptions {
        budget: a.budget.unwrap_or_else(default_budget),
        workers: a.workers,
        engine: match a.engine {
            EngineArg::Memo => Engine::Memo,
            EngineArg::Grid => Engine::Grid,
        },
        rule: match a.rule {
            RuleArg::Largest => SelectionRule::Largest,
            RuleArg::Threshold => SelectionRule::Threshold,
        },
    };
    let resume = match &a.checkpoint {
        Some(p) if p.exists() && fs::metadata(p)?.len() > 0 => {
            let cp: CheckpointFile = serde_json::from_str(&fs::read_to_string(p)?).map_err(Error::from)?;
            Some(cp)
        }
        _ => None,
    };
    let emit = a.emit;
    let mut stdout = io::stdout().lock();
    if let (Format::Json, Some(cp)) = (emit, &resume) {
        writeln!(stdout, "{}", json!({ "resumed_at": cp.step, "u": cp.u, "v": cp.v }))?;
    }
    let path = a.checkpoint.clone();
    let outcome = construct_pair(&sched, a.steps, &opts, resume.as_ref(), |rec, cp| {
        let res = match emit {
            Format::Json => writeln!(stdout, "{}", rec.to_json()),
            _ => write!(stdout, "{}", rec.chosen),
        };
        res.and_then(|_| stdout.flush())
            .map_err(|e| Error::InvalidParameters(format!("cannot write output: {e}")))?;
        if let Some(p) = &path {
            write_checkpoint(p, cp).map_err(|e| Error::InvalidParameters(format!("cannot write checkpoint: {e}")))?;
        }
        Ok(())
    })?;
    let last = outcome.cylinders.last().expect("at least I_0");
    match emit {
        Format::Json => writeln!(
            stdout,
            "{}",
            json!({
                "steps": outcome.checkpoint.step,
                "cylinder": last.to_string(),
                "u": last.u.to_string(),
                "v": last.v.to_string(),
                "schedule": sched.to_json(),
                "schedule_hash": outcome.checkpoint.schedule_hash,
            })
        )?,
        _ => writeln!(stdout, "\n{last}")?,
    }
    stdout.flush()?;
    if let Some(p) = &a.checkpoint {
        write_checkpoint(p, &outcome.checkpoint)?;
    }
    if let Some(r) = outcome.refusal {
        let mut v = r.to_json();
        v["mode"] = json!(match a.mode {
            ModeArg::Paper => "paper",
            ModeArg::Relaxed => "relaxed",
        });
        if let Some(n0) = sched.n0() {
            v["n0"] = json!(n0);
            v["n_min"] = json!(compute_n0(a.alphabet, base).1.to_string());
        }
        let first = required_pairs(&sched, 0)?;
        v["first_step_required_pairs"] = json!(first.to_string());
        v["completed_steps"] = json!(outcome.checkpoint.step);
        v["message"] = json!(format!(
            "step {} needs {} extension pairs, budget is {}",
            r.step, r.required, r.budget
        ));
        return Err(Failure::Budget(v));
    }
    Ok(())
}

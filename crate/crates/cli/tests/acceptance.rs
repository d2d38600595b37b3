//! Acceptance run: one PASS/FAIL line per criterion, nonzero exit if any
//! criterion fails. Wall-clock limits are part of each verdict.

use std::process::{Command, Output};
use std::time::{Duration, Instant};

use num_bigint::BigUint;
use num_rational::BigRational;
use num_traits::{ToPrimitive, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::Value;

use normfsi_core::construction::{
    count_p, decode_shuffler, enumerate_shufflers, hardy_bound, ln_big, measure, tail_count, window,
    ConstraintSystem, ConstructOptions, CylinderPair, Engine, MeasureOptions, Params, Schedule,
};
use normfsi_core::machines::{builtin, select, shuffle, split, splitter_of, Selector, Shuffler, ShufflerType};
use normfsi_core::markov::{block_product, stationary};
use normfsi_core::normality::{c_bound_check, simple_normality_discrepancy, sliding_discrepancy};
use normfsi_core::{alocc, occ, run, Alphabet, DeterministicAutomaton, FiniteWord, WordStream};

const B: Alphabet = Alphabet::BINARY;

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: impl Into<String>) -> Verdict {
    Verdict { pass, detail: detail.into() }
}

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_normfsi"));
    c.env_remove("NORMFSI_BUDGET");
    c
}

fn call(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn stream(spec: &str) -> WordStream {
    spec.parse().unwrap()
}

fn w(s: &str) -> FiniteWord {
    FiniteWord::parse(B, s).unwrap()
}

fn q(p: i64, d: i64) -> BigRational {
    BigRational::new(p.into(), d.into())
}

fn c1_worked_examples() -> Verdict {
    let occ_ok = occ(&w("00000"), &w("00")).unwrap() == 4 && alocc(&w("00000"), &w("00")).unwrap() == 2;
    let det = DeterministicAutomaton::new(builtin("fig2-join").unwrap(), 2).unwrap();
    let (x, y) = (stream("prng:2:11"), stream("prng:2:12"));
    let tr = run(&det, &mut [x.reader(), y.reader()], 2000).unwrap();
    let (xp, yp) = (x.prefix(1000).unwrap(), y.prefix(1000).unwrap());
    let join_ok = (0..1000).all(|i| tr.outputs[0].at(2 * i) == xp.at(i) && tr.outputs[0].at(2 * i + 1) == yp.at(i));
    let expected = ["001", "01", "1", "0001", "01", "1", "0001", "0001"].concat();
    let out = call(&[
        "shuffle", "--builtin", "fig7-shuffler", "--x", "explicit:0011010001", "--y", "explicit:01000110001", "--n",
        &expected.len().to_string(),
    ]);
    let shuffle_ok = out.status.success() && out.stdout == format!("{expected}\n").into_bytes();
    verdict(occ_ok && join_ok && shuffle_ok, format!("occ/alocc {occ_ok}, join {join_ok}, fig7 z {shuffle_ok}"))
}

fn c2_stationary() -> Verdict {
    let f3 = stationary(&builtin("fig3").unwrap()).unwrap();
    let f5 = stationary(&builtin("fig5").unwrap()).unwrap();
    let out = call(&["stationary", "--builtin", "fig3"]);
    let cli_ok = out.stdout == b"{\"q0\":\"2/3\",\"q1\":\"1/3\"}\n";
    let ok = f3 == vec![q(2, 3), q(1, 3)] && f5 == vec![q(1, 4); 4] && cli_ok;
    let shown: Vec<String> = f3.iter().map(|p| p.to_string()).collect();
    verdict(ok, format!("fig3 ({}), fig5 all 1/4: {}", shown.join(", "), f5 == vec![q(1, 4); 4]))
}

fn c3_dependent_inputs() -> Verdict {
    let n = 1_000_000;
    let det = DeterministicAutomaton::new(builtin("fig5").unwrap(), 2).unwrap();
    let c = stream("champernowne:2");
    let same = run(&det, &mut [c.reader(), c.reader()], n).unwrap();
    // q2 of the drawing has id 1
    let zero = same.state_counts()[1] == 0;
    let mut worst = 0f64;
    for seed in [1u64, 2, 3] {
        let y = WordStream::Prng { alphabet: B, seed };
        let tr = run(&det, &mut [c.reader(), y.reader()], n).unwrap();
        for &cnt in tr.state_counts() {
            worst = worst.max((cnt as f64 / tr.len() as f64 - 0.25).abs());
        }
    }
    verdict(zero && worst < 0.02, format!("q2 count on (c,c) = {}, worst deviation with prng y = {worst:.5}", same.state_counts()[1]))
}

fn c4_block_product() -> Verdict {
    let a = builtin("fig3").unwrap();
    let pi = stationary(&a).unwrap();
    let bp = block_product(&a, 1, 1, 1 << 20).unwrap();
    let rest = stationary(&bp.restriction().unwrap()).unwrap();
    let ok = bp.recurrent().into_iter().zip(&rest).all(|(id, p)| *p == &pi[bp.states[id].q] / q(4, 1));
    verdict(ok && rest.len() == 8, format!("{} recurrent states, π(q)/4 entrywise: {ok}", rest.len()))
}

fn c5_unique_runs() -> Verdict {
    let mut checked = 0;
    for s in enumerate_shufflers(B, 1, 20).unwrap() {
        let a = s.automaton();
        let out = a.outgoing();
        for m in 0..=8usize {
            // every transition sequence of length m, then its output
            let mut hits = vec![0u32; 1 << m];
            let mut stack = vec![(a.initial()[0], 0usize, 0usize)];
            while let Some((st, code, len)) = stack.pop() {
                if len == m {
                    hits[code] += 1;
                    continue;
                }
                for &t in &out[st] {
                    let tr = a.transition(t);
                    stack.push((tr.to, code * 2 + tr.label[2].unwrap() as usize, len + 1));
                }
            }
            if hits.iter().any(|&h| h != 1) {
                return verdict(false, format!("shuffler {:?} m = {m}", s.types()));
            }
            checked += hits.len();
        }
    }
    verdict(true, format!("{checked} (shuffler, w) pairs, one run each"))
}

fn c6_split_roundtrip() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    for case in 0..200 {
        let s = decode_shuffler(B, rng.gen_range(1..20_000)).unwrap();
        let xs: Vec<u8> = (0..64).map(|_| rng.gen_range(0..2)).collect();
        let ys: Vec<u8> = (0..64).map(|_| rng.gen_range(0..2)).collect();
        let n = rng.gen_range(1..=64);
        let (x, y) = (FiniteWord::from_symbols(B, &xs).unwrap(), FiniteWord::from_symbols(B, &ys).unwrap());
        let out = shuffle(&s, &WordStream::Explicit(x.clone()), &WordStream::Explicit(y.clone()), n).unwrap();
        let (px, py) = split(&splitter_of(&s).unwrap(), &WordStream::Explicit(out.output), n).unwrap();
        if px != x.prefix(out.x_consumed) || py != y.prefix(out.y_consumed) {
            return verdict(false, format!("case {case}"));
        }
    }
    verdict(true, "200 cases recovered exactly")
}

fn binomial(n: u64, k: u64) -> BigUint {
    (0..k).fold(BigUint::from(1u32), |acc, i| acc * (n - i) / (i + 1))
}

fn c7_hardy() -> Verdict {
    // exhaustive histograms over {0,1}^32 for γ ∈ {0, 1, 00, 01, 10, 11}
    let mut hist = vec![[0u64; 33]; 6];
    let mask31 = (1u64 << 31) - 1;
    for word in 0u64..1 << 32 {
        let ones = word.count_ones() as usize;
        hist[1][ones] += 1;
        hist[0][32 - ones] += 1;
        let (a, b) = (word >> 1, word & mask31);
        let nw = !word & 0xffff_ffff;
        let (na, nb) = (nw >> 1, nw & mask31);
        hist[2][(na & nb).count_ones() as usize] += 1;
        hist[3][(na & b).count_ones() as usize] += 1;
        hist[4][(a & nb).count_ones() as usize] += 1;
        hist[5][(a & b).count_ones() as usize] += 1;
    }
    let gammas = ["0", "1", "00", "01", "10", "11"];
    let mut checked = 0;
    let mut notes = Vec::new();
    for r in [1usize, 2] {
        for n in [32usize, 64] {
            let lo = q(6, (n / r) as i64);
            let hi = q(1, 1 << r);
            if lo > hi {
                notes.push(format!("r={r} n={n}: no legal ε"));
                continue;
            }
            for k in 0..10 {
                let eps = &lo + (&hi - &lo) * q(k, 9);
                assert!(window(2, r, &eps, n));
                let h = hardy_bound(2, r, &eps, n);
                for (gi, g) in gammas.iter().enumerate().filter(|(_, g)| g.len() == r) {
                    let gamma = w(g);
                    let tail = tail_count(&gamma, &eps, n).unwrap();
                    // independent tails
                    let close = |i: usize| {
                        let dev = BigRational::from_integer(((i as i64) * (1 << r) - n as i64).abs().into());
                        dev < &eps * BigRational::from_integer((n as i64 * (1 << r)).into())
                    };
                    let oracle: Option<BigUint> = if n == 32 {
                        Some((0..=32).filter(|&i| !close(i)).map(|i| BigUint::from(hist[gi][i])).sum())
                    } else if r == 1 {
                        Some((0..=64).filter(|&i| !close(i)).map(|i| binomial(64, i as u64)).sum())
                    } else {
                        None
                    };
                    if let Some(o) = oracle {
                        if o != tail {
                            return verdict(false, format!("tail mismatch r={r} n={n} γ={g}"));
                        }
                    }
                    if !(ln_big(&tail) < h.ln) {
                        return verdict(false, format!("bound fails r={r} n={n} γ={g} ε={eps}"));
                    }
                    checked += 1;
                }
            }
        }
    }
    // the exhaustive r = 2 histograms also back the DP used at n = 64
    let dp_ok = gammas.iter().enumerate().all(|(gi, g)| {
        let d = normfsi_core::construction::occurrence_distribution(&w(g), 32).unwrap();
        d.iter().zip(&hist[gi]).all(|(a, &b)| *a == BigUint::from(b))
    });
    verdict(dp_ok && checked > 0, format!("{checked} (r, n, ε, γ) cases, DP = exhaustive: {dp_ok}; {}", notes.join(", ")))
}

fn c8_measure_identities() -> Verdict {
    let mut ok = true;
    for index in [1u128, 2] {
        let s = decode_shuffler(B, index).unwrap();
        for (g, n, e) in [("0", 12, q(1, 7)), ("01", 11, q(1, 10)), ("11", 10, q(1, 4))] {
            let sys = ConstraintSystem::e_set(s.clone(), e.clone(), w(g), n);
            let m = measure(&sys, &CylinderPair::root(B), &MeasureOptions { engine: Engine::Grid, workers: 1, budget: 1 << 32 })
                .unwrap();
            let p = count_p(&e, &w(g), n).unwrap();
            ok &= m.to_rational() == BigRational::new(p.into(), (BigUint::from(1u32) << n).into());
        }
    }
    let sched = Schedule::relaxed_default(B);
    let shufflers = enumerate_shufflers(B, 1, 2).unwrap();
    let out = normfsi_core::construction::construct_pair(&sched, 5, &ConstructOptions::default(), None, |_, _| Ok(())).unwrap();
    let mut part = true;
    let mut workers_ok = true;
    for (n, rec) in out.records.iter().enumerate() {
        let mut sys = ConstraintSystem::new(B, shufflers.clone());
        for j in 1..=n + 1 {
            let p = sched.params(j).unwrap();
            sys.intersect_f(&p.eps, p.t, p.l, p.s).unwrap();
        }
        let mut seen = Vec::new();
        for workers in [1, 2, 4] {
            for engine in [Engine::Memo, Engine::Grid] {
                let m = measure(&sys, &out.cylinders[n], &MeasureOptions { engine, workers, budget: 1 << 32 }).unwrap();
                seen.push(m);
            }
        }
        workers_ok &= seen.windows(2).all(|p| p[0] == p[1]);
        part &= seen[0].to_rational() == rec.parent_measure().to_rational();
    }
    verdict(ok && part && workers_ok, format!("μ(E) = |P|·b^-n: {ok}, partition: {part}, workers 1/2/4 identical: {workers_ok}"))
}

fn run_naive(s: &Shuffler, x: &[u8], y: &[u8], n: usize) -> Vec<u8> {
    let (mut i, mut j, mut st) = (0, 0, 0);
    let mut z = Vec::with_capacity(n);
    for _ in 0..n {
        let a = if s.types()[st] == ShufflerType::I {
            i += 1;
            x[i - 1]
        } else {
            j += 1;
            y[j - 1]
        };
        z.push(a);
        st = s.next(st, a);
    }
    z
}

fn good(z: &[u8], p: &Params) -> bool {
    let (num, den) = (p.eps.numer().to_i64().unwrap(), p.eps.denom().to_i64().unwrap());
    let n = p.s as i64;
    (1..=p.l).all(|r| {
        let mut counts = vec![0i64; 1 << r];
        for win in z[..p.s].windows(r) {
            counts[win.iter().fold(0, |c, &a| c * 2 + a as usize)] += 1;
        }
        counts.iter().all(|&c| ((c << r) - n).abs() * den < num * n << r)
    })
}

/// Naive count of extension pairs in G ∩ I, or 1 at the first witness.
fn naive(shufflers: &[Shuffler], params: &[Params], u: &[u8], v: &[u8], witness: bool) -> u64 {
    let s = params.iter().map(|p| p.s).max().unwrap();
    let (fx, fy) = (s - u.len(), s - v.len());
    let (mut x, mut y) = (u.to_vec(), v.to_vec());
    x.resize(s, 0);
    y.resize(s, 0);
    let mut count = 0;
    for xe in 0u64..1 << fx {
        for k in 0..fx {
            x[u.len() + k] = (xe >> (fx - 1 - k) & 1) as u8;
        }
        for ye in 0u64..1 << fy {
            for k in 0..fy {
                y[v.len() + k] = (ye >> (fy - 1 - k) & 1) as u8;
            }
            let ok = shufflers.iter().enumerate().all(|(i, sh)| {
                let z = run_naive(sh, &x, &y, s);
                params.iter().filter(|p| i < p.t).all(|p| good(&z, p))
            });
            if ok {
                count += 1;
                if witness {
                    return 1;
                }
            }
        }
    }
    count
}

fn c9_construction() -> Verdict {
    let args = ["construct-pair", "--mode", "relaxed", "--steps", "8", "--emit", "json"];
    let first = call(&args);
    let again = call(&args);
    let mut w2 = args.to_vec();
    w2.extend(["--workers", "2"]);
    let parallel = call(&w2);
    if !first.status.success() {
        return verdict(false, String::from_utf8_lossy(&first.stderr).to_string());
    }
    let deterministic = first.stdout == again.stdout && first.stdout == parallel.stdout;
    let lines: Vec<Value> = String::from_utf8(first.stdout)
        .unwrap()
        .lines()
        .map(|l| serde_json::from_str(l).unwrap())
        .collect();
    let records = &lines[..lines.len() - 1];
    let sched = Schedule::relaxed_default(B);
    let shufflers = enumerate_shufflers(B, 1, 2).unwrap();
    let (mut pu, mut pv) = (String::new(), String::new());
    let mut nested = records.len() == 8;
    let mut positive = true;
    let mut exact = true;
    for (i, rec) in records.iter().enumerate() {
        let n = i + 1;
        let (u, v) = (rec["u"].as_str().unwrap().to_string(), rec["v"].as_str().unwrap().to_string());
        nested &= u.starts_with(&pu) && v.starts_with(&pv) && u.len() == n.div_ceil(2) && v.len() == n / 2;
        let chosen = rec["chosen"].as_u64().unwrap() as usize;
        let child = &rec["children"][chosen];
        let count: BigUint = child["count"].as_str().unwrap().parse().unwrap();
        let params: Vec<Params> = (1..=n).map(|j| sched.params(j).unwrap()).collect();
        let (us, vs) = (w(&u).to_vec(), if v.is_empty() { vec![] } else { w(&v).to_vec() });
        positive &= !count.is_zero() && naive(&shufflers, &params, &us, &vs, true) == 1;
        if n <= 6 {
            let full = naive(&shufflers, &params, &us, &vs, false);
            let s = params.last().unwrap().s as u32;
            let exp = child["exponent"].as_u64().unwrap() as u32;
            exact &= count << (2 * s - exp) == BigUint::from(full);
        }
        (pu, pv) = (u, v);
    }
    verdict(
        nested && positive && exact && deterministic,
        format!("nested+parity {nested}, μ(I_n ∩ G_n) > 0 by recount {positive}, exact for n ≤ 6 {exact}, identical across reruns/workers {deterministic}"),
    )
}

fn c10_paper_refusal() -> Verdict {
    let out = call(&["construct-pair", "--mode", "paper", "--steps", "10"]);
    let code = out.status.code();
    let err: Value = serde_json::from_slice(&out.stderr).unwrap_or(Value::Null);
    let ok = code == Some(2)
        && err["n0"] == 2
        && err["error"] == "budget"
        && err["first_step_required_pairs"].as_str().is_some();
    verdict(
        ok,
        format!(
            "exit {code:?}, n0 {}, first step needs {} pairs, refused at step {} needing 2^{}",
            err["n0"], err["first_step_required_pairs"], err["step"], err["required_log2"]
        ),
    )
}

fn c11_normality() -> Verdict {
    let c = stream("champernowne:2").prefix(1_000_000).unwrap();
    let devs: Vec<f64> = (1..=3).map(|l| simple_normality_discrepancy(&c, l).unwrap().max_f64()).collect();
    let aligned = devs.iter().all(|&d| d < 0.01);
    let cb = c_bound_check(&c, 4, &q(4, 1)).unwrap().iter().all(|v| v.pass);
    let sel = Selector::new(builtin("fig6-selector").unwrap()).unwrap();
    let tr = select(&sel, &stream("champernowne:2"), &WordStream::Prng { alphabet: B, seed: 7 }, 600_000).unwrap();
    let z = &tr.outputs[0];
    let sd = sliding_discrepancy(z, 1).unwrap().max_f64();
    let selected = z.len() >= 100_000 && sd < 0.02;
    verdict(
        aligned && cb && selected,
        format!(
            "aligned max deviation l=1..3 {:.4} {:.4} {:.4} (< 0.01: {aligned}), C=4 bound {cb}, selector |z|={} deviation {sd:.4} (< 0.02: {selected})",
            devs[0], devs[1], devs[2], z.len()
        ),
    )
}

fn main() {
    type Check = fn() -> Verdict;
    let criteria: [(u32, Duration, Check); 11] = [
        (1, Duration::from_secs(1), c1_worked_examples),
        (2, Duration::from_secs(1), c2_stationary),
        (3, Duration::from_secs(30), c3_dependent_inputs),
        (4, Duration::from_secs(5), c4_block_product),
        (5, Duration::from_secs(60), c5_unique_runs),
        (6, Duration::from_secs(10), c6_split_roundtrip),
        (7, Duration::from_secs(120), c7_hardy),
        (8, Duration::from_secs(120), c8_measure_identities),
        (9, Duration::from_secs(300), c9_construction),
        (10, Duration::from_secs(5), c10_paper_refusal),
        (11, Duration::from_secs(60), c11_normality),
    ];
    let mut failed = Vec::new();
    for (id, limit, check) in criteria {
        let start = Instant::now();
        let v = check();
        let took = start.elapsed();
        let pass = v.pass && took <= limit;
        println!(
            "criterion {id:>2}: {} ({:.2}s, limit {}s) {}",
            if pass { "PASS" } else { "FAIL" },
            took.as_secs_f64(),
            limit.as_secs(),
            v.detail
        );
        if !pass {
            failed.push(id);
        }
    }
    if !failed.is_empty() {
        println!("failed criteria: {failed:?}");
        std::process::exit(1);
    }
}

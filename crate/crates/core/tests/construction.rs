use num_bigint::{BigInt, BigUint};
use num_rational::BigRational;
use num_traits::ToPrimitive;
use normfsi_core::construction::{
    construct_pair, count_p, decode_shuffler, enumerate_shufflers, measure, ConstraintSystem, ConstructOptions,
    CylinderPair, Engine, MeasureOptions, Params, Schedule,
};
use normfsi_core::machines::{Shuffler, ShufflerType};
use normfsi_core::{Alphabet, FiniteWord};

const B: Alphabet = Alphabet::BINARY;

/// Straight-line run of a shuffler, kept apart from the library's runners.
fn run_naive(s: &Shuffler, x: &[u8], y: &[u8], n: usize) -> Vec<u8> {
    let (mut i, mut j, mut q) = (0, 0, 0);
    let mut z = Vec::with_capacity(n);
    for _ in 0..n {
        let a = match s.types()[q] {
            ShufflerType::I => {
                i += 1;
                x[i - 1]
            }
            ShufflerType::II => {
                j += 1;
                y[j - 1]
            }
        };
        z.push(a);
        q = s.next(q, a);
    }
    z
}

fn good(z: &[u8], p: &Params) -> bool {
    let (num, den) = (p.eps.numer().to_i64().unwrap(), p.eps.denom().to_i64().unwrap());
    let n = p.s as i64;
    for r in 1..=p.l {
        let mut counts = vec![0i64; 1 << r];
        for w in z[..p.s].windows(r) {
            counts[w.iter().fold(0, |c, &a| c * 2 + a as usize)] += 1;
        }
        // |c − n/2^r| < εn  ⇔  |c·2^r − n|·den < num·n·2^r
        if counts.iter().any(|&c| ((c << r) - n).abs() * den >= num * n << r) {
            return false;
        }
    }
    true
}

/// Pairs of length-S extensions of (u, v) in the intersection of the F-sets;
/// stops at the first one when `witness` is set.
fn naive_count(shufflers: &[Shuffler], params: &[Params], cyl: &CylinderPair, witness: bool) -> u64 {
    let s = params.iter().map(|p| p.s).max().unwrap();
    let (u, v) = (cyl.u.to_vec(), cyl.v.to_vec());
    let (fx, fy) = (s - u.len(), s - v.len());
    let mut x = u.clone();
    x.resize(s, 0);
    let mut y = v.clone();
    y.resize(s, 0);
    let mut count = 0;
    for xe in 0u64..1 << fx {
        for (k, slot) in x[u.len()..].iter_mut().enumerate() {
            *slot = (xe >> (fx - 1 - k) & 1) as u8;
        }
        for ye in 0u64..1 << fy {
            for (k, slot) in y[v.len()..].iter_mut().enumerate() {
                *slot = (ye >> (fy - 1 - k) & 1) as u8;
            }
            let ok = shufflers.iter().enumerate().all(|(i, sh)| {
                let z = run_naive(sh, &x, &y, s);
                params.iter().filter(|p| i < p.t).all(|p| good(&z, p))
            });
            if ok {
                count += 1;
                if witness {
                    return count;
                }
            }
        }
    }
    count
}

fn system(shufflers: &[Shuffler], params: &[Params]) -> ConstraintSystem {
    let mut sys = ConstraintSystem::new(B, shufflers.to_vec());
    for p in params {
        sys.intersect_f(&p.eps, p.t, p.l, p.s).unwrap();
    }
    sys
}

fn w(s: &str) -> FiniteWord {
    FiniteWord::parse(B, s).unwrap()
}

#[test]
fn relaxed_run_checked_by_recount() {
    let sched = Schedule::relaxed_default(B);
    let out = construct_pair(&sched, 8, &ConstructOptions::default(), None, |_, _| Ok(())).unwrap();
    assert!(out.refusal.is_none());
    assert_eq!(out.cylinders.len(), 9);
    let shufflers = enumerate_shufflers(B, 1, 2).unwrap();
    for n in 1..=8 {
        let cyl = &out.cylinders[n];
        assert!(cyl.within(&out.cylinders[n - 1]));
        assert_eq!((cyl.u.len(), cyl.v.len()), (n.div_ceil(2), n / 2));
        let params: Vec<Params> = (1..=n).map(|j| sched.params(j).unwrap()).collect();
        let rec = &out.records[n - 1];
        let m = &rec.children[rec.chosen as usize];
        assert!(!m.is_zero());
        let s = params.last().unwrap().s;
        if n <= 6 {
            let naive = naive_count(&shufflers, &params, cyl, false);
            assert_eq!(m.rescale(2 * s as u32).unwrap().count, BigUint::from(naive), "step {n}");
        } else {
            assert_eq!(naive_count(&shufflers, &params, cyl, true), 1, "step {n}");
        }
    }
    let again = construct_pair(&sched, 8, &ConstructOptions { workers: 3, ..Default::default() }, None, |_, _| Ok(()))
        .unwrap();
    assert_eq!(again.records, out.records);
}

#[test]
fn children_partition_parent() {
    let sched = Schedule::relaxed_default(B);
    let shufflers = enumerate_shufflers(B, 1, 2).unwrap();
    let opts = MeasureOptions::default();
    let out = construct_pair(&sched, 5, &ConstructOptions::default(), None, |_, _| Ok(())).unwrap();
    for (n, rec) in out.records.iter().enumerate() {
        let params: Vec<Params> = (1..=n + 1).map(|j| sched.params(j).unwrap()).collect();
        let parent = measure(&system(&shufflers, &params), &out.cylinders[n], &opts).unwrap();
        assert_eq!(parent.to_rational(), rec.parent_measure().to_rational());
    }
}

#[test]
fn engines_and_workers_agree() {
    let shufflers = enumerate_shufflers(B, 1, 6).unwrap();
    let params = [
        Params { s: 6, t: 6, l: 2, eps: BigRational::new(1.into(), 3.into()) },
        Params { s: 9, t: 4, l: 1, eps: BigRational::new(1.into(), 5.into()) },
    ];
    let sys = system(&shufflers, &params);
    for cyl in [CylinderPair::root(B), CylinderPair::new(w("10"), w("1")), CylinderPair::new(w("0110"), w("001"))] {
        let reference = measure(&sys, &cyl, &MeasureOptions { engine: Engine::Grid, workers: 1, budget: 1 << 32 }).unwrap();
        for engine in [Engine::Memo, Engine::Grid] {
            for workers in [1, 2, 4] {
                let m = measure(&sys, &cyl, &MeasureOptions { engine, workers, budget: 1 << 32 }).unwrap();
                assert_eq!(m, reference, "{engine:?} {workers}");
            }
        }
        let naive = naive_count(&shufflers, &params, &cyl, false);
        assert_eq!(reference.rescale(18).unwrap().count, BigUint::from(naive));
    }
}

#[test]
fn single_tape_e_sets_match_counts() {
    for index in [1, 2] {
        let s = decode_shuffler(B, index).unwrap();
        // the grid walks all 4^n pairs, so it stays at n ≤ 11
        for (gamma, n, e, engine) in [
            ("0", 11, "1/7", Engine::Grid),
            ("01", 10, "1/10", Engine::Grid),
            ("11", 9, "1/4", Engine::Grid),
            ("0", 14, "1/7", Engine::Memo),
            ("101", 14, "1/12", Engine::Memo),
        ] {
            let eps = normfsi_core::rational::parse_rational(e).unwrap();
            let sys = ConstraintSystem::e_set(s.clone(), eps.clone(), w(gamma), n);
            let opts = MeasureOptions { engine, workers: 2, budget: 1 << 32 };
            let m = measure(&sys, &CylinderPair::root(B), &opts).unwrap();
            let p = count_p(&eps, &w(gamma), n).unwrap();
            // μ(E) = |P|·b^{−n}
            assert_eq!(m.to_rational(), BigRational::new(BigInt::from(p), BigInt::from(1u64 << n)));
        }
    }
}

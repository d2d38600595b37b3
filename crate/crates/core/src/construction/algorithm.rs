//! The nested-cylinder construction of a pair of words.

use num_bigint::{BigInt, BigUint};
use num_rational::BigRational;
use serde::{Deserialize, Serialize};

use super::measure::{extension_size, measure, ConstraintSystem, Engine, MeasureOptions};
use super::schedule::Schedule;
use super::{enumerate_shufflers, parse_word, CylinderPair, ExactMeasure};
use crate::error::{Error, Result};
use crate::words::Symbol;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SelectionRule {
    /// the child of largest measure, ties to the smaller symbol
    #[default]
    Largest,
    /// the first child above 2^{−2n+1}, otherwise the last child
    Threshold,
}

#[derive(Clone, Debug)]
pub struct ConstructOptions {
    pub budget: u128,
    pub workers: usize,
    pub engine: Engine,
    pub rule: SelectionRule,
}

impl Default for ConstructOptions {
    fn default() -> Self {
        ConstructOptions { budget: 1 << 32, workers: 1, engine: Engine::Memo, rule: SelectionRule::Largest }
    }
}

/// One step: the children of I_n measured against G_{n+1}, and I_{n+1}.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct StepRecord {
    pub step: usize,
    pub check_len: usize,
    pub tape: char,
    pub children: Vec<ExactMeasure>,
    pub chosen: Symbol,
    pub cylinder: CylinderPair,
}

impl StepRecord {
    /// `μ(I_n ∩ G_{n+1})`, the sum over the children.
    pub fn parent_measure(&self) -> ExactMeasure {
        let e = self.children.iter().map(|c| c.exponent).max().unwrap_or(0);
        let count = self.children.iter().map(|c| c.rescale(e).expect("max exponent").count).sum();
        ExactMeasure { count, exponent: e, base: self.cylinder.alphabet().size() }
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::json!({
            "step": self.step + 1,
            "check_len": self.check_len,
            "extended": self.tape.to_string(),
            "chosen": self.chosen,
            "children": self.children.iter().map(ExactMeasure::to_json).collect::<Vec<_>>(),
            "u": self.cylinder.u.to_string(),
            "v": self.cylinder.v.to_string(),
        })
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct StepCounts {
    /// index of the cylinder this step produced
    pub step: usize,
    pub exponent: u32,
    pub children: Vec<String>,
    pub chosen: Symbol,
}

/// Resumable state after a completed step.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CheckpointFile {
    /// index n of the current cylinder I_n
    pub step: usize,
    pub u: String,
    pub v: String,
    pub schedule_hash: String,
    pub counts: Vec<StepCounts>,
}

/// A step whose enumeration would exceed the budget.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Refusal {
    pub step: usize,
    pub check_len: BigUint,
    pub required: BigUint,
    pub budget: u128,
}

impl Refusal {
    pub fn to_json(&self) -> serde_json::Value {
        serde_json::json!({
            "error": "budget",
            "step": self.step,
            "check_len": self.check_len.to_string(),
            "required_pairs": self.required.to_string(),
            "required_log2": self.required.bits().saturating_sub(1),
            "budget": self.budget.to_string(),
        })
    }
}

#[derive(Clone, Debug)]
pub struct Outcome {
    /// I_k, …, I_m for a run resumed at k (k = 0 for a fresh run)
    pub cylinders: Vec<CylinderPair>,
    pub records: Vec<StepRecord>,
    pub checkpoint: CheckpointFile,
    pub refusal: Option<Refusal>,
}

/// Extension pairs needed to measure a child at `step`, assuming
/// |u| + |v| = step + 1 and both words shorter than s_{step+1}.
pub fn required_pairs(schedule: &Schedule, step: usize) -> Result<BigUint> {
    let s = schedule.check_len_big(step + 1)?;
    let b = BigUint::from(schedule.alphabet()?.size());
    let exp = 2u32 * u32::try_from(&s).map_err(|_| Error::InvalidParameters("check length overflows".into()))?;
    Ok(num_traits::pow(b, (exp - (step as u32 + 1)) as usize))
}

fn select(children: &[ExactMeasure], step: usize, rule: SelectionRule) -> usize {
    match rule {
        SelectionRule::Largest => {
            let mut best = 0;
            for (i, c) in children.iter().enumerate() {
                if c > &children[best] {
                    best = i;
                }
            }
            best
        }
        SelectionRule::Threshold => {
            // 2^{1−2n}
            let e = 2 * step as i64 - 1;
            let thr = if e >= 0 {
                BigRational::new(1.into(), BigInt::from(1) << e as usize)
            } else {
                BigRational::from_integer(BigInt::from(2))
            };
            children.iter().position(|c| c.to_rational() > thr).unwrap_or(children.len() - 1)
        }
    }
}

/// Runs steps until I_`steps` or a budget refusal. `emit` sees each record
/// and the checkpoint after it as soon as the step completes.
pub fn construct_pair<F>(
    schedule: &Schedule,
    steps: usize,
    opts: &ConstructOptions,
    resume: Option<&CheckpointFile>,
    mut emit: F,
) -> Result<Outcome>
where
    F: FnMut(&StepRecord, &CheckpointFile) -> Result<()>,
{
    schedule.validate()?;
    let alphabet = schedule.alphabet()?;
    let hash = schedule.hash();
    let (mut cyl, mut checkpoint) = match resume {
        Some(cp) => {
            if cp.schedule_hash != hash {
                return Err(Error::CheckpointMismatch { expected: hash, found: cp.schedule_hash.clone() });
            }
            let cyl = CylinderPair::new(parse_word(alphabet, &cp.u)?, parse_word(alphabet, &cp.v)?);
            if cyl.u.len() != cp.step.div_ceil(2) || cyl.v.len() != cp.step / 2 {
                return Err(Error::InvalidParameters(format!("checkpoint words do not fit step {}", cp.step)));
            }
            (cyl, cp.clone())
        }
        None => (
            CylinderPair::root(alphabet),
            CheckpointFile { step: 0, u: String::new(), v: String::new(), schedule_hash: hash, counts: Vec::new() },
        ),
    };
    let mut out = Outcome { cylinders: vec![cyl.clone()], records: Vec::new(), checkpoint: checkpoint.clone(), refusal: None };
    let mopts = MeasureOptions { engine: opts.engine, workers: opts.workers, budget: opts.budget };
    let mut shufflers = Vec::new();
    for n in checkpoint.step..steps {
        // refuse before any shuffler or parameter work
        let required = required_pairs(schedule, n)?;
        if required > BigUint::from(opts.budget) {
            out.refusal = Some(Refusal {
                step: n,
                check_len: schedule.check_len_big(n + 1)?,
                required,
                budget: opts.budget,
            });
            break;
        }
        let params: Vec<_> = (1..=n + 1).map(|j| schedule.params(j)).collect::<Result<_>>()?;
        let t_max = params.iter().map(|p| p.t).max().unwrap_or(0);
        if shufflers.len() < t_max {
            let more = enumerate_shufflers(alphabet, shufflers.len() as u128 + 1, t_max - shufflers.len())?;
            shufflers.extend(more);
        }
        let mut sys = ConstraintSystem::new(alphabet, shufflers[..t_max].to_vec());
        for p in &params {
            sys.intersect_f(&p.eps, p.t, p.l, p.s)?;
        }
        let extend_u = n % 2 == 0;
        let kids: Vec<CylinderPair> = (0..alphabet.size() as Symbol)
            .map(|a| if extend_u { cyl.extend_u(a) } else { cyl.extend_v(a) })
            .collect();
        let (_, _, nominal) = extension_size(&sys, &kids[0]);
        if nominal > BigUint::from(opts.budget) {
            out.refusal = Some(Refusal { step: n, check_len: sys.tape_len().into(), required: nominal, budget: opts.budget });
            break;
        }
        let children: Vec<ExactMeasure> = kids.iter().map(|k| measure(&sys, k, &mopts)).collect::<Result<_>>()?;
        if children.iter().all(ExactMeasure::is_zero) {
            return Err(Error::DeadEnd { step: n });
        }
        let c = select(&children, n, opts.rule);
        cyl = kids[c].clone();
        let exponent = children[0].exponent;
        let record = StepRecord {
            step: n,
            check_len: sys.tape_len(),
            tape: if extend_u { 'u' } else { 'v' },
            children,
            chosen: c as Symbol,
            cylinder: cyl.clone(),
        };
        checkpoint.step = n + 1;
        checkpoint.u = cyl.u.to_string();
        checkpoint.v = cyl.v.to_string();
        checkpoint.counts.push(StepCounts {
            step: n + 1,
            exponent,
            children: record.children.iter().map(|m| m.count.to_string()).collect(),
            chosen: c as Symbol,
        });
        emit(&record, &checkpoint)?;
        out.cylinders.push(cyl.clone());
        out.records.push(record);
    }
    out.checkpoint = checkpoint;
    Ok(out)
}

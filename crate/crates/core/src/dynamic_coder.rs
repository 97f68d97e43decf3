//! Coding against a complexity approximation that keeps improving.
//!
//! The run is replayed as a stage sequence: one introduction stage per
//! universe string (its value drops from "undefined" to the initial value,
//! length-lex order), then one stage per scripted update. At each stage the
//! target gets a fresh request of length `K(σ)+⌈log₂|σ|⌉+c` pointing at the
//! valid request of its pre-target, and the still-valid subtree hanging off
//! the target's previous request is cloned beneath the new one.

use std::collections::{BTreeMap, HashMap};

use crate::approx::ApproxRun;
use crate::avoidance::AvoidSet;
use crate::bitcore::{ceil_log2, BitString, DyadicWeight};
use crate::error::{KcError, Result};
use crate::layered_kc::LayeredRequest;
use crate::stream_coder::{local_minima, tail_min, Codebook, Decoded, UseInfo};

/// `K(σ) + ⌈log₂|σ|⌉`, the quantity compared when choosing pre-targets.
fn log_adjusted(sigma: &BitString, k: u32) -> u32 {
    k + ceil_log2(sigma.len() as u64)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum StageKind {
    Introduction,
    Update,
}

/// One step of the unrolled run.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DynStage {
    pub kind: StageKind,
    pub target: BitString,
    pub value: u32,
}

/// Unrolls a run into stages: introductions first, then the updates.
pub fn unroll(run: &ApproxRun) -> Vec<DynStage> {
    let initial = run.initial();
    let mut stages: Vec<DynStage> = run
        .universe()
        .into_iter()
        .map(|s| DynStage {
            kind: StageKind::Introduction,
            value: initial[&s],
            target: s,
        })
        .collect();
    stages.extend(run.updates().iter().map(|u| DynStage {
        kind: StageKind::Update,
        target: u.string.clone(),
        value: u.value,
    }));
    stages
}

/// Values `K_s` after `s` unrolled stages; absent strings are undefined.
pub fn values_after(stages: &[DynStage], s: usize) -> BTreeMap<BitString, u32> {
    let mut v = BTreeMap::new();
    for st in &stages[..s] {
        v.insert(st.target.clone(), st.value);
    }
    v
}

/// The stage's target and its pre-target: the longest proper prefix `τ`
/// with `K_{s+1}(τ)+⌈log|τ|⌉ < K_{s+1}(σ)+⌈log|σ|⌉`.
pub fn target_pretarget(
    stages: &[DynStage],
    stage: usize,
) -> (BitString, Option<BitString>) {
    let values = values_after(stages, stage);
    let sigma = stages[stage - 1].target.clone();
    let pre = pretarget_in(&values, &sigma);
    (sigma, pre)
}

fn pretarget_in(values: &BTreeMap<BitString, u32>, sigma: &BitString) -> Option<BitString> {
    let v = log_adjusted(sigma, values[sigma]);
    (1..sigma.len()).rev().map(|n| sigma.prefix(n)).find(|tau| {
        values
            .get(tau)
            .is_some_and(|&k| log_adjusted(tau, k) < v)
    })
}

/// Validity of every request against `values`: the request's length and
/// every ancestor's length match `K+⌈log|σ|⌉+c`.
pub fn validity(requests: &[LayeredRequest], values: &BTreeMap<BitString, u32>, c: u32) -> Vec<bool> {
    let mut valid = vec![true; requests.len()];
    for i in 1..requests.len() {
        let r = &requests[i];
        let own = values
            .get(&r.payload)
            .is_some_and(|&k| log_adjusted(&r.payload, k) + c == r.length);
        valid[i] = own && valid[r.pointer];
    }
    valid
}

/// The valid descendants of `r_t` among `requests`, reindexed: entry 0 is
/// `r_t` itself (its pointer is meaningless), later pointers refer to
/// positions in the subtree. `source` maps back to the original indices.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Subtree {
    pub requests: Vec<LayeredRequest>,
    pub source: Vec<usize>,
}

pub fn subtree(requests: &[LayeredRequest], t: usize, valid: &[bool]) -> Subtree {
    let mut position: HashMap<usize, usize> = HashMap::new();
    let mut out = Subtree {
        requests: Vec::new(),
        source: Vec::new(),
    };
    if !valid[t] {
        return out;
    }
    position.insert(t, 0);
    out.requests.push(LayeredRequest::with_payload(
        requests[t].payload.clone(),
        0,
        requests[t].length,
    ));
    out.source.push(t);
    for (i, r) in requests.iter().enumerate().skip(t + 1) {
        if !valid[i] {
            continue;
        }
        if let Some(&p) = position.get(&r.pointer) {
            position.insert(i, out.requests.len());
            out.requests
                .push(LayeredRequest::with_payload(r.payload.clone(), p, r.length));
            out.source.push(i);
        }
    }
    out
}

/// Appends the non-root part of the `r_t`-subtree of `L_k` (everything but
/// the last request of `l`) beneath the last request, index `k`.
pub fn clone_extend(l: &[LayeredRequest], t: usize, valid: &[bool]) -> Vec<LayeredRequest> {
    let k = l.len() - 1;
    let sub = subtree(&l[..k], t, &valid[..k]);
    let mut out = l.to_vec();
    out.extend(
        sub.requests
            .into_iter()
            .skip(1)
            .map(|r| LayeredRequest::with_payload(r.payload, r.pointer + k, r.length)),
    );
    out
}

/// The universal sequence together with its per-stage history.
#[derive(Clone, Debug)]
pub struct DynamicSequence {
    c: u32,
    stages: Vec<DynStage>,
    requests: Vec<LayeredRequest>,
    /// length of `L_s` after each stage, entry 0 being the empty sequence
    lengths: Vec<usize>,
    /// weight added at each stage
    increases: Vec<DyadicWeight>,
    by_payload: HashMap<BitString, Vec<usize>>,
}

impl DynamicSequence {
    pub fn build(run: &ApproxRun) -> Result<Self> {
        let c = run.c();
        let stages = unroll(run);
        let mut seq = Self {
            c,
            stages: Vec::new(),
            requests: vec![LayeredRequest::root()],
            lengths: vec![1],
            increases: Vec::new(),
            by_payload: HashMap::new(),
        };
        let mut values = BTreeMap::new();
        for st in stages {
            seq.universal_step(&mut values, st)?;
        }
        Ok(seq)
    }

    fn latest_valid(&self, sigma: &BitString, valid: &[bool]) -> Option<usize> {
        self.by_payload
            .get(sigma)
            .and_then(|v| v.iter().rev().copied().find(|&i| valid[i]))
    }

    fn universal_step(&mut self, values: &mut BTreeMap<BitString, u32>, st: DynStage) -> Result<()> {
        let valid_before = validity(&self.requests, values, self.c);
        let old = self.latest_valid(&st.target, &valid_before);
        values.insert(st.target.clone(), st.value);
        let valid_after = validity(&self.requests, values, self.c);
        let pointer = pretarget_in(values, &st.target)
            .and_then(|tau| self.latest_valid(&tau, &valid_after))
            .unwrap_or(0);
        let length = log_adjusted(&st.target, st.value) + self.c;
        let before = self.requests.len();
        self.requests
            .push(LayeredRequest::with_payload(st.target.clone(), pointer, length));
        if let Some(t) = old {
            let mut valid = valid_before;
            valid.push(false);
            self.requests = clone_extend(&self.requests, t, &valid);
        }
        let added = self.requests[before..]
            .iter()
            .fold(DyadicWeight::zero(), |w, r| w.add_pow(r.length));
        if added > DyadicWeight::pow2_neg(st.value) {
            return Err(KcError::InvalidRun(format!(
                "stage {} for {} adds weight {added} > 2^-{}",
                self.stages.len() + 1,
                st.target.to_token(),
                st.value
            )));
        }
        for i in before..self.requests.len() {
            self.by_payload
                .entry(self.requests[i].payload.clone())
                .or_default()
                .push(i);
        }
        self.increases.push(added);
        self.stages.push(st);
        self.lengths.push(self.requests.len());
        Ok(())
    }

    pub fn c(&self) -> u32 {
        self.c
    }

    pub fn stages(&self) -> &[DynStage] {
        &self.stages
    }

    pub fn requests(&self) -> &[LayeredRequest] {
        &self.requests
    }

    /// `L_s` for `s ≤ stages().len()`.
    pub fn prefix_at(&self, s: usize) -> &[LayeredRequest] {
        &self.requests[..self.lengths[s]]
    }

    pub fn stage_increases(&self) -> &[DyadicWeight] {
        &self.increases
    }

    pub fn final_values(&self) -> BTreeMap<BitString, u32> {
        values_after(&self.stages, self.stages.len())
    }

    pub fn validity_at(&self, s: usize) -> Vec<bool> {
        validity(&self.requests, &values_after(&self.stages, s), self.c)
    }

    /// The finally valid request for `sigma`.
    pub fn final_request(&self, sigma: &BitString) -> Option<usize> {
        let valid = self.validity_at(self.stages.len());
        self.latest_valid(sigma, &valid)
    }
}

/// Lengths of the significant initial segments: the cascade of largest
/// tail argmins of `values[i-1] = K(x↾i)+⌈log₂ i⌉`.
pub fn significant_segments(values: &[u32]) -> Vec<usize> {
    local_minima(values)
}

pub struct DynamicCoder {
    sequence: DynamicSequence,
    codebook: Codebook,
}

impl DynamicCoder {
    /// Requires `wgt(machine) + wgt(Q) ≤ 1` for the run's implied machine.
    pub fn new(run: &ApproxRun, q: &AvoidSet) -> Result<Self> {
        if run.machine_weight().add(q.weight()) > DyadicWeight::one() {
            return Err(KcError::CombinedBudgetExceeded);
        }
        let sequence = DynamicSequence::build(run)?;
        let codebook = Codebook::from_requests(sequence.requests().to_vec(), q)?;
        Ok(Self { sequence, codebook })
    }

    pub fn sequence(&self) -> &DynamicSequence {
        &self.sequence
    }

    pub fn codebook(&self) -> &Codebook {
        &self.codebook
    }

    /// `K_final(x↾i)+⌈log₂ i⌉` for `i = 1..=|x|`.
    pub fn adjusted_values(&self, x: &BitString) -> Result<Vec<u32>> {
        let fin = self.sequence.final_values();
        (1..=x.len())
            .map(|n| {
                let p = x.prefix(n);
                fin.get(&p)
                    .map(|&k| log_adjusted(&p, k))
                    .ok_or(KcError::UndefinedMeasure(p))
            })
            .collect()
    }

    /// `min_{n≤i≤|x|}(K_final(x↾i)+⌈log₂ i⌉) + c`.
    pub fn oracle_use(&self, x: &BitString, n: usize) -> Result<UseInfo> {
        if n > x.len() {
            return Err(KcError::TargetBeyondBound {
                target: n,
                bound: x.len(),
            });
        }
        if n == 0 {
            return Ok(UseInfo {
                bits: 0,
                at_boundary: false,
            });
        }
        let (m, at_boundary) = tail_min(&self.adjusted_values(x)?, n);
        Ok(UseInfo {
            bits: m + self.sequence.c(),
            at_boundary,
        })
    }

    pub fn encode(&self, x: &BitString, n: usize) -> Result<BitString> {
        if n > x.len() {
            return Err(KcError::TargetBeyondBound {
                target: n,
                bound: x.len(),
            });
        }
        if n == 0 {
            return Ok(BitString::empty());
        }
        let values = self.adjusted_values(x)?;
        let nk = significant_segments(&values)
            .into_iter()
            .find(|&nk| nk >= n)
            .expect("the last length is always significant");
        let seg = x.prefix(nk);
        let j = self
            .sequence
            .final_request(&seg)
            .ok_or_else(|| KcError::UndefinedMeasure(seg.clone()))?;
        let it = self.codebook.interleaver();
        self.codebook
            .avoiding_code_where(&seg, |lp| it.origin(lp) == j)
    }

    pub fn decode(&self, y: &BitString, n: usize) -> Result<Decoded> {
        self.codebook.decode(y, n)
    }
}

//! Scripted monotone approximations `K_s` over a finite universe of strings.
//!
//! Stage 0 holds the initial values; stage `s` applies the first `s`
//! updates, each of which lowers exactly one string's value.

use std::collections::BTreeMap;
use std::fmt;

use crate::bitcore::{ceil_log2, BitString, DyadicWeight};
use crate::error::{KcError, Result};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Update {
    pub stage: usize,
    pub string: BitString,
    pub value: u32,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ApproxRun {
    c: u32,
    universe_maxlen: usize,
    initial: BTreeMap<BitString, u32>,
    updates: Vec<Update>,
}

/// Outcome of checking `∑_{ρ⪰σ} 2^{-K_s(ρ)-⌈log|ρ|⌉-c} ≤ 2^{-K_s(σ)}`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TailReport {
    pub stages: usize,
    pub checks: usize,
    /// first `(stage, σ)` where the inequality fails
    pub violation: Option<(usize, BitString)>,
}

impl TailReport {
    pub fn holds(&self) -> bool {
        self.violation.is_none()
    }
}

impl fmt::Display for TailReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.violation {
            None => write!(
                f,
                "tail inequality holds: {} checks over {} stages",
                self.checks, self.stages
            ),
            Some((s, sigma)) => write!(f, "tail inequality fails at stage {s} for {}", sigma.to_token()),
        }
    }
}

impl ApproxRun {
    /// Builds a run after structural checks; see [`ApproxRun::verified`] for
    /// the full loader check.
    pub fn new(
        c: u32,
        universe_maxlen: usize,
        initial: BTreeMap<BitString, u32>,
        updates: Vec<Update>,
    ) -> Result<Self> {
        if c < 1 {
            return Err(KcError::InvalidRun("c must be at least 1".into()));
        }
        for s in initial.keys() {
            if s.is_empty() {
                return Err(KcError::InvalidRun("the empty string cannot be in the universe".into()));
            }
            if s.len() > universe_maxlen {
                return Err(KcError::InvalidRun(format!(
                    "{s} is longer than universe-maxlen {universe_maxlen}"
                )));
            }
        }
        let mut current = initial.clone();
        for (i, u) in updates.iter().enumerate() {
            if u.stage != i + 1 {
                return Err(KcError::InvalidRun(format!(
                    "update {} has stage {}, expected {}",
                    i + 1,
                    u.stage,
                    i + 1
                )));
            }
            let Some(old) = current.get_mut(&u.string) else {
                return Err(KcError::InvalidRun(format!(
                    "stage {}: {} is outside the universe",
                    u.stage, u.string
                )));
            };
            if u.value >= *old {
                return Err(KcError::InvalidRun(format!(
                    "stage {}: value for {} must drop below {}, got {}",
                    u.stage, u.string, old, u.value
                )));
            }
            *old = u.value;
        }
        Ok(Self {
            c,
            universe_maxlen,
            initial,
            updates,
        })
    }

    /// Structural checks plus the tail inequality at every stage.
    pub fn verified(
        c: u32,
        universe_maxlen: usize,
        initial: BTreeMap<BitString, u32>,
        updates: Vec<Update>,
    ) -> Result<(Self, TailReport)> {
        let run = Self::new(c, universe_maxlen, initial, updates)?;
        let report = run.tail_report();
        if let Some((s, sigma)) = &report.violation {
            return Err(KcError::InvalidRun(format!(
                "tail inequality fails at stage {s} for {}",
                sigma.to_token()
            )));
        }
        Ok((run, report))
    }

    pub fn c(&self) -> u32 {
        self.c
    }

    pub fn universe_maxlen(&self) -> usize {
        self.universe_maxlen
    }

    pub fn initial(&self) -> &BTreeMap<BitString, u32> {
        &self.initial
    }

    pub fn updates(&self) -> &[Update] {
        &self.updates
    }

    pub fn stages(&self) -> usize {
        self.updates.len()
    }

    /// Universe in length-lexicographic order.
    pub fn universe(&self) -> Vec<BitString> {
        let mut u: Vec<BitString> = self.initial.keys().cloned().collect();
        u.sort_by(|a, b| a.len().cmp(&b.len()).then_with(|| a.cmp(b)));
        u
    }

    /// `K_s` for `s ≤ stages()`.
    pub fn values_at(&self, stage: usize) -> BTreeMap<BitString, u32> {
        let mut v = self.initial.clone();
        for u in &self.updates[..stage.min(self.updates.len())] {
            v.insert(u.string.clone(), u.value);
        }
        v
    }

    pub fn final_values(&self) -> BTreeMap<BitString, u32> {
        self.values_at(self.updates.len())
    }

    /// `K(σ) + ⌈log₂|σ|⌉ + c`: the request length for `σ`.
    pub fn adjusted(&self, sigma: &BitString, k: u32) -> u32 {
        k + ceil_log2(sigma.len() as u64) + self.c
    }

    /// Weight of the descriptions the run implies: every initial value and
    /// every update counts once.
    pub fn machine_weight(&self) -> DyadicWeight {
        let w = self
            .initial
            .values()
            .fold(DyadicWeight::zero(), |w, &k| w.add_pow(k));
        self.updates.iter().fold(w, |w, u| w.add_pow(u.value))
    }

    fn tail_holds(&self, values: &BTreeMap<BitString, u32>, sigma: &BitString) -> bool {
        let lhs = values
            .range(sigma.clone()..)
            .take_while(|(rho, _)| sigma.is_prefix_of(rho))
            .fold(DyadicWeight::zero(), |w, (rho, &k)| w.add_pow(self.adjusted(rho, k)));
        lhs <= DyadicWeight::pow2_neg(values[sigma])
    }

    pub fn tail_report(&self) -> TailReport {
        let mut values = self.initial.clone();
        let mut checks = 0;
        for sigma in values.keys() {
            checks += 1;
            if !self.tail_holds(&values, sigma) {
                return TailReport {
                    stages: self.stages(),
                    checks,
                    violation: Some((0, sigma.clone())),
                };
            }
        }
        for u in &self.updates {
            values.insert(u.string.clone(), u.value);
            // only the updated string and its ancestors can change
            for n in 1..=u.string.len() {
                let sigma = u.string.prefix(n);
                if !values.contains_key(&sigma) {
                    continue;
                }
                checks += 1;
                if !self.tail_holds(&values, &sigma) {
                    return TailReport {
                        stages: self.stages(),
                        checks,
                        violation: Some((u.stage, sigma)),
                    };
                }
            }
        }
        TailReport {
            stages: self.stages(),
            checks,
            violation: None,
        }
    }
}

//! Greedy Kraft-Chaitin allocation, optionally relative to a base string.
//!
//! The solver keeps the assigned codes together with a filler set: one
//! unused string per `1` in the trace of the remaining budget, with the
//! filler's length equal to its trace position. A request of length `ℓ` takes
//! the filler at the largest trace position `p ≤ ℓ`, uses its leftmost
//! extension of length `ℓ`, and splits the rest into new fillers at positions
//! `p+1 ..= ℓ`.

use std::collections::BTreeMap;

use crate::bitcore::{leftmost_extension, trace_of, BitString, DyadicWeight, Trace, DEFAULT_MAX_LEN};
use crate::error::{KcError, Result};

#[derive(Clone, Debug)]
pub struct PlainSolver {
    base: BitString,
    codes: Vec<BitString>,
    /// trace position -> filler of exactly that length
    fillers: BTreeMap<u32, BitString>,
    weight: DyadicWeight,
    max_len: u32,
    poisoned: bool,
}

impl PlainSolver {
    pub fn new(base: BitString) -> Self {
        Self::with_max_len(base, DEFAULT_MAX_LEN)
    }

    pub fn with_max_len(base: BitString, max_len: u32) -> Self {
        let mut fillers = BTreeMap::new();
        fillers.insert(base.len() as u32, base.clone());
        Self {
            base,
            codes: Vec::new(),
            fillers,
            weight: DyadicWeight::zero(),
            max_len,
            poisoned: false,
        }
    }

    pub fn base(&self) -> &BitString {
        &self.base
    }

    pub fn codes(&self) -> &[BitString] {
        &self.codes
    }

    pub fn fillers(&self) -> impl Iterator<Item = (u32, &BitString)> {
        self.fillers.iter().map(|(&p, s)| (p, s))
    }

    pub fn weight(&self) -> &DyadicWeight {
        &self.weight
    }

    pub fn is_poisoned(&self) -> bool {
        self.poisoned
    }

    /// Trace of the remaining budget, read off the filler tags.
    pub fn trace(&self) -> Trace {
        Trace {
            positions: self.fillers.keys().copied().collect(),
        }
    }

    pub fn capacity(&self) -> DyadicWeight {
        DyadicWeight::pow2_neg(self.base.len() as u32)
    }

    /// Whether the base has a clear extension of length `len`, i.e.
    /// `weight ≤ 2^-|base| − 2^-len`.
    pub fn clear_extension_exists(&self, len: u32) -> bool {
        self.weight.add_pow(len) <= self.capacity()
    }

    /// Assigns a code of length `len` extending the base.
    ///
    /// A budget failure poisons the solver; every later step fails too.
    pub fn step(&mut self, len: u32) -> Result<BitString> {
        if self.poisoned {
            return Err(KcError::SolverPoisoned);
        }
        let base_len = self.base.len() as u32;
        if len <= base_len || len > self.max_len {
            return Err(KcError::InvalidLength {
                length: len as u64,
                min: base_len as u64 + 1,
                max: self.max_len as u64,
            });
        }
        let Some((&p, _)) = self.fillers.range(..=len).next_back() else {
            self.poisoned = true;
            return Err(KcError::BudgetExceeded {
                index: self.codes.len(),
            });
        };
        let mu = self.fillers.remove(&p).expect("filler present");
        let code = leftmost_extension(&mu, len as usize)?;
        // R = { μ 0^{ℓ-p-i} 1 : 0 < i ≤ ℓ-p }, lengths p+1 ..= ℓ
        for pos in (p + 1)..=len {
            let mut r = leftmost_extension(&mu, pos as usize - 1)?;
            r.push(true);
            self.fillers.insert(pos, r);
        }
        self.weight = self.weight.add_pow(len);
        self.codes.push(code.clone());
        Ok(code)
    }

    /// Checks the filler bookkeeping against the exact weight: fillers are
    /// tagged by their own lengths, their tags form the trace of
    /// `2^-|base| − weight`, and codes plus fillers are prefix-free extensions
    /// of the base whose weights add up to `2^-|base|`.
    pub fn check_invariant(&self) -> std::result::Result<(), String> {
        for (&p, f) in &self.fillers {
            if f.len() as u32 != p {
                return Err(format!("filler {f} tagged with position {p}"));
            }
        }
        let expected = trace_of(self.base.len() as u32, &self.weight)
            .map_err(|e| format!("weight over capacity: {e}"))?;
        if expected != self.trace() {
            return Err(format!(
                "trace {:?} does not match fillers {:?}",
                expected.positions,
                self.trace().positions
            ));
        }
        let all: Vec<&BitString> = self.codes.iter().chain(self.fillers.values()).collect();
        let mut cover = DyadicWeight::zero();
        for s in &all {
            if !self.base.is_prefix_of(s) {
                return Err(format!("{s} does not extend base {}", self.base));
            }
            cover = cover.add_pow(s.len() as u32);
        }
        if cover != self.capacity() {
            return Err(format!("codes and fillers cover {cover}, not {}", self.capacity()));
        }
        let mut sorted = all.clone();
        sorted.sort();
        for pair in sorted.windows(2) {
            if pair[0].is_prefix_of(pair[1]) {
                return Err(format!("{} is a prefix of {}", pair[0], pair[1]));
            }
        }
        Ok(())
    }
}

/// Solves a whole request list relative to `base`.
pub fn plain_solve(base: &BitString, lengths: &[u32]) -> Result<Vec<BitString>> {
    let mut solver = PlainSolver::new(base.clone());
    lengths
        .iter()
        .enumerate()
        .map(|(i, &len)| {
            solver.step(len).map_err(|e| match e {
                KcError::BudgetExceeded { .. } => KcError::BudgetExceeded { index: i },
                other => other,
            })
        })
        .collect()
}

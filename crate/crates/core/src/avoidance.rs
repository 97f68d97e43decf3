//! Steering a layered solution away from a forbidden prefix-free set `Q`.
//!
//! The filter watches the leaves of the growing code tree. Whenever a leaf
//! acquires a prefix in the enumerated part of `Q`, the newest such leaf is
//! ejected into `D` and the request that produced it is re-issued (an
//! adaptive stage). Otherwise the next request of `L` is passed on with its
//! pointer rewritten to the current index of its target (an expansionary
//! stage).

use std::collections::BTreeSet;

use crate::bitcore::{BitString, DyadicWeight};
use crate::error::{KcError, Result};
use crate::layered_kc::{CodeId, LayeredRequest, LayeredSolver};

/// A prefix-free set listed in enumeration order.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct AvoidSet {
    members: Vec<BitString>,
    weight: DyadicWeight,
}

impl AvoidSet {
    pub fn empty() -> Self {
        Self::default()
    }

    /// Fails with the offending pair (shorter first) if two members are
    /// comparable.
    pub fn new(members: Vec<BitString>) -> Result<Self> {
        let mut sorted: Vec<&BitString> = members.iter().collect();
        sorted.sort();
        for pair in sorted.windows(2) {
            if pair[0].is_prefix_of(pair[1]) {
                return Err(KcError::NotPrefixFree(pair[0].clone(), pair[1].clone()));
            }
        }
        let weight = members
            .iter()
            .fold(DyadicWeight::zero(), |w, m| w.add_pow(m.len() as u32));
        Ok(Self { members, weight })
    }

    pub fn members(&self) -> &[BitString] {
        &self.members
    }

    pub fn weight(&self) -> &DyadicWeight {
        &self.weight
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    /// The first `min(s, |Q|)` members.
    pub fn enumerated(&self, s: usize) -> &[BitString] {
        &self.members[..s.min(self.members.len())]
    }

    pub fn has_prefix_of(&self, s: &BitString) -> bool {
        self.members.iter().any(|q| q.is_prefix_of(s))
    }
}

/// True iff no code has a prefix in `q`.
pub fn check_avoids<'a>(codes: impl IntoIterator<Item = &'a BitString>, q: &AvoidSet) -> bool {
    codes.into_iter().all(|c| !q.has_prefix_of(c))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum StageKind {
    Expansionary,
    Adaptive,
}

/// The ejected leaves `D` and the kind of every stage so far.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct FilterState {
    pub ejected: Vec<BitString>,
    pub history: Vec<StageKind>,
}

/// One filter stage over an explicit leaf list, oldest leaf first.
pub fn filtered_step(leaves: &[BitString], q_s: &[BitString], f: &mut FilterState) -> StageKind {
    let pick = leaves
        .iter()
        .rev()
        .find(|l| !f.ejected.contains(l) && q_s.iter().any(|q| q.is_prefix_of(l)));
    let kind = match pick {
        Some(l) => {
            f.ejected.push(l.clone());
            StageKind::Adaptive
        }
        None => StageKind::Expansionary,
    };
    f.history.push(kind);
    kind
}

/// Binary trie over the enumerated part of `Q`.
#[derive(Clone, Debug)]
struct PrefixTrie {
    // children per node; node 0 is the root
    next: Vec<[Option<usize>; 2]>,
    terminal: Vec<bool>,
}

impl PrefixTrie {
    fn new() -> Self {
        Self {
            next: vec![[None, None]],
            terminal: vec![false],
        }
    }

    fn insert(&mut self, s: &BitString) {
        let mut node = 0;
        for &b in s.bits() {
            node = match self.next[node][b as usize] {
                Some(n) => n,
                None => {
                    self.next.push([None, None]);
                    self.terminal.push(false);
                    let n = self.next.len() - 1;
                    self.next[node][b as usize] = Some(n);
                    n
                }
            };
        }
        self.terminal[node] = true;
    }

    fn has_prefix_of(&self, s: &BitString) -> bool {
        let mut node = 0;
        if self.terminal[0] {
            return true;
        }
        for &b in s.bits() {
            match self.next[node][b as usize] {
                Some(n) if self.terminal[n] => return true,
                Some(n) => node = n,
                None => return false,
            }
        }
        false
    }
}

/// The interleaving of `L` with `Q`, run stage by stage against the greedy
/// layered solver.
#[derive(Clone, Debug)]
pub struct Interleaver {
    l: Vec<LayeredRequest>,
    q: AvoidSet,
    solver: LayeredSolver,
    /// L′ index -> L index it stands for
    origin: Vec<usize>,
    /// L index -> current L′ index (meaningful once ejected)
    current: Vec<usize>,
    outdated: Vec<bool>,
    next_l: usize,
    q_seen: usize,
    stage: usize,
    trie: PrefixTrie,
    in_d: Vec<bool>,
    d: Vec<CodeId>,
    /// leaves not in D that have a prefix in Q_s, keyed by arrival
    pending: BTreeSet<CodeId>,
    kinds: Vec<StageKind>,
    adaptive_run: usize,
    longest_adaptive_run: usize,
}

impl Interleaver {
    /// `l[0]` must be the empty request.
    pub fn new(l: Vec<LayeredRequest>, q: AvoidSet) -> Result<Self> {
        crate::layered_kc::validate_sequence(&l)?;
        let wl = crate::layered_kc::sequence_weight(&l);
        if wl.add(q.weight()) > DyadicWeight::one() {
            return Err(KcError::CombinedBudgetExceeded);
        }
        let n = l.len();
        Ok(Self {
            l,
            q,
            solver: LayeredSolver::new(),
            origin: vec![0],
            current: vec![0; n],
            outdated: vec![false],
            next_l: 1,
            q_seen: 0,
            stage: 0,
            trie: PrefixTrie::new(),
            in_d: vec![false],
            d: Vec::new(),
            pending: BTreeSet::new(),
            kinds: Vec::new(),
            adaptive_run: 0,
            longest_adaptive_run: 0,
        })
    }

    pub fn solver(&self) -> &LayeredSolver {
        &self.solver
    }

    pub fn l(&self) -> &[LayeredRequest] {
        &self.l
    }

    pub fn avoid_set(&self) -> &AvoidSet {
        &self.q
    }

    /// The L′ requests emitted so far.
    pub fn l_prime(&self) -> &[LayeredRequest] {
        self.solver.requests()
    }

    pub fn origin(&self, l_prime_index: usize) -> usize {
        self.origin[l_prime_index]
    }

    /// Current L′ index of an already ejected L request.
    pub fn current_index(&self, l_index: usize) -> Option<usize> {
        (l_index < self.next_l).then(|| self.current[l_index])
    }

    pub fn is_outdated(&self, l_prime_index: usize) -> bool {
        self.outdated[l_prime_index]
    }

    /// Number of L requests ejected so far (the empty request included).
    pub fn ejected_count(&self) -> usize {
        self.next_l
    }

    pub fn ejected_codes(&self) -> impl Iterator<Item = &BitString> + '_ {
        self.d.iter().map(|&c| &self.solver.code(c).bits)
    }

    pub fn ejected_ids(&self) -> &[CodeId] {
        &self.d
    }

    pub fn is_ejected(&self, code: CodeId) -> bool {
        self.in_d.get(code).copied().unwrap_or(false)
    }

    pub fn stage_kinds(&self) -> &[StageKind] {
        &self.kinds
    }

    pub fn stage(&self) -> usize {
        self.stage
    }

    pub fn longest_adaptive_run(&self) -> usize {
        self.longest_adaptive_run
    }

    pub fn weight_of_d(&self) -> DyadicWeight {
        self.ejected_codes()
            .fold(DyadicWeight::zero(), |w, c| w.add_pow(c.len() as u32))
    }

    pub fn is_finished(&self) -> bool {
        self.next_l >= self.l.len() && self.q_seen >= self.q.len() && self.pending.is_empty()
    }

    fn note_leaf(&mut self, id: CodeId) {
        if !self.in_d[id] && self.trie.has_prefix_of(&self.solver.code(id).bits) {
            self.pending.insert(id);
        }
    }

    fn enumerate_q(&mut self, upto: usize) {
        while self.q_seen < upto.min(self.q.len()) {
            let m = self.q.members()[self.q_seen].clone();
            self.trie.insert(&m);
            self.q_seen += 1;
            let hits: Vec<CodeId> = self
                .solver
                .leaves()
                .filter(|&c| !self.in_d[c] && m.is_prefix_of(&self.solver.code(c).bits))
                .collect();
            self.pending.extend(hits);
        }
    }

    fn emit(&mut self, req: LayeredRequest, origin: usize) -> Result<usize> {
        let idx = self.solver.len();
        let ev = self.solver.push(req)?.clone();
        self.origin.push(origin);
        self.outdated.push(false);
        self.in_d.resize(self.solver.codes().len(), false);
        // the base just gained a child; intermediates are born with one
        self.pending.remove(&ev.base);
        if let Some(&leaf) = ev.new_codes.last() {
            self.note_leaf(leaf);
        }
        Ok(idx)
    }

    /// Runs stage `s+1`. Returns `None` once `L` is exhausted, `Q` fully
    /// enumerated and no leaf is left to eject.
    pub fn step(&mut self) -> Result<Option<StageKind>> {
        self.enumerate_q(self.stage);
        if let Some(&leaf) = self.pending.iter().next_back() {
            self.pending.remove(&leaf);
            self.in_d[leaf] = true;
            self.d.push(leaf);
            let i = self.solver.code(leaf).request;
            let j = self.origin[i];
            let clone = self.solver.request(i).clone();
            let new = self.emit(clone, j)?;
            if self.current[j] == i {
                self.current[j] = new;
            }
            self.outdated[i] = true;
            self.finish_stage(StageKind::Adaptive);
            return Ok(Some(StageKind::Adaptive));
        }
        if self.next_l < self.l.len() {
            let r = self.l[self.next_l].clone();
            let ptr = self.current[r.pointer];
            let li = self.next_l;
            self.next_l += 1;
            let new = self.emit(LayeredRequest::with_payload(r.payload, ptr, r.length), li)?;
            self.current[li] = new;
            self.finish_stage(StageKind::Expansionary);
            return Ok(Some(StageKind::Expansionary));
        }
        if self.q_seen < self.q.len() {
            // idle stage: nothing left to eject from L, Q still enumerating
            self.finish_stage(StageKind::Expansionary);
            return Ok(Some(StageKind::Expansionary));
        }
        Ok(None)
    }

    fn finish_stage(&mut self, kind: StageKind) {
        self.stage += 1;
        self.kinds.push(kind);
        if kind == StageKind::Adaptive {
            self.adaptive_run += 1;
            self.longest_adaptive_run = self.longest_adaptive_run.max(self.adaptive_run);
        } else {
            self.adaptive_run = 0;
        }
    }

    pub fn run(&mut self) -> Result<()> {
        while self.step()?.is_some() {}
        Ok(())
    }

    /// Leaves outside `D` together with all their ancestors: the codes that
    /// survive the filter.
    pub fn surviving_codes(&self) -> Vec<CodeId> {
        let mut keep = BTreeSet::new();
        for leaf in self.solver.leaves().filter(|&c| !self.in_d[c]) {
            let mut cur = Some(leaf);
            while let Some(c) = cur {
                if c == 0 || !keep.insert(c) {
                    break;
                }
                cur = self.solver.code(c).parent;
            }
        }
        keep.into_iter().collect()
    }

    /// Checks `⟦D⟧ ⊆ ⟦Q_s⟧`, `D` prefix-free and the weight identity
    /// `wgt(L′) = wgt(ejected part of L) + wgt(D)`.
    pub fn check_invariants(&self) -> std::result::Result<(), String> {
        let q_s = self.q.enumerated(self.q_seen);
        for c in self.ejected_codes() {
            if !q_s.iter().any(|q| q.is_prefix_of(c)) {
                return Err(format!("ejected {c} has no prefix in Q_s"));
            }
        }
        let mut sorted: Vec<&BitString> = self.ejected_codes().collect();
        sorted.sort();
        for pair in sorted.windows(2) {
            if pair[0].is_prefix_of(pair[1]) {
                return Err(format!("D not prefix-free: {} ⪯ {}", pair[0], pair[1]));
            }
        }
        let ejected_l = crate::layered_kc::sequence_weight(&self.l[..self.next_l]);
        let lhs = crate::layered_kc::sequence_weight(self.l_prime());
        let rhs = ejected_l.add(&self.weight_of_d());
        if lhs != rhs {
            return Err(format!("wgt(L′) = {lhs} but ejected L + D = {rhs}"));
        }
        Ok(())
    }
}

/// Runs the whole interleaving.
pub fn interleave(l: Vec<LayeredRequest>, q: AvoidSet) -> Result<Interleaver> {
    let mut it = Interleaver::new(l, q)?;
    it.run()?;
    Ok(it)
}

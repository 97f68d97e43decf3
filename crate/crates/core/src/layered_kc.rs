//! Layered Kraft-Chaitin sequences and their greedy solution.
//!
//! A layered request `(u, ℓ)` asks for codes of length `ℓ` that properly
//! extend a code of request `u`. Request 0 is the empty request, satisfied by
//! `{λ}`. Every code `σ` owns a plain solver relative to `σ`; codes for
//! requests pointing at `σ`'s request are allocated there.
//!
//! At each stage the solver walks the characteristic sequence `v_0 … v_{t-1}`
//! of the new request, picks the deepest `j` with a code in `S_{v_j}` that
//! still has a clear extension of length `ℓ_{v_{j+1}}` (earliest such code
//! wins), and cascades one new code per depth from that base down to the new
//! request.

use crate::bitcore::{BitString, DyadicWeight, DEFAULT_MAX_LEN};
use crate::error::{KcError, Result};
use crate::plain_kc::PlainSolver;

/// One layered request. `payload` is the string the request codes, empty for
/// abstract sequences.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LayeredRequest {
    pub payload: BitString,
    pub pointer: usize,
    pub length: u32,
}

impl LayeredRequest {
    /// The empty request `(∗, 0)`, stored with pointer 0.
    pub fn root() -> Self {
        Self {
            payload: BitString::empty(),
            pointer: 0,
            length: 0,
        }
    }

    pub fn new(pointer: usize, length: u32) -> Self {
        Self {
            payload: BitString::empty(),
            pointer,
            length,
        }
    }

    pub fn with_payload(payload: BitString, pointer: usize, length: u32) -> Self {
        Self {
            payload,
            pointer,
            length,
        }
    }
}

/// Ancestor chain `v_0 = 0, …, v_{t-1} = i` of a request.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CharSeq(pub Vec<usize>);

impl CharSeq {
    pub fn depth(&self) -> usize {
        self.0.len() - 1
    }
}

pub type CodeId = usize;

/// A code in the solution. Ids are assigned in enumeration order, so they
/// double as arrival stamps.
#[derive(Clone, Debug)]
pub struct Code {
    pub bits: BitString,
    pub request: usize,
    pub parent: Option<CodeId>,
    pub depth: usize,
    pub children: usize,
    pub solver: PlainSolver,
}

/// What happened while satisfying one request.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct StageEvent {
    /// index of the request handled at this stage
    pub request: usize,
    pub base: CodeId,
    pub base_depth: usize,
    /// new codes, shallowest first
    pub new_codes: Vec<CodeId>,
}

/// Per-request satisfaction sets, each in arrival order.
pub type Snapshot = Vec<Vec<BitString>>;

#[derive(Clone, Debug)]
pub struct LayeredSolver {
    requests: Vec<LayeredRequest>,
    depths: Vec<usize>,
    sets: Vec<Vec<CodeId>>,
    codes: Vec<Code>,
    events: Vec<StageEvent>,
    weight: DyadicWeight,
    max_len: u32,
}

impl Default for LayeredSolver {
    fn default() -> Self {
        Self::new()
    }
}

impl LayeredSolver {
    pub fn new() -> Self {
        Self::with_max_len(DEFAULT_MAX_LEN)
    }

    pub fn with_max_len(max_len: u32) -> Self {
        let root = Code {
            bits: BitString::empty(),
            request: 0,
            parent: None,
            depth: 0,
            children: 0,
            solver: PlainSolver::with_max_len(BitString::empty(), max_len),
        };
        Self {
            requests: vec![LayeredRequest::root()],
            depths: vec![0],
            sets: vec![vec![0]],
            codes: vec![root],
            events: Vec::new(),
            weight: DyadicWeight::zero(),
            max_len,
        }
    }

    pub fn requests(&self) -> &[LayeredRequest] {
        &self.requests
    }

    pub fn request(&self, i: usize) -> &LayeredRequest {
        &self.requests[i]
    }

    pub fn len(&self) -> usize {
        self.requests.len()
    }

    pub fn is_empty(&self) -> bool {
        self.requests.len() <= 1
    }

    pub fn depth(&self, i: usize) -> usize {
        self.depths[i]
    }

    pub fn set(&self, i: usize) -> &[CodeId] {
        &self.sets[i]
    }

    pub fn code(&self, id: CodeId) -> &Code {
        &self.codes[id]
    }

    pub fn codes(&self) -> &[Code] {
        &self.codes
    }

    pub fn events(&self) -> &[StageEvent] {
        &self.events
    }

    /// Weight of the requests so far, the empty request excluded.
    pub fn weight(&self) -> &DyadicWeight {
        &self.weight
    }

    pub fn characteristic_sequence(&self, i: usize) -> CharSeq {
        let mut chain = vec![i];
        let mut cur = i;
        while cur != 0 {
            cur = self.requests[cur].pointer;
            chain.push(cur);
        }
        chain.reverse();
        CharSeq(chain)
    }

    pub fn snapshot(&self) -> Snapshot {
        self.sets
            .iter()
            .map(|set| set.iter().map(|&c| self.codes[c].bits.clone()).collect())
            .collect()
    }

    /// Leaf codes (no proper extension among the codes), oldest first. The
    /// root is never reported.
    pub fn leaves(&self) -> impl Iterator<Item = CodeId> + '_ {
        self.codes
            .iter()
            .enumerate()
            .skip(1)
            .filter(|(_, c)| c.children == 0)
            .map(|(id, _)| id)
    }

    fn check_request(&self, req: &LayeredRequest) -> Result<()> {
        let k = self.requests.len();
        if req.pointer >= k {
            return Err(KcError::InvalidRequest {
                index: k,
                reason: format!("pointer {} does not refer to an earlier request", req.pointer),
            });
        }
        let parent_len = self.requests[req.pointer].length;
        if req.length <= parent_len {
            return Err(KcError::InvalidRequest {
                index: k,
                reason: format!(
                    "length {} not greater than length {} of request {}",
                    req.length, parent_len, req.pointer
                ),
            });
        }
        if req.length > self.max_len {
            return Err(KcError::InvalidLength {
                length: req.length as u64,
                min: parent_len as u64 + 1,
                max: self.max_len as u64,
            });
        }
        Ok(())
    }

    /// Appends a request and satisfies it greedily.
    pub fn push(&mut self, req: LayeredRequest) -> Result<&StageEvent> {
        self.check_request(&req)?;
        let k = self.requests.len();
        let new_weight = self.weight.add_pow(req.length);
        if new_weight > DyadicWeight::one() {
            return Err(KcError::BudgetExceeded { index: k });
        }
        let depth = self.depths[req.pointer] + 1;
        self.requests.push(req);
        self.depths.push(depth);
        self.sets.push(Vec::new());
        let chain = self.characteristic_sequence(k).0;
        let t = chain.len();

        // largest j < t-1 with a code in S_{v_j} that has a clear extension
        // of length ℓ_{v_{j+1}}; the earliest such code is the base
        let found = (0..t - 1).rev().find_map(|j| {
            let need = self.requests[chain[j + 1]].length;
            self.sets[chain[j]]
                .iter()
                .copied()
                .find(|&c| self.codes[c].solver.clear_extension_exists(need))
                .map(|c| (j, c))
        });
        let Some((j0, base)) = found else {
            self.requests.pop();
            self.depths.pop();
            self.sets.pop();
            return Err(KcError::HypothesisFailure { stage: k + 1 });
        };

        let mut current = base;
        let mut new_codes = Vec::with_capacity(t - 1 - j0);
        for j in j0..t - 1 {
            let target = chain[j + 1];
            let len = self.requests[target].length;
            let bits = self.codes[current].solver.step(len)?;
            let id = self.codes.len();
            let depth = self.codes[current].depth + 1;
            self.codes[current].children += 1;
            self.codes.push(Code {
                solver: PlainSolver::with_max_len(bits.clone(), self.max_len),
                bits,
                request: target,
                parent: Some(current),
                depth,
                children: 0,
            });
            self.sets[target].push(id);
            new_codes.push(id);
            current = id;
        }
        self.weight = new_weight;
        self.events.push(StageEvent {
            request: k,
            base,
            base_depth: self.codes[base].depth,
            new_codes,
        });
        Ok(self.events.last().expect("just pushed"))
    }

    /// Trace monotonicity: for codes `η0` earlier than `η1` in the
    /// same set, every trace position of `L_η0` lies strictly right of every
    /// trace position of `L_η1`.
    pub fn check_trace_monotonicity(&self) -> std::result::Result<(), String> {
        for (i, set) in self.sets.iter().enumerate() {
            let traces: Vec<_> = set.iter().map(|&c| self.codes[c].solver.trace()).collect();
            for a in 0..traces.len() {
                for b in a + 1..traces.len() {
                    if let (Some(min_early), Some(max_late)) =
                        (traces[a].min_position(), traces[b].max_position())
                    {
                        if min_early <= max_late {
                            return Err(format!(
                                "S_{i}: trace of {} has position {min_early}, later {} has {max_late}",
                                self.codes[set[a]].bits, self.codes[set[b]].bits
                            ));
                        }
                    }
                }
            }
        }
        Ok(())
    }

    /// For every depth, the union of the sets of that depth is prefix-free.
    pub fn check_layer_prefix_free(&self) -> std::result::Result<(), String> {
        let max_depth = self.depths.iter().copied().max().unwrap_or(0);
        for d in 1..=max_depth {
            let mut layer: Vec<&BitString> = self
                .codes
                .iter()
                .filter(|c| c.depth == d)
                .map(|c| &c.bits)
                .collect();
            layer.sort();
            for pair in layer.windows(2) {
                if pair[0].is_prefix_of(pair[1]) {
                    return Err(format!("depth {d}: {} ⪯ {}", pair[0], pair[1]));
                }
            }
        }
        Ok(())
    }

    /// Remark-style stage accounting: with base depth `d0` and request depth
    /// `d1`, each depth in `(d0, d1]` gained exactly one code.
    pub fn check_stage_event(&self, ev: &StageEvent) -> std::result::Result<(), String> {
        let d1 = self.depths[ev.request];
        let depths: Vec<usize> = ev.new_codes.iter().map(|&c| self.codes[c].depth).collect();
        let expected: Vec<usize> = (ev.base_depth + 1..=d1).collect();
        if ev.base_depth >= d1 || depths != expected {
            return Err(format!(
                "stage for request {}: base depth {}, new code depths {depths:?}",
                ev.request, ev.base_depth
            ));
        }
        Ok(())
    }
}

/// Checks pointer and length monotonicity for a whole sequence.
pub fn validate_sequence(requests: &[LayeredRequest]) -> Result<()> {
    let Some(first) = requests.first() else {
        return Err(KcError::InvalidRequest {
            index: 0,
            reason: "missing empty request".into(),
        });
    };
    if first.length != 0 || first.pointer != 0 {
        return Err(KcError::InvalidRequest {
            index: 0,
            reason: "request 0 must be the empty request (*, 0)".into(),
        });
    }
    for (i, r) in requests.iter().enumerate().skip(1) {
        if r.pointer >= i {
            return Err(KcError::InvalidRequest {
                index: i,
                reason: format!("pointer {} is not an earlier index", r.pointer),
            });
        }
        if r.length <= requests[r.pointer].length {
            return Err(KcError::InvalidRequest {
                index: i,
                reason: format!(
                    "length {} not strictly greater than length {} of request {}",
                    r.length, requests[r.pointer].length, r.pointer
                ),
            });
        }
    }
    Ok(())
}

/// Weight of a layered sequence, the empty request excluded.
pub fn sequence_weight(requests: &[LayeredRequest]) -> DyadicWeight {
    requests
        .iter()
        .skip(1)
        .fold(DyadicWeight::zero(), |w, r| w.add_pow(r.length))
}

/// Depth of every request.
pub fn request_depths(requests: &[LayeredRequest]) -> Vec<usize> {
    let mut depths = vec![0; requests.len()];
    for i in 1..requests.len() {
        depths[i] = depths[requests[i].pointer] + 1;
    }
    depths
}

/// Solves a whole sequence and returns the snapshot after every stage;
/// entry `k` is the solution of the first `k + 1` requests.
pub fn layered_solve(requests: &[LayeredRequest]) -> Result<Vec<Snapshot>> {
    Ok(layered_run(requests)?.1)
}

/// Like [`layered_solve`] but also hands back the finished solver.
pub fn layered_run(requests: &[LayeredRequest]) -> Result<(LayeredSolver, Vec<Snapshot>)> {
    validate_sequence(requests)?;
    if sequence_weight(requests) > DyadicWeight::one() {
        return Err(KcError::BudgetExceeded {
            index: requests.len() - 1,
        });
    }
    let mut solver = LayeredSolver::new();
    let mut snaps = vec![solver.snapshot()];
    for r in &requests[1..] {
        solver.push(r.clone())?;
        snaps.push(solver.snapshot());
    }
    Ok((solver, snaps))
}

/// Whether `sets` satisfies `requests`: lengths match, every code properly
/// extends a code of the pointed request, and sibling requests' codes are
/// pairwise incomparable.
pub fn check_solution(requests: &[LayeredRequest], sets: &[Vec<BitString>]) -> bool {
    if requests.len() != sets.len() {
        return false;
    }
    for (i, r) in requests.iter().enumerate() {
        for s in &sets[i] {
            if s.len() != r.length as usize {
                return false;
            }
            if i > 0 && !sets[r.pointer].iter().any(|t| t.is_proper_prefix_of(s)) {
                return false;
            }
        }
    }
    for i in 1..requests.len() {
        for j in i + 1..requests.len() {
            if requests[i].pointer != requests[j].pointer {
                continue;
            }
            for a in &sets[i] {
                if sets[j].iter().any(|b| a.comparable(b)) {
                    return false;
                }
            }
        }
    }
    // sibling incomparability inside one set
    for set in sets.iter().skip(1) {
        for a in 0..set.len() {
            for b in a + 1..set.len() {
                if set[a].comparable(&set[b]) {
                    return false;
                }
            }
        }
    }
    true
}

/// Output of [`depth_reduce`].
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Reduction {
    pub requests: Vec<LayeredRequest>,
    /// whether each output request is secondary
    pub secondary: Vec<bool>,
    /// input index -> output index, for inputs of depth at most `d`
    pub correspondence: Vec<Option<usize>>,
    /// output length after each input stage (entry `i` covers requests `0..=i`)
    pub prefix_lengths: Vec<usize>,
    /// the depth `d` of the output
    pub depth: usize,
}

/// Turns a depth `d+1` sequence into a depth `d` one using the run's base
/// depths. Requests of depth at most `d` are copied with pointers reindexed;
/// a depth `d+1` request whose base sat at depth `d` is dropped; otherwise a
/// secondary request `(r(v_{d-1}), ℓ_{v_d})` is emitted.
///
/// `events[i-1]` must describe the stage of request `i`. Inputs of depth at
/// most 1 are returned unchanged.
pub fn depth_reduce(requests: &[LayeredRequest], events: &[StageEvent]) -> Reduction {
    let depths = request_depths(requests);
    let max_depth = depths.iter().copied().max().unwrap_or(0);
    let n = requests.len();
    if max_depth <= 1 {
        return Reduction {
            requests: requests.to_vec(),
            secondary: vec![false; n],
            correspondence: (0..n).map(Some).collect(),
            prefix_lengths: (1..=n).collect(),
            depth: max_depth,
        };
    }
    let d = max_depth - 1;
    let mut out = vec![LayeredRequest::root()];
    let mut secondary = vec![false];
    let mut corr: Vec<Option<usize>> = vec![None; n];
    corr[0] = Some(0);
    let mut prefix_lengths = vec![1];
    for i in 1..n {
        let r = &requests[i];
        if depths[i] <= d {
            let ptr = corr[r.pointer].expect("ancestor of a shallow request is shallow");
            corr[i] = Some(out.len());
            out.push(LayeredRequest::with_payload(r.payload.clone(), ptr, r.length));
            secondary.push(false);
        } else if events[i - 1].base_depth < d {
            // chain v_0 … v_{d+1}: v_d = u_i, v_{d-1} = u_{u_i}
            let v_d = r.pointer;
            let v_dm1 = requests[v_d].pointer;
            let ptr = corr[v_dm1].expect("depth d-1 request has an image");
            out.push(LayeredRequest::with_payload(
                requests[v_d].payload.clone(),
                ptr,
                requests[v_d].length,
            ));
            secondary.push(true);
        }
        prefix_lengths.push(out.len());
    }
    Reduction {
        requests: out,
        secondary,
        correspondence: corr,
        prefix_lengths,
        depth: d,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bs(s: &str) -> BitString {
        s.parse().unwrap()
    }

    pub(crate) fn worked_example() -> Vec<LayeredRequest> {
        let mut v = vec![LayeredRequest::root(), LayeredRequest::new(0, 2)];
        v.extend((0..4).map(|_| LayeredRequest::new(1, 3)));
        v
    }

    fn text(snap: &Snapshot) -> Vec<Vec<String>> {
        snap.iter()
            .map(|s| s.iter().map(|b| b.to_token()).collect())
            .collect()
    }

    #[test]
    fn validate_examples() {
        assert!(validate_sequence(&[LayeredRequest::root()]).is_ok());
        let ok = [LayeredRequest::root(), LayeredRequest::new(0, 2), LayeredRequest::new(1, 3)];
        assert!(validate_sequence(&ok).is_ok());
        let bad = [LayeredRequest::root(), LayeredRequest::new(0, 2), LayeredRequest::new(1, 2)];
        match validate_sequence(&bad) {
            Err(KcError::InvalidRequest { index, reason }) => {
                assert_eq!(index, 2);
                assert!(reason.contains("not strictly greater"));
            }
            other => panic!("unexpected {other:?}"),
        }
        let forward = [LayeredRequest::root(), LayeredRequest::new(1, 2)];
        assert!(matches!(
            validate_sequence(&forward),
            Err(KcError::InvalidRequest { index: 1, .. })
        ));
    }

    #[test]
    fn characteristic_sequences() {
        let (solver, _) = layered_run(&[
            LayeredRequest::root(),
            LayeredRequest::new(0, 1),
            LayeredRequest::new(1, 4),
            LayeredRequest::new(2, 6),
        ])
        .unwrap();
        assert_eq!(solver.characteristic_sequence(0), CharSeq(vec![0]));
        assert_eq!(solver.characteristic_sequence(3), CharSeq(vec![0, 1, 2, 3]));
        let (solver, _) = layered_run(&worked_example()[..3]).unwrap();
        assert_eq!(solver.characteristic_sequence(2), CharSeq(vec![0, 1, 2]));
        assert_eq!(solver.characteristic_sequence(2).depth(), 2);
    }

    #[test]
    fn worked_example_stages() {
        let snaps = layered_solve(&worked_example()).unwrap();
        assert_eq!(text(&snaps[1]), [vec!["-"], vec!["00"]]);
        // the fourth 2-depth request finds 00 exhausted and falls back to λ
        assert_eq!(text(&snaps[4])[1], ["00", "01"]);
        assert_eq!(
            text(&snaps[5]),
            [
                vec!["-"],
                vec!["00", "01"],
                vec!["000"],
                vec!["001"],
                vec!["010"],
                vec!["011"]
            ]
        );
        assert!(check_solution(&worked_example(), &snaps[5]));
    }

    #[test]
    fn worked_example_bases() {
        let (solver, _) = layered_run(&worked_example()).unwrap();
        let bases: Vec<String> = solver
            .events()
            .iter()
            .map(|e| solver.code(e.base).bits.to_token())
            .collect();
        assert_eq!(bases, ["-", "00", "00", "-", "01"]);
        for ev in solver.events() {
            solver.check_stage_event(ev).unwrap();
        }
        solver.check_trace_monotonicity().unwrap();
        solver.check_layer_prefix_free().unwrap();
    }

    #[test]
    fn single_request() {
        let snaps = layered_solve(&[LayeredRequest::root(), LayeredRequest::new(0, 3)]).unwrap();
        assert_eq!(snaps.last().unwrap()[1], vec![bs("000")]);
    }

    #[test]
    fn overweight_rejected_up_front() {
        let reqs = [
            LayeredRequest::root(),
            LayeredRequest::new(0, 1),
            LayeredRequest::new(0, 1),
            LayeredRequest::new(0, 2),
        ];
        assert!(matches!(layered_solve(&reqs), Err(KcError::BudgetExceeded { .. })));
    }

    #[test]
    fn check_solution_rejects_violations() {
        let reqs = worked_example();
        let good: Vec<Vec<BitString>> = [
            vec!["-"],
            vec!["00", "01"],
            vec!["000"],
            vec!["001"],
            vec!["010"],
            vec!["011"],
        ]
        .iter()
        .map(|s| s.iter().map(|t| t.parse().unwrap()).collect())
        .collect();
        assert!(check_solution(&reqs, &good));
        let mut dup = good.clone();
        dup[3] = vec![bs("000")];
        assert!(!check_solution(&reqs, &dup));
        let mut short = good.clone();
        short[2] = vec![bs("00")];
        assert!(!check_solution(&reqs, &short));
        let mut orphan = good;
        orphan[5] = vec![bs("111")];
        assert!(!check_solution(&reqs, &orphan));
    }

    #[test]
    fn depth_reduce_worked_example() {
        let reqs = worked_example();
        let (solver, _) = layered_run(&reqs).unwrap();
        let red = depth_reduce(&reqs, solver.events());
        assert_eq!(red.depth, 1);
        // only the stage whose base was λ yields a secondary request
        assert_eq!(
            red.requests,
            vec![LayeredRequest::root(), LayeredRequest::new(0, 2), LayeredRequest::new(0, 2)]
        );
        assert_eq!(red.secondary, [false, false, true]);
        assert!(sequence_weight(&red.requests) <= crate::bitcore::weight_of_lengths([1, 2]));
    }

    #[test]
    fn depth_reduce_depth_one_is_identity() {
        let reqs = [LayeredRequest::root(), LayeredRequest::new(0, 1), LayeredRequest::new(0, 2)];
        let (solver, _) = layered_run(&reqs).unwrap();
        let red = depth_reduce(&reqs, solver.events());
        assert_eq!(red.requests, reqs.to_vec());
        assert!(red.secondary.iter().all(|s| !s));
    }

    #[test]
    fn leaves_track_children() {
        let (solver, _) = layered_run(&worked_example()).unwrap();
        let leaves: Vec<String> = solver.leaves().map(|c| solver.code(c).bits.to_string()).collect();
        assert_eq!(leaves, ["000", "001", "010", "011"]);
    }
}

//! Coding a stream prefix so that the decoder reads exactly
//! `min_{i≥n} I(x↾i)` code bits to recover `x↾n`.
//!
//! Every string of the measure's domain gets one layered request of length
//! `I(σ)` pointing at the request of its I-predecessor. The requests are
//! interleaved with the avoid set, solved greedily, and the code for the
//! relevant local I-minimum is emitted. Decoding replays the same
//! construction.

use std::collections::{BTreeMap, HashMap};

use crate::approx::ApproxRun;
use crate::avoidance::{AvoidSet, Interleaver};
use crate::bitcore::{ceil_log2, BitString, DyadicWeight};
use crate::error::{KcError, Result};
use crate::layered_kc::{CodeId, LayeredRequest};

/// Which strings a builtin measure is defined on.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Domain {
    /// every nonempty string of length at most `max_len`
    Full { max_len: usize },
    /// the nonempty prefixes of `x` and their one-bit siblings
    Spine { x: BitString },
}

impl Domain {
    pub fn strings(&self) -> Vec<BitString> {
        match self {
            Domain::Full { max_len } => BitString::all_up_to(*max_len),
            Domain::Spine { x } => spine(x),
        }
    }
}

/// Prefixes of `x` of length `1..=|x|` plus, for each, the string that
/// differs only in the last bit; length-lex order.
pub fn spine(x: &BitString) -> Vec<BitString> {
    let mut out = Vec::with_capacity(2 * x.len());
    for n in 1..=x.len() {
        let p = x.prefix(n - 1);
        out.push(p.child(false));
        out.push(p.child(true));
    }
    out
}

/// A finite information content measure, optionally shifted by a constant.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Measure {
    id: String,
    values: BTreeMap<BitString, u32>,
    by_len: BTreeMap<usize, Vec<BitString>>,
    certificate: DyadicWeight,
    shift: u32,
}

/// `|σ| + 2⌈log₂(|σ|+2)⌉`.
pub fn log_measure_value(len: usize) -> u32 {
    len as u32 + 2 * ceil_log2(len as u64 + 2)
}

impl Measure {
    /// A table measure; its certificate is the exact weight of the table.
    pub fn from_table(id: impl Into<String>, values: BTreeMap<BitString, u32>) -> Result<Self> {
        let certificate = values
            .values()
            .fold(DyadicWeight::zero(), |w, &v| w.add_pow(v));
        Self::with_certificate(id, values, certificate)
    }

    /// A table measure with an externally justified weight bound.
    pub fn with_certificate(
        id: impl Into<String>,
        values: BTreeMap<BitString, u32>,
        certificate: DyadicWeight,
    ) -> Result<Self> {
        let exact = values
            .values()
            .fold(DyadicWeight::zero(), |w, &v| w.add_pow(v));
        if exact > certificate {
            return Err(KcError::InvalidMeasure(format!(
                "weight {exact} exceeds certificate {certificate}"
            )));
        }
        if certificate > DyadicWeight::one() {
            return Err(KcError::InvalidMeasure(format!("weight {certificate} exceeds 1")));
        }
        let mut by_len: BTreeMap<usize, Vec<BitString>> = BTreeMap::new();
        for s in values.keys() {
            by_len.entry(s.len()).or_default().push(s.clone());
        }
        Ok(Self {
            id: id.into(),
            values,
            by_len,
            certificate,
            shift: 0,
        })
    }

    /// `I(σ) = |σ| + 2⌈log₂(|σ|+2)⌉` on `domain`. Over all nonempty strings
    /// the weight is `∑_{n≥1} 4^{-⌈log₂(n+2)⌉} = 1/4`, which serves as the
    /// certificate for every domain.
    pub fn log_family(domain: &Domain) -> Self {
        let values = domain
            .strings()
            .into_iter()
            .map(|s| {
                let v = log_measure_value(s.len());
                (s, v)
            })
            .collect();
        let id = match domain {
            Domain::Full { max_len } => format!("log:full:{max_len}"),
            Domain::Spine { .. } => "log:spine".to_string(),
        };
        Self::with_certificate(id, values, DyadicWeight::pow2_neg(2)).expect("certified family")
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn shift(&self) -> u32 {
        self.shift
    }

    pub fn certificate(&self) -> &DyadicWeight {
        &self.certificate
    }

    /// Certificate of the shifted measure.
    pub fn shifted_certificate(&self) -> DyadicWeight {
        self.certificate.shifted_down(self.shift)
    }

    /// Unshifted table.
    pub fn table(&self) -> &BTreeMap<BitString, u32> {
        &self.values
    }

    pub fn with_shift(mut self, shift: u32) -> Self {
        self.shift = shift;
        self
    }

    /// Smallest shift `c` with `certificate·2^-c + wgt(Q) ≤ 1`.
    pub fn auto_shift(&self, q: &AvoidSet) -> Result<u32> {
        let one = DyadicWeight::one();
        for c in 0..=64 {
            if self.certificate.shifted_down(c).add(q.weight()) <= one {
                return Ok(c);
            }
        }
        Err(KcError::CombinedBudgetExceeded)
    }

    pub fn get(&self, s: &BitString) -> Option<u32> {
        self.values.get(s).map(|v| v + self.shift)
    }

    pub fn value(&self, s: &BitString) -> Result<u32> {
        self.get(s).ok_or_else(|| KcError::UndefinedMeasure(s.clone()))
    }

    /// Domain in length-lex order.
    pub fn strings(&self) -> Vec<BitString> {
        self.by_len.values().flatten().cloned().collect()
    }

    /// Domain strings of one length, in lexicographic order.
    pub fn strings_of_len(&self, len: usize) -> &[BitString] {
        self.by_len.get(&len).map(Vec::as_slice).unwrap_or(&[])
    }

    /// `I(x↾1), …, I(x↾|x|)`.
    pub fn prefix_values(&self, x: &BitString) -> Result<Vec<u32>> {
        (1..=x.len()).map(|n| self.value(&x.prefix(n))).collect()
    }
}

/// Partial measure from an upper bound `g` and a monotone approximation:
/// defined with value `g(|σ|)` exactly on the strings whose approximation
/// eventually drops to at most `g(|σ|)`.
pub fn measure_from_bound(g: impl Fn(usize) -> u32, approx: &ApproxRun) -> Result<Measure> {
    let values: BTreeMap<BitString, u32> = approx
        .final_values()
        .into_iter()
        .filter(|(s, k)| *k <= g(s.len()))
        .map(|(s, _)| {
            let v = g(s.len());
            (s, v)
        })
        .collect();
    Measure::from_table("bound", values)
}

/// The longest proper prefix `σ` of `τ` with `I(σ) < I(τ)`. Every nonempty
/// prefix of `τ` must be in the domain; `λ` counts only if it is.
pub fn i_predecessor(m: &Measure, tau: &BitString) -> Result<Option<BitString>> {
    let it = m.value(tau)?;
    for n in (0..tau.len()).rev() {
        let p = tau.prefix(n);
        match m.get(&p) {
            Some(v) if v < it => return Ok(Some(p)),
            Some(_) => {}
            None if n == 0 => {}
            None => return Err(KcError::UndefinedMeasure(p)),
        }
    }
    Ok(None)
}

/// Layered sequence for an enumeration of strings: the empty request at
/// index 0, then `(τ_k, index of pred(τ_k) or 0, I(τ_k))` for every listed
/// string in the domain.
pub fn build_requests(m: &Measure, strings: &[BitString]) -> Result<Vec<LayeredRequest>> {
    let mut index: HashMap<&BitString, usize> = HashMap::new();
    let mut out = vec![LayeredRequest::root()];
    for tau in strings {
        let Some(len) = m.get(tau) else { continue };
        for n in 0..tau.len() {
            let p = tau.prefix(n);
            if m.get(&p).is_some() && !index.contains_key(&p) {
                return Err(KcError::EnumerationOrder(tau.clone(), p));
            }
        }
        let pointer = match i_predecessor(m, tau)? {
            Some(p) => index[&p],
            None => 0,
        };
        index.insert(tau, out.len());
        out.push(LayeredRequest::with_payload(tau.clone(), pointer, len));
    }
    Ok(out)
}

/// Lengths `n_0 < n_1 < …` of the local minima of `values`, where
/// `values[i-1]` belongs to length `i`: `n_0` is the largest argmin over all
/// lengths and `n_{k+1}` the largest argmin over lengths beyond `n_k`.
pub fn local_minima(values: &[u32]) -> Vec<usize> {
    let mut out = Vec::new();
    // the suffix minima, scanned from the right, are exactly the points
    // where the value is strictly below everything after it
    let mut best = u32::MAX;
    for i in (0..values.len()).rev() {
        if values[i] < best {
            best = values[i];
            out.push(i + 1);
        }
    }
    out.reverse();
    out
}

/// `min_{n≤i≤N} values[i-1]` and whether the bound `N` itself attains it,
/// in which case a smaller value may lie beyond the bound.
pub fn tail_min(values: &[u32], n: usize) -> (u32, bool) {
    if n == 0 {
        return (0, false);
    }
    let tail = &values[n - 1..];
    let m = *tail.iter().min().expect("n within bound");
    (m, *tail.last().unwrap() == m)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct UseInfo {
    pub bits: u32,
    /// the minimum is attained at the working bound
    pub at_boundary: bool,
}

/// `min_{n≤i≤|x|} I(x↾i)`; zero for `n = 0`.
pub fn oracle_use(m: &Measure, x: &BitString, n: usize) -> Result<UseInfo> {
    if n > x.len() {
        return Err(KcError::TargetBeyondBound {
            target: n,
            bound: x.len(),
        });
    }
    let values = m.prefix_values(x)?;
    let (bits, at_boundary) = tail_min(&values, n);
    Ok(UseInfo { bits, at_boundary })
}

/// Read access to a code prefix that remembers how far it was read.
#[derive(Debug)]
pub struct BitOracle<'a> {
    bits: &'a BitString,
    used: usize,
}

impl<'a> BitOracle<'a> {
    pub fn new(bits: &'a BitString) -> Self {
        Self { bits, used: 0 }
    }

    pub fn read(&mut self, i: usize) -> Option<bool> {
        if i >= self.bits.len() {
            return None;
        }
        self.used = self.used.max(i + 1);
        Some(self.bits.bit(i))
    }

    /// Number of leading bits consulted so far.
    pub fn used(&self) -> usize {
        self.used
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Decoded {
    pub prefix: BitString,
    pub bits_read: usize,
}

/// The finished code tree for a measure and avoid set, indexed for encoding
/// and decoding.
#[derive(Clone, Debug)]
pub struct Codebook {
    interleaver: Interleaver,
    by_bits: HashMap<BitString, CodeId>,
    by_payload: HashMap<BitString, Vec<CodeId>>,
}

impl Codebook {
    /// Interleaves and solves an explicit layered sequence.
    pub fn from_requests(l: Vec<LayeredRequest>, q: &AvoidSet) -> Result<Self> {
        let interleaver = crate::avoidance::interleave(l, q.clone())?;
        let solver = interleaver.solver();
        let mut by_bits = HashMap::new();
        let mut by_payload: HashMap<BitString, Vec<CodeId>> = HashMap::new();
        for (id, code) in solver.codes().iter().enumerate().skip(1) {
            by_bits.insert(code.bits.clone(), id);
            by_payload
                .entry(solver.request(code.request).payload.clone())
                .or_default()
                .push(id);
        }
        Ok(Self {
            interleaver,
            by_bits,
            by_payload,
        })
    }

    /// Replays the full construction for `m` over its domain.
    pub fn build(m: &Measure, q: &AvoidSet) -> Result<Self> {
        if m.shifted_certificate().add(q.weight()) > DyadicWeight::one() {
            return Err(KcError::CombinedBudgetExceeded);
        }
        let l = build_requests(m, &m.strings())?;
        Self::from_requests(l, q)
    }

    pub fn interleaver(&self) -> &Interleaver {
        &self.interleaver
    }

    /// L′ index of the request a code belongs to.
    pub fn request_of(&self, bits: &BitString) -> Option<usize> {
        let id = *self.by_bits.get(bits)?;
        Some(self.interleaver.solver().code(id).request)
    }

    /// Payload of the request a code belongs to.
    pub fn payload_of(&self, bits: &BitString) -> Option<&BitString> {
        let id = *self.by_bits.get(bits)?;
        let solver = self.interleaver.solver();
        Some(&solver.request(solver.code(id).request).payload)
    }

    /// A code for `payload` without a prefix in `Q`. Codes of never-outdated
    /// requests come first, then the lexicographically least.
    pub fn avoiding_code(&self, payload: &BitString) -> Result<BitString> {
        self.avoiding_code_where(payload, |_| true)
    }

    /// Like [`Codebook::avoiding_code`], restricted to codes whose L′
    /// request index satisfies `keep`.
    pub fn avoiding_code_where(
        &self,
        payload: &BitString,
        keep: impl Fn(usize) -> bool,
    ) -> Result<BitString> {
        let solver = self.interleaver.solver();
        let q = self.interleaver.avoid_set();
        self.by_payload
            .get(payload)
            .into_iter()
            .flatten()
            .map(|&id| solver.code(id))
            .filter(|c| keep(c.request) && !q.has_prefix_of(&c.bits))
            .min_by(|a, b| {
                let oa = self.interleaver.is_outdated(a.request);
                let ob = self.interleaver.is_outdated(b.request);
                oa.cmp(&ob).then_with(|| a.bits.cmp(&b.bits))
            })
            .map(|c| c.bits.clone())
            .ok_or_else(|| KcError::NoAvoidingCode(payload.clone()))
    }

    /// Recovers `n` source bits, reading the oracle one bit at a time and
    /// stopping at the first prefix that is a code for a string of length at
    /// least `n`.
    pub fn decode_with(&self, oracle: &mut BitOracle<'_>, n: usize) -> Result<BitString> {
        if n == 0 {
            return Ok(BitString::empty());
        }
        let mut prefix = BitString::empty();
        let mut i = 0;
        while let Some(b) = oracle.read(i) {
            prefix.push(b);
            i += 1;
            if let Some(p) = self.payload_of(&prefix) {
                if p.len() >= n {
                    return Ok(p.prefix(n));
                }
            }
        }
        Err(KcError::NotACode)
    }

    pub fn decode(&self, y: &BitString, n: usize) -> Result<Decoded> {
        let mut oracle = BitOracle::new(y);
        let prefix = self.decode_with(&mut oracle, n)?;
        Ok(Decoded {
            prefix,
            bits_read: oracle.used(),
        })
    }
}

/// Encoder side of a codebook for measures.
pub struct StreamCoder {
    measure: Measure,
    codebook: Codebook,
}

impl StreamCoder {
    pub fn new(measure: Measure, q: &AvoidSet) -> Result<Self> {
        let codebook = Codebook::build(&measure, q)?;
        Ok(Self { measure, codebook })
    }

    pub fn measure(&self) -> &Measure {
        &self.measure
    }

    pub fn codebook(&self) -> &Codebook {
        &self.codebook
    }

    /// Code prefix of length `min_{n≤i≤|x|} I(x↾i)` from which `x↾n` decodes.
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
        let values = self.measure.prefix_values(x)?;
        let nk = local_minima(&values)
            .into_iter()
            .find(|&nk| nk >= n)
            .expect("the last length is always a local minimum");
        self.codebook.avoiding_code(&x.prefix(nk))
    }

    pub fn decode(&self, y: &BitString, n: usize) -> Result<Decoded> {
        self.codebook.decode(y, n)
    }
}

/// One-shot encode.
pub fn encode(x: &BitString, m: &Measure, q: &AvoidSet, n: usize) -> Result<BitString> {
    StreamCoder::new(m.clone(), q)?.encode(x, n)
}

/// One-shot decode.
pub fn decode(y: &BitString, m: &Measure, q: &AvoidSet, n: usize) -> Result<BitString> {
    Ok(Codebook::build(m, q)?.decode(y, n)?.prefix)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::approx::Update;

    fn bs(s: &str) -> BitString {
        s.parse().unwrap()
    }

    fn table(v: &[(&str, u32)]) -> Measure {
        Measure::from_table("t", v.iter().map(|(s, k)| (bs(s), *k)).collect()).unwrap()
    }

    #[test]
    fn log_values() {
        assert_eq!(log_measure_value(1), 5);
        assert_eq!(log_measure_value(2), 6);
        assert_eq!(log_measure_value(3), 9);
        assert_eq!(log_measure_value(8), 16);
        let m = Measure::log_family(&Domain::Full { max_len: 8 });
        let exact = m.table().values().fold(DyadicWeight::zero(), |w, &v| w.add_pow(v));
        assert!(exact < *m.certificate());
    }

    #[test]
    fn predecessor_examples() {
        let m = Measure::from_table(
            "2len+1",
            BitString::all_up_to(3)
                .into_iter()
                .chain([BitString::empty()])
                .map(|s| {
                    let v = 2 * s.len() as u32 + 1;
                    (s, v)
                })
                .collect(),
        )
        .unwrap();
        assert_eq!(i_predecessor(&m, &bs("01")).unwrap(), Some(bs("0")));
        assert_eq!(i_predecessor(&m, &bs("0")).unwrap(), Some(BitString::empty()));
        let flat = table(&[("0", 4), ("01", 4), ("010", 4)]);
        assert_eq!(i_predecessor(&flat, &bs("010")).unwrap(), None);
        let stairs = table(&[("0", 5), ("01", 3), ("010", 6), ("0101", 4)]);
        assert_eq!(i_predecessor(&stairs, &bs("0101")).unwrap(), Some(bs("01")));
        assert_eq!(i_predecessor(&stairs, &bs("010")).unwrap(), Some(bs("01")));
        let holes = table(&[("0", 5), ("010", 6)]);
        assert_eq!(i_predecessor(&holes, &bs("010")), Err(KcError::UndefinedMeasure(bs("01"))));
    }

    #[test]
    fn build_requests_examples() {
        let m = Measure::from_table(
            "len+2",
            BitString::all_up_to(2)
                .into_iter()
                .map(|s| {
                    let v = s.len() as u32 + 2;
                    (s, v)
                })
                .collect(),
        )
        .unwrap();
        let l = build_requests(&m, &m.strings()).unwrap();
        let got: Vec<(usize, u32)> = l.iter().skip(1).map(|r| (r.pointer, r.length)).collect();
        assert_eq!(got, [(0, 3), (0, 3), (1, 4), (1, 4), (2, 4), (2, 4)]);

        let lam = table(&[("-", 1)]);
        let l = build_requests(&lam, &[BitString::empty()]).unwrap();
        assert_eq!(l[1], LayeredRequest::with_payload(BitString::empty(), 0, 1));

        let flat = table(&[("0", 4), ("01", 4)]);
        let l = build_requests(&flat, &flat.strings()).unwrap();
        assert_eq!(l[2].pointer, 0);

        let m = table(&[("0", 4), ("01", 5)]);
        assert_eq!(
            build_requests(&m, &[bs("01"), bs("0")]),
            Err(KcError::EnumerationOrder(bs("01"), bs("0")))
        );
    }

    #[test]
    fn local_minima_examples() {
        assert_eq!(local_minima(&[1, 2, 3, 4]), [1, 2, 3, 4]);
        assert_eq!(local_minima(&[3, 3, 4]), [2, 3]);
        assert_eq!(local_minima(&[5, 4, 6, 4, 7]), [4, 5]);
        assert_eq!(local_minima(&[9]), [1]);
        assert!(local_minima(&[]).is_empty());
    }

    #[test]
    fn oracle_use_examples() {
        let m = table(&[("0", 5), ("01", 4), ("011", 6)]);
        let x = bs("011");
        assert_eq!(oracle_use(&m, &x, 1).unwrap().bits, 4);
        assert_eq!(oracle_use(&m, &x, 3).unwrap(), UseInfo { bits: 6, at_boundary: true });
        assert_eq!(oracle_use(&m, &x, 0).unwrap().bits, 0);
        assert!(!oracle_use(&m, &x, 1).unwrap().at_boundary);
        assert!(oracle_use(&m, &x, 4).is_err());
    }

    #[test]
    fn roundtrip_log_measure() {
        let x = bs("0101010101");
        let m = Measure::log_family(&Domain::Spine { x: x.clone() });
        let coder = StreamCoder::new(m.clone(), &AvoidSet::empty()).unwrap();
        for n in 0..=x.len() {
            let y = coder.encode(&x, n).unwrap();
            let want = oracle_use(&m, &x, n).unwrap().bits as usize;
            assert_eq!(y.len(), want);
            let d = coder.decode(&y, n).unwrap();
            assert_eq!(d.prefix, x.prefix(n));
            assert_eq!(d.bits_read, want);
        }
        assert_eq!(coder.encode(&x, 8).unwrap().len(), log_measure_value(8) as usize);
    }

    #[test]
    fn avoid_zero_forces_first_bit() {
        let x = bs("00110");
        let m = Measure::log_family(&Domain::Spine { x: x.clone() });
        let q = AvoidSet::new(vec![bs("0")]).unwrap();
        assert_eq!(m.auto_shift(&q).unwrap(), 0);
        let coder = StreamCoder::new(m, &q).unwrap();
        for n in 1..=x.len() {
            let y = coder.encode(&x, n).unwrap();
            assert!(y.bit(0), "n={n}: {y}");
            assert_eq!(coder.decode(&y, n).unwrap().prefix, x.prefix(n));
        }
    }

    #[test]
    fn bits_beyond_use_are_ignored() {
        let x = bs("1101001");
        let m = Measure::log_family(&Domain::Spine { x: x.clone() });
        let coder = StreamCoder::new(m, &AvoidSet::empty()).unwrap();
        let y = coder.encode(&x, 3).unwrap();
        let long = y.concat(&bs("1010"));
        let d = coder.decode(&long, 3).unwrap();
        assert_eq!(d.prefix, x.prefix(3));
        assert_eq!(d.bits_read, y.len());
        let short = y.prefix(y.len() - 1);
        match coder.decode(&short, 3) {
            Err(KcError::NotACode) => {}
            Ok(d) => panic!("truncated code decoded to {}", d.prefix),
            Err(e) => panic!("{e}"),
        }
    }

    #[test]
    fn auto_shift_grows_with_q() {
        let m = Measure::log_family(&Domain::Full { max_len: 3 });
        let q = AvoidSet::new(vec![bs("0"), bs("10")]).unwrap();
        // 1/4·2^-c + 3/4 ≤ 1 already at c = 0
        assert_eq!(m.auto_shift(&q).unwrap(), 0);
        let q = AvoidSet::new(vec![bs("0"), bs("10"), bs("110")]).unwrap();
        assert_eq!(m.auto_shift(&q).unwrap(), 1);
        let q = AvoidSet::new(vec![BitString::empty()]).unwrap();
        assert_eq!(m.auto_shift(&q), Err(KcError::CombinedBudgetExceeded));
    }

    #[test]
    fn from_bound_examples() {
        let universe = BitString::all_up_to(3).into_iter();
        let g = |n: usize| n as u32 + 2;
        let low: BTreeMap<_, _> = universe.clone().map(|s| {
            let v = s.len() as u32 + 1;
            (s, v)
        }).collect();
        let run = ApproxRun::new(1, 3, low, vec![]).unwrap();
        let m = measure_from_bound(g, &run).unwrap();
        assert_eq!(m.table().len(), 14);
        assert_eq!(m.get(&bs("01")), Some(4));

        let high: BTreeMap<_, _> = universe.map(|s| {
            let v = s.len() as u32 + 5;
            (s, v)
        }).collect();
        let run = ApproxRun::new(1, 3, high, vec![]).unwrap();
        assert!(measure_from_bound(g, &run).unwrap().table().is_empty());

        let init: BTreeMap<_, _> = [("0", 9), ("1", 9), ("01", 9)]
            .iter()
            .map(|(s, k)| (bs(s), *k))
            .collect();
        let ups = vec![
            Update { stage: 1, string: bs("0"), value: 3 },
            Update { stage: 2, string: bs("01"), value: 4 },
        ];
        let run = ApproxRun::new(1, 2, init, ups).unwrap();
        let m = measure_from_bound(g, &run).unwrap();
        assert_eq!(m.strings(), vec![bs("0"), bs("01")]);
    }
}

//! Exact bit-level primitives: finite bitstrings, dyadic weights and traces.
//!
//! Every budget in the crate is a finite sum of terms `2^-l`. Those sums are
//! kept as `numerator * 2^-scale` over arbitrary-precision integers so that
//! threshold comparisons are exact. No floating point is used anywhere.

use std::cmp::Ordering;
use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use num_bigint::BigUint;
use num_traits::{One, Zero};

use crate::error::{KcError, Result};

/// Default upper bound on request lengths, in bits.
pub const DEFAULT_MAX_LEN: u32 = 4096;

/// A finite binary string. The empty string is `BitString::empty()`.
///
/// The derived order is lexicographic with a prefix sorting before its
/// extensions, so all extensions of a string form one contiguous range.
#[derive(Clone, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct BitString {
    bits: Vec<bool>,
}

impl BitString {
    pub fn empty() -> Self {
        Self { bits: Vec::new() }
    }

    pub fn from_bits(bits: Vec<bool>) -> Self {
        Self { bits }
    }

    pub fn zeros(len: usize) -> Self {
        Self {
            bits: vec![false; len],
        }
    }

    pub fn len(&self) -> usize {
        self.bits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    pub fn bit(&self, i: usize) -> bool {
        self.bits[i]
    }

    pub fn push(&mut self, bit: bool) {
        self.bits.push(bit);
    }

    /// `self` followed by `bit`.
    pub fn child(&self, bit: bool) -> Self {
        let mut out = self.clone();
        out.bits.push(bit);
        out
    }

    pub fn concat(&self, other: &BitString) -> Self {
        let mut bits = self.bits.clone();
        bits.extend_from_slice(&other.bits);
        Self { bits }
    }

    /// The first `n` bits. Panics if `n > len`.
    pub fn prefix(&self, n: usize) -> Self {
        Self {
            bits: self.bits[..n].to_vec(),
        }
    }

    /// `self ⪯ other`.
    pub fn is_prefix_of(&self, other: &BitString) -> bool {
        other.bits.starts_with(&self.bits)
    }

    /// `self ≺ other`.
    pub fn is_proper_prefix_of(&self, other: &BitString) -> bool {
        self.len() < other.len() && self.is_prefix_of(other)
    }

    pub fn comparable(&self, other: &BitString) -> bool {
        self.is_prefix_of(other) || other.is_prefix_of(self)
    }

    /// All strings of length `1..=max_len` in length-lexicographic order.
    pub fn all_up_to(max_len: usize) -> Vec<BitString> {
        let mut out = Vec::new();
        let mut level = vec![BitString::empty()];
        for _ in 0..max_len {
            level = level
                .iter()
                .flat_map(|s| [s.child(false), s.child(true)])
                .collect();
            out.extend(level.iter().cloned());
        }
        out
    }

    /// Text form used in files: ASCII bits, with `-` for the empty string.
    pub fn to_token(&self) -> String {
        if self.is_empty() {
            "-".to_string()
        } else {
            self.to_string()
        }
    }
}

impl fmt::Display for BitString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for &b in &self.bits {
            f.write_str(if b { "1" } else { "0" })?;
        }
        Ok(())
    }
}

impl fmt::Debug for BitString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_empty() {
            f.write_str("λ")
        } else {
            write!(f, "{self}")
        }
    }
}

impl FromStr for BitString {
    type Err = KcError;

    /// Accepts `0`/`1` characters; `-` and the empty string both denote λ.
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if s == "-" {
            return Ok(Self::empty());
        }
        s.chars()
            .map(|c| match c {
                '0' => Ok(false),
                '1' => Ok(true),
                other => Err(KcError::Parse {
                    line: 0,
                    reason: format!("invalid bit character {other:?}"),
                }),
            })
            .collect::<Result<Vec<_>>>()
            .map(Self::from_bits)
    }
}

/// `σ` followed by `ℓ − |σ|` zeros.
pub fn leftmost_extension(sigma: &BitString, len: usize) -> Result<BitString> {
    if len < sigma.len() {
        return Err(KcError::InvalidLength {
            length: len as u64,
            min: sigma.len() as u64,
            max: u64::MAX,
        });
    }
    let mut out = sigma.clone();
    out.bits.resize(len, false);
    Ok(out)
}

/// An exact non-negative dyadic rational `numerator · 2^-scale`.
///
/// Always normalized: the numerator is odd, or zero with scale zero.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct DyadicWeight {
    numerator: BigUint,
    scale: u32,
}

impl DyadicWeight {
    pub fn zero() -> Self {
        Self {
            numerator: BigUint::zero(),
            scale: 0,
        }
    }

    pub fn one() -> Self {
        Self::pow2_neg(0)
    }

    /// `2^-exp`.
    pub fn pow2_neg(exp: u32) -> Self {
        Self {
            numerator: BigUint::one(),
            scale: exp,
        }
    }

    pub fn new(numerator: BigUint, scale: u32) -> Self {
        let mut w = Self { numerator, scale };
        w.normalize();
        w
    }

    pub fn numerator(&self) -> &BigUint {
        &self.numerator
    }

    pub fn scale(&self) -> u32 {
        self.scale
    }

    pub fn is_zero(&self) -> bool {
        self.numerator.is_zero()
    }

    fn normalize(&mut self) {
        if self.numerator.is_zero() {
            self.scale = 0;
            return;
        }
        let tz = self.numerator.trailing_zeros().unwrap_or(0);
        let shift = tz.min(self.scale as u64) as u32;
        if shift > 0 {
            self.numerator >>= shift;
            self.scale -= shift;
        }
    }

    fn numerator_at(&self, scale: u32) -> BigUint {
        debug_assert!(scale >= self.scale);
        &self.numerator << (scale - self.scale)
    }

    /// `self + 2^-len`.
    pub fn add_pow(&self, len: u32) -> Self {
        self.add(&Self::pow2_neg(len))
    }

    pub fn add(&self, other: &Self) -> Self {
        let scale = self.scale.max(other.scale);
        Self::new(self.numerator_at(scale) + other.numerator_at(scale), scale)
    }

    /// `self − other`, or `None` when the result would be negative.
    pub fn checked_sub(&self, other: &Self) -> Option<Self> {
        let scale = self.scale.max(other.scale);
        let (a, b) = (self.numerator_at(scale), other.numerator_at(scale));
        (a >= b).then(|| Self::new(a - b, scale))
    }

    /// `self · 2^-shift`.
    pub fn shifted_down(&self, shift: u32) -> Self {
        Self::new(self.numerator.clone(), self.scale + shift)
    }

    /// Positions `p` (1-based, `p` ↦ `2^-p`) of the ones in the binary
    /// expansion. Only meaningful for values at most 1.
    pub fn one_positions(&self) -> BTreeSet<u32> {
        let mut out = BTreeSet::new();
        let bits = self.numerator.bits();
        for b in 0..bits {
            if self.numerator.bit(b) {
                out.insert(self.scale - b as u32);
            }
        }
        out
    }
}

impl Default for DyadicWeight {
    fn default() -> Self {
        Self::zero()
    }
}

impl Ord for DyadicWeight {
    fn cmp(&self, other: &Self) -> Ordering {
        let scale = self.scale.max(other.scale);
        self.numerator_at(scale).cmp(&other.numerator_at(scale))
    }
}

impl PartialOrd for DyadicWeight {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Display for DyadicWeight {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.scale == 0 {
            write!(f, "{}", self.numerator)
        } else {
            write!(f, "{}/2^{}", self.numerator, self.scale)
        }
    }
}

impl fmt::Debug for DyadicWeight {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self}")
    }
}

impl<'a> std::iter::Sum<&'a DyadicWeight> for DyadicWeight {
    fn sum<I: Iterator<Item = &'a DyadicWeight>>(iter: I) -> Self {
        iter.fold(Self::zero(), |acc, w| acc.add(w))
    }
}

/// Sum of `2^-len` over the given lengths.
pub fn weight_of_lengths<I: IntoIterator<Item = u32>>(lengths: I) -> DyadicWeight {
    lengths
        .into_iter()
        .fold(DyadicWeight::zero(), |acc, l| acc.add_pow(l))
}

/// `w + 2^-ℓ`.
pub fn weight_add(w: &DyadicWeight, len: u32) -> DyadicWeight {
    w.add_pow(len)
}

/// The set of `1` positions in the binary expansion of some dyadic value.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Trace {
    pub positions: BTreeSet<u32>,
}

impl Trace {
    pub fn value(&self) -> DyadicWeight {
        self.positions
            .iter()
            .fold(DyadicWeight::zero(), |acc, &p| acc.add_pow(p))
    }

    pub fn min_position(&self) -> Option<u32> {
        self.positions.first().copied()
    }

    pub fn max_position(&self) -> Option<u32> {
        self.positions.last().copied()
    }
}

/// Binary expansion of `2^-capacity_exp − w`.
pub fn trace_of(capacity_exp: u32, w: &DyadicWeight) -> Result<Trace> {
    let rest = DyadicWeight::pow2_neg(capacity_exp)
        .checked_sub(w)
        .ok_or(KcError::BudgetExceeded { index: 0 })?;
    Ok(Trace {
        positions: rest.one_positions(),
    })
}

/// `⌈log₂ n⌉`, with `⌈log₂ 0⌉` taken as 0.
pub fn ceil_log2(n: u64) -> u32 {
    if n <= 1 {
        0
    } else {
        64 - (n - 1).leading_zeros()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bs(s: &str) -> BitString {
        s.parse().unwrap()
    }

    #[test]
    fn weight_add_examples() {
        let half = weight_add(&DyadicWeight::zero(), 1);
        assert_eq!(half, DyadicWeight::pow2_neg(1));
        let three_quarters = weight_add(&half, 2);
        assert_eq!(three_quarters, DyadicWeight::new(BigUint::from(3u32), 2));
        assert_eq!(weight_add(&three_quarters, 2), DyadicWeight::one());
    }

    #[test]
    fn normalization_is_canonical() {
        let w = DyadicWeight::new(BigUint::from(12u32), 4);
        assert_eq!(w.numerator(), &BigUint::from(3u32));
        assert_eq!(w.scale(), 2);
        let z = DyadicWeight::new(BigUint::zero(), 9);
        assert_eq!(z.scale(), 0);
        // integers keep an even numerator with scale 0
        let two = DyadicWeight::one().add(&DyadicWeight::one());
        assert_eq!(two.numerator(), &BigUint::from(2u32));
    }

    #[test]
    fn trace_examples() {
        let t = trace_of(0, &DyadicWeight::pow2_neg(1)).unwrap();
        assert_eq!(t.positions, BTreeSet::from([1]));
        let t = trace_of(0, &weight_of_lengths([1, 2])).unwrap();
        assert_eq!(t.positions, BTreeSet::from([2]));
        let t = trace_of(2, &DyadicWeight::pow2_neg(3)).unwrap();
        assert_eq!(t.positions, BTreeSet::from([3]));
        assert_eq!(trace_of(0, &DyadicWeight::zero()).unwrap().positions, BTreeSet::from([0]));
    }

    #[test]
    fn trace_overweight_is_an_error() {
        let w = weight_of_lengths([1, 1, 1]);
        assert!(matches!(trace_of(0, &w), Err(KcError::BudgetExceeded { .. })));
        assert!(trace_of(2, &DyadicWeight::pow2_neg(1)).is_err());
    }

    #[test]
    fn leftmost_extension_examples() {
        assert_eq!(leftmost_extension(&BitString::empty(), 3).unwrap(), bs("000"));
        assert_eq!(leftmost_extension(&bs("01"), 2).unwrap(), bs("01"));
        assert_eq!(leftmost_extension(&bs("1"), 4).unwrap(), bs("1000"));
        assert!(matches!(
            leftmost_extension(&bs("101"), 2),
            Err(KcError::InvalidLength { .. })
        ));
    }

    #[test]
    fn prefix_relations() {
        assert!(bs("01").is_prefix_of(&bs("011")));
        assert!(bs("01").is_prefix_of(&bs("01")));
        assert!(!bs("01").is_proper_prefix_of(&bs("01")));
        assert!(BitString::empty().is_proper_prefix_of(&bs("0")));
        assert!(!bs("10").comparable(&bs("0")));
        assert!(bs("0") < bs("00") && bs("00") < bs("01") && bs("01") < bs("1"));
    }

    #[test]
    fn token_round_trip() {
        assert_eq!(BitString::empty().to_token(), "-");
        assert_eq!("-".parse::<BitString>().unwrap(), BitString::empty());
        assert_eq!(bs("0110").to_token(), "0110");
        assert!("012".parse::<BitString>().is_err());
    }

    #[test]
    fn all_up_to_is_length_lex() {
        let all = BitString::all_up_to(2);
        let text: Vec<String> = all.iter().map(|s| s.to_string()).collect();
        assert_eq!(text, ["0", "1", "00", "01", "10", "11"]);
    }

    #[test]
    fn ceil_log2_values() {
        let got: Vec<u32> = (0..=9).map(ceil_log2).collect();
        assert_eq!(got, [0, 0, 1, 2, 2, 3, 3, 3, 3, 4]);
        assert_eq!(ceil_log2(1 << 40), 40);
        assert_eq!(ceil_log2((1 << 40) + 1), 41);
    }
}

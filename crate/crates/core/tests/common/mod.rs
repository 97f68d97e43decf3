//! Generators and independent oracles shared by the integration tests.
#![allow(dead_code)]

use std::collections::BTreeMap;

use kcstream::approx::{ApproxRun, Update};
use kcstream::avoidance::AvoidSet;
use kcstream::bitcore::ceil_log2;
use kcstream::layered_kc::LayeredRequest;
use kcstream::stream_coder::spine;
use kcstream::{BitString, DyadicWeight};
use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Zero};
use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand::SeedableRng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// `∑ 2^-ℓ` as an exact rational, independent of the crate's dyadic type.
pub fn rational_weight(lengths: impl IntoIterator<Item = u32>) -> BigRational {
    lengths.into_iter().fold(BigRational::zero(), |acc, l| {
        acc + BigRational::new(BigInt::one(), BigInt::one() << l as usize)
    })
}

pub fn dyadic_to_rational(w: &DyadicWeight) -> BigRational {
    BigRational::new(
        BigInt::from(w.numerator().clone()),
        BigInt::one() << w.scale() as usize,
    )
}

pub fn one() -> BigRational {
    BigRational::one()
}

/// Pairwise incomparability by brute force.
pub fn is_prefix_free(codes: &[BitString]) -> bool {
    for i in 0..codes.len() {
        for j in 0..codes.len() {
            if i != j && codes[i].is_prefix_of(&codes[j]) {
                return false;
            }
        }
    }
    true
}

pub fn random_bits(rng: &mut impl Rng, len: usize) -> BitString {
    BitString::from_bits((0..len).map(|_| rng.gen()).collect())
}

/// Lengths in `1..=max_len` with total weight at most 1.
pub fn random_lengths(rng: &mut impl Rng, count: usize, max_len: u32) -> Vec<u32> {
    let mut out = Vec::new();
    let mut w = BigRational::zero();
    for _ in 0..count * 4 {
        if out.len() == count {
            break;
        }
        let l = rng.gen_range(1..=max_len);
        let nw = &w + rational_weight([l]);
        if nw <= one() {
            w = nw;
            out.push(l);
        }
    }
    out
}

pub fn depths(reqs: &[LayeredRequest]) -> Vec<usize> {
    let mut d = vec![0; reqs.len()];
    for i in 1..reqs.len() {
        d[i] = d[reqs[i].pointer] + 1;
    }
    d
}

/// A valid layered sequence of depth at most `max_depth` and weight at
/// most `budget`.
pub fn random_layered(
    rng: &mut impl Rng,
    count: usize,
    max_depth: usize,
    max_len: u32,
    budget: &BigRational,
) -> Vec<LayeredRequest> {
    let mut reqs = vec![LayeredRequest::root()];
    let mut depth = vec![0usize];
    let mut w = BigRational::zero();
    for _ in 0..count * 4 {
        if reqs.len() > count {
            break;
        }
        let candidates: Vec<usize> = (0..reqs.len())
            .filter(|&i| depth[i] < max_depth && reqs[i].length < max_len)
            .collect();
        let Some(&p) = candidates.choose(rng) else { break };
        let lo = reqs[p].length + 1;
        let hi = (lo + 4).min(max_len);
        let l = rng.gen_range(lo..=hi);
        let nw = &w + rational_weight([l]);
        if &nw > budget {
            continue;
        }
        w = nw;
        depth.push(depth[p] + 1);
        reqs.push(LayeredRequest::new(p, l));
    }
    reqs
}

/// A random prefix-free set of strings with lengths in `lens` whose weight
/// keeps `base + wgt(Q) ≤ cap`.
pub fn random_avoid(
    rng: &mut impl Rng,
    attempts: usize,
    lens: std::ops::RangeInclusive<usize>,
    base: &BigRational,
    cap: &BigRational,
) -> AvoidSet {
    let mut members: Vec<BitString> = Vec::new();
    let mut w = base.clone();
    for _ in 0..attempts {
        let len = rng.gen_range(lens.clone());
        let s = random_bits(rng, len);
        if members.iter().any(|m| m.comparable(&s)) {
            continue;
        }
        let nw = &w + rational_weight([len as u32]);
        if &nw > cap {
            continue;
        }
        w = nw;
        members.push(s);
    }
    AvoidSet::new(members).expect("generated prefix-free")
}

/// Checks a layered solution from scratch: every code of request `i` has
/// length `ℓ_i`, properly extends a code of request `u_i`, and codes of the
/// same depth are pairwise incomparable.
pub fn check_layered_solution(reqs: &[LayeredRequest], sets: &[Vec<BitString>]) -> Result<(), String> {
    let d = depths(reqs);
    for (i, set) in sets.iter().enumerate().skip(1) {
        if set.is_empty() {
            return Err(format!("request {i} has no code"));
        }
        for s in set {
            if s.len() != reqs[i].length as usize {
                return Err(format!("code {s} of request {i} has wrong length"));
            }
            if !sets[reqs[i].pointer].iter().any(|p| p.is_proper_prefix_of(s)) {
                return Err(format!("code {s} of request {i} extends no parent code"));
            }
        }
    }
    let max_d = d.iter().copied().max().unwrap_or(0);
    for depth in 1..=max_d {
        let layer: Vec<BitString> = sets
            .iter()
            .enumerate()
            .filter(|(i, _)| d[*i] == depth)
            .flat_map(|(_, s)| s.iter().cloned())
            .collect();
        if !is_prefix_free(&layer) {
            return Err(format!("depth {depth} is not prefix-free"));
        }
    }
    Ok(())
}

/// Universe for dynamic runs: all strings up to length 4 plus the spine of
/// `x`.
pub fn dynamic_universe(x: &BitString) -> Vec<BitString> {
    let mut u: Vec<BitString> = BitString::all_up_to(4);
    for s in spine(x) {
        if !u.contains(&s) {
            u.push(s);
        }
    }
    u
}

/// A scripted run over `dynamic_universe(x)` with up to `max_updates`
/// drops, biased towards prefixes of `x`. Drops are kept only while the
/// implied machine weight plus `q_weight` stays at most 1; `c` is the least
/// constant (at least 1) for which the tail inequality holds throughout.
pub fn random_run(rng: &mut impl Rng, x: &BitString, max_updates: usize, q_weight: &DyadicWeight) -> ApproxRun {
    let universe = dynamic_universe(x);
    let initial: BTreeMap<BitString, u32> = universe
        .iter()
        .map(|s| {
            let n = s.len() as u64;
            let k = n as u32 + 2 * ceil_log2(n + 1) + rng.gen_range(0..3);
            (s.clone(), k)
        })
        .collect();
    let mut current = initial.clone();
    let mut weight = initial
        .values()
        .fold(q_weight.clone(), |w, &k| w.add_pow(k));
    let mut updates = Vec::new();
    let maxlen = universe.iter().map(|s| s.len()).max().unwrap_or(0);
    for _ in 0..max_updates * 3 {
        if updates.len() == max_updates {
            break;
        }
        let s = if rng.gen_bool(0.7) {
            x.prefix(rng.gen_range(1..=x.len()))
        } else {
            universe.choose(rng).unwrap().clone()
        };
        let old = current[&s];
        if old <= 1 {
            continue;
        }
        let new = old - rng.gen_range(1..=2).min(old - 1);
        let nw = weight.add_pow(new);
        if nw > DyadicWeight::one() {
            continue;
        }
        weight = nw;
        current.insert(s.clone(), new);
        updates.push(Update {
            stage: updates.len() + 1,
            string: s,
            value: new,
        });
    }
    for c in 1..=16 {
        if let Ok((run, _)) = ApproxRun::verified(c, maxlen, initial.clone(), updates.clone()) {
            return run;
        }
    }
    panic!("no c ≤ 16 satisfies the tail inequality");
}

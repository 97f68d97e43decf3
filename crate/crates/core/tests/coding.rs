mod common;

use common::*;
use kcstream::avoidance::AvoidSet;
use kcstream::dynamic_coder::DynamicCoder;
use kcstream::stream_coder::{decode, encode, Domain, Measure, StreamCoder};
use kcstream::{BitString, KcError};
use num_rational::BigRational;
use num_traits::Zero;

#[test]
fn one_shot_helpers_agree_with_the_coder() {
    let x: BitString = "1101001110".parse().unwrap();
    let q = AvoidSet::new(vec!["0000".parse().unwrap(), "111".parse().unwrap()]).unwrap();
    let m = Measure::log_family(&Domain::Full { max_len: 10 });
    let m = m.clone().with_shift(m.auto_shift(&q).unwrap());
    let coder = StreamCoder::new(m.clone(), &q).unwrap();
    for n in 0..=x.len() {
        let y = encode(&x, &m, &q, n).unwrap();
        assert_eq!(y, coder.encode(&x, n).unwrap());
        assert_eq!(decode(&y, &m, &q, n).unwrap(), x.prefix(n));
    }
}

#[test]
fn full_domain_codes_every_string() {
    let m = Measure::log_family(&Domain::Full { max_len: 6 });
    let coder = StreamCoder::new(m, &AvoidSet::empty()).unwrap();
    for x in BitString::all_up_to(6).into_iter().filter(|s| s.len() == 6) {
        for n in 1..=6 {
            let y = coder.encode(&x, n).unwrap();
            assert_eq!(coder.decode(&y, n).unwrap().prefix, x.prefix(n));
        }
    }
}

#[test]
fn targets_beyond_the_source_are_rejected() {
    let x: BitString = "0110".parse().unwrap();
    let m = Measure::log_family(&Domain::Spine { x: x.clone() });
    let coder = StreamCoder::new(m, &AvoidSet::empty()).unwrap();
    assert!(matches!(coder.encode(&x, 5), Err(KcError::TargetBeyondBound { .. })));
}

#[test]
fn dynamic_codes_realize_final_valid_requests() {
    let mut r = rng(11);
    for _ in 0..20 {
        let x = random_bits(&mut r, 10);
        let q = random_avoid(&mut r, 6, 6..=10, &BigRational::zero(), &BigRational::new(1.into(), 16.into()));
        let run = random_run(&mut r, &x, 20, q.weight());
        let coder = DynamicCoder::new(&run, &q).unwrap();
        let seq = coder.sequence();
        let valid = seq.validity_at(seq.stages().len());
        let il = coder.codebook().interleaver();
        for n in 1..=x.len() {
            let y = coder.encode(&x, n).unwrap();
            assert!(!q.has_prefix_of(&y));
            let k = coder.codebook().request_of(&y).expect("y is a code");
            assert!(valid[il.origin(k)], "code of an invalid request");
            assert!(!il.is_outdated(k), "code of an outdated request");
            assert_eq!(coder.decode(&y, n).unwrap().prefix, x.prefix(n));
        }
    }
}

#[test]
fn dynamic_budget_is_enforced() {
    let mut r = rng(12);
    let x = random_bits(&mut r, 6);
    let run = random_run(&mut r, &x, 10, &Default::default());
    // a Q that covers everything leaves no room for the machine
    let q = AvoidSet::new(vec!["0".parse().unwrap(), "1".parse().unwrap()]).unwrap();
    assert!(matches!(DynamicCoder::new(&run, &q), Err(KcError::CombinedBudgetExceeded)));
}

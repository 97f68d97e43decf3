//! Layered Kraft-Chaitin coding.
//!
//! Greedy prefix-free allocation (plain, relativized and layered), code
//! trees that avoid a forbidden prefix-free set, and online compression of
//! binary streams whose decoder reads exactly as many code bits as a given
//! information content measure prescribes. A block-coding baseline is
//! included for overhead comparisons.

pub mod approx;
pub mod avoidance;
pub mod baseline;
pub mod bitcore;
pub mod dynamic_coder;
pub mod error;
pub mod formats;
pub mod layered_kc;
pub mod plain_kc;
pub mod stream_coder;

pub use bitcore::{BitString, DyadicWeight, Trace};
pub use error::{KcError, Result};

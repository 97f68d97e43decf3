//! Block-coding baseline for overhead comparisons.
//!
//! The source is cut into blocks whose lengths follow a schedule. Each block
//! is coded separately by a plain Kraft-Chaitin code over all extensions of
//! the decoded prefix by one block that lie in the measure's domain; a
//! block's codeword length is `max(ΔI, 0) + 1`, the extra bit standing in
//! for the per-block delimiting overhead. Decoding `x↾n` needs every block
//! up to the one containing position `n`, so the overheads accumulate.

use std::fmt;
use std::str::FromStr;

use crate::bitcore::BitString;
use crate::error::{KcError, Result};
use crate::plain_kc::plain_solve;
use crate::stream_coder::{oracle_use, BitOracle, Measure};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Schedule {
    /// block `i` (from 1) has length `i`
    Linear,
    /// length `i²`
    Quadratic,
    /// length `2^(i-1)`
    Exponential,
}

impl Schedule {
    /// Length of block `i`, counting from 1.
    pub fn block_len(self, i: usize) -> usize {
        match self {
            Schedule::Linear => i,
            Schedule::Quadratic => i * i,
            Schedule::Exponential => 1usize << (i - 1),
        }
    }
}

impl FromStr for Schedule {
    type Err = KcError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "linear" => Ok(Schedule::Linear),
            "quadratic" => Ok(Schedule::Quadratic),
            "exponential" => Ok(Schedule::Exponential),
            other => Err(KcError::Parse {
                line: 0,
                reason: format!("unknown schedule {other:?}"),
            }),
        }
    }
}

impl fmt::Display for Schedule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Schedule::Linear => "linear",
            Schedule::Quadratic => "quadratic",
            Schedule::Exponential => "exponential",
        })
    }
}

/// Block boundaries covering the first `n` bits.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BlockPlan {
    pub schedule: Schedule,
    /// `boundaries[k] = ∑_{i<k} |σ_i|`; the last entry is the first `≥ n`
    pub boundaries: Vec<usize>,
}

impl BlockPlan {
    /// Least `k` with `∑_{i<k} |σ_i| ≥ n`.
    pub fn k_n(&self) -> usize {
        self.boundaries.len() - 1
    }

    pub fn block_lengths(&self) -> Vec<usize> {
        self.boundaries.windows(2).map(|w| w[1] - w[0]).collect()
    }
}

pub fn plan(n: usize, schedule: Schedule) -> BlockPlan {
    let mut boundaries = vec![0];
    let mut total = 0;
    let mut i = 1;
    while total < n {
        total += schedule.block_len(i);
        boundaries.push(total);
        i += 1;
    }
    BlockPlan {
        schedule,
        boundaries,
    }
}

/// Least number of blocks covering `n` bits.
pub fn k_n(n: usize, schedule: Schedule) -> usize {
    plan(n, schedule).k_n()
}

fn value_or_zero(m: &Measure, s: &BitString) -> Result<u32> {
    if s.is_empty() {
        Ok(m.get(s).unwrap_or(0))
    } else {
        m.value(s)
    }
}

/// The codebook for the block after `prefix`: the domain's extensions of
/// length `end`, in lexicographic order, with their codewords.
fn block_codebook(m: &Measure, prefix: &BitString, end: usize) -> Result<Vec<(BitString, BitString)>> {
    let base = value_or_zero(m, prefix)?;
    let candidates: Vec<BitString> = m
        .strings_of_len(end)
        .iter()
        .filter(|s| prefix.is_prefix_of(s))
        .cloned()
        .collect();
    let lengths = candidates
        .iter()
        .map(|s| Ok(m.value(s)?.saturating_sub(base) + 1))
        .collect::<Result<Vec<u32>>>()?;
    let codes = plain_solve(&BitString::empty(), &lengths)?;
    Ok(candidates.into_iter().zip(codes).collect())
}

/// The block stream for `x` and the code length after each block.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BlockCode {
    pub y: BitString,
    pub plan: BlockPlan,
    /// `code_ends[k]`: code bits spent on the first `k` blocks
    pub code_ends: Vec<usize>,
}

impl BlockCode {
    /// Bits a decoder must read to recover `x↾n`.
    pub fn use_for(&self, n: usize) -> Result<usize> {
        let k = k_n(n, self.plan.schedule);
        self.code_ends.get(k).copied().ok_or(KcError::TargetBeyondBound {
            target: n,
            bound: *self.plan.boundaries.last().unwrap(),
        })
    }
}

/// Codes every block that fits inside `x`.
pub fn block_encode(x: &BitString, m: &Measure, schedule: Schedule) -> Result<BlockCode> {
    let full = plan(x.len(), schedule);
    let boundaries: Vec<usize> = full
        .boundaries
        .iter()
        .copied()
        .take_while(|&b| b <= x.len())
        .collect();
    let mut y = BitString::empty();
    let mut code_ends = vec![0];
    for w in boundaries.windows(2) {
        let prefix = x.prefix(w[0]);
        let target = x.prefix(w[1]);
        let book = block_codebook(m, &prefix, w[1])?;
        let (_, code) = book
            .iter()
            .find(|(s, _)| *s == target)
            .ok_or_else(|| KcError::UndefinedMeasure(target.clone()))?;
        y = y.concat(code);
        code_ends.push(y.len());
    }
    Ok(BlockCode {
        y,
        plan: BlockPlan {
            schedule,
            boundaries,
        },
        code_ends,
    })
}

/// Decodes blocks one after another until `n` bits are known.
pub fn block_decode(y: &BitString, m: &Measure, schedule: Schedule, n: usize) -> Result<(BitString, usize)> {
    let p = plan(n, schedule);
    let mut oracle = BitOracle::new(y);
    let mut pos = 0;
    let mut x = BitString::empty();
    for w in p.boundaries.windows(2) {
        let book = block_codebook(m, &x, w[1])?;
        let mut word = BitString::empty();
        let block = loop {
            let b = oracle.read(pos).ok_or(KcError::NotACode)?;
            pos += 1;
            word.push(b);
            if let Some((s, _)) = book.iter().find(|(_, c)| *c == word) {
                break s.clone();
            }
            if !book.iter().any(|(_, c)| word.is_prefix_of(c)) {
                return Err(KcError::NotACode);
            }
        };
        x = block;
    }
    Ok((x.prefix(n), oracle.used()))
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct OverheadRow {
    pub n: usize,
    pub layered_use: u32,
    pub baseline_use: usize,
    pub overhead: i64,
}

/// Compares the block baseline with the layered coder's use at each `n`.
pub fn overhead_report(x: &BitString, m: &Measure, schedule: Schedule, ns: &[usize]) -> Result<Vec<OverheadRow>> {
    let code = block_encode(x, m, schedule)?;
    ns.iter()
        .map(|&n| {
            let layered_use = oracle_use(m, x, n)?.bits;
            let baseline_use = code.use_for(n)?;
            Ok(OverheadRow {
                n,
                layered_use,
                baseline_use,
                overhead: baseline_use as i64 - layered_use as i64,
            })
        })
        .collect()
}

/// Aligned text table.
pub fn format_table(rows: &[OverheadRow]) -> String {
    let mut out = format!("{:>8} {:>12} {:>13} {:>9}\n", "n", "layered_use", "baseline_use", "overhead");
    for r in rows {
        out.push_str(&format!(
            "{:>8} {:>12} {:>13} {:>9}\n",
            r.n, r.layered_use, r.baseline_use, r.overhead
        ));
    }
    out
}

/// Comma-separated rows with a header line.
pub fn format_csv(rows: &[OverheadRow]) -> String {
    let mut out = String::from("n,layered_use,baseline_use,overhead\n");
    for r in rows {
        out.push_str(&format!("{},{},{},{}\n", r.n, r.layered_use, r.baseline_use, r.overhead));
    }
    out
}

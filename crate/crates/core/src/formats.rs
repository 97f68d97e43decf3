//! Plain-text file formats.
//!
//! All formats are line based; blank lines and lines starting with `#` are
//! ignored unless noted. Bit strings are ASCII `0`/`1`, with `-` for the
//! empty string.

use std::collections::BTreeMap;

use sha2::{Digest, Sha256};

use crate::approx::{ApproxRun, TailReport, Update};
use crate::avoidance::AvoidSet;
use crate::bitcore::BitString;
use crate::error::{KcError, Result};
use crate::layered_kc::{LayeredRequest, Snapshot};
use crate::stream_coder::Measure;

fn content_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'))
}

fn parse_err(line: usize, reason: impl Into<String>) -> KcError {
    KcError::Parse {
        line,
        reason: reason.into(),
    }
}

fn bits(line: usize, tok: &str) -> Result<BitString> {
    tok.parse().map_err(|_| parse_err(line, format!("bad bit string {tok:?}")))
}

fn int<T: std::str::FromStr>(line: usize, tok: &str) -> Result<T> {
    tok.parse().map_err(|_| parse_err(line, format!("bad integer {tok:?}")))
}

/// Request file: one `<pointer> <length> [payload]` per line, the first
/// being `* 0`.
pub fn parse_requests(text: &str) -> Result<Vec<LayeredRequest>> {
    let mut out = Vec::new();
    for (line, l) in content_lines(text) {
        let toks: Vec<&str> = l.split_whitespace().collect();
        if toks.len() < 2 || toks.len() > 3 {
            return Err(parse_err(line, "expected `<pointer> <length> [payload]`"));
        }
        if out.is_empty() {
            if toks[0] != "*" || toks[1] != "0" {
                return Err(parse_err(line, "first request must be `* 0`"));
            }
            out.push(LayeredRequest::root());
            continue;
        }
        let pointer = int(line, toks[0])?;
        let length = int(line, toks[1])?;
        let payload = match toks.get(2) {
            Some(t) => bits(line, t)?,
            None => BitString::empty(),
        };
        out.push(LayeredRequest::with_payload(payload, pointer, length));
    }
    if out.is_empty() {
        return Err(parse_err(0, "no requests"));
    }
    Ok(out)
}

pub fn format_requests(requests: &[LayeredRequest]) -> String {
    let mut out = String::from("* 0\n");
    for r in requests.iter().skip(1) {
        if r.payload.is_empty() {
            out.push_str(&format!("{} {}\n", r.pointer, r.length));
        } else {
            out.push_str(&format!("{} {} {}\n", r.pointer, r.length, r.payload));
        }
    }
    out
}

/// Snapshot dump: `# stage k` followed by `S<i>: codes…` lines.
pub fn format_snapshot(stage: usize, snap: &Snapshot) -> String {
    let mut out = format!("# stage {stage}\n");
    for (i, set) in snap.iter().enumerate() {
        out.push_str(&format!("S{i}:"));
        for c in set {
            out.push(' ');
            out.push_str(&c.to_token());
        }
        out.push('\n');
    }
    out
}

/// Reads a sequence of snapshot dumps back.
pub fn parse_snapshots(text: &str) -> Result<Vec<(usize, Snapshot)>> {
    let mut out: Vec<(usize, Snapshot)> = Vec::new();
    for (i, l) in text.lines().enumerate() {
        let line = i + 1;
        let l = l.trim();
        if l.is_empty() {
            continue;
        }
        if let Some(rest) = l.strip_prefix("# stage ") {
            out.push((int(line, rest.trim())?, Vec::new()));
            continue;
        }
        let Some((label, codes)) = l.split_once(':') else {
            return Err(parse_err(line, "expected `S<i>: codes`"));
        };
        let Some((_, snap)) = out.last_mut() else {
            return Err(parse_err(line, "set line before any stage header"));
        };
        let idx: usize = int(line, label.trim_start_matches('S'))?;
        if idx != snap.len() {
            return Err(parse_err(line, format!("expected S{}, found {label}", snap.len())));
        }
        let set = codes
            .split_whitespace()
            .map(|t| bits(line, t))
            .collect::<Result<Vec<_>>>()?;
        snap.push(set);
    }
    Ok(out)
}

/// Avoid file: one member per line in enumeration order.
pub fn parse_avoid(text: &str) -> Result<AvoidSet> {
    let members = content_lines(text)
        .map(|(line, l)| bits(line, l))
        .collect::<Result<Vec<_>>>()?;
    AvoidSet::new(members)
}

pub fn format_avoid(q: &AvoidSet) -> String {
    q.members().iter().map(|m| format!("{}\n", m.to_token())).collect()
}

/// SHA-256 of `text`, hex encoded.
pub fn text_hash(text: &str) -> String {
    hex::encode(Sha256::digest(text.as_bytes()))
}

/// Hash of the canonical avoid file.
pub fn avoid_hash(q: &AvoidSet) -> String {
    text_hash(&format_avoid(q))
}

/// Measure table: `<bits> <value>` per line.
pub fn parse_measure_table(text: &str, id: &str) -> Result<Measure> {
    let mut values = BTreeMap::new();
    for (line, l) in content_lines(text) {
        let toks: Vec<&str> = l.split_whitespace().collect();
        if toks.len() != 2 {
            return Err(parse_err(line, "expected `<bits> <value>`"));
        }
        let s = bits(line, toks[0])?;
        if values.insert(s.clone(), int(line, toks[1])?).is_some() {
            return Err(parse_err(line, format!("duplicate entry for {}", s.to_token())));
        }
    }
    Measure::from_table(id, values)
}

pub fn format_measure_table(m: &Measure) -> String {
    m.strings()
        .iter()
        .map(|s| format!("{} {}\n", s.to_token(), m.table()[s]))
        .collect()
}

/// Code file: `key=value` header lines, a `---` separator, then the code
/// bits on one line.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct CodeFile {
    pub header: BTreeMap<String, String>,
    pub bits: BitString,
}

impl CodeFile {
    pub fn parse(text: &str) -> Result<Self> {
        let mut header = BTreeMap::new();
        let mut lines = text.lines().enumerate();
        let mut separated = false;
        for (i, l) in lines.by_ref() {
            let l = l.trim();
            if l == "---" {
                separated = true;
                break;
            }
            if l.is_empty() {
                continue;
            }
            let Some((k, v)) = l.split_once('=') else {
                return Err(parse_err(i + 1, "expected `key=value` or `---`"));
            };
            header.insert(k.trim().to_string(), v.trim().to_string());
        }
        if !separated {
            return Err(parse_err(0, "missing `---` separator"));
        }
        let mut body = String::new();
        let mut body_line = 0;
        for (i, l) in lines {
            if body_line == 0 {
                body_line = i + 1;
            }
            body.push_str(l.trim());
        }
        let bits = if body.is_empty() || body == "-" {
            BitString::empty()
        } else {
            bits(body_line, &body)?
        };
        Ok(Self { header, bits })
    }

    pub fn format(&self) -> String {
        let mut out = String::new();
        for (k, v) in &self.header {
            out.push_str(&format!("{k}={v}\n"));
        }
        out.push_str("---\n");
        out.push_str(&self.bits.to_token());
        out.push('\n');
        out
    }

    pub fn get(&self, field: &str) -> Option<&str> {
        self.header.get(field).map(String::as_str)
    }

    /// Fails unless the header records `expected` for `field`.
    pub fn expect(&self, field: &str, expected: &str) -> Result<()> {
        let found = self.get(field).unwrap_or("");
        if found != expected {
            return Err(KcError::HeaderMismatch {
                field: field.to_string(),
                expected: expected.to_string(),
                found: found.to_string(),
            });
        }
        Ok(())
    }
}

/// Run file: `c=<int>`, `universe-maxlen=<int>`, then `<bits> <int>`
/// initial values and `@<stage> <bits> <int>` updates. The run is verified,
/// tail inequality included.
pub fn parse_run(text: &str) -> Result<(ApproxRun, TailReport)> {
    let mut c = None;
    let mut maxlen = None;
    let mut initial = BTreeMap::new();
    let mut updates = Vec::new();
    for (line, l) in content_lines(text) {
        if let Some(v) = l.strip_prefix("c=") {
            c = Some(int(line, v.trim())?);
        } else if let Some(v) = l.strip_prefix("universe-maxlen=") {
            maxlen = Some(int(line, v.trim())?);
        } else if let Some(rest) = l.strip_prefix('@') {
            let toks: Vec<&str> = rest.split_whitespace().collect();
            if toks.len() != 3 {
                return Err(parse_err(line, "expected `@<stage> <bits> <value>`"));
            }
            updates.push(Update {
                stage: int(line, toks[0])?,
                string: bits(line, toks[1])?,
                value: int(line, toks[2])?,
            });
        } else {
            let toks: Vec<&str> = l.split_whitespace().collect();
            if toks.len() != 2 {
                return Err(parse_err(line, "expected `<bits> <value>`"));
            }
            let s = bits(line, toks[0])?;
            if initial.insert(s.clone(), int(line, toks[1])?).is_some() {
                return Err(parse_err(line, format!("duplicate initial value for {s}")));
            }
        }
    }
    let c = c.ok_or_else(|| parse_err(0, "missing `c=` header"))?;
    let maxlen = maxlen.ok_or_else(|| parse_err(0, "missing `universe-maxlen=` header"))?;
    ApproxRun::verified(c, maxlen, initial, updates)
}

pub fn format_run(run: &ApproxRun) -> String {
    let mut out = format!("c={}\nuniverse-maxlen={}\n", run.c(), run.universe_maxlen());
    for s in run.universe() {
        out.push_str(&format!("{} {}\n", s, run.initial()[&s]));
    }
    for u in run.updates() {
        out.push_str(&format!("@{} {} {}\n", u.stage, u.string, u.value));
    }
    out
}

/// Whitespace or comma separated integers.
pub fn parse_lengths(text: &str) -> Result<Vec<u32>> {
    text.split(|c: char| c == ',' || c.is_whitespace())
        .filter(|t| !t.is_empty())
        .map(|t| int(0, t))
        .collect()
}

/// Bits with all whitespace removed; `-` or nothing is the empty string.
pub fn parse_bits(text: &str) -> Result<BitString> {
    let s: String = text.chars().filter(|c| !c.is_whitespace()).collect();
    if s.is_empty() {
        return Ok(BitString::empty());
    }
    bits(0, &s)
}

//! `kcstream` command-line tool.
//!
//! Exit status: 0 success, 1 usage or I/O error, 2 budget or validation
//! error, 3 decode failure.

use std::fmt;
use std::fs;
use std::io::{self, Read, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use kcstream::avoidance::AvoidSet;
use kcstream::baseline::{format_csv, format_table, overhead_report, plan, Schedule};
use kcstream::dynamic_coder::DynamicCoder;
use kcstream::formats::{
    avoid_hash, format_measure_table, format_run, format_snapshot, parse_avoid, parse_bits,
    parse_lengths, parse_measure_table, parse_requests, parse_run, text_hash, CodeFile,
};
use kcstream::layered_kc::{layered_run, validate_sequence};
use kcstream::plain_kc::PlainSolver;
use kcstream::stream_coder::{oracle_use, Domain, Measure, StreamCoder};
use kcstream::{BitString, KcError};

/// Largest bound accepted for the full-domain `log` measure; the code tree
/// holds every string up to the bound.
const MAX_LOG_BOUND: usize = 16;

#[derive(Parser)]
#[command(name = "kcstream", version, about = "Layered Kraft-Chaitin coding tools")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Assign prefix-free codes to a sequence of lengths, one per line
    SolveKc {
        /// lengths file; standard input if omitted
        #[arg(long)]
        lengths: Option<PathBuf>,
        /// solve below this string instead of the empty string
        #[arg(long)]
        base: Option<String>,
    },
    /// Solve a layered request file and dump the satisfaction sets
    LayeredSolve {
        #[arg(long)]
        requests: PathBuf,
        /// print only the last stage
        #[arg(long = "final")]
        final_only: bool,
    },
    /// Compress a prefix of a source
    Encode {
        #[command(flatten)]
        m: MeasureArgs,
        #[arg(long)]
        source: String,
        #[arg(long)]
        n: usize,
        /// code file; standard output if omitted
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Recover a prefix from a code file
    Decode {
        #[command(flatten)]
        m: MeasureArgs,
        #[arg(long)]
        code: PathBuf,
        /// prefix length to recover; the header's `n` if omitted
        #[arg(long)]
        n: Option<usize>,
        /// report the number of code bits read on standard error
        #[arg(short, long)]
        verbose: bool,
    },
    /// Print the number of code bits needed for every prefix length
    UseTable {
        #[command(flatten)]
        m: MeasureArgs,
        #[arg(long)]
        source: String,
    },
    /// Compress a prefix using an approximation run
    DynamicEncode {
        #[command(flatten)]
        r: RunArgs,
        #[arg(long)]
        source: String,
        #[arg(long)]
        n: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Recover a prefix from a dynamic code file
    DynamicDecode {
        #[command(flatten)]
        r: RunArgs,
        #[arg(long)]
        code: PathBuf,
        #[arg(long)]
        n: Option<usize>,
        #[arg(short, long)]
        verbose: bool,
    },
    /// Compare the block baseline with the layered coder
    Compare {
        /// comma-separated prefix lengths
        #[arg(long, default_value = "256,1024,4096")]
        ns: String,
        #[arg(long, default_value = "linear")]
        schedule: String,
        /// source bits or file; a Thue-Morse sequence if omitted
        #[arg(long)]
        source: Option<String>,
        /// also write the rows as CSV to this file
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Show codes and the remaining-budget trace after every plain step
    TraceDump {
        #[arg(long)]
        lengths: Option<PathBuf>,
        #[arg(long)]
        base: Option<String>,
    },
}

#[derive(Args)]
struct MeasureArgs {
    /// `log`, or a measure table file
    #[arg(long)]
    measure: String,
    /// avoid file; empty set if omitted
    #[arg(long)]
    avoid: Option<PathBuf>,
    /// longest source prefix considered
    #[arg(long)]
    bound: Option<usize>,
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    run: PathBuf,
    #[arg(long)]
    avoid: Option<PathBuf>,
}

#[derive(Debug)]
struct Failure {
    code: u8,
    msg: String,
}

impl Failure {
    fn usage(msg: impl Into<String>) -> Self {
        Self { code: 1, msg: msg.into() }
    }

    fn invalid(msg: impl Into<String>) -> Self {
        Self { code: 2, msg: msg.into() }
    }

    fn decode(e: KcError) -> Self {
        Self { code: 3, msg: format!("decode failed: {e}") }
    }
}

impl From<KcError> for Failure {
    fn from(e: KcError) -> Self {
        Self::invalid(e.to_string())
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.msg)
    }
}

type Result<T> = std::result::Result<T, Failure>;

fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Failure::usage(format!("{}: {e}", path.display())))
}

fn read_input(path: Option<&Path>) -> Result<String> {
    match path {
        Some(p) => read_text(p),
        None => {
            let mut s = String::new();
            io::stdin()
                .read_to_string(&mut s)
                .map_err(|e| Failure::usage(format!("stdin: {e}")))?;
            Ok(s)
        }
    }
}

fn write_output(path: Option<&Path>, text: &str) -> Result<()> {
    match path {
        Some(p) => fs::write(p, text).map_err(|e| Failure::usage(format!("{}: {e}", p.display()))),
        None => io::stdout()
            .write_all(text.as_bytes())
            .map_err(|e| Failure::usage(format!("stdout: {e}"))),
    }
}

/// Inline bits if the argument is made of `0`/`1` only, else a file.
fn read_source(arg: &str) -> Result<BitString> {
    if !arg.is_empty() && arg.chars().all(|c| c == '0' || c == '1') {
        return Ok(parse_bits(arg)?);
    }
    Ok(parse_bits(&read_text(Path::new(arg))?)?)
}

fn parse_base(base: Option<&str>) -> Result<BitString> {
    match base {
        None => Ok(BitString::empty()),
        Some(b) => b
            .parse()
            .map_err(|_| Failure::usage(format!("bad base {b:?}"))),
    }
}

fn load_avoid(path: Option<&Path>) -> Result<AvoidSet> {
    match path {
        None => Ok(AvoidSet::empty()),
        Some(p) => Ok(parse_avoid(&read_text(p)?)?),
    }
}

/// The measure (shifted to fit beside `q`) and its working bound.
fn load_measure(args: &MeasureArgs, q: &AvoidSet, default_bound: Option<usize>) -> Result<(Measure, usize)> {
    let (m, max_len) = if args.measure == "log" {
        let bound = args
            .bound
            .or(default_bound)
            .ok_or_else(|| Failure::usage("the log measure needs --bound"))?;
        if bound > MAX_LOG_BOUND {
            return Err(Failure::invalid(format!(
                "bound {bound} exceeds {MAX_LOG_BOUND}, the limit for the log measure"
            )));
        }
        (Measure::log_family(&Domain::Full { max_len: bound }), bound)
    } else {
        let text = read_text(Path::new(&args.measure))?;
        let table = parse_measure_table(&text, "table")?;
        let id = format!("table:{}", &text_hash(&format_measure_table(&table))[..16]);
        let table = parse_measure_table(&text, &id)?;
        let longest = table.strings().iter().map(|s| s.len()).max().unwrap_or(0);
        (table, args.bound.unwrap_or(longest))
    };
    let shift = m.auto_shift(q)?;
    Ok((m.with_shift(shift), max_len))
}

fn solve_kc(lengths: Option<&Path>, base: Option<&str>) -> Result<()> {
    let lens = parse_lengths(&read_input(lengths)?)?;
    let mut s = PlainSolver::new(parse_base(base)?);
    let mut out = String::new();
    let mut failure = None;
    for &l in &lens {
        match s.step(l) {
            Ok(c) => out.push_str(&format!("{}\n", c.to_token())),
            Err(e) => {
                failure = Some(e);
                break;
            }
        }
    }
    write_output(None, &out)?;
    failure.map_or(Ok(()), |e| Err(e.into()))
}

fn trace_dump(lengths: Option<&Path>, base: Option<&str>) -> Result<()> {
    let lens = parse_lengths(&read_input(lengths)?)?;
    let mut s = PlainSolver::new(parse_base(base)?);
    let show = |s: &PlainSolver| {
        let trace: Vec<String> = s.trace().positions.iter().map(|p| p.to_string()).collect();
        let fillers: Vec<String> = s.fillers().map(|(_, f)| f.to_token()).collect();
        format!("trace {{{}}} fillers {}", trace.join(","), fillers.join(" "))
    };
    let mut out = format!("start: {}\n", show(&s));
    for (i, &l) in lens.iter().enumerate() {
        match s.step(l) {
            Ok(c) => out.push_str(&format!("{}: len {l} code {} {}\n", i + 1, c.to_token(), show(&s))),
            Err(e) => {
                write_output(None, &out)?;
                return Err(e.into());
            }
        }
    }
    write_output(None, &out)
}

fn layered_solve(requests: &Path, final_only: bool) -> Result<()> {
    let reqs = parse_requests(&read_text(requests)?)?;
    validate_sequence(&reqs)?;
    let (_, snaps) = layered_run(&reqs)?;
    let mut out = String::new();
    for (stage, snap) in snaps.iter().enumerate().skip(1) {
        if !final_only || stage + 1 == snaps.len() {
            out.push_str(&format_snapshot(stage, snap));
        }
    }
    write_output(None, &out)
}

fn header_for(m: &Measure, bound: usize, n: usize, q: &AvoidSet) -> CodeFile {
    let mut f = CodeFile::default();
    f.header.insert("measure".into(), m.id().to_string());
    f.header.insert("shift".into(), m.shift().to_string());
    f.header.insert("bound".into(), bound.to_string());
    f.header.insert("n".into(), n.to_string());
    f.header.insert("avoid".into(), avoid_hash(q));
    f
}

fn check_n(n: usize, bound: usize) -> Result<()> {
    if n > bound {
        return Err(KcError::TargetBeyondBound { target: n, bound }.into());
    }
    Ok(())
}

fn encode(m: &MeasureArgs, source: &str, n: usize, out: Option<&Path>) -> Result<()> {
    let x = read_source(source)?;
    let q = load_avoid(m.avoid.as_deref())?;
    let (measure, bound) = load_measure(m, &q, Some(x.len()))?;
    check_n(n, bound)?;
    let x = x.prefix(x.len().min(bound));
    check_n(n, x.len())?;
    let mut file = header_for(&measure, bound, n, &q);
    let coder = StreamCoder::new(measure, &q)?;
    file.bits = coder.encode(&x, n)?;
    write_output(out, &file.format())
}

fn read_code(path: &Path) -> Result<(CodeFile, usize)> {
    let file = CodeFile::parse(&read_text(path)?)?;
    let n = file
        .get("n")
        .and_then(|v| v.parse().ok())
        .ok_or_else(|| Failure::invalid("code file header has no valid `n`"))?;
    Ok((file, n))
}

fn decode(m: &MeasureArgs, code: &Path, n: Option<usize>, verbose: bool) -> Result<()> {
    let (file, header_n) = read_code(code)?;
    let q = load_avoid(m.avoid.as_deref())?;
    let header_bound = file.get("bound").and_then(|v| v.parse().ok());
    let (measure, bound) = load_measure(m, &q, header_bound)?;
    file.expect("measure", measure.id())?;
    file.expect("shift", &measure.shift().to_string())?;
    file.expect("bound", &bound.to_string())?;
    file.expect("avoid", &avoid_hash(&q))?;
    let n = n.unwrap_or(header_n);
    check_n(n, bound)?;
    let coder = StreamCoder::new(measure, &q)?;
    let d = coder.decode(&file.bits, n).map_err(Failure::decode)?;
    if verbose {
        eprintln!("read {} of {} code bits", d.bits_read, file.bits.len());
    }
    write_output(None, &format!("{}\n", d.prefix.to_token()))
}

fn use_table(m: &MeasureArgs, source: &str) -> Result<()> {
    let x = read_source(source)?;
    let q = load_avoid(m.avoid.as_deref())?;
    let (measure, bound) = load_measure(m, &q, Some(x.len()))?;
    let x = x.prefix(x.len().min(bound));
    let mut out = String::from("n use\n");
    for n in 0..=x.len() {
        out.push_str(&format!("{n} {}\n", oracle_use(&measure, &x, n)?.bits));
    }
    write_output(None, &out)
}

fn load_dynamic(r: &RunArgs) -> Result<(DynamicCoder, AvoidSet, String, u32)> {
    let (run, _) = parse_run(&read_text(&r.run)?)?;
    let q = load_avoid(r.avoid.as_deref())?;
    let coder = DynamicCoder::new(&run, &q)?;
    Ok((coder, q, text_hash(&format_run(&run)), run.c()))
}

fn dynamic_encode(r: &RunArgs, source: &str, n: usize, out: Option<&Path>) -> Result<()> {
    let x = read_source(source)?;
    let (coder, q, run_hash, c) = load_dynamic(r)?;
    check_n(n, x.len())?;
    let mut file = CodeFile::default();
    file.header.insert("run".into(), run_hash);
    file.header.insert("c".into(), c.to_string());
    file.header.insert("n".into(), n.to_string());
    file.header.insert("avoid".into(), avoid_hash(&q));
    file.bits = coder.encode(&x, n)?;
    write_output(out, &file.format())
}

fn dynamic_decode(r: &RunArgs, code: &Path, n: Option<usize>, verbose: bool) -> Result<()> {
    let (file, header_n) = read_code(code)?;
    let (coder, q, run_hash, c) = load_dynamic(r)?;
    file.expect("run", &run_hash)?;
    file.expect("c", &c.to_string())?;
    file.expect("avoid", &avoid_hash(&q))?;
    let n = n.unwrap_or(header_n);
    let d = coder.decode(&file.bits, n).map_err(Failure::decode)?;
    if verbose {
        eprintln!("read {} of {} code bits", d.bits_read, file.bits.len());
    }
    write_output(None, &format!("{}\n", d.prefix.to_token()))
}

/// `t_i` = parity of the number of ones in `i`.
fn thue_morse(len: usize) -> BitString {
    BitString::from_bits((0..len).map(|i: usize| i.count_ones() % 2 == 1).collect())
}

fn compare(ns: &str, schedule: &str, source: Option<&str>, csv: Option<&Path>) -> Result<()> {
    let ns: Vec<usize> = parse_lengths(ns)?.into_iter().map(|n| n as usize).collect();
    if ns.is_empty() {
        return Err(Failure::usage("--ns needs at least one length"));
    }
    let schedule: Schedule = schedule.parse()?;
    let max_n = ns.iter().copied().max().unwrap_or(0);
    // the baseline only charges whole blocks
    let needed = *plan(max_n, schedule).boundaries.last().unwrap();
    let x = match source {
        Some(s) => read_source(s)?,
        None => thue_morse(needed),
    };
    if x.len() < needed {
        return Err(Failure::invalid(format!(
            "source has {} bits; covering n = {max_n} with whole blocks needs {needed}",
            x.len()
        )));
    }
    let m = Measure::log_family(&Domain::Spine { x: x.clone() });
    let rows = overhead_report(&x, &m, schedule, &ns)?;
    if let Some(path) = csv {
        write_output(Some(path), &format_csv(&rows))?;
    }
    write_output(None, &format_table(&rows))
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::SolveKc { lengths, base } => solve_kc(lengths.as_deref(), base.as_deref()),
        Command::LayeredSolve { requests, final_only } => layered_solve(&requests, final_only),
        Command::Encode { m, source, n, out } => encode(&m, &source, n, out.as_deref()),
        Command::Decode { m, code, n, verbose } => decode(&m, &code, n, verbose),
        Command::UseTable { m, source } => use_table(&m, &source),
        Command::DynamicEncode { r, source, n, out } => dynamic_encode(&r, &source, n, out.as_deref()),
        Command::DynamicDecode { r, code, n, verbose } => dynamic_decode(&r, &code, n, verbose),
        Command::Compare {
            ns,
            schedule,
            source,
            csv,
        } => compare(&ns, &schedule, source.as_deref(), csv.as_deref()),
        Command::TraceDump { lengths, base } => trace_dump(lengths.as_deref(), base.as_deref()),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {f}");
            ExitCode::from(f.code)
        }
    }
}

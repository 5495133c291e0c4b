//! The `partypes` command line.
//!
//! Exit codes: 0 when everything checks, 1 for verification findings, 2 for
//! usage or input errors. Reports go to `out`, diagnostics to `err`.

use std::io::Write;
use std::ops::ControlFlow;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};
use serde_json::json;

use crate::bindings::{Bindings, BindingsFile};
use crate::conform::{check_all_sizes, check_conformance_with, ConformError, ConformanceReport, Verdict};
use crate::corpus::{self, EXAMPLES};
use crate::parser::{parse_program, parse_protocol, ParseError};
use crate::program::Program;
use crate::project::{expansion_table, LocalAction};
use crate::protocol::GlobalProtocol;
use crate::simulate::{self, Event, Observer, Options, Policy};
use crate::value::{Env, Value};
use crate::wellformed::{admits_size, check_protocol, SizeRange};

pub const EXIT_OK: u8 = 0;
pub const EXIT_FINDINGS: u8 = 1;
pub const EXIT_INPUT: u8 = 2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Default)]
pub enum Format {
    #[default]
    Text,
    Json,
}

#[derive(Debug, Parser)]
#[command(name = "partypes", version, about = "Check MPI-style programs against parameterised protocols")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Check a protocol for well-formedness over a range of sizes.
    Check {
        file: PathBuf,
        #[arg(long, default_value = "1..16")]
        sizes: SizeRange,
        #[arg(long, value_enum, default_value_t)]
        format: Format,
    },
    /// Print the per-rank projection of a protocol.
    Project {
        file: PathBuf,
        #[arg(long)]
        size: i64,
        #[arg(long)]
        rank: Option<i64>,
        /// Value for a `val` binder, as NAME=NUMBER.
        #[arg(long = "set", value_name = "NAME=VALUE")]
        set: Vec<String>,
        #[arg(long, value_enum, default_value_t)]
        format: Format,
    },
    /// Check a program against a protocol at every size in a range.
    Verify {
        program: PathBuf,
        #[arg(long)]
        protocol: PathBuf,
        #[arg(long, default_value = "1..16")]
        sizes: SizeRange,
        #[arg(long)]
        bindings: Option<PathBuf>,
        #[arg(long, value_enum, default_value_t)]
        format: Format,
    },
    /// Run a program under synchronous communication and report deadlocks.
    Simulate {
        program: PathBuf,
        #[arg(long)]
        size: i64,
        #[arg(long)]
        bindings: Option<PathBuf>,
        /// Print one line per completed rendezvous.
        #[arg(long)]
        trace: bool,
        /// Pick among enabled rendezvous at random with this seed.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, value_enum, default_value_t)]
        format: Format,
    },
    /// Run the bundled examples and compare against expected results.
    Selftest,
}

/// Input problem: message for stderr, exit code 2.
struct InputError(String);

type CmdResult = Result<u8, InputError>;

fn read(path: &Path) -> Result<String, InputError> {
    std::fs::read_to_string(path).map_err(|e| InputError(format!("cannot read {}: {e}", path.display())))
}

fn with_file(e: ParseError, path: &Path) -> InputError {
    let lines: Vec<String> = e.diagnostics.into_iter().map(|d| d.with_file(path).to_string()).collect();
    InputError(lines.join("\n"))
}

fn load_protocol(path: &Path) -> Result<GlobalProtocol, InputError> {
    parse_protocol(&read(path)?).map_err(|e| with_file(e, path))
}

fn load_program(path: &Path) -> Result<Program, InputError> {
    parse_program(&read(path)?).map_err(|e| with_file(e, path))
}

fn load_bindings(path: Option<&Path>) -> Result<BindingsFile, InputError> {
    match path {
        None => Ok(BindingsFile::default()),
        Some(p) => BindingsFile::parse(&read(p)?).map_err(|e| InputError(format!("{}: {e}", p.display()))),
    }
}

fn max_steps() -> u64 {
    simulate::max_steps_from_env().unwrap_or(simulate::DEFAULT_MAX_STEPS)
}

fn json_line(out: &mut dyn Write, v: &serde_json::Value) {
    let _ = writeln!(out, "{}", serde_json::to_string_pretty(v).expect("JSON values serialise"));
}

/// Parses `args` (including the program name) and runs the command.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> u8
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_INPUT } else { EXIT_OK };
            let text = e.render().to_string();
            let _ = if e.use_stderr() { write!(err, "{text}") } else { write!(out, "{text}") };
            return code;
        }
    };
    let result = match cli.command {
        Command::Check { file, sizes, format } => cmd_check(&file, sizes, format, out),
        Command::Project { file, size, rank, set, format } => cmd_project(&file, size, rank, &set, format, out),
        Command::Verify { program, protocol, sizes, bindings, format } => {
            cmd_verify(&program, &protocol, sizes, bindings.as_deref(), format, out)
        }
        Command::Simulate { program, size, bindings, trace, seed, format } => {
            cmd_simulate(&program, size, bindings.as_deref(), trace, seed, format, out)
        }
        Command::Selftest => cmd_selftest(out),
    };
    match result {
        Ok(code) => code,
        Err(InputError(msg)) => {
            let _ = writeln!(err, "error: {msg}");
            EXIT_INPUT
        }
    }
}

fn cmd_check(file: &Path, sizes: SizeRange, format: Format, out: &mut dyn Write) -> CmdResult {
    let p = load_protocol(file)?;
    let report = check_protocol(&p, sizes);
    match format {
        Format::Text => {
            let _ = write!(out, "{}", report.to_text());
        }
        Format::Json => json_line(out, &report.to_json()),
    }
    Ok(if report.is_ok() { EXIT_OK } else { EXIT_FINDINGS })
}

fn parse_set(items: &[String], size: i64) -> Result<Env, InputError> {
    let mut env = Env::new(size);
    for item in items {
        let (name, value) =
            item.split_once('=').ok_or_else(|| InputError(format!("--set expects NAME=VALUE, got `{item}`")))?;
        let v = serde_json::from_str::<serde_json::Value>(value.trim())
            .ok()
            .and_then(|v| Value::from_json(&v))
            .ok_or_else(|| InputError(format!("--set {name}: `{value}` is not a number or array")))?;
        env.insert(name.trim(), v);
    }
    Ok(env)
}

/// Text layout of a projection: one block per rank, one action per line.
pub fn projection_text(p: &GlobalProtocol, size: i64, table: &[Vec<LocalAction>], rank: Option<i64>) -> String {
    let mut out = format!("protocol {}, size {size}\n", p.name);
    for (r, actions) in table.iter().enumerate() {
        if rank.is_some_and(|only| only != r as i64) {
            continue;
        }
        out.push_str(&format!("rank {r}:\n"));
        for a in actions {
            out.push_str(&format!("  {a}\n"));
        }
    }
    out
}

fn cmd_project(
    file: &Path,
    size: i64,
    rank: Option<i64>,
    set: &[String],
    format: Format,
    out: &mut dyn Write,
) -> CmdResult {
    let p = load_protocol(file)?;
    if size < 1 {
        return Err(InputError(format!("--size must be positive, got {size}")));
    }
    if let Some(r) = rank.filter(|r| !(0..size).contains(r)) {
        return Err(InputError(format!("--rank {r} is outside 0..{}", size - 1)));
    }
    match admits_size(&p, size) {
        Ok(true) => {}
        Ok(false) => return Err(InputError(format!("size {size} is excluded by precondition of protocol {}", p.name))),
        Err(e) => return Err(InputError(format!("cannot evaluate the protocol header: {e}"))),
    }
    let env = parse_set(set, size)?;
    let table = match expansion_table(&p, size, &env) {
        Ok(t) => t,
        Err(e) => {
            let span = e.span();
            let _ = writeln!(out, "{}:{span}: projection failed: {e}", file.display());
            return Ok(EXIT_FINDINGS);
        }
    };
    match format {
        Format::Text => {
            let _ = write!(out, "{}", projection_text(&p, size, &table, rank));
        }
        Format::Json => {
            let ranks: Vec<serde_json::Value> = table
                .iter()
                .enumerate()
                .filter(|(r, _)| rank.is_none_or(|only| only == *r as i64))
                .map(|(r, actions)| {
                    json!({ "rank": r, "actions": actions.iter().map(LocalAction::to_json).collect::<Vec<_>>() })
                })
                .collect();
            json_line(out, &json!({ "protocol": p.name, "size": size, "ranks": ranks }));
        }
    }
    Ok(EXIT_OK)
}

fn conform_error(e: ConformError) -> InputError {
    match e {
        ConformError::IllFormed { size, diagnostics } => {
            let lines: Vec<String> = diagnostics.iter().map(ToString::to_string).collect();
            InputError(format!("protocol is not well-formed at size {size}:\n{}", lines.join("\n")))
        }
        other => InputError(other.to_string()),
    }
}

fn cmd_verify(
    program: &Path,
    protocol: &Path,
    sizes: SizeRange,
    bindings: Option<&Path>,
    format: Format,
    out: &mut dyn Write,
) -> CmdResult {
    let prog = load_program(program)?;
    let proto = load_protocol(protocol)?;
    let file = load_bindings(bindings)?;
    let steps = max_steps();
    let mut reports: Vec<ConformanceReport> = Vec::new();
    for size in sizes.sizes() {
        match check_conformance_with(&prog, &proto, &file.for_size(size), steps) {
            Ok(r) => reports.push(r),
            Err(ConformError::Excluded { size }) => {
                reports.push(ConformanceReport { size, verdict: Verdict::Excluded, collective_log: Vec::new() })
            }
            Err(e) => return Err(conform_error(e)),
        }
    }
    match format {
        Format::Text => {
            let _ = writeln!(out, "{} against protocol {}", program.display(), proto.name);
            for r in &reports {
                let _ = write!(out, "{}", r.to_text());
            }
        }
        Format::Json => {
            json_line(out, &serde_json::Value::Array(reports.iter().map(ConformanceReport::to_json).collect()))
        }
    }
    let failed = reports.iter().any(|r| matches!(r.verdict, Verdict::Fail(_)));
    Ok(if failed { EXIT_FINDINGS } else { EXIT_OK })
}

/// Writes trace lines as rendezvous complete.
struct StreamTrace<'a> {
    out: &'a mut dyn Write,
    lines: Vec<String>,
    stream: bool,
}

impl Observer for StreamTrace<'_> {
    fn committed(&mut self, step: u64, event: &Event) -> ControlFlow<()> {
        let line = format!("step {step}: {}", event.describe());
        if self.stream {
            let _ = writeln!(self.out, "{line}");
        } else {
            self.lines.push(line);
        }
        ControlFlow::Continue(())
    }
}

fn cmd_simulate(
    program: &Path,
    size: i64,
    bindings: Option<&Path>,
    trace: bool,
    seed: Option<u64>,
    format: Format,
    out: &mut dyn Write,
) -> CmdResult {
    if size < 1 {
        return Err(InputError(format!("--size must be positive, got {size}")));
    }
    let prog = load_program(program)?;
    let b: Bindings = load_bindings(bindings)?.for_size(size);
    let opts =
        Options { policy: seed.map_or(Policy::MinRank, Policy::Random), max_steps: max_steps(), ..Options::default() };
    let stream = trace && format == Format::Text;
    let mut obs = StreamTrace { out, lines: Vec::new(), stream };
    let report = simulate::run_with(&prog, &b, &opts, &mut obs).map_err(|e| InputError(e.to_string()))?;
    let StreamTrace { out, lines, .. } = obs;
    match format {
        Format::Text => {
            let _ = write!(out, "{}", report.to_text());
        }
        Format::Json => {
            let mut v = report.to_json();
            if trace {
                v.as_object_mut().expect("report is an object").insert("trace".into(), json!(lines));
            }
            json_line(out, &v);
        }
    }
    Ok(if report.is_ok() { EXIT_OK } else { EXIT_FINDINGS })
}

pub const FDIFF_PROJECT_5_GOLDEN: &str = include_str!("../examples/golden/fdiff_project_5.txt");

fn cmd_selftest(out: &mut dyn Write) -> CmdResult {
    let mut failures = 0;
    let mut line = |ok: bool, what: String| {
        if !ok {
            failures += 1;
        }
        let _ = writeln!(out, "{} {what}", if ok { "ok  " } else { "FAIL" });
    };
    for e in &EXAMPLES {
        let (Ok(proto), Ok(prog), Ok(file)) = (e.parse_protocol(), e.parse_program(), e.parse_bindings()) else {
            line(false, format!("{}: bundled sources do not parse", e.name));
            continue;
        };
        let reports = check_all_sizes(&prog, &proto, |s| file.for_size(s), e.sizes);
        let conform_ok = match &reports {
            Ok(rs) => rs.iter().all(|r| r.passed() == e.correct),
            Err(_) => false,
        };
        line(conform_ok, format!("{}: conformance over {}", e.name, e.sizes));
        let sim_ok = e.sizes.sizes().all(|s| {
            simulate::run(&prog, &file.for_size(s)).is_ok_and(|r| r.is_ok() == e.correct && r.deadlocked() != e.correct)
        });
        line(sim_ok, format!("{}: simulation over {}", e.name, e.sizes));
    }
    let fdiff = parse_protocol(corpus::FDIFF_PROTOCOL).map_err(|e| InputError(e.to_string()))?;
    let golden_ok = expansion_table(&fdiff, 5, &Env::new(5))
        .is_ok_and(|t| projection_text(&fdiff, 5, &t, None) == FDIFF_PROJECT_5_GOLDEN);
    line(golden_ok, "fdiff: projection at size 5 matches golden output".into());
    Ok(if failures == 0 { EXIT_OK } else { EXIT_FINDINGS })
}

//! `ktest check --spec F --bindings B --trace T` and
//! `ktest dot --spec F --bindings B`.
//!
//! Exit codes: 0 accepted (or DOT written), 1 trace rejected, 2 parse,
//! validation or I/O error, 3 active construct in an offline spec.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use ktest_core::text::{self, SymbolTable};
use ktest_core::{compile, to_dot, validate, SpecAst};

use crate::bindings::{parse_bindings, Universe};
use crate::trace::{check_trace, parse_trace, CheckError};

pub const EXIT_ACCEPTED: i32 = 0;
pub const EXIT_REJECTED: i32 = 1;
pub const EXIT_ERROR: i32 = 2;
pub const EXIT_ACTIVE: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "ktest", version, about = "Check recorded component traces against specifications")]
struct Args {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Check a JSON-lines trace against a passive specification.
    Check {
        #[arg(long)]
        spec: PathBuf,
        #[arg(long)]
        bindings: PathBuf,
        #[arg(long)]
        trace: PathBuf,
    },
    /// Print the compiled automaton as Graphviz DOT.
    Dot {
        #[arg(long)]
        spec: PathBuf,
        #[arg(long)]
        bindings: PathBuf,
    },
}

struct Fail(i32, String);

fn read(path: &Path) -> Result<String, Fail> {
    std::fs::read_to_string(path).map_err(|e| Fail(EXIT_ERROR, format!("{}: {e}", path.display())))
}

/// True when the source uses `trigger` or `inspect`, which cannot be
/// resolved offline.
fn active_keyword(src: &str) -> Option<String> {
    text::tokens(src).ok()?.into_iter().map(|(_, t)| t).find(|t| t == "trigger" || t == "inspect")
}

fn load(spec: &Path, bindings: &Path, universe: &mut Universe) -> Result<SpecAst, Fail> {
    let src = read(spec)?;
    if let Some(kw) = active_keyword(&src) {
        return Err(Fail(EXIT_ACTIVE, format!("{}: offline checking does not support {kw}", spec.display())));
    }
    let table: SymbolTable = parse_bindings(&read(bindings)?, universe)
        .map_err(|e| Fail(EXIT_ERROR, format!("{}: {e}", bindings.display())))?;
    text::parse(&src, &table).map_err(|e| Fail(EXIT_ERROR, format!("{}:{e}", spec.display())))
}

fn check(spec: &Path, bindings: &Path, trace: &Path, out: &mut dyn Write) -> Result<i32, Fail> {
    let mut universe = Universe::new();
    let ast = load(spec, bindings, &mut universe)?;
    let records =
        parse_trace(&read(trace)?, &mut universe).map_err(|e| Fail(EXIT_ERROR, format!("{}: {e}", trace.display())))?;
    let verdict = check_trace(&ast, &records).map_err(|e| match e {
        CheckError::Active(_) => Fail(EXIT_ACTIVE, e.to_string()),
        CheckError::Ambiguous(_) => Fail(EXIT_ERROR, format!("{}: {e}", spec.display())),
    })?;
    let json = serde_json::to_string(&verdict).expect("verdict serializes");
    writeln!(out, "{json}").map_err(|e| Fail(EXIT_ERROR, e.to_string()))?;
    Ok(if verdict.accepted { EXIT_ACCEPTED } else { EXIT_REJECTED })
}

/// DOT text of the compiled specification.
pub fn dot(spec: &Path, bindings: &Path) -> Result<String, (i32, String)> {
    dot_inner(spec, bindings).map_err(|Fail(c, m)| (c, m))
}

fn dot_inner(spec: &Path, bindings: &Path) -> Result<String, Fail> {
    let mut universe = Universe::new();
    let src = read(spec)?;
    let table = parse_bindings(&read(bindings)?, &mut universe)
        .map_err(|e| Fail(EXIT_ERROR, format!("{}: {e}", bindings.display())))?;
    let ast = text::parse(&src, &table).map_err(|e| Fail(EXIT_ERROR, format!("{}:{e}", spec.display())))?;
    let validated = validate(&ast).map_err(|e| Fail(EXIT_ERROR, format!("{}: {e}", spec.display())))?;
    Ok(to_dot(&compile(&validated)))
}

/// Runs the command line `args` (including the program name) and returns the
/// exit code.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let args = match Args::try_parse_from(args) {
        Ok(a) => a,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_ERROR } else { EXIT_ACCEPTED };
            let text = e.render().to_string();
            let _ = if e.use_stderr() { err.write_all(text.as_bytes()) } else { out.write_all(text.as_bytes()) };
            return code;
        }
    };
    let result = match &args.command {
        Command::Check { spec, bindings, trace } => check(spec, bindings, trace, out),
        Command::Dot { spec, bindings } => dot_inner(spec, bindings).and_then(|d| {
            out.write_all(d.as_bytes()).map(|_| EXIT_ACCEPTED).map_err(|e| Fail(EXIT_ERROR, e.to_string()))
        }),
    };
    match result {
        Ok(code) => code,
        Err(Fail(code, msg)) => {
            let _ = writeln!(err, "ktest: {msg}");
            code
        }
    }
}

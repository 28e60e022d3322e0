//! Offline traces: JSON lines of `{seq, event: {kind, payload}, port,
//! direction}` checked against a passive specification.

use ktest_core::{
    compile, validate, AmbiguousSpec, Block, BodyStmt, Direction, EventSymbol, FailureKind, Simulation, SpecAst,
    Verdict as SimVerdict,
};
use serde::Serialize;

use crate::bindings::{event_of, Universe};

#[derive(Clone, Debug, PartialEq)]
pub struct TraceRecord {
    pub seq: u64,
    pub symbol: EventSymbol,
}

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
#[error("trace line {line}: {message}")]
pub struct TraceError {
    pub line: usize,
    pub message: String,
}

pub fn parse_trace(src: &str, universe: &mut Universe) -> Result<Vec<TraceRecord>, TraceError> {
    let mut out: Vec<TraceRecord> = Vec::new();
    for (i, text) in src.lines().enumerate() {
        let line = i + 1;
        if text.trim().is_empty() {
            continue;
        }
        let err = |message: String| TraceError { line, message };
        let v: serde_json::Value = serde_json::from_str(text).map_err(|e| err(e.to_string()))?;
        let seq =
            v.get("seq").and_then(|s| s.as_u64()).ok_or_else(|| err("missing non-negative integer `seq`".into()))?;
        if let Some(prev) = out.last() {
            if seq <= prev.seq {
                return Err(err(format!("seq {seq} does not increase (previous {})", prev.seq)));
            }
        }
        let event =
            event_of(universe, v.get("event").unwrap_or(&serde_json::Value::Null)).map_err(|m| err(m.into()))?;
        let port = v.get("port").and_then(|p| p.as_str()).ok_or_else(|| err("missing string `port`".into()))?;
        let direction = match v.get("direction").and_then(|d| d.as_str()) {
            Some("in") => Direction::In,
            Some("out") => Direction::Out,
            _ => return Err(err("`direction` must be \"in\" or \"out\"".into())),
        };
        out.push(TraceRecord { seq, symbol: EventSymbol { event, port: universe.port(port), direction } });
    }
    Ok(out)
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Verdict {
    pub accepted: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub failure: Option<TraceFailure>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct TraceFailure {
    /// Sequence number of the offending record; `None` when the trace ended
    /// too early.
    pub position: Option<u64>,
    pub reason: &'static str,
    pub expected: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, thiserror::Error)]
pub enum CheckError {
    #[error(transparent)]
    Ambiguous(#[from] AmbiguousSpec),
    #[error("offline checking does not support {0}")]
    Active(&'static str),
}

/// First trigger, inspect or request-response construct in `block`.
pub fn active_construct(block: &Block) -> Option<&'static str> {
    fn stmts(s: &[BodyStmt]) -> Option<&'static str> {
        s.iter().find_map(|s| match s {
            BodyStmt::Trigger { .. } => Some("trigger"),
            BodyStmt::Inspect(_) => Some("inspect"),
            BodyStmt::ExpectMapped(_) => Some("request-response expectations"),
            BodyStmt::EitherOr(a, b) => stmts(a).or_else(|| stmts(b)),
            BodyStmt::Block(b) => active_construct(b),
            _ => None,
        })
    }
    stmts(&block.body)
}

pub fn check_trace(ast: &SpecAst, trace: &[TraceRecord]) -> Result<Verdict, CheckError> {
    if let Some(what) = active_construct(&ast.root) {
        return Err(CheckError::Active(what));
    }
    let automaton = compile(&validate(ast)?);
    let registry = automaton.comparators();
    let mut sim = Simulation::new(&automaton);
    for rec in trace {
        let expected = sim.expected();
        let outcome = sim.step(&rec.symbol, registry).expect("simulation running until the first failure");
        if outcome.decision.is_fail() {
            let SimVerdict::Failed { kind, .. } = sim.verdict() else { unreachable!() };
            return Ok(rejected(Some(rec.seq), *kind, expected));
        }
    }
    let expected = sim.expected();
    Ok(match sim.finish() {
        SimVerdict::Failed { kind, .. } => rejected(None, *kind, expected),
        _ => Verdict { accepted: true, failure: None },
    })
}

fn rejected(position: Option<u64>, kind: FailureKind, expected: Vec<String>) -> Verdict {
    Verdict { accepted: false, failure: Some(TraceFailure { position, reason: kind.as_str(), expected }) }
}

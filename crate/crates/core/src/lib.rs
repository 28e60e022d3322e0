//! Regular-language specifications for unit testing message-passing components.
//!
//! A test describes the set of acceptable *executions* of a component under test
//! (CUT): sequences of event symbols `(event, port, direction)` observed at its
//! boundary. Specifications are block-structured programs built either through
//! the fluent [`SpecBuilder`] or parsed from text ([`text::parse`]). A validated
//! specification compiles to an ε-NFA with extended state ([`Automaton`]) that is
//! simulated directly by tracking the set of states it may be in.
//!
//! This crate is `no_std` and only needs `alloc`. Everything that touches
//! threads, clocks, or files lives in the `ktest` crate.

#![no_std]
#![deny(rust_2018_idioms)]

extern crate alloc;

#[cfg(test)]
extern crate std;

pub mod automaton;
pub mod event;
pub mod spec;
pub mod text;

pub use automaton::{
    compile, eclosure, enumerate_language, to_dot, ActiveInstruction, Automaton, Config, Decision, FailureKind,
    Language, OracleUnsupported, SimError, Simulation, StepOutcome, Verdict,
};
pub use event::{
    make_symbol, Comparator, ComparatorRegistry, ComponentId, Direction, Event, EventKind, EventSymbol, Matcher,
    Pattern, Polarity, PortRef, PortType, Predicate, PredicateError, Role, TypeDirectionViolation, Value,
};
pub use spec::{
    linearize, validate, AmbiguousSpec, Block, BodyStmt, Call, ConstraintKind, ConstructPath, HeaderStmt, Inspect,
    MappedEntry, Mapper, SpecAst, SpecBuilder, StructureError, ValidatedSpec,
};

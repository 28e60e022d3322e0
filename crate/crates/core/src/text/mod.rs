//! Textual form of the specification language.
//!
//! ```text
//! spec   := block
//! block  := "repeat" int? header* "body" stmt* "end"
//! header := ("allow" | "disallow" | "drop" | "blockExpect") symbol+
//! stmt   := "expect" item+ | "trigger" symbol+ | "inspect" ident
//!         | "unordered" symbol+ "end" | "either" stmt+ "or" stmt+ "end" | block
//! item   := symbol | "unordered" symbol+ "end"
//! symbol := ident "@" ident ":" ("in" | "out")
//! ```
//!
//! Identifiers are resolved through a [`SymbolTable`]. A source that is not a
//! single block is read as the body of an implicit `repeat 1` root.

mod lexer;
mod parser;
mod printer;

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use crate::event::{Event, EventKind, PortRef, Predicate};
use crate::spec::Inspect;

pub use lexer::Pos;
pub use parser::parse;
pub use printer::{print, PrintError};

pub const KEYWORDS: [&str; 13] = [
    "repeat",
    "body",
    "end",
    "expect",
    "trigger",
    "unordered",
    "either",
    "or",
    "allow",
    "disallow",
    "drop",
    "blockExpect",
    "inspect",
];

pub fn is_keyword(s: &str) -> bool {
    KEYWORDS.contains(&s)
}

/// What an identifier stands for.
#[derive(Clone, Debug, PartialEq)]
pub enum Binding {
    Event(Event),
    Port(PortRef),
    /// A named predicate usable wherever an event is expected in a symbol.
    Predicate {
        kind: EventKind,
        predicate: Predicate,
    },
    Inspect(Inspect),
}

impl Binding {
    fn what(&self) -> &'static str {
        match self {
            Binding::Event(_) => "event",
            Binding::Port(_) => "port",
            Binding::Predicate { .. } => "predicate",
            Binding::Inspect(_) => "inspect predicate",
        }
    }
}

#[derive(Clone, Debug, Default)]
pub struct SymbolTable {
    entries: BTreeMap<String, Binding>,
}

impl SymbolTable {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn bind(&mut self, name: impl Into<String>, b: Binding) -> &mut Self {
        self.entries.insert(name.into(), b);
        self
    }

    pub fn event(&mut self, name: impl Into<String>, e: Event) -> &mut Self {
        self.bind(name, Binding::Event(e))
    }

    pub fn port(&mut self, name: impl Into<String>, p: PortRef) -> &mut Self {
        self.bind(name, Binding::Port(p))
    }

    pub fn predicate(&mut self, name: impl Into<String>, kind: &EventKind, predicate: Predicate) -> &mut Self {
        self.bind(name, Binding::Predicate { kind: kind.clone(), predicate })
    }

    pub fn inspect(&mut self, name: impl Into<String>, i: Inspect) -> &mut Self {
        self.bind(name, Binding::Inspect(i))
    }

    pub fn get(&self, name: &str) -> Option<&Binding> {
        self.entries.get(name)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &Binding)> {
        self.entries.iter().map(|(k, v)| (k.as_str(), v))
    }

    fn find(&self, f: impl Fn(&Binding) -> bool) -> Option<&str> {
        self.entries.iter().find(|(_, b)| f(b)).map(|(k, _)| k.as_str())
    }

    pub fn name_of_event(&self, e: &Event) -> Option<&str> {
        self.find(|b| matches!(b, Binding::Event(x) if x == e))
    }

    pub fn name_of_port(&self, p: &PortRef) -> Option<&str> {
        self.find(|b| matches!(b, Binding::Port(x) if x.same_port(p)))
    }

    pub fn name_of_predicate(&self, kind: &EventKind, pred: &Predicate) -> Option<&str> {
        self.find(|b| matches!(b, Binding::Predicate { kind: k, predicate } if k == kind && predicate == pred))
    }

    pub fn name_of_inspect(&self, i: &Inspect) -> Option<&str> {
        self.find(|b| matches!(b, Binding::Inspect(x) if x == i))
    }
}

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
#[error("{line}:{col}: unexpected {found}, expected {}", .expected.join(" | "))]
pub struct ParseError {
    pub line: usize,
    pub col: usize,
    pub offset: usize,
    pub found: String,
    pub expected: Vec<&'static str>,
}

impl ParseError {
    pub(crate) fn at(pos: Pos, found: String, expected: &[&'static str]) -> Self {
        ParseError { line: pos.line, col: pos.col, offset: pos.offset, found, expected: expected.to_vec() }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
pub enum TextError {
    #[error(transparent)]
    Parse(#[from] ParseError),
    #[error("{line}:{col}: `{name}` is not bound to {wanted}")]
    UnresolvedIdentifier { name: String, wanted: &'static str, line: usize, col: usize, offset: usize },
}

impl TextError {
    /// Byte offset the error points at.
    pub fn offset(&self) -> usize {
        match self {
            TextError::Parse(p) => p.offset,
            TextError::UnresolvedIdentifier { offset, .. } => *offset,
        }
    }

    pub fn line_col(&self) -> (usize, usize) {
        match self {
            TextError::Parse(p) => (p.line, p.col),
            TextError::UnresolvedIdentifier { line, col, .. } => (*line, *col),
        }
    }
}

impl fmt::Display for Binding {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.what())
    }
}

/// Token boundaries of a source, as `(offset, text)` pairs; used by tools
/// and tests that manipulate sources token by token.
pub fn tokens(src: &str) -> Result<Vec<(usize, String)>, ParseError> {
    Ok(lexer::lex(src)?
        .into_iter()
        .filter(|t| t.tok != lexer::Tok::Eof)
        .map(|t| {
            let text = match t.tok {
                lexer::Tok::Ident(s) => s,
                lexer::Tok::Int(n) => alloc::format!("{n}"),
                lexer::Tok::At => "@".into(),
                lexer::Tok::Colon => ":".into(),
                lexer::Tok::Eof => unreachable!(),
            };
            (t.pos.offset, text)
        })
        .collect())
}

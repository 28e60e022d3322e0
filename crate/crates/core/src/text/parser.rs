use alloc::string::String;
use alloc::vec::Vec;
use core::num::NonZeroU32;

use super::lexer::{lex, Pos, Tok, Token};
use super::{is_keyword, Binding, ParseError, SymbolTable, TextError};
use crate::event::{Direction, Event, EventKind, Matcher, PortRef, Predicate};
use crate::spec::{Block, BodyStmt, HeaderStmt, SpecAst};

const STMT_START: [&str; 6] = ["expect", "trigger", "inspect", "unordered", "either", "repeat"];
const HEADERS: [&str; 4] = ["allow", "disallow", "drop", "blockExpect"];

/// Parses a spec, resolving identifiers through `table`.
pub fn parse(src: &str, table: &SymbolTable) -> Result<SpecAst, TextError> {
    let mut p = Parser { toks: lex(src)?, i: 0, table };
    let stmts = p.stmts()?;
    if p.peek().tok != Tok::Eof {
        return Err(p.unexpected(&with(&STMT_START, &["end of input"])));
    }
    let root = match <[BodyStmt; 1]>::try_from(stmts) {
        Ok([BodyStmt::Block(b)]) if b.count == NonZeroU32::new(1) => b,
        Ok([s]) => Block { body: alloc::vec![s], ..Block::once() },
        Err(stmts) => Block { body: stmts, ..Block::once() },
    };
    Ok(SpecAst::new(root))
}

fn with(a: &[&'static str], b: &[&'static str]) -> Vec<&'static str> {
    a.iter().chain(b).copied().collect()
}

enum Head {
    Event(Event),
    Predicate(EventKind, Predicate),
}

struct Sym {
    name: String,
    name_pos: Pos,
    head: Head,
    port: PortRef,
    dir: Direction,
    dir_pos: Pos,
}

impl Sym {
    fn matcher(self) -> Matcher {
        match self.head {
            Head::Event(e) => Matcher::concrete(e, &self.port, self.dir),
            Head::Predicate(kind, pred) => Matcher::with_predicate(&kind, pred, &self.port, self.dir),
        }
    }
}

struct Parser<'a> {
    toks: Vec<Token>,
    i: usize,
    table: &'a SymbolTable,
}

impl Parser<'_> {
    fn peek(&self) -> &Token {
        &self.toks[self.i]
    }

    fn bump(&mut self) -> Token {
        let t = self.toks[self.i].clone();
        if t.tok != Tok::Eof {
            self.i += 1;
        }
        t
    }

    fn at_kw(&self, kw: &str) -> bool {
        matches!(&self.peek().tok, Tok::Ident(s) if s == kw)
    }

    fn at_any(&self, kws: &[&str]) -> bool {
        kws.iter().any(|k| self.at_kw(k))
    }

    fn at_symbol(&self) -> bool {
        matches!(&self.peek().tok, Tok::Ident(s) if !is_keyword(s))
    }

    fn unexpected(&self, expected: &[&'static str]) -> TextError {
        let t = self.peek();
        ParseError::at(t.pos, t.tok.describe(), expected).into()
    }

    fn keyword(&mut self, kw: &'static str, expected: &[&'static str]) -> Result<(), TextError> {
        if self.at_kw(kw) {
            self.bump();
            Ok(())
        } else {
            Err(self.unexpected(expected))
        }
    }

    fn ident(&mut self, expected: &'static str) -> Result<(String, Pos), TextError> {
        match &self.peek().tok {
            Tok::Ident(s) if !is_keyword(s) => {
                let s = s.clone();
                let pos = self.bump().pos;
                Ok((s, pos))
            }
            _ => Err(self.unexpected(&[expected])),
        }
    }

    fn resolve(&self, name: &str, pos: Pos, wanted: &'static str) -> Result<&Binding, TextError> {
        self.table.get(name).ok_or_else(|| unresolved(name, pos, wanted))
    }

    fn symbol(&mut self) -> Result<Sym, TextError> {
        let (name, name_pos) = self.ident("symbol")?;
        if self.peek().tok != Tok::At {
            return Err(self.unexpected(&["`@`"]));
        }
        self.bump();
        let (port_name, port_pos) = self.ident("port")?;
        if self.peek().tok != Tok::Colon {
            return Err(self.unexpected(&["`:`"]));
        }
        self.bump();
        let dir_pos = self.peek().pos;
        let dir = match &self.peek().tok {
            Tok::Ident(s) if s == "in" => Direction::In,
            Tok::Ident(s) if s == "out" => Direction::Out,
            _ => return Err(self.unexpected(&["in", "out"])),
        };
        self.bump();
        let head = match self.resolve(&name, name_pos, "an event or predicate")?.clone() {
            Binding::Event(e) => Head::Event(e),
            Binding::Predicate { kind, predicate } => Head::Predicate(kind, predicate),
            _ => return Err(unresolved(&name, name_pos, "an event or predicate")),
        };
        let port = match self.table.get(&port_name) {
            Some(Binding::Port(p)) => p.clone(),
            _ => return Err(unresolved(&port_name, port_pos, "a port")),
        };
        Ok(Sym { name, name_pos, head, port, dir, dir_pos })
    }

    fn symbols(&mut self) -> Result<Vec<Matcher>, TextError> {
        let mut out = alloc::vec![self.symbol()?.matcher()];
        while self.at_symbol() {
            out.push(self.symbol()?.matcher());
        }
        Ok(out)
    }

    fn stmts(&mut self) -> Result<Vec<BodyStmt>, TextError> {
        let mut out = Vec::new();
        while self.at_any(&STMT_START) {
            self.stmt(&mut out)?;
        }
        Ok(out)
    }

    fn unordered(&mut self) -> Result<BodyStmt, TextError> {
        self.bump();
        let ms = self.symbols()?;
        self.keyword("end", &["symbol", "end"])?;
        Ok(BodyStmt::Unordered(ms))
    }

    fn stmt(&mut self, out: &mut Vec<BodyStmt>) -> Result<(), TextError> {
        let Tok::Ident(kw) = self.peek().tok.clone() else { unreachable!() };
        match kw.as_str() {
            "expect" => {
                self.bump();
                let start = out.len();
                loop {
                    if self.at_symbol() {
                        out.push(BodyStmt::Expect(self.symbol()?.matcher()));
                    } else if self.at_kw("unordered") {
                        out.push(self.unordered()?);
                    } else {
                        break;
                    }
                }
                if out.len() == start {
                    return Err(self.unexpected(&["symbol", "unordered"]));
                }
            }
            "trigger" => {
                self.bump();
                loop {
                    let sym = self.symbol()?;
                    if sym.dir != Direction::In {
                        return Err(ParseError::at(sym.dir_pos, "`out`".into(), &["in"]).into());
                    }
                    let Head::Event(event) = sym.head else {
                        return Err(unresolved(&sym.name, sym.name_pos, "an event"));
                    };
                    out.push(BodyStmt::Trigger { event, port: sym.port });
                    if !self.at_symbol() {
                        break;
                    }
                }
            }
            "inspect" => {
                self.bump();
                let (name, pos) = self.ident("inspect name")?;
                match self.resolve(&name, pos, "an inspect predicate")? {
                    Binding::Inspect(i) => out.push(BodyStmt::Inspect(i.clone())),
                    _ => return Err(unresolved(&name, pos, "an inspect predicate")),
                }
            }
            "unordered" => {
                let s = self.unordered()?;
                out.push(s);
            }
            "either" => {
                self.bump();
                let a = self.stmts()?;
                if a.is_empty() {
                    return Err(self.unexpected(&STMT_START));
                }
                self.keyword("or", &with(&STMT_START, &["or"]))?;
                let b = self.stmts()?;
                if b.is_empty() {
                    return Err(self.unexpected(&STMT_START));
                }
                self.keyword("end", &with(&STMT_START, &["end"]))?;
                out.push(BodyStmt::EitherOr(a, b));
            }
            "repeat" => {
                let b = self.block()?;
                out.push(BodyStmt::Block(b));
            }
            _ => unreachable!(),
        }
        Ok(())
    }

    fn block(&mut self) -> Result<Block, TextError> {
        self.bump();
        let mut block = Block::kleene();
        if let Tok::Int(n) = self.peek().tok {
            let t = self.peek().clone();
            let n = u32::try_from(n).ok().and_then(NonZeroU32::new);
            if n.is_none() {
                return Err(ParseError::at(t.pos, t.tok.describe(), &["positive integer"]).into());
            }
            block.count = n;
            self.bump();
        }
        while self.at_any(&HEADERS) {
            let Tok::Ident(kw) = self.bump().tok else { unreachable!() };
            let ms = self.symbols()?;
            block.headers.push(match kw.as_str() {
                "allow" => HeaderStmt::Allow(ms),
                "disallow" => HeaderStmt::Disallow(ms),
                "drop" => HeaderStmt::Drop(ms),
                _ => HeaderStmt::BlockExpect(ms),
            });
        }
        let expected: &[&'static str] = if block.count.is_none() && block.headers.is_empty() {
            &["integer", "allow", "disallow", "drop", "blockExpect", "body"]
        } else if block.headers.is_empty() {
            &["allow", "disallow", "drop", "blockExpect", "body"]
        } else {
            &["symbol", "allow", "disallow", "drop", "blockExpect", "body"]
        };
        self.keyword("body", expected)?;
        block.body = self.stmts()?;
        self.keyword("end", &with(&STMT_START, &["end"]))?;
        Ok(block)
    }
}

fn unresolved(name: &str, pos: Pos, wanted: &'static str) -> TextError {
    TextError::UnresolvedIdentifier { name: name.into(), wanted, line: pos.line, col: pos.col, offset: pos.offset }
}

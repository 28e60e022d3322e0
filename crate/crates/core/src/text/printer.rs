use alloc::string::String;
use core::fmt::Write;

use super::SymbolTable;
use crate::event::{Matcher, Pattern};
use crate::spec::{Block, BodyStmt, SpecAst};

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
pub enum PrintError {
    #[error("no name bound for {0}")]
    Unbound(String),
    #[error("request-response expectations have no textual form")]
    ExpectMapped,
    #[error("comparators have no textual form")]
    Comparators,
    #[error("timeouts have no textual form")]
    Timeout,
}

/// Renders `ast` in canonical text form, naming values through `table`.
pub fn print(ast: &SpecAst, table: &SymbolTable) -> Result<String, PrintError> {
    if !ast.comparators.is_empty() {
        return Err(PrintError::Comparators);
    }
    if ast.timeout.is_some() {
        return Err(PrintError::Timeout);
    }
    let mut p = Printer { table, out: String::new() };
    p.block(&ast.root, 0)?;
    Ok(p.out)
}

struct Printer<'a> {
    table: &'a SymbolTable,
    out: String,
}

impl Printer<'_> {
    fn line(&mut self, depth: usize, text: &str) {
        for _ in 0..depth {
            self.out.push_str("  ");
        }
        self.out.push_str(text);
        self.out.push('\n');
    }

    fn matcher(&self, m: &Matcher) -> Result<String, PrintError> {
        let head = match &m.pattern {
            Pattern::Concrete(e) => {
                self.table.name_of_event(e).ok_or_else(|| PrintError::Unbound(alloc::format!("event {e}")))?
            }
            Pattern::Kind { kind, predicate } => self
                .table
                .name_of_predicate(kind, predicate)
                .ok_or_else(|| PrintError::Unbound(alloc::format!("predicate over {kind}")))?,
        };
        let port =
            self.table.name_of_port(&m.port).ok_or_else(|| PrintError::Unbound(alloc::format!("port {}", m.port)))?;
        Ok(alloc::format!("{head}@{port}:{}", m.direction))
    }

    fn matchers(&self, ms: &[Matcher]) -> Result<String, PrintError> {
        let mut s = String::new();
        for (i, m) in ms.iter().enumerate() {
            if i > 0 {
                s.push(' ');
            }
            s.push_str(&self.matcher(m)?);
        }
        Ok(s)
    }

    fn block(&mut self, b: &Block, depth: usize) -> Result<(), PrintError> {
        match b.count {
            Some(n) => self.line(depth, &alloc::format!("repeat {n}")),
            None => self.line(depth, "repeat"),
        }
        for h in &b.headers {
            let text = alloc::format!("{} {}", h.keyword(), self.matchers(h.matchers())?);
            self.line(depth + 1, &text);
        }
        self.line(depth, "body");
        self.stmts(&b.body, depth + 1)?;
        self.line(depth, "end");
        Ok(())
    }

    fn stmts(&mut self, stmts: &[BodyStmt], depth: usize) -> Result<(), PrintError> {
        for s in stmts {
            self.stmt(s, depth)?;
        }
        Ok(())
    }

    fn stmt(&mut self, s: &BodyStmt, depth: usize) -> Result<(), PrintError> {
        match s {
            BodyStmt::Expect(m) => {
                let text = alloc::format!("expect {}", self.matcher(m)?);
                self.line(depth, &text);
            }
            BodyStmt::Trigger { event, port } => {
                let e = self
                    .table
                    .name_of_event(event)
                    .ok_or_else(|| PrintError::Unbound(alloc::format!("event {event}")))?;
                let p =
                    self.table.name_of_port(port).ok_or_else(|| PrintError::Unbound(alloc::format!("port {port}")))?;
                let mut text = String::new();
                let _ = write!(text, "trigger {e}@{p}:in");
                self.line(depth, &text);
            }
            BodyStmt::Inspect(i) => {
                let name =
                    self.table.name_of_inspect(i).ok_or_else(|| PrintError::Unbound("inspect predicate".into()))?;
                self.line(depth, &alloc::format!("inspect {name}"));
            }
            BodyStmt::Unordered(ms) => {
                let text = alloc::format!("unordered {} end", self.matchers(ms)?);
                self.line(depth, &text);
            }
            BodyStmt::EitherOr(a, b) => {
                self.line(depth, "either");
                self.stmts(a, depth + 1)?;
                self.line(depth, "or");
                self.stmts(b, depth + 1)?;
                self.line(depth, "end");
            }
            BodyStmt::Block(b) => self.block(b, depth)?,
            BodyStmt::ExpectMapped(_) => return Err(PrintError::ExpectMapped),
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::event::{ComponentId, Direction, Event, EventKind, PortType, Predicate, Role};
    use crate::spec::{Inspect, SpecBuilder};
    use crate::text::parse;

    fn fixture() -> (SymbolTable, crate::event::PortRef, Event, Event, EventKind, Predicate, Inspect) {
        let ping = EventKind::new("Ping");
        let pong = EventKind::new("Pong");
        let pt = PortType::new("PingPong", [pong.clone()], [ping.clone()]);
        let (_, outside) = crate::event::PortRef::declare("P", &pt, Role::Provided, ComponentId(1), None);
        let e1 = Event::unit(&ping);
        let e2 = Event::unit(&pong);
        let pred = Predicate::new(|_| true);
        let insp = Inspect::any(|_| true);
        let mut t = SymbolTable::new();
        t.event("ping", e1.clone()).event("pong", e2.clone()).port("p", outside.clone());
        t.predicate("anyPong", &pong, pred.clone()).inspect("ok", insp.clone());
        (t, outside, e1, e2, pong, pred, insp)
    }

    #[test]
    fn round_trip() {
        let (t, p, e1, e2, pong, pred, insp) = fixture();
        let ast = SpecBuilder::new()
            .disallow(Matcher::concrete(e2.clone(), &p, Direction::Out))
            .body()
            .trigger(e1.clone(), &p)
            .expect(Matcher::with_predicate(&pong, pred, &p, Direction::Out))
            .repeat_kleene()
            .drop(Matcher::concrete(e2.clone(), &p, Direction::Out))
            .body()
            .trigger(e1.clone(), &p)
            .end()
            .either()
            .expect(Matcher::concrete(e2.clone(), &p, Direction::Out))
            .or()
            .unordered()
            .expect(Matcher::concrete(e1.clone(), &p, Direction::In))
            .expect(Matcher::concrete(e2, &p, Direction::Out))
            .end()
            .end()
            .inspect(insp)
            .build()
            .unwrap();
        let text = print(&ast, &t).unwrap();
        assert!(text.starts_with("repeat 1\n  disallow pong@p:out\nbody\n"), "{text}");
        let back = parse(&text, &t).unwrap();
        assert_eq!(back, ast);
        assert_eq!(print(&back, &t).unwrap(), text);
    }

    #[test]
    fn empty_root() {
        let (t, ..) = fixture();
        let text = print(&SpecAst::default(), &t).unwrap();
        assert_eq!(text, "repeat 1\nbody\nend\n");
        assert_eq!(parse(&text, &t).unwrap(), SpecAst::default());
    }

    #[test]
    fn unbound_name() {
        let (t, p, ..) = fixture();
        let other = Event::unit(&EventKind::new("Ping"));
        let stranger = Event::new(&EventKind::new("Ping"), 7);
        let ast = SpecBuilder::new().body().expect(Matcher::concrete(stranger, &p, Direction::In)).build().unwrap();
        assert!(matches!(print(&ast, &t), Err(PrintError::Unbound(_))));
        let ast = SpecBuilder::new().body().expect(Matcher::concrete(other, &p, Direction::In)).build().unwrap();
        assert!(print(&ast, &t).is_ok());
    }
}

use alloc::vec;
use alloc::vec::Vec;
use core::num::NonZeroU32;
use core::time::Duration;

use super::{Block, BodyStmt, HeaderStmt, Inspect, MappedEntry, Mapper, SpecAst};
use crate::event::{Comparator, ComparatorRegistry, Event, EventKind, Matcher, PortRef};

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
pub enum StructureError {
    #[error("`end` without an open construct")]
    UnbalancedEnd,
    #[error("{0} is not closed by `end`")]
    Unclosed(&'static str),
    #[error("header `{0}` after body()")]
    HeaderAfterBody(&'static str),
    #[error("`{0}` before body()")]
    BeforeBody(&'static str),
    #[error("block closed without body()")]
    MissingBody,
    #[error("repeat count must be positive")]
    ZeroRepeat,
    #[error("{0} must not be empty")]
    Empty(&'static str),
    #[error("`{0}` is not allowed here")]
    Misplaced(&'static str),
    #[error("`{0}` is only allowed in the root header")]
    RootHeaderOnly(&'static str),
}

#[derive(Debug, Clone)]
enum Frame {
    Block { block: Block, in_body: bool },
    Either { first: Vec<BodyStmt>, second: Option<Vec<BodyStmt>> },
    Unordered(Vec<Matcher>),
    Mapped(Vec<MappedEntry>),
}

impl Frame {
    fn name(&self) -> &'static str {
        match self {
            Frame::Block { .. } => "repeat",
            Frame::Either { .. } => "either",
            Frame::Unordered(_) => "unordered",
            Frame::Mapped(_) => "expectWithMapper",
        }
    }
}

/// Fluent construction of a [`SpecAst`].
///
/// Every method returns `&mut Self` so calls chain the way the listings read.
/// The first misuse is remembered and reported by [`SpecBuilder::build`];
/// later calls are ignored.
#[derive(Debug, Clone)]
pub struct SpecBuilder {
    stack: Vec<Frame>,
    comparators: ComparatorRegistry,
    timeout: Option<Duration>,
    error: Option<StructureError>,
}

impl Default for SpecBuilder {
    fn default() -> Self {
        Self::new()
    }
}

impl SpecBuilder {
    pub fn new() -> Self {
        SpecBuilder {
            stack: vec![Frame::Block { block: Block::once(), in_body: false }],
            comparators: ComparatorRegistry::new(),
            timeout: None,
            error: None,
        }
    }

    fn fail(&mut self, e: StructureError) -> &mut Self {
        if self.error.is_none() {
            self.error = Some(e);
        }
        self
    }

    fn top(&mut self) -> &mut Frame {
        self.stack.last_mut().expect("root frame is never popped")
    }

    fn check_stmt(&mut self, name: &'static str) -> Result<(), StructureError> {
        match self.top() {
            Frame::Block { in_body: true, .. } | Frame::Either { .. } => Ok(()),
            Frame::Block { in_body: false, .. } => Err(StructureError::BeforeBody(name)),
            Frame::Unordered(_) | Frame::Mapped(_) => Err(StructureError::Misplaced(name)),
        }
    }

    fn push_stmt(&mut self, name: &'static str, stmt: BodyStmt) -> &mut Self {
        if self.error.is_some() {
            return self;
        }
        if let Err(e) = self.check_stmt(name) {
            return self.fail(e);
        }
        match self.top() {
            Frame::Block { block, .. } => block.body.push(stmt),
            Frame::Either { first, second } => second.as_mut().unwrap_or(first).push(stmt),
            _ => unreachable!(),
        }
        self
    }

    fn open(&mut self, name: &'static str, frame: Frame) -> &mut Self {
        if self.error.is_some() {
            return self;
        }
        if let Err(e) = self.check_stmt(name) {
            return self.fail(e);
        }
        self.stack.push(frame);
        self
    }

    fn header(&mut self, name: &'static str, stmt: HeaderStmt) -> &mut Self {
        if self.error.is_some() {
            return self;
        }
        if stmt.matchers().is_empty() {
            return self.fail(StructureError::Empty(name));
        }
        match self.top() {
            Frame::Block { block, in_body: false } => {
                block.headers.push(stmt);
                self
            }
            Frame::Block { in_body: true, .. } => self.fail(StructureError::HeaderAfterBody(name)),
            _ => self.fail(StructureError::Misplaced(name)),
        }
    }

    fn in_root_header(&self) -> bool {
        self.stack.len() == 1 && matches!(self.stack[0], Frame::Block { in_body: false, .. })
    }

    pub fn set_comparator(
        &mut self,
        kind: &EventKind,
        cmp: impl Fn(&Event, &Event) -> bool + Send + Sync + 'static,
    ) -> &mut Self {
        self.set_comparator_shared(kind, Comparator::new(cmp))
    }

    pub fn set_comparator_shared(&mut self, kind: &EventKind, cmp: Comparator) -> &mut Self {
        if self.error.is_some() {
            return self;
        }
        if !self.in_root_header() {
            return self.fail(StructureError::RootHeaderOnly("setComparator"));
        }
        self.comparators.register_comparator(kind, cmp);
        self
    }

    pub fn set_timeout(&mut self, timeout: Duration) -> &mut Self {
        if self.error.is_some() {
            return self;
        }
        if !self.in_root_header() {
            return self.fail(StructureError::RootHeaderOnly("setTimeout"));
        }
        self.timeout = Some(timeout);
        self
    }

    pub fn allow(&mut self, m: Matcher) -> &mut Self {
        self.allow_all(vec![m])
    }

    pub fn allow_all(&mut self, ms: impl IntoIterator<Item = Matcher>) -> &mut Self {
        self.header("allow", HeaderStmt::Allow(ms.into_iter().collect()))
    }

    pub fn disallow(&mut self, m: Matcher) -> &mut Self {
        self.disallow_all(vec![m])
    }

    pub fn disallow_all(&mut self, ms: impl IntoIterator<Item = Matcher>) -> &mut Self {
        self.header("disallow", HeaderStmt::Disallow(ms.into_iter().collect()))
    }

    pub fn drop(&mut self, m: Matcher) -> &mut Self {
        self.drop_all(vec![m])
    }

    pub fn drop_all(&mut self, ms: impl IntoIterator<Item = Matcher>) -> &mut Self {
        self.header("drop", HeaderStmt::Drop(ms.into_iter().collect()))
    }

    pub fn block_expect(&mut self, m: Matcher) -> &mut Self {
        self.block_expect_all(vec![m])
    }

    pub fn block_expect_all(&mut self, ms: impl IntoIterator<Item = Matcher>) -> &mut Self {
        self.header("blockExpect", HeaderStmt::BlockExpect(ms.into_iter().collect()))
    }

    pub fn body(&mut self) -> &mut Self {
        if self.error.is_some() {
            return self;
        }
        match self.top() {
            Frame::Block { in_body, .. } if !*in_body => {
                *in_body = true;
                self
            }
            _ => self.fail(StructureError::Misplaced("body")),
        }
    }

    pub fn expect(&mut self, m: Matcher) -> &mut Self {
        if self.error.is_some() {
            return self;
        }
        if let Frame::Unordered(ms) = self.top() {
            ms.push(m);
            return self;
        }
        self.push_stmt("expect", BodyStmt::Expect(m))
    }

    pub fn trigger(&mut self, event: Event, port: &PortRef) -> &mut Self {
        self.push_stmt("trigger", BodyStmt::Trigger { event, port: port.clone() })
    }

    pub fn inspect(&mut self, predicate: Inspect) -> &mut Self {
        self.push_stmt("inspect", BodyStmt::Inspect(predicate))
    }

    /// Inspect with a predicate over the concrete CUT state type.
    pub fn inspect_state<S: 'static>(&mut self, f: impl Fn(&S) -> bool + Send + Sync + 'static) -> &mut Self {
        self.inspect(Inspect::of(f))
    }

    pub fn unordered(&mut self) -> &mut Self {
        self.open("unordered", Frame::Unordered(Vec::new()))
    }

    pub fn either(&mut self) -> &mut Self {
        self.open("either", Frame::Either { first: Vec::new(), second: None })
    }

    pub fn or(&mut self) -> &mut Self {
        if self.error.is_some() {
            return self;
        }
        match self.top() {
            Frame::Either { first, second: second @ None } => {
                if first.is_empty() {
                    return self.fail(StructureError::Empty("either branch"));
                }
                *second = Some(Vec::new());
                self
            }
            _ => self.fail(StructureError::Misplaced("or")),
        }
    }

    pub fn repeat(&mut self, n: u32) -> &mut Self {
        match Block::times(n) {
            Some(block) => self.open("repeat", Frame::Block { block, in_body: false }),
            None => self.fail(StructureError::ZeroRepeat),
        }
    }

    pub fn repeat_kleene(&mut self) -> &mut Self {
        self.open("repeat", Frame::Block { block: Block::kleene(), in_body: false })
    }

    pub fn expect_with_mapper(&mut self) -> &mut Self {
        self.open("expectWithMapper", Frame::Mapped(Vec::new()))
    }

    pub fn expect_mapped(
        &mut self,
        request_kind: &EventKind,
        request_port: &PortRef,
        response_port: &PortRef,
        mapper: impl Fn(&Event) -> Option<Event> + Send + Sync + 'static,
    ) -> &mut Self {
        self.expect_mapped_entry(MappedEntry {
            request_kind: request_kind.clone(),
            request_port: request_port.clone(),
            response_port: response_port.clone(),
            mapper: Mapper::new(mapper),
        })
    }

    pub fn expect_mapped_entry(&mut self, entry: MappedEntry) -> &mut Self {
        if self.error.is_some() {
            return self;
        }
        match self.top() {
            Frame::Mapped(entries) => {
                entries.push(entry);
                self
            }
            _ => self.fail(StructureError::Misplaced("expect (mapped)")),
        }
    }

    pub fn end(&mut self) -> &mut Self {
        if self.error.is_some() {
            return self;
        }
        if self.stack.len() == 1 {
            return self.fail(StructureError::UnbalancedEnd);
        }
        let stmt = match self.stack.pop().unwrap() {
            Frame::Block { in_body: false, .. } => return self.fail(StructureError::MissingBody),
            Frame::Block { block, .. } => BodyStmt::Block(block),
            Frame::Either { second: None, .. } => return self.fail(StructureError::Misplaced("end before or")),
            Frame::Either { first, second: Some(second) } => {
                if second.is_empty() {
                    return self.fail(StructureError::Empty("or branch"));
                }
                BodyStmt::EitherOr(first, second)
            }
            Frame::Unordered(ms) => {
                if ms.is_empty() {
                    return self.fail(StructureError::Empty("unordered"));
                }
                BodyStmt::Unordered(ms)
            }
            Frame::Mapped(entries) => {
                if entries.is_empty() {
                    return self.fail(StructureError::Empty("expectWithMapper"));
                }
                BodyStmt::ExpectMapped(entries)
            }
        };
        match self.top() {
            Frame::Block { block, .. } => block.body.push(stmt),
            Frame::Either { first, second } => second.as_mut().unwrap_or(first).push(stmt),
            _ => unreachable!("constructs only open where statements are allowed"),
        }
        self
    }

    pub fn build(&self) -> Result<SpecAst, StructureError> {
        if let Some(e) = &self.error {
            return Err(e.clone());
        }
        if let Some(top) = self.stack.get(1..).and_then(|s| s.last()) {
            return Err(StructureError::Unclosed(top.name()));
        }
        let Frame::Block { block, .. } = &self.stack[0] else { unreachable!() };
        Ok(SpecAst { root: block.clone(), comparators: self.comparators.clone(), timeout: self.timeout })
    }

    pub fn apply(&mut self, call: &Call) -> &mut Self {
        match call {
            Call::SetComparator(k, c) => self.set_comparator_shared(k, c.clone()),
            Call::SetTimeout(d) => self.set_timeout(*d),
            Call::Allow(ms) => self.allow_all(ms.iter().cloned()),
            Call::Disallow(ms) => self.disallow_all(ms.iter().cloned()),
            Call::Drop(ms) => self.drop_all(ms.iter().cloned()),
            Call::BlockExpect(ms) => self.block_expect_all(ms.iter().cloned()),
            Call::Body => self.body(),
            Call::Expect(m) => self.expect(m.clone()),
            Call::Trigger(e, p) => self.trigger(e.clone(), p),
            Call::Inspect(i) => self.inspect(i.clone()),
            Call::Unordered => self.unordered(),
            Call::Either => self.either(),
            Call::Or => self.or(),
            Call::Repeat(n) => self.repeat(n.get()),
            Call::RepeatKleene => self.repeat_kleene(),
            Call::ExpectWithMapper => self.expect_with_mapper(),
            Call::ExpectMapped(e) => self.expect_mapped_entry(e.clone()),
            Call::End => self.end(),
        }
    }
}

/// One fluent call, as recorded by [`linearize`].
#[derive(Clone, Debug, PartialEq)]
pub enum Call {
    SetComparator(EventKind, Comparator),
    SetTimeout(Duration),
    Allow(Vec<Matcher>),
    Disallow(Vec<Matcher>),
    Drop(Vec<Matcher>),
    BlockExpect(Vec<Matcher>),
    Body,
    Expect(Matcher),
    Trigger(Event, PortRef),
    Inspect(Inspect),
    Unordered,
    Either,
    Or,
    Repeat(NonZeroU32),
    RepeatKleene,
    ExpectWithMapper,
    ExpectMapped(MappedEntry),
    End,
}

/// Flattens a tree back into the fluent calls that build it. The root block is
/// assumed to have count 1.
pub fn linearize(ast: &SpecAst) -> Vec<Call> {
    let mut out = Vec::new();
    if let Some(d) = ast.timeout {
        out.push(Call::SetTimeout(d));
    }
    for (k, c) in ast.comparators.iter() {
        out.push(Call::SetComparator(k.clone(), c.clone()));
    }
    headers(&ast.root.headers, &mut out);
    out.push(Call::Body);
    for s in &ast.root.body {
        stmt(s, &mut out);
    }
    out
}

fn headers(hs: &[HeaderStmt], out: &mut Vec<Call>) {
    for h in hs {
        out.push(match h {
            HeaderStmt::Allow(m) => Call::Allow(m.clone()),
            HeaderStmt::Disallow(m) => Call::Disallow(m.clone()),
            HeaderStmt::Drop(m) => Call::Drop(m.clone()),
            HeaderStmt::BlockExpect(m) => Call::BlockExpect(m.clone()),
        });
    }
}

fn stmt(s: &BodyStmt, out: &mut Vec<Call>) {
    match s {
        BodyStmt::Expect(m) => out.push(Call::Expect(m.clone())),
        BodyStmt::Trigger { event, port } => out.push(Call::Trigger(event.clone(), port.clone())),
        BodyStmt::Inspect(i) => out.push(Call::Inspect(i.clone())),
        BodyStmt::Unordered(ms) => {
            out.push(Call::Unordered);
            out.extend(ms.iter().cloned().map(Call::Expect));
            out.push(Call::End);
        }
        BodyStmt::EitherOr(a, b) => {
            out.push(Call::Either);
            a.iter().for_each(|s| stmt(s, out));
            out.push(Call::Or);
            b.iter().for_each(|s| stmt(s, out));
            out.push(Call::End);
        }
        BodyStmt::Block(block) => {
            out.push(match block.count {
                Some(n) => Call::Repeat(n),
                None => Call::RepeatKleene,
            });
            headers(&block.headers, out);
            out.push(Call::Body);
            block.body.iter().for_each(|s| stmt(s, out));
            out.push(Call::End);
        }
        BodyStmt::ExpectMapped(entries) => {
            out.push(Call::ExpectWithMapper);
            out.extend(entries.iter().cloned().map(Call::ExpectMapped));
            out.push(Call::End);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::event::{ComponentId, Direction, PortType, Role};

    struct Fx {
        p: PortRef,
        e: Vec<Event>,
    }

    fn fx() -> Fx {
        let kinds: Vec<EventKind> = (0..4).map(|i| EventKind::new(alloc::format!("E{i}"))).collect();
        let pt = PortType::new("T", kinds.clone(), kinds.clone());
        let (_, p) = PortRef::declare("P", &pt, Role::Provided, ComponentId(1), Some(ComponentId(0)));
        Fx { p, e: kinds.iter().map(Event::unit).collect() }
    }

    impl Fx {
        fn m(&self, i: usize) -> Matcher {
            Matcher::concrete(self.e[i].clone(), &self.p, Direction::In)
        }
    }

    #[test]
    fn flat_expects() {
        let f = fx();
        let ast = SpecBuilder::new().body().expect(f.m(1)).expect(f.m(2)).build().unwrap();
        assert_eq!(ast.root.count, NonZeroU32::new(1));
        assert_eq!(ast.root.body, vec![BodyStmt::Expect(f.m(1)), BodyStmt::Expect(f.m(2))]);
    }

    #[test]
    fn nested_repeat() {
        let f = fx();
        let ast = SpecBuilder::new().body().repeat(3).body().trigger(f.e[0].clone(), &f.p).end().build().unwrap();
        let BodyStmt::Block(b) = &ast.root.body[0] else { panic!() };
        assert_eq!(b.count, NonZeroU32::new(3));
        assert_eq!(b.body, vec![BodyStmt::Trigger { event: f.e[0].clone(), port: f.p.clone() }]);
    }

    #[test]
    fn trigger_before_inner_body() {
        let f = fx();
        let err = SpecBuilder::new().body().repeat(3).trigger(f.e[0].clone(), &f.p).build();
        assert_eq!(err, Err(StructureError::BeforeBody("trigger")));
    }

    #[test]
    fn structure_errors() {
        let f = fx();
        assert_eq!(SpecBuilder::new().body().end().build(), Err(StructureError::UnbalancedEnd));
        assert_eq!(SpecBuilder::new().body().allow(f.m(0)).build(), Err(StructureError::HeaderAfterBody("allow")));
        assert_eq!(SpecBuilder::new().expect(f.m(0)).build(), Err(StructureError::BeforeBody("expect")));
        assert_eq!(SpecBuilder::new().body().either().expect(f.m(0)).build(), Err(StructureError::Unclosed("either")));
        assert_eq!(SpecBuilder::new().body().repeat(0).build(), Err(StructureError::ZeroRepeat));
        assert_eq!(SpecBuilder::new().body().unordered().end().build(), Err(StructureError::Empty("unordered")));
        assert_eq!(
            SpecBuilder::new().body().repeat(2).set_timeout(Duration::from_millis(5)).build(),
            Err(StructureError::RootHeaderOnly("setTimeout"))
        );
    }

    #[test]
    fn first_error_is_kept() {
        let f = fx();
        let err = SpecBuilder::new().body().end().allow(f.m(0)).build();
        assert_eq!(err, Err(StructureError::UnbalancedEnd));
    }

    #[test]
    fn linearize_rebuilds() {
        let f = fx();
        let ast = SpecBuilder::new()
            .set_timeout(Duration::from_millis(20))
            .allow(f.m(3))
            .body()
            .expect(f.m(0))
            .either()
            .unordered()
            .expect(f.m(1))
            .expect(f.m(2))
            .end()
            .or()
            .repeat_kleene()
            .block_expect(f.m(3))
            .body()
            .expect(f.m(1))
            .end()
            .end()
            .build()
            .unwrap();
        let mut b = SpecBuilder::new();
        for c in linearize(&ast) {
            b.apply(&c);
        }
        assert_eq!(b.build().unwrap(), ast);
    }
}

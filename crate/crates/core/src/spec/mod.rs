//! The block-structured test program.

mod builder;
mod validate;

use alloc::sync::Arc;
use alloc::vec::Vec;
use core::any::Any;
use core::fmt;
use core::num::NonZeroU32;
use core::time::Duration;

use crate::event::{ComparatorRegistry, Event, EventKind, Matcher, PortRef};

pub use builder::{linearize, Call, SpecBuilder, StructureError};
pub use validate::{
    validate, AmbiguousSpec, ConstraintKind, ConstructPath, EffectiveTable, PathSeg, ValidatedSpec, MAX_GROUP,
};

type InspectFn = dyn Fn(&dyn Any) -> bool + Send + Sync;

/// Predicate over the CUT's state, evaluated once the CUT is quiescent.
#[derive(Clone)]
pub struct Inspect(Arc<InspectFn>);

impl Inspect {
    /// Wraps a predicate over the concrete state type `S`. If the component
    /// state is of a different type, the predicate evaluates to false.
    pub fn of<S: 'static>(f: impl Fn(&S) -> bool + Send + Sync + 'static) -> Self {
        Inspect(Arc::new(move |state: &dyn Any| state.downcast_ref::<S>().is_some_and(&f)))
    }

    pub fn any(f: impl Fn(&dyn Any) -> bool + Send + Sync + 'static) -> Self {
        Inspect(Arc::new(f))
    }

    pub fn call(&self, state: &dyn Any) -> bool {
        (self.0)(state)
    }
}

impl PartialEq for Inspect {
    fn eq(&self, other: &Self) -> bool {
        Arc::ptr_eq(&self.0, &other.0)
    }
}

impl fmt::Debug for Inspect {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("Inspect(..)")
    }
}

type MapperFn = dyn Fn(&Event) -> Option<Event> + Send + Sync;

/// Maps an observed request to the response that should be triggered, or
/// `None` when the request does not belong to this entry.
#[derive(Clone)]
pub struct Mapper(Arc<MapperFn>);

impl Mapper {
    pub fn new(f: impl Fn(&Event) -> Option<Event> + Send + Sync + 'static) -> Self {
        Mapper(Arc::new(f))
    }

    pub fn call(&self, request: &Event) -> Option<Event> {
        (self.0)(request)
    }
}

impl PartialEq for Mapper {
    fn eq(&self, other: &Self) -> bool {
        Arc::ptr_eq(&self.0, &other.0)
    }
}

impl fmt::Debug for Mapper {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("Mapper(..)")
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct MappedEntry {
    pub request_kind: EventKind,
    pub request_port: PortRef,
    pub response_port: PortRef,
    pub mapper: Mapper,
}

#[derive(Clone, Debug, PartialEq)]
pub enum HeaderStmt {
    Allow(Vec<Matcher>),
    Disallow(Vec<Matcher>),
    Drop(Vec<Matcher>),
    BlockExpect(Vec<Matcher>),
}

impl HeaderStmt {
    pub fn keyword(&self) -> &'static str {
        match self {
            HeaderStmt::Allow(_) => "allow",
            HeaderStmt::Disallow(_) => "disallow",
            HeaderStmt::Drop(_) => "drop",
            HeaderStmt::BlockExpect(_) => "blockExpect",
        }
    }

    pub fn matchers(&self) -> &[Matcher] {
        match self {
            HeaderStmt::Allow(m) | HeaderStmt::Disallow(m) | HeaderStmt::Drop(m) | HeaderStmt::BlockExpect(m) => m,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum BodyStmt {
    Expect(Matcher),
    Trigger { event: Event, port: PortRef },
    Inspect(Inspect),
    Unordered(Vec<Matcher>),
    EitherOr(Vec<BodyStmt>, Vec<BodyStmt>),
    Block(Block),
    ExpectMapped(Vec<MappedEntry>),
}

impl BodyStmt {
    pub fn is_active(&self) -> bool {
        matches!(self, BodyStmt::Trigger { .. } | BodyStmt::Inspect(_))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Block {
    /// `None` is the Kleene closure.
    pub count: Option<NonZeroU32>,
    pub headers: Vec<HeaderStmt>,
    pub body: Vec<BodyStmt>,
}

impl Block {
    pub fn once() -> Self {
        Block { count: NonZeroU32::new(1), headers: Vec::new(), body: Vec::new() }
    }

    pub fn times(n: u32) -> Option<Self> {
        Some(Block { count: Some(NonZeroU32::new(n)?), ..Block::once() })
    }

    pub fn kleene() -> Self {
        Block { count: None, ..Block::once() }
    }

    pub fn is_kleene(&self) -> bool {
        self.count.is_none()
    }

    pub fn block_expect(&self) -> impl Iterator<Item = &Matcher> {
        self.headers
            .iter()
            .filter_map(|h| match h {
                HeaderStmt::BlockExpect(m) => Some(m.iter()),
                _ => None,
            })
            .flatten()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SpecAst {
    pub root: Block,
    pub comparators: ComparatorRegistry,
    /// Overrides the harness default when set.
    pub timeout: Option<Duration>,
}

impl SpecAst {
    pub fn new(root: Block) -> Self {
        SpecAst { root, comparators: ComparatorRegistry::new(), timeout: None }
    }
}

impl Default for SpecAst {
    fn default() -> Self {
        SpecAst::new(Block::once())
    }
}

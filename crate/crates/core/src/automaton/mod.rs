//! ε-NFA with extended state, compiled from a validated spec.
//!
//! States are nodes and symbols label edges, so `expect e1 e2 e3` is the four
//! state chain of the textbook construction. Extended state is a vector of bit
//! words (one per unordered group, blockExpect list, or mapper group) and a
//! vector of loop counters (one per `repeat n`, n ≥ 2). Guards test those
//! vectors and effects update them.

mod compile;
mod dot;
mod language;
mod sim;

use alloc::vec::Vec;
use core::fmt;

use crate::event::{ComparatorRegistry, Event, Matcher, PortRef};
use crate::spec::{Inspect, MappedEntry};

pub use compile::compile;
pub use dot::to_dot;
pub use language::{enumerate_language, Language, OracleUnsupported};
pub use sim::{eclosure, ActiveInstruction, Config, Decision, FailureKind, SimError, Simulation, StepOutcome, Verdict};

pub type StateId = usize;
pub type ScopeId = usize;

#[derive(Clone, Debug, PartialEq)]
pub enum StateKind {
    Plain,
    /// One state for the whole group; member `i` owns bit `i` of `slot`.
    Unordered {
        slot: usize,
    },
    ReqRes {
        slot: usize,
        entries: Vec<MappedEntry>,
    },
    /// Waits for the blockExpect bits of `slot` before the block may exit.
    Sink {
        slot: usize,
    },
    Trigger {
        event: Event,
        port: PortRef,
    },
    Inspect(Inspect),
    Error,
}

impl StateKind {
    pub fn is_active(&self) -> bool {
        matches!(self, StateKind::Trigger { .. } | StateKind::Inspect(_))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct State {
    pub kind: StateKind,
    /// Innermost block with headers that encloses the state; `None` for the
    /// root's exit.
    pub owner: Option<ScopeId>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Cond {
    AllSet { slot: usize, mask: u64 },
    BitClear { slot: usize, bit: u32 },
    CounterBelow { counter: usize, value: u32 },
    CounterAt { counter: usize, value: u32 },
}

impl Cond {
    pub fn holds(&self, ext: &Ext) -> bool {
        match *self {
            Cond::AllSet { slot, mask } => ext.bits[slot] & mask == mask,
            Cond::BitClear { slot, bit } => ext.bits[slot] & (1 << bit) == 0,
            Cond::CounterBelow { counter, value } => ext.counters[counter] < value,
            Cond::CounterAt { counter, value } => ext.counters[counter] == value,
        }
    }
}

impl fmt::Display for Cond {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            Cond::AllSet { slot, .. } => write!(f, "all(b{slot})"),
            Cond::BitClear { slot, bit } => write!(f, "!b{slot}.{bit}"),
            Cond::CounterBelow { counter, value } => write!(f, "c{counter}<{value}"),
            Cond::CounterAt { counter, value } => write!(f, "c{counter}={value}"),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Effect {
    Clear { slot: usize },
    SetBit { slot: usize, bit: u32 },
    Inc { counter: usize },
    Reset { counter: usize },
}

impl Effect {
    pub fn apply(&self, ext: &mut Ext) {
        match *self {
            Effect::Clear { slot } => ext.bits[slot] = 0,
            Effect::SetBit { slot, bit } => ext.bits[slot] |= 1 << bit,
            Effect::Inc { counter } => ext.counters[counter] += 1,
            Effect::Reset { counter } => ext.counters[counter] = 0,
        }
    }
}

impl fmt::Display for Effect {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            Effect::Clear { slot } => write!(f, "clear(b{slot})"),
            Effect::SetBit { slot, bit } => write!(f, "set(b{slot}.{bit})"),
            Effect::Inc { counter } => write!(f, "inc(c{counter})"),
            Effect::Reset { counter } => write!(f, "reset(c{counter})"),
        }
    }
}

/// How a consuming edge interprets the symbol it matched.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Role {
    Body,
    Unordered,
    BlockExpect,
    Allow,
    Drop,
    Disallow,
}

#[derive(Clone, Debug, PartialEq)]
pub enum Label {
    /// Spontaneous; a guarded edge is an ε edge with conditions.
    Epsilon,
    Consume {
        matcher: Matcher,
        role: Role,
    },
    /// Entry `entry` of the mapper group held by the source state.
    ReqRes {
        entry: usize,
    },
}

#[derive(Clone, Debug, PartialEq)]
pub struct Edge {
    pub from: StateId,
    pub to: StateId,
    pub label: Label,
    pub guard: Vec<Cond>,
    pub effects: Vec<Effect>,
}

impl Edge {
    pub fn enabled(&self, ext: &Ext) -> bool {
        self.guard.iter().all(|c| c.holds(ext))
    }

    pub fn is_epsilon(&self) -> bool {
        matches!(self.label, Label::Epsilon)
    }
}

/// Extended-state snapshot carried by every alternative independently.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Ext {
    pub bits: Vec<u64>,
    pub counters: Vec<u32>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Automaton {
    pub(crate) states: Vec<State>,
    pub(crate) edges: Vec<Edge>,
    pub(crate) out: Vec<Vec<usize>>,
    pub(crate) start: StateId,
    pub(crate) finals: Vec<StateId>,
    pub(crate) slots: usize,
    pub(crate) counters: usize,
    pub(crate) comparators: ComparatorRegistry,
}

impl Automaton {
    pub fn states(&self) -> &[State] {
        &self.states
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn out_edges(&self, s: StateId) -> impl Iterator<Item = &Edge> {
        self.out[s].iter().map(move |&i| &self.edges[i])
    }

    pub fn start(&self) -> StateId {
        self.start
    }

    pub fn finals(&self) -> &[StateId] {
        &self.finals
    }

    pub fn is_final(&self, s: StateId) -> bool {
        self.finals.contains(&s)
    }

    pub fn comparators(&self) -> &ComparatorRegistry {
        &self.comparators
    }

    pub fn initial_ext(&self) -> Ext {
        Ext { bits: alloc::vec![0; self.slots], counters: alloc::vec![0; self.counters] }
    }

    /// States holding extended state (unordered groups, mapper groups, sinks).
    pub fn extended_state_count(&self) -> usize {
        self.states
            .iter()
            .filter(|s| {
                matches!(s.kind, StateKind::Unordered { .. } | StateKind::ReqRes { .. } | StateKind::Sink { .. })
            })
            .count()
    }

    pub fn has_active(&self) -> bool {
        self.states.iter().any(|s| s.kind.is_active() || matches!(s.kind, StateKind::ReqRes { .. }))
    }
}

#[cfg(test)]
mod tests;

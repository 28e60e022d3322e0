use alloc::collections::BTreeSet;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;

use super::{Automaton, Ext, Label, Role, StateId, StateKind};
use crate::event::{ComparatorRegistry, Event, EventSymbol, PortRef, PredicateError};
use crate::spec::Inspect;

/// One alternative of the nondeterministic simulation.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Config {
    pub state: StateId,
    pub ext: Ext,
}

#[derive(Clone, Debug, PartialEq)]
pub enum ActiveInstruction {
    Trigger { event: Event, port: PortRef },
    Inspect(Inspect),
}

impl fmt::Display for ActiveInstruction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ActiveInstruction::Trigger { event, port } => write!(f, "trigger {event}@{port}"),
            ActiveInstruction::Inspect(_) => f.write_str("inspect"),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Decision {
    ConsumeForward,
    ConsumeDrop,
    FailDisallowed,
    FailUnexpected,
}

impl Decision {
    pub fn is_fail(self) -> bool {
        matches!(self, Decision::FailDisallowed | Decision::FailUnexpected)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct StepOutcome {
    pub decision: Decision,
    /// Responses produced by mapper groups, to be triggered in order.
    pub actions: Vec<ActiveInstruction>,
    pub accepted_now: bool,
    /// Predicates that raised while matching; each counted as a non-match.
    pub predicate_errors: Vec<PredicateError>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FailureKind {
    Disallowed,
    Unexpected,
    /// Input ended before an accepting state was reached.
    Incomplete,
}

impl FailureKind {
    pub fn as_str(self) -> &'static str {
        match self {
            FailureKind::Disallowed => "disallowed",
            FailureKind::Unexpected => "unexpected",
            FailureKind::Incomplete => "incomplete",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Verdict {
    Running,
    Accepted,
    Failed {
        kind: FailureKind,
        /// Zero-based index of the offending symbol, or the input length.
        position: usize,
        symbol: Option<EventSymbol>,
    },
}

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
pub enum SimError {
    #[error("simulation has already terminated")]
    NotRunning,
    #[error("alternatives demand different actions at states {states:?}")]
    AmbiguousRuntimeChoice { states: Vec<StateId> },
}

/// State-set simulation of an [`Automaton`].
#[derive(Clone, Debug)]
pub struct Simulation<'a> {
    automaton: &'a Automaton,
    configs: BTreeSet<Config>,
    verdict: Verdict,
    consumed: usize,
}

impl<'a> Simulation<'a> {
    pub fn new(automaton: &'a Automaton) -> Self {
        let start = Config { state: automaton.start(), ext: automaton.initial_ext() };
        let configs = eclosure(automaton, [start]);
        Simulation { automaton, configs, verdict: Verdict::Running, consumed: 0 }
    }

    pub fn automaton(&self) -> &'a Automaton {
        self.automaton
    }

    pub fn configs(&self) -> &BTreeSet<Config> {
        &self.configs
    }

    pub fn verdict(&self) -> &Verdict {
        &self.verdict
    }

    pub fn consumed(&self) -> usize {
        self.consumed
    }

    pub fn is_accepting(&self) -> bool {
        self.configs.iter().any(|c| self.automaton.is_final(c.state))
    }

    fn kind(&self, s: StateId) -> &'a StateKind {
        &self.automaton.states[s].kind
    }

    /// Successor configurations for `observed`, without committing.
    fn advance(&self, observed: &EventSymbol, registry: &ComparatorRegistry) -> Advance {
        let mut adv = Advance::default();
        for c in &self.configs {
            if self.kind(c.state).is_active() {
                continue;
            }
            for e in self.automaton.out_edges(c.state) {
                if !e.enabled(&c.ext) {
                    continue;
                }
                let (matched, action) = match &e.label {
                    Label::Epsilon => continue,
                    Label::Consume { matcher, .. } => match matcher.evaluate(observed, registry) {
                        Ok(m) => (m, None),
                        Err(err) => {
                            adv.errors.push(err);
                            continue;
                        }
                    },
                    Label::ReqRes { entry } => {
                        let StateKind::ReqRes { entries, .. } = self.kind(c.state) else { continue };
                        let en = &entries[*entry];
                        if observed.direction == crate::event::Direction::Out
                            && observed.port.same_port(&en.request_port)
                            && observed.event.kind.is_assignable_to(&en.request_kind)
                        {
                            match en.mapper.call(&observed.event) {
                                Some(resp) => (
                                    true,
                                    Some(ActiveInstruction::Trigger { event: resp, port: en.response_port.clone() }),
                                ),
                                None => (false, None),
                            }
                        } else {
                            (false, None)
                        }
                    }
                };
                if !matched {
                    continue;
                }
                if matches!(e.label, Label::Consume { role: Role::Disallow, .. }) {
                    adv.disallowed = true;
                    continue;
                }
                let mut ext = c.ext.clone();
                e.effects.iter().for_each(|fx| fx.apply(&mut ext));
                let dropped = matches!(e.label, Label::Consume { role: Role::Drop, .. });
                adv.all_dropped &= dropped;
                adv.survivors.push(Config { state: e.to, ext });
                if let Some(a) = action {
                    if !adv.actions.contains(&a) {
                        adv.actions.push(a);
                    }
                }
            }
        }
        adv
    }

    /// True when some passive alternative would consume `observed`.
    pub fn can_consume(&self, observed: &EventSymbol, registry: &ComparatorRegistry) -> bool {
        !self.advance(observed, registry).survivors.is_empty()
    }

    pub fn step(&mut self, observed: &EventSymbol, registry: &ComparatorRegistry) -> Result<StepOutcome, SimError> {
        if self.verdict != Verdict::Running {
            return Err(SimError::NotRunning);
        }
        let adv = self.advance(observed, registry);
        let position = self.consumed;
        self.consumed += 1;
        if adv.survivors.is_empty() {
            let kind = if adv.disallowed { FailureKind::Disallowed } else { FailureKind::Unexpected };
            self.configs.clear();
            self.verdict = Verdict::Failed { kind, position, symbol: Some(observed.clone()) };
            let decision = if adv.disallowed { Decision::FailDisallowed } else { Decision::FailUnexpected };
            return Ok(StepOutcome {
                decision,
                actions: Vec::new(),
                accepted_now: false,
                predicate_errors: adv.errors,
            });
        }
        self.configs = eclosure(self.automaton, adv.survivors);
        let decision = if adv.all_dropped { Decision::ConsumeDrop } else { Decision::ConsumeForward };
        Ok(StepOutcome {
            decision,
            actions: adv.actions,
            accepted_now: self.is_accepting(),
            predicate_errors: adv.errors,
        })
    }

    fn active_states(&self) -> Vec<StateId> {
        let mut v: Vec<StateId> = self.configs.iter().map(|c| c.state).filter(|&s| self.kind(s).is_active()).collect();
        v.dedup();
        v
    }

    /// Whether any alternative can still consume a symbol.
    pub fn has_passive(&self) -> bool {
        has_passive(self.automaton, &self.configs)
    }

    /// The chain of actions reachable without consuming, in program order.
    /// The chain stops where a passive alternative appears.
    pub fn pending_actions(&self) -> Result<Vec<ActiveInstruction>, SimError> {
        let mut sim = self.clone();
        let mut out = Vec::new();
        loop {
            let states = sim.active_states();
            if states.is_empty() || (!out.is_empty() && sim.has_passive()) {
                return Ok(out);
            }
            match sim.advance_action()? {
                Some(a) => out.push(a),
                None => return Ok(out),
            }
            if out.len() > sim.automaton.states.len() {
                // An action-only cycle; one lap is enough to show it.
                return Ok(out);
            }
        }
    }

    /// Commits to the single pending action, discarding passive alternatives.
    pub fn advance_action(&mut self) -> Result<Option<ActiveInstruction>, SimError> {
        if self.verdict != Verdict::Running {
            return Err(SimError::NotRunning);
        }
        let states = self.active_states();
        let Some(&s) = states.first() else { return Ok(None) };
        if states.len() > 1 {
            return Err(SimError::AmbiguousRuntimeChoice { states });
        }
        let instr = match self.kind(s) {
            StateKind::Trigger { event, port } => {
                ActiveInstruction::Trigger { event: event.clone(), port: port.clone() }
            }
            StateKind::Inspect(i) => ActiveInstruction::Inspect(i.clone()),
            _ => unreachable!(),
        };
        let next: Vec<Config> = self
            .configs
            .iter()
            .filter(|c| c.state == s)
            .flat_map(|c| {
                self.automaton
                    .out_edges(s)
                    .filter(|e| e.enabled(&c.ext))
                    .map(|e| {
                        let mut ext = c.ext.clone();
                        e.effects.iter().for_each(|fx| fx.apply(&mut ext));
                        Config { state: e.to, ext }
                    })
                    .collect::<Vec<_>>()
            })
            .collect();
        self.configs = eclosure(self.automaton, next);
        Ok(Some(instr))
    }

    /// Ends the input: accepts iff an accepting state is possible.
    pub fn finish(&mut self) -> &Verdict {
        if self.verdict == Verdict::Running {
            self.verdict = if self.is_accepting() {
                Verdict::Accepted
            } else {
                Verdict::Failed { kind: FailureKind::Incomplete, position: self.consumed, symbol: None }
            };
        }
        &self.verdict
    }

    /// Descriptions of what the current alternatives could consume next.
    pub fn expected(&self) -> Vec<String> {
        let mut out: Vec<String> = Vec::new();
        for c in &self.configs {
            if self.kind(c.state).is_active() {
                continue;
            }
            for e in self.automaton.out_edges(c.state) {
                if !e.enabled(&c.ext) {
                    continue;
                }
                let d = match &e.label {
                    Label::Consume { role: Role::Disallow, .. } | Label::Epsilon => continue,
                    Label::Consume { matcher, .. } => matcher.to_string(),
                    Label::ReqRes { entry } => match self.kind(c.state) {
                        StateKind::ReqRes { entries, .. } => {
                            let en = &entries[*entry];
                            alloc::format!("{}@{}:out", en.request_kind, en.request_port)
                        }
                        _ => continue,
                    },
                };
                if !out.contains(&d) {
                    out.push(d);
                }
            }
        }
        out
    }
}

#[derive(Debug)]
struct Advance {
    survivors: Vec<Config>,
    all_dropped: bool,
    disallowed: bool,
    actions: Vec<ActiveInstruction>,
    errors: Vec<PredicateError>,
}

impl Default for Advance {
    fn default() -> Self {
        Advance { survivors: Vec::new(), all_dropped: true, disallowed: false, actions: Vec::new(), errors: Vec::new() }
    }
}

fn has_passive(a: &Automaton, configs: &BTreeSet<Config>) -> bool {
    configs.iter().any(|c| {
        !a.states[c.state].kind.is_active()
            && a.out_edges(c.state).any(|e| {
                e.enabled(&c.ext) && !matches!(e.label, Label::Epsilon | Label::Consume { role: Role::Disallow, .. })
            })
    })
}

/// Smallest superset closed under ε edges and satisfied guards. Active states
/// are included but not expanded: leaving them requires performing the action.
pub fn eclosure(a: &Automaton, seeds: impl IntoIterator<Item = Config>) -> BTreeSet<Config> {
    let mut seen = BTreeSet::new();
    let mut stack: Vec<Config> = seeds.into_iter().collect();
    while let Some(c) = stack.pop() {
        if seen.contains(&c) {
            continue;
        }
        if !a.states[c.state].kind.is_active() {
            for e in a.out_edges(c.state) {
                if e.is_epsilon() && e.enabled(&c.ext) {
                    let mut ext = c.ext.clone();
                    e.effects.iter().for_each(|fx| fx.apply(&mut ext));
                    stack.push(Config { state: e.to, ext });
                }
            }
        }
        seen.insert(c);
    }
    seen
}

use alloc::string::String;
use alloc::vec::Vec;
use std::collections::BTreeSet;

use super::*;
use crate::event::{ComponentId, Direction, EventKind, EventSymbol, PortType, Role};
use crate::spec::validate;
use crate::text::{parse, SymbolTable};

struct Fx {
    table: SymbolTable,
    port: PortRef,
    events: Vec<Event>,
}

fn fx() -> Fx {
    let kind = EventKind::new("E");
    let pt = PortType::new("T", [kind.clone()], [kind.clone()]);
    let (_, port) = PortRef::declare("P", &pt, Role::Provided, ComponentId(1), None);
    let events: Vec<Event> = (0..10).map(|i| Event::new(&kind, i as i64)).collect();
    let mut table = SymbolTable::new();
    table.port("p", port.clone());
    for (i, e) in events.iter().enumerate() {
        table.event(alloc::format!("e{i}"), e.clone());
    }
    Fx { table, port, events }
}

/// Expands bare `eN` tokens to `eN@p:in`.
fn expand(src: &str) -> String {
    src.split_whitespace()
        .map(|t| {
            if t.len() == 2 && t.starts_with('e') && t.as_bytes()[1].is_ascii_digit() {
                alloc::format!("{t}@p:in")
            } else {
                t.into()
            }
        })
        .collect::<Vec<_>>()
        .join(" ")
}

impl Fx {
    fn compile(&self, src: &str) -> Automaton {
        let ast = parse(&expand(src), &self.table).unwrap();
        compile(&validate(&ast).unwrap())
    }

    fn sym(&self, i: usize) -> EventSymbol {
        EventSymbol { event: self.events[i].clone(), port: self.port.clone(), direction: Direction::In }
    }

    fn word(&self, w: &[usize]) -> Vec<EventSymbol> {
        w.iter().map(|&i| self.sym(i)).collect()
    }

    fn lang(&self, src: &str, max: usize) -> BTreeSet<Vec<usize>> {
        let a = self.compile(src);
        let l = enumerate_language(&a, max).unwrap();
        l.words
            .iter()
            .map(|w| w.iter().map(|&i| self.events.iter().position(|e| *e == l.alphabet[i].event).unwrap()).collect())
            .collect()
    }

    fn run(&self, a: &Automaton, w: &[usize]) -> (Vec<Decision>, bool) {
        let mut sim = Simulation::new(a);
        let mut ds = Vec::new();
        for s in self.word(w) {
            let out = sim.step(&s, a.comparators()).unwrap();
            ds.push(out.decision);
            if out.decision.is_fail() {
                return (ds, false);
            }
        }
        (ds, sim.is_accepting())
    }
}

fn set(ws: &[&[usize]]) -> BTreeSet<Vec<usize>> {
    ws.iter().map(|w| w.to_vec()).collect()
}

fn symbol_edges(a: &Automaton) -> usize {
    a.edges().iter().filter(|e| !e.is_epsilon()).count()
}

#[test]
fn concatenation_is_a_chain() {
    let f = fx();
    let a = f.compile("expect e1 e2 e3");
    assert_eq!(a.states().len(), 4);
    assert_eq!(a.edges().len(), 3);
    assert_eq!(symbol_edges(&a), 3);
    assert_eq!(f.lang("expect e1 e2 e3", 4), set(&[&[1, 2, 3]]));
}

#[test]
fn either_merges_start_states() {
    let f = fx();
    let a = f.compile("either expect e1 e2 or expect e1 e3 end");
    let from_start: Vec<_> = a.out_edges(a.start()).collect();
    assert_eq!(from_start.len(), 2);
    assert!(from_start.iter().all(|e| !e.is_epsilon()));
    assert_eq!(a.finals().len(), 2);
    assert_eq!(f.lang("either expect e1 e2 or expect e1 e3 end", 3), set(&[&[1, 2], &[1, 3]]));
}

#[test]
fn kleene_shape() {
    let f = fx();
    let a = f.compile("repeat body expect e1 e2 end");
    assert_eq!(a.states().len(), 3);
    assert_eq!(a.edges().len(), 4);
    assert_eq!(a.edges().iter().filter(|e| e.is_epsilon()).count(), 2);
    let l = f.lang("repeat body expect e1 e2 end", 6);
    assert_eq!(l, set(&[&[], &[1, 2], &[1, 2, 1, 2], &[1, 2, 1, 2, 1, 2]]));
    let dot = to_dot(&a);
    assert_eq!(dot.matches(" -> ").count(), 4);
    assert_eq!(dot.matches("ε").count(), 2);
}

#[test]
fn repeat_n() {
    let f = fx();
    assert_eq!(f.lang("repeat 2 body expect e1 e2 end", 6), set(&[&[1, 2, 1, 2]]));
    let a = f.compile("repeat 2 body expect e1 e2 end");
    assert!(!f.run(&a, &[1, 2]).1);
    assert!(f.run(&a, &[1, 2, 1, 2]).1);
}

#[test]
fn unordered_uses_one_state() {
    let f = fx();
    assert_eq!(f.lang("expect unordered e1 e2 end", 2), set(&[&[1, 2], &[2, 1]]));
    let two = f.compile("unordered e1 e2 end");
    let four = f.compile("unordered e1 e2 e3 e4 end");
    assert_eq!(two.extended_state_count(), 1);
    assert_eq!(four.extended_state_count(), 1);
    assert_eq!(two.states().len(), four.states().len());
}

#[test]
fn block_expect_any_position() {
    let f = fx();
    let l = f.lang("repeat 1 blockExpect e3 body expect e1 e2 end", 3);
    assert_eq!(l, set(&[&[3, 1, 2], &[1, 3, 2], &[1, 2, 3]]));
    let a = f.compile("repeat 1 blockExpect e0 body expect e1 e2 end");
    assert!(!f.run(&a, &[1, 2]).1);
}

#[test]
fn unordered_between_expects() {
    let f = fx();
    let a = f.compile("expect e1 e2 unordered e3 e4 end e5");
    assert!(f.run(&a, &[1, 2, 3, 4, 5]).1);
    assert!(f.run(&a, &[1, 2, 4, 3, 5]).1);
    let (ds, ok) = f.run(&a, &[2, 1, 3, 4, 5]);
    assert!(!ok);
    assert_eq!(ds, [Decision::FailUnexpected]);
}

#[test]
fn allow_and_drop_self_loops() {
    let f = fx();
    let a = f.compile("repeat 1 allow e3 e4 drop e5 body expect e1 e2 end");
    let mut sim = Simulation::new(&a);
    let before = sim.configs().clone();
    let out = sim.step(&f.sym(3), a.comparators()).unwrap();
    assert_eq!(out.decision, Decision::ConsumeForward);
    assert_eq!(sim.configs(), &before);
    let out = sim.step(&f.sym(5), a.comparators()).unwrap();
    assert_eq!(out.decision, Decision::ConsumeDrop);
    let (ds, ok) = f.run(&a, &[4, 1, 5, 3, 2]);
    assert!(ok);
    assert_eq!(ds[2], Decision::ConsumeDrop);
}

#[test]
fn unexpected_and_disallowed() {
    let f = fx();
    let a = f.compile("expect e1 e2");
    assert_eq!(f.run(&a, &[2]).0, [Decision::FailUnexpected]);
    let a = f.compile("repeat 1 disallow e9 body expect e1 end");
    let mut sim = Simulation::new(&a);
    let out = sim.step(&f.sym(9), a.comparators()).unwrap();
    assert_eq!(out.decision, Decision::FailDisallowed);
    assert!(matches!(sim.verdict(), Verdict::Failed { kind: FailureKind::Disallowed, position: 0, .. }));
    assert_eq!(sim.step(&f.sym(1), a.comparators()), Err(SimError::NotRunning));
}

#[test]
fn pending_actions_in_program_order() {
    let f = fx();
    let src = "expect e1@p:in trigger e2@p:in e3@p:in expect e4@p:in";
    let a = compile(&validate(&parse(src, &f.table).unwrap()).unwrap());
    let mut sim = Simulation::new(&a);
    assert!(sim.pending_actions().unwrap().is_empty());
    sim.step(&f.sym(1), a.comparators()).unwrap();
    let acts = sim.pending_actions().unwrap();
    assert_eq!(
        acts,
        [
            ActiveInstruction::Trigger { event: f.events[2].clone(), port: f.port.clone() },
            ActiveInstruction::Trigger { event: f.events[3].clone(), port: f.port.clone() },
        ]
    );
    assert!(!sim.has_passive());
    sim.advance_action().unwrap();
    sim.advance_action().unwrap();
    assert!(sim.pending_actions().unwrap().is_empty());
    sim.step(&f.sym(4), a.comparators()).unwrap();
    assert!(sim.is_accepting());
}

#[test]
fn ambiguous_active_choice_when_validation_is_bypassed() {
    use crate::spec::{Block, BodyStmt, SpecAst};
    let f = fx();
    let trig = |i: usize| BodyStmt::Trigger { event: f.events[i].clone(), port: f.port.clone() };
    let root =
        Block { body: alloc::vec![BodyStmt::EitherOr(alloc::vec![trig(1)], alloc::vec![trig(2)])], ..Block::once() };
    let ast = SpecAst::new(root);
    assert!(validate(&ast).is_err());
    let a = compile(&crate::spec::ValidatedSpec::unchecked(ast));
    let sim = Simulation::new(&a);
    assert!(matches!(sim.pending_actions(), Err(SimError::AmbiguousRuntimeChoice { .. })));
}

#[test]
fn empty_kleene_accepts_nothing_observed() {
    let f = fx();
    let a = f.compile("repeat body expect e1 e2 end");
    assert!(Simulation::new(&a).is_accepting());
}

#[test]
fn eclosure_cases() {
    let f = fx();
    let a = f.compile("repeat body expect e1 e2 end");
    let start = Config { state: a.start(), ext: a.initial_ext() };
    let c = eclosure(&a, [start.clone()]);
    assert_eq!(c.len(), 2);
    assert_eq!(eclosure(&a, c.clone()), c);

    let chain = f.compile("expect e1 e2");
    let s = Config { state: chain.start(), ext: chain.initial_ext() };
    assert_eq!(eclosure(&chain, [s.clone()]), BTreeSet::from([s]));

    let b = f.compile("repeat 1 blockExpect e0 body expect e1 end");
    let mut sim = Simulation::new(&b);
    sim.step(&f.sym(1), b.comparators()).unwrap();
    assert!(!sim.is_accepting());
    sim.step(&f.sym(0), b.comparators()).unwrap();
    assert!(sim.is_accepting());
}

#[test]
fn dot_is_deterministic() {
    let f = fx();
    let a = f.compile("expect e1");
    let d = to_dot(&a);
    assert_eq!(d.matches(" -> ").count(), 1);
    assert_eq!(d.matches("doublecircle").count(), 1);
    assert_eq!(d, to_dot(&f.compile("expect e1")));
    assert!(d.starts_with("digraph automaton {"));
}

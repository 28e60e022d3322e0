use std::collections::BTreeSet;
use std::num::NonZeroU32;

use ktest_core::{
    compile, eclosure, enumerate_language, linearize, make_symbol, validate, Block, BodyStmt, ComparatorRegistry,
    ComponentId, Decision, Direction, Event, EventKind, EventSymbol, FailureKind, HeaderStmt, Matcher, PortRef,
    PortType, Role, Simulation, SpecAst, SpecBuilder, Verdict,
};
use ktest_oracle::{language, GenConfig, Generator, Universe};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn spec_from_seed(seed: u64, config: GenConfig) -> (Universe, SpecAst) {
    let u = Universe::new(4);
    let ast = Generator { universe: &u, config }.spec(&mut ChaCha8Rng::seed_from_u64(seed));
    (u, ast)
}

fn lang_of(ast: &SpecAst, u: &Universe, max: usize) -> BTreeSet<Vec<usize>> {
    let a = compile(&validate(ast).unwrap());
    let l = enumerate_language(&a, max).unwrap();
    l.words
        .iter()
        .map(|w| w.iter().map(|&i| u.alphabet.iter().position(|x| *x == l.alphabet[i]).unwrap()).collect())
        .collect()
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 64, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn eclosure_is_idempotent(seed in any::<u64>(), picks in proptest::collection::vec(0usize..4, 0..6)) {
        let (u, ast) = spec_from_seed(seed, GenConfig { block_expect: true, ..GenConfig::passive() });
        let a = compile(&validate(&ast).unwrap());
        let mut sim = Simulation::new(&a);
        for p in picks {
            let c = sim.configs().clone();
            prop_assert_eq!(eclosure(&a, c.iter().cloned()), c);
            if sim.step(&u.alphabet[p], a.comparators()).unwrap().decision.is_fail() {
                break;
            }
        }
    }

    #[test]
    fn kleene_blocks_accept_the_empty_sequence(seed in any::<u64>()) {
        let (_, ast) = spec_from_seed(seed, GenConfig { block_expect: true, ..GenConfig::passive() });
        let body = vec![BodyStmt::Block(Block { count: None, ..ast.root.clone() })];
        let k = SpecAst::new(Block { body, ..Block::once() });
        let a = compile(&validate(&k).unwrap());
        prop_assert!(Simulation::new(&a).is_accepting());
    }

    #[test]
    fn repeat_n_equals_textual_unrolling(seed in any::<u64>(), n in 1u32..=3) {
        let config = GenConfig { max_depth: 2, ..GenConfig::passive() };
        let (u, ast) = spec_from_seed(seed, config);
        let body = ast.root.body.clone();
        let repeated = SpecAst::new(Block {
            body: vec![BodyStmt::Block(Block { count: NonZeroU32::new(n), headers: vec![], body: body.clone() })],
            ..Block::once()
        });
        let unrolled = SpecAst::new(Block { body: body.iter().cycle().take(body.len() * n as usize).cloned().collect(), ..Block::once() });
        prop_assert_eq!(lang_of(&repeated, &u, 8), lang_of(&unrolled, &u, 8));
    }

    #[test]
    fn disallowed_symbol_fails_wherever_inserted(seed in any::<u64>(), pick in any::<prop::sample::Index>(), at in any::<prop::sample::Index>()) {
        let config = GenConfig { symbols: 3, ..GenConfig::passive() };
        let (u, mut ast) = spec_from_seed(seed, config);
        let words: Vec<_> = language(&ast, &u.alphabet, 6).unwrap().into_iter().collect();
        prop_assume!(!words.is_empty());
        ast.root.headers.push(HeaderStmt::Disallow(vec![u.matcher(3)]));
        let a = compile(&validate(&ast).unwrap());
        let word = pick.get(&words);
        let pos = at.index(word.len() + 1);
        let mut sim = Simulation::new(&a);
        for (i, &s) in word.iter().enumerate() {
            if i == pos {
                break;
            }
            prop_assert!(!sim.step(&u.alphabet[s], a.comparators()).unwrap().decision.is_fail());
        }
        let out = sim.step(&u.alphabet[3], a.comparators()).unwrap();
        prop_assert_eq!(out.decision, Decision::FailDisallowed);
        let failed_at_pos = matches!(sim.verdict(), Verdict::Failed { kind: FailureKind::Disallowed, position, .. } if *position == pos);
        prop_assert!(failed_at_pos);
    }

    #[test]
    fn inner_disallow_shadows_outer_allow(k in 1usize..4, at in 0usize..6) {
        let u = Universe::new(4);
        let m = |i| u.matcher(i);
        let inner: Vec<BodyStmt> = (0..k).map(|i| BodyStmt::Expect(m(1 + i % 2))).collect();
        let ast = SpecAst::new(Block {
            headers: vec![HeaderStmt::Allow(vec![m(3)])],
            body: vec![
                BodyStmt::Expect(m(0)),
                BodyStmt::Block(Block { headers: vec![HeaderStmt::Disallow(vec![m(3)])], body: inner.clone(), ..Block::once() }),
                BodyStmt::Expect(m(0)),
            ],
            ..Block::once()
        });
        let a = compile(&validate(&ast).unwrap());
        let mut word: Vec<EventSymbol> = std::iter::once(0).chain((0..k).map(|i| 1 + i % 2)).chain([0]).map(|i| u.alphabet[i].clone()).collect();
        // The root's final state carries no allow loops, so stay before the last symbol.
        let at = at.min(word.len() - 1);
        word.insert(at, u.alphabet[3].clone());
        // Inside the inner fragment: after the first e0 and before its last symbol.
        let inside = at >= 1 && at < 1 + k;
        let mut sim = Simulation::new(&a);
        let mut failed = None;
        for (i, s) in word.iter().enumerate() {
            let d = sim.step(s, a.comparators()).unwrap().decision;
            if d.is_fail() {
                failed = Some((i, d));
                break;
            }
        }
        if inside {
            prop_assert_eq!(failed, Some((at, Decision::FailDisallowed)));
        } else {
            prop_assert_eq!(failed, None);
            prop_assert!(sim.is_accepting());
        }
    }

    #[test]
    fn concrete_matcher_matches_its_symbol(ev in 0usize..4, port in 0usize..2, out in any::<bool>()) {
        let u = Universe::new(4);
        let dir = if out { Direction::Out } else { Direction::In };
        let s = EventSymbol { event: u.events[ev].clone(), port: u.ports[port].clone(), direction: dir };
        let m = Matcher::of_symbol(&s);
        let empty = ComparatorRegistry::new();
        prop_assert!(m.matches(&s, &empty));
        prop_assert_eq!(m.matches(&s, &empty), m.matches(&s, &empty));
        let flipped = EventSymbol { direction: if out { Direction::In } else { Direction::Out }, ..s.clone() };
        prop_assert!(!m.matches(&flipped, &empty));
    }

    #[test]
    fn linearize_rebuilds_the_tree(seed in any::<u64>()) {
        let (_, ast) = spec_from_seed(seed, GenConfig::textual());
        let mut b = SpecBuilder::new();
        for c in linearize(&ast) {
            b.apply(&c);
        }
        prop_assert_eq!(b.build().unwrap(), ast);
    }

    #[test]
    fn unordered_adds_one_extended_state(n in 1usize..=64) {
        let u = Universe::new(4);
        let ms: Vec<Matcher> = (0..n).map(|i| u.matcher(i % 4)).collect();
        let a = compile(&validate(&SpecAst::new(Block { body: vec![BodyStmt::Unordered(ms)], ..Block::once() })).unwrap());
        prop_assert_eq!(a.extended_state_count(), 1);
        prop_assert_eq!(a.states().len(), 2);
    }
}

#[test]
fn make_symbol_accepts_exactly_the_alphabet() {
    let req = EventKind::new("Req");
    let resp = EventKind::new("Resp");
    let both = EventKind::new("Both");
    let sub = EventKind::subtype("SubReq", &req);
    let pt = PortType::new("T", [resp.clone(), both.clone()], [req.clone(), both.clone()]);
    let kinds = [&req, &resp, &both, &sub];
    for role in [Role::Provided, Role::Required] {
        let (inside, outside) = PortRef::declare("X", &pt, role, ComponentId(1), None);
        for port in [&inside, &outside] {
            for kind in kinds {
                for dir in [Direction::In, Direction::Out] {
                    // Requests travel towards the provider, responses away from it.
                    let towards_provider = [&req, &both, &sub].contains(&kind);
                    let away_from_provider = [&resp, &both].contains(&kind);
                    let expected = match (role, dir) {
                        (Role::Provided, Direction::In) | (Role::Required, Direction::Out) => towards_provider,
                        (Role::Provided, Direction::Out) | (Role::Required, Direction::In) => away_from_provider,
                    };
                    let got = make_symbol(Event::unit(kind), port, dir).is_ok();
                    assert_eq!(got, expected, "{role:?} {kind} {dir:?}");
                }
            }
        }
    }
}

#[test]
fn most_specific_comparator_wins() {
    let msg = EventKind::new("Msg");
    let ping = EventKind::subtype("Ping", &msg);
    let mut r = ComparatorRegistry::new();
    r.register(&ping, |_, _| true);
    r.register(&msg, |_, _| false);
    assert!(r.equal(&Event::new(&ping, 1), &Event::new(&ping, 2)));
    assert!(!r.equal(&Event::new(&msg, 1), &Event::new(&msg, 1)));
}

mod common;

use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;
use std::time::{Duration, Instant};

use common::PingPong;
use ktest::core::{Direction, Event, EventKind, FailureKind, Matcher, PortType, Value};
use ktest::harness::{default_timeout, HarnessError};
use ktest::{Definition, Failure, Scheduler, TestContext};

const SHORT: Duration = Duration::from_millis(30);

fn ctx<S: std::any::Any + Send>(def: Definition<S>) -> TestContext {
    let mut tc = TestContext::create(def).unwrap();
    tc.set_timeout(SHORT).unwrap();
    tc
}

#[test]
fn context_shape() {
    let f = PingPong::new();
    let tc = TestContext::create(f.ponger()).unwrap();
    assert_eq!(tc.proxy().parent(), None);
    assert_eq!(tc.proxy().scheduler(), Scheduler::CallingFlow);
    assert_eq!(tc.cut().parent(), Some(tc.proxy().id()));
    assert_eq!(tc.cut().scheduler(), Scheduler::Pooled);
    assert_eq!(tc.mirror_count(), 1);
    assert_eq!(tc.timeout(), default_timeout());
    let mirror = tc.mirror_of(&tc.cut().outside("P")).unwrap();
    assert_eq!(mirror.owner(), tc.proxy().id());
    assert_eq!(mirror.polarity(), tc.cut().outside("P").polarity());

    let empty = TestContext::create(Definition::new("empty", || ())).unwrap();
    assert_eq!(empty.mirror_count(), 0);
    assert!(empty.peers().is_empty());
}

#[test]
fn ping_pong_passes() {
    let f = PingPong::new();
    let mut tc = ctx(f.ponger());
    let p = tc.cut().outside("P");
    tc.spec().body().trigger(f.ping(1), &p).expect(Matcher::concrete(f.pong(1), &p, Direction::Out));
    assert!(tc.check(), "{:?}", tc.failure());
    assert!(tc.failure().is_none());
}

#[test]
fn missing_second_pong_times_out() {
    let f = PingPong::new();
    let mut tc = ctx(f.ponger());
    let p = tc.cut().outside("P");
    tc.spec()
        .body()
        .trigger(f.ping(1), &p)
        .expect(Matcher::concrete(f.pong(1), &p, Direction::Out))
        .expect(Matcher::concrete(f.pong(1), &p, Direction::Out));
    assert!(!tc.check());
    match tc.failure() {
        Some(Failure::Timeout { position, expected, .. }) => {
            assert_eq!(*position, 1);
            assert_eq!(expected.len(), 1);
        }
        other => panic!("{other:?}"),
    }
}

#[test]
fn empty_kleene_accepts_after_quiet_window() {
    let f = PingPong::new();
    let mut tc = ctx(f.counter());
    let p = tc.cut().outside("P");
    tc.spec().body().repeat_kleene().body().expect(Matcher::concrete(f.ping(1), &p, Direction::In)).end();
    let start = Instant::now();
    assert!(tc.check(), "{:?}", tc.failure());
    assert!(start.elapsed() >= SHORT);
}

#[test]
fn peers_reach_the_cut_through_the_mirror() {
    let f = PingPong::new();
    let mut tc = ctx(f.ponger());
    let seen = Arc::new(AtomicUsize::new(0));
    let peer = tc.create_peer(f.pinger(seen.clone())).unwrap();
    let p = tc.cut().outside("P");
    let ch = tc.connect(&p, &peer.outside("P")).unwrap();
    assert!(ch.a.identical(&tc.mirror_of(&p).unwrap()));
    tc.runtime().trigger(f.ping(7), &peer.inside("P")).unwrap();
    tc.spec().body().expect(Matcher::concrete(f.ping(7), &p, Direction::In)).expect(Matcher::concrete(
        f.pong(7),
        &p,
        Direction::Out,
    ));
    assert!(tc.check(), "{:?}", tc.failure());
    tc.runtime().await_quiescence(peer.id(), Duration::from_secs(5)).unwrap();
    assert_eq!(seen.load(Ordering::SeqCst), 1);
}

#[test]
fn dropped_events_never_reach_the_cut() {
    let f = PingPong::new();
    let mut tc = ctx(f.ponger());
    let peer = tc.create_peer(f.pinger(Default::default())).unwrap();
    let p = tc.cut().outside("P");
    tc.connect(&peer.outside("P"), &p).unwrap();
    for i in 0..5 {
        tc.runtime().trigger(f.ping(i), &peer.inside("P")).unwrap();
    }
    tc.spec()
        .drop(Matcher::kind(&f.ping, &p, Direction::In, |_| true))
        .body()
        .trigger(f.ping(99), &p)
        .expect(Matcher::concrete(f.pong(99), &p, Direction::Out));
    assert!(tc.check(), "{:?}", tc.failure());
    let n = tc.runtime().with_state(tc.cut().id(), |s| *s.downcast_ref::<u64>().unwrap()).unwrap();
    assert_eq!(n, 1);
}

#[test]
fn disallowed_event_fails() {
    let f = PingPong::new();
    let mut tc = ctx(f.ponger());
    let p = tc.cut().outside("P");
    tc.spec()
        .disallow(Matcher::concrete(f.pong(2), &p, Direction::Out))
        .body()
        .trigger(f.ping(1), &p)
        .trigger(f.ping(2), &p)
        .expect(Matcher::concrete(f.pong(1), &p, Direction::Out))
        .expect(Matcher::concrete(f.pong(3), &p, Direction::Out));
    assert!(!tc.check());
    match tc.failure() {
        Some(Failure::Rejected { kind, position, symbol, .. }) => {
            assert_eq!(*kind, FailureKind::Disallowed);
            assert_eq!(*position, 1);
            assert_eq!(symbol.event, f.pong(2));
        }
        other => panic!("{other:?}"),
    }
}

#[test]
fn inspect_sees_every_prior_trigger() {
    let f = PingPong::new();
    for k in [1u64, 5, 20] {
        let mut tc = ctx(f.counter());
        let p = tc.cut().outside("P");
        let b = tc.spec().body();
        for i in 0..k {
            b.trigger(f.ping(i as i64), &p);
        }
        b.inspect_state(move |n: &u64| *n == k);
        assert!(tc.check(), "k={k}: {:?}", tc.failure());
    }
}

#[test]
fn false_inspect_fails() {
    let f = PingPong::new();
    let mut tc = ctx(f.counter());
    let p = tc.cut().outside("P");
    tc.spec().body().trigger(f.ping(0), &p).inspect_state(|n: &u64| *n == 2);
    assert!(!tc.check());
    assert_eq!(tc.failure(), Some(&Failure::InspectFailed { position: 0 }));
}

#[test]
fn handler_fault_fails_the_check() {
    let f = PingPong::new();
    let def = Definition::new("faulty", || ()).provides("P", &f.port).handler("P", &f.ping, |_, _, _| panic!("bad"));
    let mut tc = ctx(def);
    tc.set_timeout(Duration::from_secs(5)).unwrap();
    let p = tc.cut().outside("P");
    tc.spec().body().trigger(f.ping(0), &p).inspect_state(|_: &()| true);
    assert!(!tc.check());
    assert!(matches!(tc.failure(), Some(Failure::HandlerFault(h)) if h.message == "bad"), "{:?}", tc.failure());
}

#[test]
fn lifecycle_rules() {
    let f = PingPong::new();
    let mut tc = ctx(f.ponger());
    assert_eq!(tc.set_timeout(Duration::ZERO), Err(HarnessError::ZeroTimeout));
    tc.spec().body();
    assert!(tc.check());
    assert!(matches!(tc.create_peer(f.counter()), Err(HarnessError::Lifecycle(_))));
    assert!(matches!(tc.set_timeout(SHORT), Err(HarnessError::Lifecycle(_))));
    assert!(!tc.check());
    assert_eq!(tc.failure(), Some(&Failure::AlreadyChecked));
}

#[test]
fn ambiguous_and_malformed_specs_fail_before_running() {
    let f = PingPong::new();
    let mut tc = ctx(f.ponger());
    let p = tc.cut().outside("P");
    tc.spec().body().either().trigger(f.ping(0), &p).or().trigger(f.ping(1), &p).end();
    assert!(!tc.check());
    assert!(matches!(tc.failure(), Some(Failure::Ambiguous(_))));

    let mut tc = ctx(f.ponger());
    tc.spec().body().end();
    assert!(!tc.check());
    assert!(matches!(tc.failure(), Some(Failure::Structure(_))));
}

#[test]
fn spec_timeout_overrides_context() {
    let f = PingPong::new();
    let mut tc = TestContext::create(f.counter()).unwrap();
    tc.set_timeout(Duration::from_secs(30)).unwrap();
    let p = tc.cut().outside("P");
    tc.spec().set_timeout(SHORT).body().expect(Matcher::concrete(f.pong(0), &p, Direction::Out));
    let start = Instant::now();
    assert!(!tc.check());
    assert!(start.elapsed() < Duration::from_secs(5));
}

#[test]
fn mapped_requests_get_responses() {
    let req = EventKind::new("Req");
    let resp = EventKind::new("Resp");
    let service = PortType::new("Service", [resp.clone()], [req.clone()]);
    let (r1, r2) = (req.clone(), resp.clone());
    let cut = Definition::new("client", Vec::<i64>::new)
        .requires("S", &service)
        .provides("Go", &PortType::new("Go", [], [EventKind::new("Go")]))
        .handler("Go", &EventKind::new("Go"), move |_, _, ctx| {
            for id in [3, 1, 2] {
                ctx.trigger(Event::new(&r1, id), "S");
            }
        })
        .handler("S", &r2, |got, e, _| got.push(e.payload.as_int().unwrap()));
    let mut tc = ctx(cut);
    let s = tc.cut().outside("S");
    let go = tc.cut().outside("Go");
    let b = tc.spec().body();
    b.trigger(Event::unit(&EventKind::new("Go")), &go).expect_with_mapper();
    for id in 1..=3 {
        let resp = resp.clone();
        b.expect_mapped(&req, &s, &s, move |e| (e.payload == Value::Int(id)).then(|| Event::new(&resp, id * 10)));
    }
    b.end().inspect_state(|got: &Vec<i64>| {
        let mut g = got.clone();
        g.sort();
        g == [10, 20, 30]
    });
    assert!(tc.check(), "{:?}", tc.failure());
}

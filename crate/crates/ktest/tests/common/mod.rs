#![allow(dead_code)]

use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;

use ktest::core::{Event, EventKind, PortType, Value};
use ktest::Definition;

pub struct PingPong {
    pub ping: EventKind,
    pub pong: EventKind,
    pub port: PortType,
}

impl PingPong {
    pub fn new() -> Self {
        let ping = EventKind::new("Ping");
        let pong = EventKind::new("Pong");
        let port = PortType::new("PingPong", [pong.clone()], [ping.clone()]);
        PingPong { ping, pong, port }
    }

    pub fn ping(&self, n: i64) -> Event {
        Event::new(&self.ping, n)
    }

    pub fn pong(&self, n: i64) -> Event {
        Event::new(&self.pong, n)
    }

    /// Answers every `Ping(n)` on provided port `P` with `Pong(n)`.
    pub fn ponger(&self) -> Definition<u64> {
        let pong = self.pong.clone();
        Definition::new("ponger", || 0u64).provides("P", &self.port).handler("P", &self.ping, move |n, e, ctx| {
            *n += 1;
            ctx.trigger(Event::new(&pong, e.payload.clone()), "P");
        })
    }

    /// Counts pings on provided port `P` without answering.
    pub fn counter(&self) -> Definition<u64> {
        Definition::new("counter", || 0u64).provides("P", &self.port).handler("P", &self.ping, |n, _, _| *n += 1)
    }

    /// Requires `P` and counts the pongs it receives in `seen`.
    pub fn pinger(&self, seen: Arc<AtomicUsize>) -> Definition<Vec<Value>> {
        Definition::new("pinger", Vec::new).requires("P", &self.port).handler("P", &self.pong, move |log, e, _| {
            seen.fetch_add(1, Ordering::SeqCst);
            log.push(e.payload.clone());
        })
    }
}

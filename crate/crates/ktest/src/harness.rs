//! Live checking of a component under test (CUT).
//!
//! A [`TestContext`] creates a root proxy component running on the calling
//! flow. The CUT and its peers are children of the proxy. For every CUT port
//! the proxy declares a mirror port with the same id and type; peers connect
//! to the mirror, never to the CUT. Events crossing the boundary in either
//! direction are intercepted, queued, and only forwarded once the automaton
//! has decided to consume them.

use std::collections::VecDeque;
use std::fmt;
use std::time::{Duration, Instant};

use crossbeam_channel::{Receiver, Sender};
use ktest_core::{
    compile, validate, ActiveInstruction, AmbiguousSpec, Decision, Direction, Event, EventSymbol, FailureKind, PortRef,
    PredicateError, SimError, Simulation, SpecAst, SpecBuilder, StructureError, TypeDirectionViolation,
};

use crate::runtime::{Channel, Component, Definition, HandlerFault, Runtime, RuntimeError, Scheduler};

pub const DEFAULT_TIMEOUT: Duration = Duration::from_millis(400);
pub const TIMEOUT_ENV: &str = "KOMPICSTEST_TIMEOUT_MS";
/// Consecutive actions without consuming a symbol before the check gives up.
pub const ACTION_LIMIT: usize = 100_000;

/// The default timeout, honouring [`TIMEOUT_ENV`] when it holds a positive
/// number of milliseconds.
pub fn default_timeout() -> Duration {
    std::env::var(TIMEOUT_ENV)
        .ok()
        .and_then(|v| v.trim().parse::<u64>().ok())
        .filter(|&ms| ms > 0)
        .map_or(DEFAULT_TIMEOUT, Duration::from_millis)
}

#[derive(Clone, Debug, PartialEq, thiserror::Error)]
pub enum HarnessError {
    #[error(transparent)]
    Runtime(#[from] RuntimeError),
    #[error("{0} is not possible once check has started")]
    Lifecycle(&'static str),
    #[error("timeout must be positive")]
    ZeroTimeout,
}

/// Why a check did not accept.
#[derive(Clone, Debug, PartialEq, thiserror::Error)]
pub enum Failure {
    #[error("{kind} symbol {symbol} at position {position}; expected one of [{}]", .expected.join(", "), kind = .kind.as_str())]
    Rejected { kind: FailureKind, position: usize, symbol: EventSymbol, expected: Vec<String> },
    #[error("no event within {waited:?} at position {position}; expected one of [{}]", .expected.join(", "))]
    Timeout { position: usize, waited: Duration, expected: Vec<String> },
    #[error("inspect predicate false at position {position}")]
    InspectFailed { position: usize },
    #[error("component under test not quiescent within {0:?}")]
    Quiescence(Duration),
    #[error("handler fault in {}: {} (event {})", .0.name, .0.message, .0.event)]
    HandlerFault(HandlerFault),
    #[error(transparent)]
    PredicateError(PredicateError),
    #[error(transparent)]
    Ambiguous(AmbiguousSpec),
    #[error(transparent)]
    Structure(StructureError),
    #[error(transparent)]
    AmbiguousRuntimeChoice(SimError),
    #[error("more than {0} consecutive actions without an observed event")]
    ActionLoop(usize),
    #[error(transparent)]
    Trigger(TypeDirectionViolation),
    #[error("check already ran on this context")]
    AlreadyChecked,
}

/// Delivers an intercepted event to where it was headed, once.
pub struct ForwardHandle {
    event: Event,
    to: PortRef,
}

impl ForwardHandle {
    pub fn forward(self, rt: &Runtime) -> Result<(), TypeDirectionViolation> {
        rt.trigger(self.event, &self.to)
    }
}

impl fmt::Debug for ForwardHandle {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "forward {} to {:?}", self.event, self.to)
    }
}

struct Observed {
    symbol: EventSymbol,
    forward: ForwardHandle,
}

#[derive(Clone, Debug)]
struct Mirror {
    cut_inside: PortRef,
    cut_outside: PortRef,
    outside: PortRef,
}

pub struct TestContext {
    rt: Runtime,
    proxy: Component,
    cut: Component,
    peers: Vec<Component>,
    mirrors: Vec<Mirror>,
    rx: Receiver<Observed>,
    spec: SpecBuilder,
    timeout: Duration,
    started: bool,
    failure: Option<Failure>,
}

impl fmt::Debug for TestContext {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("TestContext")
            .field("cut", &self.cut)
            .field("peers", &self.peers)
            .field("timeout", &self.timeout)
            .field("failure", &self.failure)
            .finish_non_exhaustive()
    }
}

impl TestContext {
    /// Context with a worker pool sized to the available parallelism.
    pub fn create<S: std::any::Any + Send>(cut: Definition<S>) -> Result<Self, HarnessError> {
        Self::with_runtime(Runtime::new(), cut)
    }

    /// Context whose pooled components share `workers` executors; one worker
    /// gives a deterministic schedule.
    pub fn create_with<S: std::any::Any + Send>(cut: Definition<S>, workers: usize) -> Result<Self, HarnessError> {
        Self::with_runtime(Runtime::with_workers(workers.max(1)), cut)
    }

    fn with_runtime<S: std::any::Any + Send>(rt: Runtime, cut: Definition<S>) -> Result<Self, HarnessError> {
        let proxy = rt.create(None, Definition::new("proxy", || ()), Scheduler::CallingFlow)?;
        let cut = rt.create(Some(proxy.id()), cut, Scheduler::Pooled)?;
        let (tx, rx) = crossbeam_channel::unbounded();
        let mut mirrors = Vec::new();
        for (id, cut_inside, cut_outside) in cut.ports() {
            let (inside, outside) = rt.declare_port(proxy.id(), &id, cut_inside.port_type(), cut_inside.role())?;
            intercept(&rt, &proxy, &tx, &inside, &cut_outside, Direction::In)?;
            intercept(&rt, &proxy, &tx, &cut_outside, &inside, Direction::Out)?;
            mirrors.push(Mirror { cut_inside, cut_outside, outside });
        }
        Ok(TestContext {
            rt,
            proxy,
            cut,
            peers: Vec::new(),
            mirrors,
            rx,
            spec: SpecBuilder::new(),
            timeout: default_timeout(),
            started: false,
            failure: None,
        })
    }

    pub fn runtime(&self) -> &Runtime {
        &self.rt
    }

    pub fn cut(&self) -> &Component {
        &self.cut
    }

    pub fn proxy(&self) -> &Component {
        &self.proxy
    }

    pub fn peers(&self) -> &[Component] {
        &self.peers
    }

    /// Number of mirrored CUT ports.
    pub fn mirror_count(&self) -> usize {
        self.mirrors.len()
    }

    /// The proxy-side port a peer is joined to when connected to `cut_port`.
    pub fn mirror_of(&self, cut_port: &PortRef) -> Option<PortRef> {
        self.mirror_index(cut_port).map(|i| self.mirrors[i].outside.clone())
    }

    fn mirror_index(&self, port: &PortRef) -> Option<usize> {
        self.mirrors.iter().position(|m| m.cut_inside.identical(port) || m.cut_outside.identical(port))
    }

    pub fn create_peer<S: std::any::Any + Send>(&mut self, def: Definition<S>) -> Result<Component, HarnessError> {
        if self.started {
            return Err(HarnessError::Lifecycle("create_peer"));
        }
        let peer = self.rt.create(Some(self.proxy.id()), def, Scheduler::Pooled)?;
        self.peers.push(peer.clone());
        Ok(peer)
    }

    /// Connects two ports. A CUT port is replaced by its mirror, so the
    /// channel never touches the CUT itself.
    pub fn connect(&mut self, a: &PortRef, b: &PortRef) -> Result<Channel, HarnessError> {
        if self.started {
            return Err(HarnessError::Lifecycle("connect"));
        }
        let map = |p: &PortRef| self.mirror_of(p).unwrap_or_else(|| p.clone());
        Ok(self.rt.connect(&map(a), &map(b))?)
    }

    pub fn set_timeout(&mut self, timeout: Duration) -> Result<(), HarnessError> {
        if self.started {
            return Err(HarnessError::Lifecycle("set_timeout"));
        }
        if timeout.is_zero() {
            return Err(HarnessError::ZeroTimeout);
        }
        self.timeout = timeout;
        Ok(())
    }

    pub fn timeout(&self) -> Duration {
        self.timeout
    }

    /// The specification under construction.
    pub fn spec(&mut self) -> &mut SpecBuilder {
        &mut self.spec
    }

    /// Builds the specification from [`TestContext::spec`] and checks it.
    pub fn check(&mut self) -> bool {
        match self.spec.build() {
            Ok(ast) => self.check_spec(&ast),
            Err(e) => {
                self.started = true;
                self.fail(Failure::Structure(e))
            }
        }
    }

    /// Runs the CUT against `ast`; true iff the execution is accepted.
    pub fn check_spec(&mut self, ast: &SpecAst) -> bool {
        if self.started {
            return self.fail(Failure::AlreadyChecked);
        }
        self.started = true;
        match self.run(ast) {
            Ok(()) => true,
            Err(f) => self.fail(f),
        }
    }

    fn fail(&mut self, f: Failure) -> bool {
        if self.failure.is_none() {
            self.failure = Some(f);
        }
        false
    }

    /// Why the last check failed.
    pub fn failure(&self) -> Option<&Failure> {
        self.failure.as_ref()
    }

    /// Waits until the CUT has no queued or executing events.
    pub fn await_quiescence(&self) -> Result<(), Failure> {
        self.rt.await_quiescence(self.cut.id(), self.timeout).map_err(|e| Failure::Quiescence(e.0))
    }

    fn fault(&self) -> Result<(), Failure> {
        match self.rt.faults().into_iter().next() {
            Some(f) => Err(Failure::HandlerFault(f)),
            None => Ok(()),
        }
    }

    fn perform(&self, action: ActiveInstruction, sim: &Simulation<'_>, timeout: Duration) -> Result<(), Failure> {
        match action {
            ActiveInstruction::Trigger { event, port } => self.rt.trigger(event, &port).map_err(Failure::Trigger),
            ActiveInstruction::Inspect(inspect) => {
                let quiet = self.rt.await_quiescence(self.cut.id(), timeout);
                // A fault explains a stuck component better than the timeout.
                self.fault()?;
                quiet.map_err(|e| Failure::Quiescence(e.0))?;
                let ok =
                    self.rt.with_state(self.cut.id(), |s| inspect.call(s)).map_err(|_| Failure::Quiescence(timeout))?;
                if ok {
                    Ok(())
                } else {
                    Err(Failure::InspectFailed { position: sim.consumed() })
                }
            }
        }
    }

    fn run(&self, ast: &SpecAst) -> Result<(), Failure> {
        let timeout = ast.timeout.unwrap_or(self.timeout);
        let spec = validate(ast).map_err(Failure::Ambiguous)?;
        let automaton = compile(&spec);
        let registry = automaton.comparators();
        let mut sim = Simulation::new(&automaton);
        let mut buffer: VecDeque<Observed> = VecDeque::new();
        let mut actions = 0usize;
        loop {
            self.fault()?;
            buffer.extend(self.rx.try_iter());
            let consumable = buffer.front().is_some_and(|o| sim.has_passive() && sim.can_consume(&o.symbol, registry));
            if !consumable {
                if let Some(action) = sim.advance_action().map_err(Failure::AmbiguousRuntimeChoice)? {
                    actions += 1;
                    if actions > ACTION_LIMIT {
                        return Err(Failure::ActionLoop(ACTION_LIMIT));
                    }
                    self.perform(action, &sim, timeout)?;
                    continue;
                }
            }
            actions = 0;
            let observed = match buffer.pop_front() {
                Some(o) => o,
                None => match self.recv(timeout) {
                    Some(o) => o,
                    None => {
                        self.fault()?;
                        if sim.is_accepting() {
                            return Ok(());
                        }
                        return Err(Failure::Timeout {
                            position: sim.consumed(),
                            waited: timeout,
                            expected: sim.expected(),
                        });
                    }
                },
            };
            let expected = sim.expected();
            let position = sim.consumed();
            let outcome = sim.step(&observed.symbol, registry).map_err(Failure::AmbiguousRuntimeChoice)?;
            if let Some(e) = outcome.predicate_errors.into_iter().next() {
                return Err(Failure::PredicateError(e));
            }
            match outcome.decision {
                Decision::ConsumeForward => observed.forward.forward(&self.rt).map_err(Failure::Trigger)?,
                Decision::ConsumeDrop => {}
                Decision::FailDisallowed | Decision::FailUnexpected => {
                    let kind = if outcome.decision == Decision::FailDisallowed {
                        FailureKind::Disallowed
                    } else {
                        FailureKind::Unexpected
                    };
                    return Err(Failure::Rejected { kind, position, symbol: observed.symbol, expected });
                }
            }
            for action in outcome.actions {
                self.perform(action, &sim, timeout)?;
            }
        }
    }

    fn recv(&self, timeout: Duration) -> Option<Observed> {
        let deadline = Instant::now() + timeout;
        self.rx.recv_deadline(deadline).ok()
    }
}

/// Subscribes a proxy handler on `at` that queues every arriving event as a
/// symbol on the CUT's outside port, to be forwarded later to `to`.
fn intercept(
    rt: &Runtime,
    proxy: &Component,
    tx: &Sender<Observed>,
    at: &PortRef,
    to: &PortRef,
    direction: Direction,
) -> Result<(), RuntimeError> {
    let tx = tx.clone();
    let to = to.clone();
    // The symbol always names the CUT's port, whichever side was observed.
    let cut_port = if direction == Direction::In { to.clone() } else { at.clone() };
    rt.subscribe(proxy.id(), at, None, move |e: &Event| {
        let symbol = EventSymbol { event: e.clone(), port: cut_port.clone(), direction };
        let _ = tx.send(Observed { symbol, forward: ForwardHandle { event: e.clone(), to: to.clone() } });
    })
}

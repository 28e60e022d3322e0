//! A small component runtime: typed bidirectional ports, broadcast FIFO
//! channels, a parent/child hierarchy and two schedulers.
//!
//! Triggering an event on a port side `x` moves it through the port to
//! `x.twin()`. There the subscribers of that side run (or are queued) and the
//! event continues over every channel attached to that side, arriving at the
//! far end and passing through its port in turn.

mod component;

use std::any::Any;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::sync::atomic::Ordering;
use std::sync::{Arc, Condvar, Mutex, RwLock, Weak};
use std::thread;
use std::time::{Duration, Instant};

use ktest_core::{ComponentId, Direction, Event, EventKind, PortRef, PortType, Role, TypeDirectionViolation};

use component::{Cell, Entry, Handler};
pub use component::{Component, Ctx, Definition};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Scheduler {
    /// Handlers run on the runtime's worker pool.
    Pooled,
    /// Handlers run immediately on the flow that delivered the event.
    CallingFlow,
}

#[derive(Clone, Debug, PartialEq, thiserror::Error)]
pub enum RuntimeError {
    #[error("invalid definition of {component}: {reason}")]
    InvalidDefinition { component: String, reason: String },
    #[error("cannot connect {a:?} to {b:?}: {reason}")]
    IncompatiblePorts { a: PortRef, b: PortRef, reason: &'static str },
    #[error("no component {0:?}")]
    UnknownComponent(ComponentId),
    #[error("{component:?} does not own {side:?}")]
    NotOwner { component: ComponentId, side: PortRef },
}

/// A panic raised by a handler, or an ill-typed trigger from inside one.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct HandlerFault {
    pub component: ComponentId,
    pub name: String,
    pub event: String,
    pub message: String,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, thiserror::Error)]
#[error("component did not become quiescent within {0:?}")]
pub struct QuiescenceTimeout(pub Duration);

#[derive(Clone, Debug, PartialEq)]
pub struct Channel {
    pub a: PortRef,
    pub b: PortRef,
}

struct Subscription {
    side: PortRef,
    cell: Arc<Cell>,
    /// `None` accepts every event.
    kind: Option<EventKind>,
    handler: Handler,
}

pub(crate) struct Inner {
    cells: RwLock<Vec<Arc<Cell>>>,
    subs: RwLock<Vec<Subscription>>,
    channels: RwLock<Vec<Channel>>,
    ready: Option<crossbeam_channel::Sender<Arc<Cell>>>,
    faults: Mutex<Vec<HandlerFault>>,
    quiet: (Mutex<()>, Condvar),
}

/// Handle to a runtime; clones share it. Worker threads stop once the last
/// handle is dropped.
#[derive(Clone)]
pub struct Runtime {
    inner: Arc<Inner>,
}

impl Default for Runtime {
    fn default() -> Self {
        Runtime::new()
    }
}

impl Runtime {
    /// Pool sized to the available parallelism.
    pub fn new() -> Self {
        Runtime::with_workers(thread::available_parallelism().map_or(2, |n| n.get()))
    }

    /// With `workers == 0` nothing runs on its own; pooled components are
    /// driven by [`Runtime::execute_ready`].
    pub fn with_workers(workers: usize) -> Self {
        let (tx, rx) = crossbeam_channel::unbounded::<Arc<Cell>>();
        let inner = Arc::new(Inner {
            cells: RwLock::new(Vec::new()),
            subs: RwLock::new(Vec::new()),
            channels: RwLock::new(Vec::new()),
            ready: (workers > 0).then_some(tx),
            faults: Mutex::new(Vec::new()),
            quiet: (Mutex::new(()), Condvar::new()),
        });
        for i in 0..workers {
            let rx = rx.clone();
            let weak = Arc::downgrade(&inner);
            thread::Builder::new()
                .name(format!("ktest-worker-{i}"))
                .spawn(move || worker(rx, weak))
                .expect("spawn worker");
        }
        Runtime { inner }
    }

    pub fn create<S: Any + Send>(
        &self,
        parent: Option<ComponentId>,
        def: Definition<S>,
        scheduler: Scheduler,
    ) -> Result<Component, RuntimeError> {
        if let Some(p) = parent {
            self.inner.cell(p)?;
        }
        let id = ComponentId(self.inner.cells.read().unwrap().len() as u32);
        let (cell, handlers) = def.instantiate(id, parent, scheduler)?;
        let handle = cell.handle();
        self.inner.cells.write().unwrap().push(cell.clone());
        let mut subs = self.inner.subs.write().unwrap();
        for (side, kind, handler) in handlers {
            subs.push(Subscription { side, cell: cell.clone(), kind: Some(kind), handler });
        }
        Ok(handle)
    }

    /// Adds a port pair to an existing component.
    pub fn declare_port(
        &self,
        component: ComponentId,
        id: &str,
        port_type: &PortType,
        role: Role,
    ) -> Result<(PortRef, PortRef), RuntimeError> {
        let cell = self.inner.cell(component)?;
        let (inside, outside) = PortRef::declare(id, port_type, role, component, cell.parent);
        cell.ports.write().unwrap().push((id.to_string(), inside.clone(), outside.clone()));
        Ok((inside, outside))
    }

    /// Subscribes `handler` on a side owned by `component`. With `kind` set to
    /// `None` every event arriving at the side is handled.
    pub fn subscribe(
        &self,
        component: ComponentId,
        side: &PortRef,
        kind: Option<EventKind>,
        handler: impl Fn(&Event) + Send + Sync + 'static,
    ) -> Result<(), RuntimeError> {
        let cell = self.inner.cell(component)?;
        if side.owner() != component {
            return Err(RuntimeError::NotOwner { component, side: side.clone() });
        }
        let handler: Handler = Arc::new(move |_: &mut dyn Any, e: &Event, _: &mut Ctx<'_>| handler(e));
        self.inner.subs.write().unwrap().push(Subscription { side: side.clone(), cell, kind, handler });
        Ok(())
    }

    pub fn connect(&self, a: &PortRef, b: &PortRef) -> Result<Channel, RuntimeError> {
        let err = |reason| Err(RuntimeError::IncompatiblePorts { a: a.clone(), b: b.clone(), reason });
        if a.port_type() != b.port_type() {
            return err("port types differ");
        }
        if a.polarity() == b.polarity() {
            return err("same polarity");
        }
        let ch = Channel { a: a.clone(), b: b.clone() };
        self.inner.channels.write().unwrap().push(ch.clone());
        Ok(ch)
    }

    /// Triggers from outside any handler. FIFO order holds per triggering
    /// flow.
    pub fn trigger(&self, event: Event, port: &PortRef) -> Result<(), TypeDirectionViolation> {
        self.inner.trigger(event, port)
    }

    pub fn work_count(&self, id: ComponentId) -> usize {
        self.inner.cell(id).map_or(0, |c| c.work.load(Ordering::SeqCst))
    }

    /// Runs one queued event of a pooled component on the calling thread.
    /// Returns false when nothing was queued.
    pub fn execute_ready(&self, id: ComponentId) -> Result<bool, RuntimeError> {
        let cell = self.inner.cell(id)?;
        if cell.scheduled.swap(true, Ordering::AcqRel) {
            // Someone else is executing it right now.
            return Ok(false);
        }
        let entry = cell.mailbox.lock().unwrap().pop_front();
        let ran = match entry {
            Some(entry) => {
                self.inner.run(&cell, entry);
                true
            }
            None => false,
        };
        cell.scheduled.store(false, Ordering::Release);
        Ok(ran)
    }

    /// Blocks until `id` has no queued or executing events.
    pub fn await_quiescence(&self, id: ComponentId, timeout: Duration) -> Result<(), QuiescenceTimeout> {
        let Ok(cell) = self.inner.cell(id) else { return Ok(()) };
        let deadline = Instant::now() + timeout;
        let (lock, cv) = &self.inner.quiet;
        let mut guard = lock.lock().unwrap();
        while cell.work.load(Ordering::SeqCst) > 0 {
            let now = Instant::now();
            if now >= deadline {
                return Err(QuiescenceTimeout(timeout));
            }
            guard = cv.wait_timeout(guard, deadline - now).unwrap().0;
        }
        Ok(())
    }

    /// Runs `f` on the component's state while no handler of it executes.
    pub fn with_state<R>(&self, id: ComponentId, f: impl FnOnce(&dyn Any) -> R) -> Result<R, RuntimeError> {
        let cell = self.inner.cell(id)?;
        let state = cell.state.lock().unwrap_or_else(|p| p.into_inner());
        Ok(f(&**state))
    }

    pub fn faults(&self) -> Vec<HandlerFault> {
        self.inner.faults.lock().unwrap().clone()
    }

    pub fn component(&self, id: ComponentId) -> Result<Component, RuntimeError> {
        Ok(self.inner.cell(id)?.handle())
    }
}

impl Inner {
    fn cell(&self, id: ComponentId) -> Result<Arc<Cell>, RuntimeError> {
        self.cells.read().unwrap().get(id.0 as usize).cloned().ok_or(RuntimeError::UnknownComponent(id))
    }

    pub(crate) fn trigger(&self, event: Event, port: &PortRef) -> Result<(), TypeDirectionViolation> {
        let direction = if port.is_inside() { Direction::Out } else { Direction::In };
        if !port.allows(&event.kind, direction) {
            return Err(TypeDirectionViolation {
                kind: event.kind.name().to_string(),
                port: port.id().to_string(),
                direction,
            });
        }
        self.arrive(&event, &port.twin());
        Ok(())
    }

    fn arrive(&self, event: &Event, side: &PortRef) {
        // Group matching handlers per component, keeping subscription order.
        let mut groups: Vec<(Arc<Cell>, Vec<Handler>)> = Vec::new();
        for s in self.subs.read().unwrap().iter() {
            if !s.side.identical(side) || s.kind.as_ref().is_some_and(|k| !event.kind.is_assignable_to(k)) {
                continue;
            }
            match groups.iter_mut().find(|(c, _)| Arc::ptr_eq(c, &s.cell)) {
                Some((_, hs)) => hs.push(s.handler.clone()),
                None => groups.push((s.cell.clone(), vec![s.handler.clone()])),
            }
        }
        for (cell, handlers) in groups {
            self.accept(&cell, Entry { event: event.clone(), handlers });
        }
        let far: Vec<PortRef> = self
            .channels
            .read()
            .unwrap()
            .iter()
            .filter_map(|c| {
                if c.a.identical(side) {
                    Some(c.b.clone())
                } else if c.b.identical(side) {
                    Some(c.a.clone())
                } else {
                    None
                }
            })
            .collect();
        for end in far {
            self.arrive(event, &end.twin());
        }
    }

    fn accept(&self, cell: &Arc<Cell>, entry: Entry) {
        cell.work.fetch_add(1, Ordering::SeqCst);
        match cell.scheduler {
            Scheduler::CallingFlow => self.run(cell, entry),
            Scheduler::Pooled => {
                cell.mailbox.lock().unwrap().push_back(entry);
                self.schedule(cell);
            }
        }
    }

    fn schedule(&self, cell: &Arc<Cell>) {
        if let Some(tx) = &self.ready {
            if !cell.scheduled.swap(true, Ordering::AcqRel) {
                let _ = tx.send(cell.clone());
            }
        }
    }

    fn run(&self, cell: &Arc<Cell>, entry: Entry) {
        if !component::enter(cell.id) {
            // A calling-flow component delivering to itself would deadlock.
            self.fault(cell, &entry.event, "re-entrant delivery to a calling-flow component".into());
        } else {
            let mut state = cell.state.lock().unwrap_or_else(|p| p.into_inner());
            let mut ctx = Ctx { rt: self, cell };
            for h in &entry.handlers {
                let result = catch_unwind(AssertUnwindSafe(|| h(&mut **state, &entry.event, &mut ctx)));
                if let Err(payload) = result {
                    self.fault(cell, &entry.event, panic_message(&payload));
                }
            }
            drop(state);
            component::leave(cell.id);
        }
        cell.work.fetch_sub(1, Ordering::SeqCst);
        let (lock, cv) = &self.quiet;
        let _guard = lock.lock().unwrap();
        cv.notify_all();
    }

    pub(crate) fn fault(&self, cell: &Cell, event: &Event, message: String) {
        self.faults.lock().unwrap().push(HandlerFault {
            component: cell.id,
            name: cell.name.clone(),
            event: event.to_string(),
            message,
        });
    }
}

fn panic_message(payload: &Box<dyn Any + Send>) -> String {
    if let Some(s) = payload.downcast_ref::<&str>() {
        s.to_string()
    } else if let Some(s) = payload.downcast_ref::<String>() {
        s.clone()
    } else {
        "handler panicked".into()
    }
}

fn worker(rx: crossbeam_channel::Receiver<Arc<Cell>>, rt: Weak<Inner>) {
    while let Ok(cell) = rx.recv() {
        let Some(inner) = rt.upgrade() else { return };
        let entry = cell.mailbox.lock().unwrap().pop_front();
        if let Some(entry) = entry {
            inner.run(&cell, entry);
        }
        // Hand the component back if more work arrived; otherwise release it
        // and re-check for an enqueue that raced with the release.
        if !cell.mailbox.lock().unwrap().is_empty() {
            if let Some(tx) = &inner.ready {
                let _ = tx.send(cell);
            }
            continue;
        }
        cell.scheduled.store(false, Ordering::Release);
        if !cell.mailbox.lock().unwrap().is_empty() {
            inner.schedule(&cell);
        }
    }
}

use std::any::Any;
use std::cell::RefCell;
use std::collections::VecDeque;
use std::sync::atomic::{AtomicBool, AtomicUsize};
use std::sync::{Arc, Mutex, RwLock};

use ktest_core::{ComponentId, Direction, Event, EventKind, PortRef, PortType, Role, TypeDirectionViolation};

use super::{Inner, RuntimeError, Scheduler};

pub(crate) type Handler = Arc<dyn Fn(&mut dyn Any, &Event, &mut Ctx<'_>) + Send + Sync>;
/// A handler bound to the inside side it is subscribed on.
pub(crate) type Bound = (PortRef, EventKind, Handler);
type TypedHandler<S> = Arc<dyn Fn(&mut S, &Event, &mut Ctx<'_>) + Send + Sync>;

pub(crate) struct Entry {
    pub event: Event,
    pub handlers: Vec<Handler>,
}

pub(crate) struct Cell {
    pub id: ComponentId,
    pub name: String,
    pub parent: Option<ComponentId>,
    pub scheduler: Scheduler,
    pub state: Mutex<Box<dyn Any + Send>>,
    pub mailbox: Mutex<VecDeque<Entry>>,
    /// Queued plus executing events.
    pub work: AtomicUsize,
    /// Set while the component sits in the ready queue or runs on a worker.
    pub scheduled: AtomicBool,
    /// `(id, inside, outside)` per port pair.
    pub ports: RwLock<Vec<(String, PortRef, PortRef)>>,
}

impl Cell {
    pub fn handle(self: &Arc<Self>) -> Component {
        Component { cell: self.clone() }
    }
}

/// Blueprint of a component: ports, handlers and the initial state.
pub struct Definition<S> {
    name: String,
    init: Arc<dyn Fn() -> S + Send + Sync>,
    ports: Vec<(String, PortType, Role)>,
    handlers: Vec<(String, EventKind, TypedHandler<S>)>,
}

impl<S> Clone for Definition<S> {
    fn clone(&self) -> Self {
        Definition {
            name: self.name.clone(),
            init: self.init.clone(),
            ports: self.ports.clone(),
            handlers: self.handlers.clone(),
        }
    }
}

impl<S: Any + Send> Definition<S> {
    pub fn new(name: impl Into<String>, init: impl Fn() -> S + Send + Sync + 'static) -> Self {
        Definition { name: name.into(), init: Arc::new(init), ports: Vec::new(), handlers: Vec::new() }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn provides(mut self, id: impl Into<String>, port_type: &PortType) -> Self {
        self.ports.push((id.into(), port_type.clone(), Role::Provided));
        self
    }

    pub fn requires(mut self, id: impl Into<String>, port_type: &PortType) -> Self {
        self.ports.push((id.into(), port_type.clone(), Role::Required));
        self
    }

    /// Subscribes `f` to events of `kind` (or a subtype) entering through
    /// port `port`.
    pub fn handler(
        mut self,
        port: impl Into<String>,
        kind: &EventKind,
        f: impl Fn(&mut S, &Event, &mut Ctx<'_>) + Send + Sync + 'static,
    ) -> Self {
        self.handlers.push((port.into(), kind.clone(), Arc::new(f)));
        self
    }

    pub(crate) fn instantiate(
        self,
        id: ComponentId,
        parent: Option<ComponentId>,
        scheduler: Scheduler,
    ) -> Result<(Arc<Cell>, Vec<Bound>), RuntimeError> {
        let invalid = |reason: String| RuntimeError::InvalidDefinition { component: self.name.clone(), reason };
        let mut ports: Vec<(String, PortRef, PortRef)> = Vec::new();
        for (pid, pt, role) in &self.ports {
            if ports.iter().any(|(p, ..)| p == pid) {
                return Err(invalid(format!("port `{pid}` declared twice")));
            }
            let (inside, outside) = PortRef::declare(pid.clone(), pt, *role, id, parent);
            ports.push((pid.clone(), inside, outside));
        }
        let mut handlers = Vec::new();
        for (pid, kind, f) in &self.handlers {
            let Some((_, inside, _)) = ports.iter().find(|(p, ..)| p == pid) else {
                return Err(invalid(format!("handler on undeclared port `{pid}`")));
            };
            if !inside.allows(kind, Direction::In) {
                return Err(invalid(format!("port `{pid}` does not admit {kind} inbound")));
            }
            let f = f.clone();
            let h: Handler = Arc::new(move |state: &mut dyn Any, e: &Event, ctx: &mut Ctx<'_>| {
                let s = state.downcast_mut::<S>().expect("component state type");
                f(s, e, ctx)
            });
            handlers.push((inside.clone(), kind.clone(), h));
        }
        let cell = Arc::new(Cell {
            id,
            name: self.name.clone(),
            parent,
            scheduler,
            state: Mutex::new(Box::new((self.init)())),
            mailbox: Mutex::new(VecDeque::new()),
            work: AtomicUsize::new(0),
            scheduled: AtomicBool::new(false),
            ports: RwLock::new(ports),
        });
        Ok((cell, handlers))
    }
}

/// What a running handler may do besides touching its own state.
pub struct Ctx<'a> {
    pub(crate) rt: &'a Inner,
    pub(crate) cell: &'a Arc<Cell>,
}

impl Ctx<'_> {
    pub fn id(&self) -> ComponentId {
        self.cell.id
    }

    /// Triggers on the inside of the component's own port `port`. An
    /// ill-typed trigger is recorded as a handler fault.
    pub fn trigger(&mut self, event: Event, port: &str) {
        let inside = self.cell.ports.read().unwrap().iter().find(|(p, ..)| p == port).map(|(_, i, _)| i.clone());
        match inside {
            Some(inside) => self.trigger_on(event, &inside),
            None => {
                let msg = format!("trigger on undeclared port `{port}`");
                self.rt.fault(self.cell, &event, msg);
            }
        }
    }

    pub fn trigger_on(&mut self, event: Event, port: &PortRef) {
        if let Err(v) = self.rt.trigger(event.clone(), port) {
            let v: TypeDirectionViolation = v;
            self.rt.fault(self.cell, &event, v.to_string());
        }
    }
}

thread_local! {
    static RUNNING: RefCell<Vec<ComponentId>> = const { RefCell::new(Vec::new()) };
}

/// Marks `id` as executing on this thread; false if it already is.
pub(crate) fn enter(id: ComponentId) -> bool {
    RUNNING.with(|r| {
        let mut r = r.borrow_mut();
        if r.contains(&id) {
            false
        } else {
            r.push(id);
            true
        }
    })
}

pub(crate) fn leave(id: ComponentId) {
    RUNNING.with(|r| r.borrow_mut().retain(|&x| x != id));
}

/// Handle to a created component.
#[derive(Clone)]
pub struct Component {
    cell: Arc<Cell>,
}

impl std::fmt::Debug for Component {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}#{}", self.cell.name, self.cell.id.0)
    }
}

impl Component {
    pub fn id(&self) -> ComponentId {
        self.cell.id
    }

    pub fn name(&self) -> &str {
        &self.cell.name
    }

    pub fn parent(&self) -> Option<ComponentId> {
        self.cell.parent
    }

    pub fn scheduler(&self) -> Scheduler {
        self.cell.scheduler
    }

    /// `(inside, outside)` of port `id`.
    pub fn port(&self, id: &str) -> Option<(PortRef, PortRef)> {
        self.cell.ports.read().unwrap().iter().find(|(p, ..)| p == id).map(|(_, i, o)| (i.clone(), o.clone()))
    }

    /// All port pairs in declaration order.
    pub fn ports(&self) -> Vec<(String, PortRef, PortRef)> {
        self.cell.ports.read().unwrap().clone()
    }

    /// # Panics
    /// If the component has no port `id`.
    pub fn inside(&self, id: &str) -> PortRef {
        self.port(id).unwrap_or_else(|| panic!("{self:?} has no port `{id}`")).0
    }

    /// # Panics
    /// If the component has no port `id`.
    pub fn outside(&self, id: &str) -> PortRef {
        self.port(id).unwrap_or_else(|| panic!("{self:?} has no port `{id}`")).1
    }

    pub fn positive(&self, id: &str) -> PortRef {
        let (i, o) = self.port(id).unwrap_or_else(|| panic!("{self:?} has no port `{id}`"));
        if i.polarity() == ktest_core::Polarity::Positive {
            i
        } else {
            o
        }
    }

    pub fn negative(&self, id: &str) -> PortRef {
        self.positive(id).twin()
    }
}

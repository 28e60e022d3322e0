//! Events, ports, directions, the execution alphabet, and matching.

use alloc::collections::BTreeMap;
use alloc::string::{String, ToString};
use alloc::sync::Arc;
use alloc::vec::Vec;
use core::fmt;

/// Direction of an event relative to the component under test.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Direction {
    /// Delivered into the CUT.
    In,
    /// Emitted by the CUT.
    Out,
}

impl Direction {
    pub fn as_str(self) -> &'static str {
        match self {
            Direction::In => "in",
            Direction::Out => "out",
        }
    }
}

impl fmt::Display for Direction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Side of a port pair. Requests travel towards the negative side, responses
/// towards the positive side.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Polarity {
    Positive,
    Negative,
}

impl Polarity {
    pub fn opposite(self) -> Polarity {
        match self {
            Polarity::Positive => Polarity::Negative,
            Polarity::Negative => Polarity::Positive,
        }
    }
}

/// How a component declares a port.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Role {
    Provided,
    Required,
}

impl Role {
    /// Polarity of the side that delivers events into the declaring component.
    pub fn inside_polarity(self) -> Polarity {
        match self {
            Role::Provided => Polarity::Negative,
            Role::Required => Polarity::Positive,
        }
    }

    /// Polarity an event must be allowed in to travel in `direction` relative to
    /// the declaring component.
    pub fn polarity_for(self, direction: Direction) -> Polarity {
        match direction {
            Direction::In => self.inside_polarity(),
            Direction::Out => self.inside_polarity().opposite(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct ComponentId(pub u32);

impl fmt::Display for ComponentId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "c{}", self.0)
    }
}

/// Structured payload carried by an event. Equality is structural.
#[derive(Clone, Debug, PartialEq, Default)]
pub enum Value {
    #[default]
    Null,
    Bool(bool),
    Int(i64),
    Float(f64),
    Str(String),
    List(Vec<Value>),
    Map(BTreeMap<String, Value>),
}

impl Value {
    pub fn str(s: impl Into<String>) -> Value {
        Value::Str(s.into())
    }

    pub fn map<K: Into<String>>(entries: impl IntoIterator<Item = (K, Value)>) -> Value {
        Value::Map(entries.into_iter().map(|(k, v)| (k.into(), v)).collect())
    }

    pub fn get(&self, key: &str) -> Option<&Value> {
        match self {
            Value::Map(m) => m.get(key),
            _ => None,
        }
    }

    pub fn as_int(&self) -> Option<i64> {
        match self {
            Value::Int(i) => Some(*i),
            _ => None,
        }
    }
}

impl From<i64> for Value {
    fn from(v: i64) -> Self {
        Value::Int(v)
    }
}

impl From<&str> for Value {
    fn from(v: &str) -> Self {
        Value::Str(v.into())
    }
}

impl From<bool> for Value {
    fn from(v: bool) -> Self {
        Value::Bool(v)
    }
}

fn write_json_str(f: &mut fmt::Formatter<'_>, s: &str) -> fmt::Result {
    f.write_str("\"")?;
    for c in s.chars() {
        match c {
            '"' => f.write_str("\\\"")?,
            '\\' => f.write_str("\\\\")?,
            '\n' => f.write_str("\\n")?,
            c if (c as u32) < 0x20 => write!(f, "\\u{:04x}", c as u32)?,
            c => write!(f, "{c}")?,
        }
    }
    f.write_str("\"")
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Null => f.write_str("null"),
            Value::Bool(b) => write!(f, "{b}"),
            Value::Int(i) => write!(f, "{i}"),
            Value::Float(x) => write!(f, "{x}"),
            Value::Str(s) => write_json_str(f, s),
            Value::List(items) => {
                f.write_str("[")?;
                for (i, v) in items.iter().enumerate() {
                    if i > 0 {
                        f.write_str(",")?;
                    }
                    write!(f, "{v}")?;
                }
                f.write_str("]")
            }
            Value::Map(m) => {
                f.write_str("{")?;
                for (i, (k, v)) in m.iter().enumerate() {
                    if i > 0 {
                        f.write_str(",")?;
                    }
                    write_json_str(f, k)?;
                    write!(f, ":{v}")?;
                }
                f.write_str("}")
            }
        }
    }
}

struct KindNode {
    name: String,
    parent: Option<EventKind>,
}

/// Nominal event type with single inheritance.
///
/// Chains are acyclic by construction: a parent must exist before its child.
#[derive(Clone)]
pub struct EventKind(Arc<KindNode>);

impl EventKind {
    pub fn new(name: impl Into<String>) -> Self {
        EventKind(Arc::new(KindNode { name: name.into(), parent: None }))
    }

    pub fn subtype(name: impl Into<String>, parent: &EventKind) -> Self {
        EventKind(Arc::new(KindNode { name: name.into(), parent: Some(parent.clone()) }))
    }

    pub fn name(&self) -> &str {
        &self.0.name
    }

    pub fn parent(&self) -> Option<&EventKind> {
        self.0.parent.as_ref()
    }

    /// Iterates over `self` followed by every ancestor, most specific first.
    pub fn lineage(&self) -> impl Iterator<Item = &EventKind> {
        core::iter::successors(Some(self), |k| k.parent())
    }

    pub fn is_assignable_to(&self, other: &EventKind) -> bool {
        self.lineage().any(|k| k == other)
    }
}

impl PartialEq for EventKind {
    fn eq(&self, other: &Self) -> bool {
        Arc::ptr_eq(&self.0, &other.0) || (self.0.name == other.0.name && self.0.parent == other.0.parent)
    }
}

impl fmt::Debug for EventKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0.name)
    }
}

impl fmt::Display for EventKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0.name)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Event {
    pub kind: EventKind,
    pub payload: Value,
}

impl Event {
    pub fn new(kind: &EventKind, payload: impl Into<Value>) -> Self {
        Event { kind: kind.clone(), payload: payload.into() }
    }

    pub fn unit(kind: &EventKind) -> Self {
        Event { kind: kind.clone(), payload: Value::Null }
    }

    pub fn field(&self, key: &str) -> Option<&Value> {
        self.payload.get(key)
    }
}

impl fmt::Display for Event {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.payload {
            Value::Null => write!(f, "{}", self.kind),
            p => write!(f, "{}({})", self.kind, p),
        }
    }
}

struct PortTypeInner {
    id: String,
    positive: Vec<EventKind>,
    negative: Vec<EventKind>,
}

/// Declares which event kinds may pass in each direction. Membership is by
/// assignability, so declaring a kind admits all of its subtypes.
#[derive(Clone)]
pub struct PortType(Arc<PortTypeInner>);

impl PortType {
    pub fn new(
        id: impl Into<String>,
        positive: impl IntoIterator<Item = EventKind>,
        negative: impl IntoIterator<Item = EventKind>,
    ) -> Self {
        PortType(Arc::new(PortTypeInner {
            id: id.into(),
            positive: positive.into_iter().collect(),
            negative: negative.into_iter().collect(),
        }))
    }

    pub fn id(&self) -> &str {
        &self.0.id
    }

    pub fn positive(&self) -> &[EventKind] {
        &self.0.positive
    }

    pub fn negative(&self) -> &[EventKind] {
        &self.0.negative
    }

    pub fn allows(&self, kind: &EventKind, polarity: Polarity) -> bool {
        let set = match polarity {
            Polarity::Positive => &self.0.positive,
            Polarity::Negative => &self.0.negative,
        };
        set.iter().any(|k| kind.is_assignable_to(k))
    }
}

impl PartialEq for PortType {
    fn eq(&self, other: &Self) -> bool {
        Arc::ptr_eq(&self.0, &other.0) || self.0.id == other.0.id
    }
}

impl fmt::Debug for PortType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "PortType({})", self.0.id)
    }
}

struct PortDecl {
    id: String,
    port_type: PortType,
    role: Role,
    declarer: ComponentId,
    parent: Option<ComponentId>,
}

/// One side of a declared port pair.
///
/// Two references denote the same *port* when they come from the same
/// declaration, whichever side they point at; this is what symbols and
/// matchers compare.
#[derive(Clone)]
pub struct PortRef {
    decl: Arc<PortDecl>,
    polarity: Polarity,
}

impl PortRef {
    /// Materializes both sides of a port declaration, returning `(inside, outside)`.
    pub fn declare(
        id: impl Into<String>,
        port_type: &PortType,
        role: Role,
        declarer: ComponentId,
        parent: Option<ComponentId>,
    ) -> (PortRef, PortRef) {
        let decl = Arc::new(PortDecl { id: id.into(), port_type: port_type.clone(), role, declarer, parent });
        let inside = role.inside_polarity();
        (PortRef { decl: decl.clone(), polarity: inside }, PortRef { decl, polarity: inside.opposite() })
    }

    pub fn id(&self) -> &str {
        &self.decl.id
    }

    pub fn port_type(&self) -> &PortType {
        &self.decl.port_type
    }

    pub fn role(&self) -> Role {
        self.decl.role
    }

    pub fn polarity(&self) -> Polarity {
        self.polarity
    }

    pub fn is_inside(&self) -> bool {
        self.polarity == self.decl.role.inside_polarity()
    }

    pub fn declarer(&self) -> ComponentId {
        self.decl.declarer
    }

    /// Component scheduled when an event arrives at this side: the declarer for
    /// the inside, the declarer's parent (if any) for the outside.
    pub fn owner(&self) -> ComponentId {
        if self.is_inside() {
            self.decl.declarer
        } else {
            self.decl.parent.unwrap_or(self.decl.declarer)
        }
    }

    pub fn twin(&self) -> PortRef {
        PortRef { decl: self.decl.clone(), polarity: self.polarity.opposite() }
    }

    pub fn inside(&self) -> PortRef {
        if self.is_inside() {
            self.clone()
        } else {
            self.twin()
        }
    }

    pub fn outside(&self) -> PortRef {
        if self.is_inside() {
            self.twin()
        } else {
            self.clone()
        }
    }

    /// True when both references belong to the same declaration.
    pub fn same_port(&self, other: &PortRef) -> bool {
        Arc::ptr_eq(&self.decl, &other.decl) || self.decl.id == other.decl.id
    }

    /// True when both references are the same side of the same declaration.
    /// Unlike `==`, ports of other components that merely share an id differ.
    pub fn identical(&self, other: &PortRef) -> bool {
        Arc::ptr_eq(&self.decl, &other.decl) && self.polarity == other.polarity
    }

    /// Whether `kind` may travel in `direction` relative to the declarer.
    pub fn allows(&self, kind: &EventKind, direction: Direction) -> bool {
        self.decl.port_type.allows(kind, self.decl.role.polarity_for(direction))
    }
}

impl PartialEq for PortRef {
    fn eq(&self, other: &Self) -> bool {
        self.same_port(other) && self.polarity == other.polarity
    }
}

impl fmt::Debug for PortRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let sign = match self.polarity {
            Polarity::Positive => '+',
            Polarity::Negative => '-',
        };
        write!(f, "{}{}", self.decl.id, sign)
    }
}

impl fmt::Display for PortRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.decl.id)
    }
}

#[derive(Clone, Debug, PartialEq, thiserror::Error)]
#[error("port {port} does not allow {kind} travelling {direction}")]
pub struct TypeDirectionViolation {
    pub kind: String,
    pub port: String,
    pub direction: Direction,
}

/// One letter of the execution alphabet.
#[derive(Clone, Debug)]
pub struct EventSymbol {
    pub event: Event,
    pub port: PortRef,
    pub direction: Direction,
}

impl PartialEq for EventSymbol {
    fn eq(&self, other: &Self) -> bool {
        self.direction == other.direction && self.port.same_port(&other.port) && self.event == other.event
    }
}

impl fmt::Display for EventSymbol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}@{}:{}", self.event, self.port, self.direction)
    }
}

/// Builds a well-formed symbol: a provided port takes `In` events from its
/// negative set and emits `Out` events from its positive set; a required port
/// is the mirror image.
pub fn make_symbol(event: Event, port: &PortRef, direction: Direction) -> Result<EventSymbol, TypeDirectionViolation> {
    if !port.allows(&event.kind, direction) {
        return Err(TypeDirectionViolation {
            kind: event.kind.name().to_string(),
            port: port.id().to_string(),
            direction,
        });
    }
    Ok(EventSymbol { event, port: port.clone(), direction })
}

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
#[error("predicate failed: {message}")]
pub struct PredicateError {
    pub message: String,
}

type PredicateFn = dyn Fn(&Event) -> Result<bool, PredicateError> + Send + Sync;

/// Shared event predicate. Equality is identity of the underlying closure.
#[derive(Clone)]
pub struct Predicate(Arc<PredicateFn>);

impl Predicate {
    pub fn new(f: impl Fn(&Event) -> bool + Send + Sync + 'static) -> Self {
        Predicate(Arc::new(move |e| Ok(f(e))))
    }

    /// A predicate that can fail; failures are reported as test errors and
    /// count as a non-match.
    pub fn fallible(f: impl Fn(&Event) -> Result<bool, String> + Send + Sync + 'static) -> Self {
        Predicate(Arc::new(move |e| f(e).map_err(|message| PredicateError { message })))
    }

    pub fn call(&self, event: &Event) -> Result<bool, PredicateError> {
        (self.0)(event)
    }
}

impl PartialEq for Predicate {
    fn eq(&self, other: &Self) -> bool {
        Arc::ptr_eq(&self.0, &other.0)
    }
}

impl fmt::Debug for Predicate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("Predicate(..)")
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Pattern {
    Concrete(Event),
    Kind { kind: EventKind, predicate: Predicate },
}

/// Describes the symbols an expectation accepts.
#[derive(Clone, Debug, PartialEq)]
pub struct Matcher {
    pub pattern: Pattern,
    pub port: PortRef,
    pub direction: Direction,
}

impl Matcher {
    pub fn concrete(event: Event, port: &PortRef, direction: Direction) -> Self {
        Matcher { pattern: Pattern::Concrete(event), port: port.clone(), direction }
    }

    pub fn of_symbol(symbol: &EventSymbol) -> Self {
        Matcher::concrete(symbol.event.clone(), &symbol.port, symbol.direction)
    }

    pub fn kind(
        kind: &EventKind,
        port: &PortRef,
        direction: Direction,
        predicate: impl Fn(&Event) -> bool + Send + Sync + 'static,
    ) -> Self {
        Matcher::with_predicate(kind, Predicate::new(predicate), port, direction)
    }

    pub fn with_predicate(kind: &EventKind, predicate: Predicate, port: &PortRef, direction: Direction) -> Self {
        Matcher { pattern: Pattern::Kind { kind: kind.clone(), predicate }, port: port.clone(), direction }
    }

    /// The single symbol a concrete matcher stands for.
    pub fn symbol(&self) -> Option<EventSymbol> {
        match &self.pattern {
            Pattern::Concrete(e) => {
                Some(EventSymbol { event: e.clone(), port: self.port.clone(), direction: self.direction })
            }
            Pattern::Kind { .. } => None,
        }
    }

    pub fn is_predicate(&self) -> bool {
        matches!(self.pattern, Pattern::Kind { .. })
    }

    /// Structural identity used for constraint tables: predicates are compared
    /// by their declared kind only.
    pub fn same_identity(&self, other: &Matcher) -> bool {
        if self.direction != other.direction || !self.port.same_port(&other.port) {
            return false;
        }
        match (&self.pattern, &other.pattern) {
            (Pattern::Concrete(a), Pattern::Concrete(b)) => a == b,
            (Pattern::Kind { kind: a, .. }, Pattern::Kind { kind: b, .. }) => a == b,
            _ => false,
        }
    }

    pub fn evaluate(&self, observed: &EventSymbol, registry: &ComparatorRegistry) -> Result<bool, PredicateError> {
        if self.direction != observed.direction || !self.port.same_port(&observed.port) {
            return Ok(false);
        }
        match &self.pattern {
            Pattern::Concrete(expected) => Ok(registry.equal(expected, &observed.event)),
            Pattern::Kind { kind, predicate } => {
                if !observed.event.kind.is_assignable_to(kind) {
                    return Ok(false);
                }
                predicate.call(&observed.event)
            }
        }
    }

    pub fn matches(&self, observed: &EventSymbol, registry: &ComparatorRegistry) -> bool {
        self.evaluate(observed, registry).unwrap_or(false)
    }
}

impl fmt::Display for Matcher {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.pattern {
            Pattern::Concrete(e) => write!(f, "{}@{}:{}", e, self.port, self.direction),
            Pattern::Kind { kind, .. } => write!(f, "{}[?]@{}:{}", kind, self.port, self.direction),
        }
    }
}

/// Free-function form of [`Matcher::matches`].
pub fn matches(matcher: &Matcher, observed: &EventSymbol, registry: &ComparatorRegistry) -> bool {
    matcher.matches(observed, registry)
}

type ComparatorFn = dyn Fn(&Event, &Event) -> bool + Send + Sync;

#[derive(Clone)]
pub struct Comparator(Arc<ComparatorFn>);

impl Comparator {
    pub fn new(f: impl Fn(&Event, &Event) -> bool + Send + Sync + 'static) -> Self {
        Comparator(Arc::new(f))
    }

    pub fn compare(&self, expected: &Event, observed: &Event) -> bool {
        (self.0)(expected, observed)
    }
}

impl PartialEq for Comparator {
    fn eq(&self, other: &Self) -> bool {
        Arc::ptr_eq(&self.0, &other.0)
    }
}

impl fmt::Debug for Comparator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("Comparator(..)")
    }
}

/// User-defined event equality, keyed by event kind.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ComparatorRegistry {
    entries: Vec<(EventKind, Comparator)>,
}

impl ComparatorRegistry {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Registered entries in registration order.
    pub fn iter(&self) -> impl Iterator<Item = (&EventKind, &Comparator)> {
        self.entries.iter().map(|(k, c)| (k, c))
    }

    /// Registers `cmp` for `kind`, replacing an earlier registration for the
    /// same kind.
    pub fn register(
        &mut self,
        kind: &EventKind,
        cmp: impl Fn(&Event, &Event) -> bool + Send + Sync + 'static,
    ) -> &mut Self {
        self.register_comparator(kind, Comparator::new(cmp))
    }

    pub fn register_comparator(&mut self, kind: &EventKind, cmp: Comparator) -> &mut Self {
        self.entries.retain(|(k, _)| k != kind);
        self.entries.push((kind.clone(), cmp));
        self
    }

    /// Most specific registered kind that both events are assignable to.
    pub fn resolve(&self, expected: &Event, observed: &Event) -> Option<&Comparator> {
        expected
            .kind
            .lineage()
            .filter(|k| observed.kind.is_assignable_to(k))
            .find_map(|k| self.entries.iter().rev().find(|(rk, _)| rk == k).map(|(_, c)| c))
    }

    pub fn equal(&self, expected: &Event, observed: &Event) -> bool {
        match self.resolve(expected, observed) {
            Some(cmp) => cmp.compare(expected, observed),
            None => expected == observed,
        }
    }
}

/// Functional form of [`ComparatorRegistry::register`].
pub fn register_comparator(
    mut registry: ComparatorRegistry,
    kind: &EventKind,
    cmp: impl Fn(&Event, &Event) -> bool + Send + Sync + 'static,
) -> ComparatorRegistry {
    registry.register(kind, cmp);
    registry
}

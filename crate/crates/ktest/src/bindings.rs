//! Offline name bindings: a JSON object mapping spec identifiers either to an
//! event `{"kind": .., "payload": ..}` or to a port id string.

use std::collections::BTreeMap;

use ktest_core::text::SymbolTable;
use ktest_core::{ComponentId, Event, EventKind, PortRef, PortType, Role, Value};

#[derive(Debug, thiserror::Error)]
pub enum BindingsError {
    #[error("bindings are not valid JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error("bindings must be a JSON object")]
    NotObject,
    #[error("binding `{name}`: {reason}")]
    Invalid { name: String, reason: &'static str },
}

/// Ports and kinds of an offline session. Every port admits every kind in
/// both directions, so any recorded symbol is well-formed.
#[derive(Debug)]
pub struct Universe {
    root: EventKind,
    kinds: BTreeMap<String, EventKind>,
    ports: BTreeMap<String, PortRef>,
}

impl Default for Universe {
    fn default() -> Self {
        Universe { root: EventKind::new("*"), kinds: BTreeMap::new(), ports: BTreeMap::new() }
    }
}

impl Universe {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn kind(&mut self, name: &str) -> EventKind {
        let root = &self.root;
        self.kinds.entry(name.to_string()).or_insert_with(|| EventKind::subtype(name, root)).clone()
    }

    /// The outside of the recorded component's port `id`.
    pub fn port(&mut self, id: &str) -> PortRef {
        let root = &self.root;
        self.ports
            .entry(id.to_string())
            .or_insert_with(|| {
                let pt = PortType::new(id, [root.clone()], [root.clone()]);
                PortRef::declare(id, &pt, Role::Provided, ComponentId(0), None).1
            })
            .clone()
    }

    pub fn event(&mut self, kind: &str, payload: Value) -> Event {
        Event::new(&self.kind(kind), payload)
    }
}

pub fn to_value(v: &serde_json::Value) -> Value {
    match v {
        serde_json::Value::Null => Value::Null,
        serde_json::Value::Bool(b) => Value::Bool(*b),
        serde_json::Value::Number(n) => match n.as_i64() {
            Some(i) => Value::Int(i),
            None => Value::Float(n.as_f64().unwrap_or(f64::NAN)),
        },
        serde_json::Value::String(s) => Value::Str(s.clone()),
        serde_json::Value::Array(a) => Value::List(a.iter().map(to_value).collect()),
        serde_json::Value::Object(o) => Value::Map(o.iter().map(|(k, v)| (k.clone(), to_value(v))).collect()),
    }
}

pub fn from_value(v: &Value) -> serde_json::Value {
    match v {
        Value::Null => serde_json::Value::Null,
        Value::Bool(b) => (*b).into(),
        Value::Int(i) => (*i).into(),
        Value::Float(x) => serde_json::Number::from_f64(*x).map_or(serde_json::Value::Null, Into::into),
        Value::Str(s) => s.clone().into(),
        Value::List(items) => items.iter().map(from_value).collect(),
        Value::Map(m) => m.iter().map(|(k, v)| (k.clone(), from_value(v))).collect::<serde_json::Map<_, _>>().into(),
    }
}

/// Reads `{kind, payload}` into an event of `universe`.
pub(crate) fn event_of(universe: &mut Universe, v: &serde_json::Value) -> Result<Event, &'static str> {
    let obj = v.as_object().ok_or("event must be an object")?;
    let kind = obj.get("kind").and_then(|k| k.as_str()).ok_or("event needs a string `kind`")?;
    let payload = obj.get("payload").map_or(Value::Null, to_value);
    Ok(universe.event(kind, payload))
}

pub fn parse_bindings(src: &str, universe: &mut Universe) -> Result<SymbolTable, BindingsError> {
    let json: serde_json::Value = serde_json::from_str(src)?;
    let obj = json.as_object().ok_or(BindingsError::NotObject)?;
    let mut table = SymbolTable::new();
    for (name, v) in obj {
        let invalid = |reason| BindingsError::Invalid { name: name.clone(), reason };
        if ktest_core::text::is_keyword(name) {
            return Err(invalid("is a keyword"));
        }
        match v {
            serde_json::Value::String(id) => {
                table.port(name.clone(), universe.port(id));
            }
            serde_json::Value::Object(_) => {
                table.event(name.clone(), event_of(universe, v).map_err(invalid)?);
            }
            _ => return Err(invalid("must be a port id string or an {kind, payload} object")),
        }
    }
    Ok(table)
}

use alloc::string::String;
use alloc::vec::Vec;
use core::fmt::Write;

use super::{Automaton, Edge, Label, Role, StateKind};

fn escape(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for c in s.chars() {
        match c {
            '"' => out.push_str("\\\""),
            '\\' => out.push_str("\\\\"),
            '\n' => out.push_str("\\n"),
            c => out.push(c),
        }
    }
    out
}

fn node_name(a: &Automaton, s: usize) -> String {
    match a.states[s].kind {
        StateKind::Error => "err".into(),
        _ => alloc::format!("q{s}"),
    }
}

fn edge_label(a: &Automaton, e: &Edge) -> String {
    let mut label = match &e.label {
        Label::Epsilon if e.guard.is_empty() && e.effects.is_empty() => return "ε".into(),
        Label::Epsilon => String::new(),
        Label::Consume { matcher, role } => {
            let prefix = match role {
                Role::Body | Role::Unordered | Role::BlockExpect => "",
                Role::Allow => "allow ",
                Role::Drop => "drop ",
                Role::Disallow => "disallow ",
            };
            alloc::format!("{prefix}{matcher}")
        }
        Label::ReqRes { entry } => match &a.states[e.from].kind {
            StateKind::ReqRes { entries, .. } => {
                let en = &entries[*entry];
                alloc::format!("{}@{}:out => {}", en.request_kind, en.request_port, en.response_port)
            }
            _ => String::new(),
        },
    };
    if !e.guard.is_empty() {
        let conds: Vec<String> = e.guard.iter().map(|c| alloc::format!("{c}")).collect();
        if !label.is_empty() {
            label.push(' ');
        }
        let _ = write!(label, "[{}]", conds.join(" & "));
    }
    if !e.effects.is_empty() {
        let fx: Vec<String> = e.effects.iter().map(|f| alloc::format!("{f}")).collect();
        let _ = write!(label, " / {}", fx.join(", "));
    }
    label
}

/// Renders the automaton as a Graphviz digraph. Output depends only on the
/// automaton, so equal automata give byte-identical text.
pub fn to_dot(a: &Automaton) -> String {
    let mut out = String::new();
    out.push_str("digraph automaton {\n  rankdir=LR;\n  node [shape=circle];\n");
    for (i, st) in a.states.iter().enumerate() {
        let name = node_name(a, i);
        let mut attrs: Vec<String> = Vec::new();
        let detail = match &st.kind {
            StateKind::Plain => None,
            StateKind::Unordered { slot } => Some(alloc::format!("unordered b{slot}")),
            StateKind::ReqRes { slot, .. } => Some(alloc::format!("reqres b{slot}")),
            StateKind::Sink { slot } => Some(alloc::format!("sink b{slot}")),
            StateKind::Trigger { event, port } => Some(alloc::format!("trigger {event}@{port}")),
            StateKind::Inspect(_) => Some("inspect".into()),
            StateKind::Error => None,
        };
        if let Some(d) = detail {
            attrs.push(alloc::format!("label=\"{}\\n{}\"", name, escape(&d)));
        }
        if a.is_final(i) {
            attrs.push("shape=doublecircle".into());
        }
        if st.kind == StateKind::Error {
            attrs.push("shape=box".into());
        }
        if st.kind.is_active() {
            attrs.push("style=filled".into());
        }
        if i == a.start {
            attrs.push("penwidth=2".into());
        }
        if attrs.is_empty() {
            let _ = writeln!(out, "  {name};");
        } else {
            let _ = writeln!(out, "  {name} [{}];", attrs.join(", "));
        }
    }
    for e in &a.edges {
        let _ = writeln!(
            out,
            "  {} -> {} [label=\"{}\"];",
            node_name(a, e.from),
            node_name(a, e.to),
            escape(&edge_label(a, e))
        );
    }
    out.push_str("}\n");
    out
}

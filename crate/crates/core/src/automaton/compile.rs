use alloc::collections::VecDeque;
use alloc::vec;
use alloc::vec::Vec;

use super::{Automaton, Cond, Edge, Effect, Label, Role, State, StateId, StateKind};
use crate::event::Matcher;
use crate::spec::{Block, BodyStmt, ConstraintKind, EffectiveTable, ValidatedSpec};

#[derive(Clone, Debug)]
struct Frag {
    entry: StateId,
    exits: Vec<StateId>,
}

struct Scope<'a> {
    parent: Option<usize>,
    table: &'a EffectiveTable,
    expect: Option<(usize, Vec<Matcher>)>,
}

struct Gen<'a> {
    states: Vec<Option<State>>,
    edges: Vec<Option<Edge>>,
    scopes: Vec<Scope<'a>>,
    tables: core::slice::Iter<'a, EffectiveTable>,
    slots: usize,
    counters: usize,
}

fn mask(n: usize) -> u64 {
    if n >= 64 {
        u64::MAX
    } else {
        (1u64 << n) - 1
    }
}

/// Builds the automaton for a validated spec.
pub fn compile(spec: &ValidatedSpec) -> Automaton {
    let mut g = Gen {
        states: Vec::new(),
        edges: Vec::new(),
        scopes: Vec::new(),
        tables: spec.tables().iter(),
        slots: 0,
        counters: 0,
    };
    let root = g.block(&spec.ast.root, None);
    g.constraints(spec.tables().first());
    g.finish(root, spec)
}

impl<'a> Gen<'a> {
    fn state(&mut self, kind: StateKind, owner: Option<usize>) -> StateId {
        self.states.push(Some(State { kind, owner }));
        self.states.len() - 1
    }

    fn plain(&mut self, owner: Option<usize>) -> StateId {
        self.state(StateKind::Plain, owner)
    }

    fn st(&self, s: StateId) -> &State {
        self.states[s].as_ref().expect("live state")
    }

    fn edge(&mut self, from: StateId, to: StateId, label: Label, guard: Vec<Cond>, effects: Vec<Effect>) {
        self.edges.push(Some(Edge { from, to, label, guard, effects }));
    }

    fn eps(&mut self, from: StateId, to: StateId) {
        self.edge(from, to, Label::Epsilon, vec![], vec![]);
    }

    fn outs(&self, s: StateId) -> impl Iterator<Item = &Edge> {
        self.edges.iter().flatten().filter(move |e| e.from == s)
    }

    fn ins(&self, s: StateId) -> impl Iterator<Item = &Edge> {
        self.edges.iter().flatten().filter(move |e| e.to == s)
    }

    fn is_bare_eps(e: &Edge, to: StateId) -> bool {
        e.is_epsilon() && e.to == to && e.guard.is_empty() && e.effects.is_empty()
    }

    /// `u`'s only way forward is a plain ε edge to `v`.
    fn only_eps_to(&self, u: StateId, v: StateId) -> bool {
        let mut outs = self.outs(u);
        matches!(outs.next(), Some(e) if Self::is_bare_eps(e, v)) && outs.next().is_none()
    }

    /// `v` is only reachable through a plain ε edge from `u`.
    fn only_eps_from(&self, u: StateId, v: StateId) -> bool {
        let mut ins = self.ins(v);
        matches!(ins.next(), Some(e) if e.from == u && Self::is_bare_eps(e, v)) && ins.next().is_none()
    }

    /// Replaces `a` by `b` everywhere and removes the ε edges between them.
    fn merge(&mut self, a: StateId, b: StateId) {
        for slot in self.edges.iter_mut() {
            let Some(e) = slot else { continue };
            if ((e.from == a && e.to == b) || (e.from == b && e.to == a))
                && e.is_epsilon()
                && e.guard.is_empty()
                && e.effects.is_empty()
            {
                *slot = None;
                continue;
            }
            if e.from == a {
                e.from = b;
            }
            if e.to == a {
                e.to = b;
            }
        }
        self.states[a] = None;
    }

    /// Case 1: a plain `u` whose only successor is `v` disappears into `v`.
    fn try_absorb(&mut self, u: StateId, v: StateId) -> bool {
        if u != v && self.st(u).kind == StateKind::Plain && self.only_eps_to(u, v) {
            self.merge(u, v);
            true
        } else {
            false
        }
    }

    /// Case 2: a plain `v` reachable only from `u` disappears into `u`.
    fn try_pull(&mut self, u: StateId, v: StateId) -> bool {
        if u != v
            && self.st(v).kind == StateKind::Plain
            && self.st(u).owner == self.st(v).owner
            && self.only_eps_from(u, v)
        {
            self.merge(v, u);
            true
        } else {
            false
        }
    }

    /// Connects every exit of `f` to the entry of `g`, contracting the glue.
    fn concat(&mut self, f: Frag, g: Frag) -> Frag {
        let v = g.entry;
        let mut entry = f.entry;
        let mut exits = g.exits;
        for &u in &f.exits {
            if u != v {
                self.eps(u, v);
            }
        }
        let mut absorbed = false;
        for &u in &f.exits {
            if self.try_absorb(u, v) {
                absorbed = true;
                if entry == u {
                    entry = v;
                }
            }
        }
        if !absorbed && f.exits.len() == 1 {
            let u = f.exits[0];
            if self.try_pull(u, v) {
                for x in exits.iter_mut() {
                    if *x == v {
                        *x = u;
                    }
                }
            }
        }
        Frag { entry, exits }
    }

    /// Routes every exit into `t`, absorbing exits that only lead there.
    fn funnel(&mut self, body: &mut Frag, t: StateId) {
        for u in body.exits.clone() {
            if u != t {
                self.eps(u, t);
                if self.try_absorb(u, t) && body.entry == u {
                    body.entry = t;
                }
            }
        }
        body.exits = vec![t];
    }

    fn seq(&mut self, stmts: &[BodyStmt], scope: Option<usize>) -> Frag {
        let mut acc: Option<Frag> = None;
        for s in stmts {
            let f = self.stmt(s, scope);
            acc = Some(match acc {
                None => f,
                Some(a) => self.concat(a, f),
            });
        }
        acc.unwrap_or_else(|| {
            let s = self.plain(scope);
            Frag { entry: s, exits: vec![s] }
        })
    }

    fn stmt(&mut self, s: &BodyStmt, scope: Option<usize>) -> Frag {
        match s {
            BodyStmt::Expect(m) => {
                let a = self.plain(scope);
                let b = self.plain(scope);
                self.edge(a, b, Label::Consume { matcher: m.clone(), role: Role::Body }, vec![], vec![]);
                Frag { entry: a, exits: vec![b] }
            }
            BodyStmt::Trigger { event, port } => {
                let kind = StateKind::Trigger { event: event.clone(), port: port.clone() };
                self.active(kind, scope)
            }
            BodyStmt::Inspect(i) => self.active(StateKind::Inspect(i.clone()), scope),
            BodyStmt::Unordered(ms) => {
                let slot = self.slot();
                let u = self.state(StateKind::Unordered { slot }, scope);
                let x = self.plain(scope);
                for (bit, m) in ms.iter().enumerate() {
                    let bit = bit as u32;
                    self.edge(
                        u,
                        u,
                        Label::Consume { matcher: m.clone(), role: Role::Unordered },
                        vec![Cond::BitClear { slot, bit }],
                        vec![Effect::SetBit { slot, bit }],
                    );
                }
                self.edge(
                    u,
                    x,
                    Label::Epsilon,
                    vec![Cond::AllSet { slot, mask: mask(ms.len()) }],
                    vec![Effect::Clear { slot }],
                );
                Frag { entry: u, exits: vec![x] }
            }
            BodyStmt::ExpectMapped(entries) => {
                let slot = self.slot();
                let r = self.state(StateKind::ReqRes { slot, entries: entries.clone() }, scope);
                let x = self.plain(scope);
                for i in 0..entries.len() {
                    let bit = i as u32;
                    self.edge(
                        r,
                        r,
                        Label::ReqRes { entry: i },
                        vec![Cond::BitClear { slot, bit }],
                        vec![Effect::SetBit { slot, bit }],
                    );
                }
                self.edge(
                    r,
                    x,
                    Label::Epsilon,
                    vec![Cond::AllSet { slot, mask: mask(entries.len()) }],
                    vec![Effect::Clear { slot }],
                );
                Frag { entry: r, exits: vec![x] }
            }
            BodyStmt::EitherOr(a, b) => {
                let fa = self.seq(a, scope);
                let fb = self.seq(b, scope);
                let s = self.plain(scope);
                self.eps(s, fa.entry);
                self.eps(s, fb.entry);
                let mut exits = fa.exits;
                exits.extend(fb.exits);
                for v in [fa.entry, fb.entry] {
                    if self.try_pull(s, v) {
                        for x in exits.iter_mut() {
                            if *x == v {
                                *x = s;
                            }
                        }
                    }
                }
                Frag { entry: s, exits }
            }
            BodyStmt::Block(b) => self.block(b, scope),
        }
    }

    fn active(&mut self, kind: StateKind, scope: Option<usize>) -> Frag {
        let a = self.state(kind, scope);
        let n = self.plain(scope);
        self.eps(a, n);
        Frag { entry: a, exits: vec![n] }
    }

    fn slot(&mut self) -> usize {
        self.slots += 1;
        self.slots - 1
    }

    fn block(&mut self, b: &Block, parent: Option<usize>) -> Frag {
        let table = self.tables.next().expect("one table per block");
        let scope = if b.headers.is_empty() {
            parent
        } else {
            let required: Vec<Matcher> = b.block_expect().cloned().collect();
            let expect = if required.is_empty() { None } else { Some((self.slot(), required)) };
            self.scopes.push(Scope { parent, table, expect });
            Some(self.scopes.len() - 1)
        };
        let expect = scope
            .filter(|_| !b.headers.is_empty())
            .and_then(|s| self.scopes[s].expect.as_ref().map(|(slot, ms)| (*slot, mask(ms.len()))));
        let body = self.seq(&b.body, scope);
        match b.count.map(|n| n.get()) {
            None => self.kleene(body, scope, parent, expect),
            Some(1) => self.once(body, scope, parent, expect),
            Some(n) => self.repeat(body, n, scope, parent, expect),
        }
    }

    /// Exit guard for blocks with blockExpect requirements.
    fn exit_guard(expect: Option<(usize, u64)>) -> (Vec<Cond>, Vec<Effect>) {
        match expect {
            Some((slot, mask)) => (vec![Cond::AllSet { slot, mask }], vec![Effect::Clear { slot }]),
            None => (vec![], vec![]),
        }
    }

    fn sink(&mut self, body: &mut Frag, scope: Option<usize>, slot: usize) -> StateId {
        let t = self.state(StateKind::Sink { slot }, scope);
        self.funnel(body, t);
        t
    }

    fn once(
        &mut self,
        mut body: Frag,
        scope: Option<usize>,
        parent: Option<usize>,
        expect: Option<(usize, u64)>,
    ) -> Frag {
        if let Some((slot, _)) = expect {
            let t = self.sink(&mut body, scope, slot);
            let x = self.plain(parent);
            let (guard, effects) = Self::exit_guard(expect);
            self.edge(t, x, Label::Epsilon, guard, effects);
            return Frag { entry: body.entry, exits: vec![x] };
        }
        if scope == parent {
            return body;
        }
        let mut shared_exit = None;
        let mut exits = Vec::new();
        for &u in &body.exits {
            if self.outs(u).next().is_none() {
                self.states[u].as_mut().unwrap().owner = parent;
                exits.push(u);
            } else {
                let x = *shared_exit.get_or_insert_with(|| {
                    let x = self.plain(parent);
                    exits.push(x);
                    x
                });
                self.eps(u, x);
            }
        }
        Frag { entry: body.entry, exits }
    }

    fn kleene(
        &mut self,
        mut body: Frag,
        scope: Option<usize>,
        parent: Option<usize>,
        expect: Option<(usize, u64)>,
    ) -> Frag {
        let simple = scope == parent
            && self.ins(body.entry).next().is_none()
            && body.exits.iter().all(|&x| self.outs(x).next().is_none());
        if simple {
            for &x in &body.exits {
                if x != body.entry {
                    self.eps(body.entry, x);
                    self.eps(x, body.entry);
                }
            }
            return body;
        }
        let a = self.plain(parent);
        self.eps(a, body.entry);
        match expect {
            Some((slot, _)) => {
                let t = self.sink(&mut body, scope, slot);
                let (guard, effects) = Self::exit_guard(expect);
                self.edge(t, a, Label::Epsilon, guard, effects);
            }
            None => {
                for &x in &body.exits {
                    if x == a {
                        continue;
                    }
                    self.eps(x, a);
                    self.try_absorb(x, a);
                }
            }
        }
        if self.states[body.entry].is_some() {
            self.try_pull(a, body.entry);
        }
        Frag { entry: a, exits: vec![a] }
    }

    fn repeat(
        &mut self,
        mut body: Frag,
        n: u32,
        scope: Option<usize>,
        parent: Option<usize>,
        expect: Option<(usize, u64)>,
    ) -> Frag {
        let t = match expect {
            Some((slot, _)) => self.sink(&mut body, scope, slot),
            None => {
                let t = self.plain(scope);
                self.funnel(&mut body, t);
                t
            }
        };
        self.counters += 1;
        let counter = self.counters - 1;
        let x = self.plain(parent);
        let (mut again, mut again_fx) = Self::exit_guard(expect);
        let (mut done, mut done_fx) = (again.clone(), again_fx.clone());
        again.push(Cond::CounterBelow { counter, value: n - 1 });
        again_fx.push(Effect::Inc { counter });
        done.push(Cond::CounterAt { counter, value: n - 1 });
        done_fx.push(Effect::Reset { counter });
        self.edge(t, body.entry, Label::Epsilon, again, again_fx);
        self.edge(t, x, Label::Epsilon, done, done_fx);
        Frag { entry: body.entry, exits: vec![x] }
    }

    /// Adds allow/drop self-loops, disallow edges, and blockExpect bit loops.
    fn constraints(&mut self, root: Option<&'a EffectiveTable>) {
        let mut err = None;
        for s in 0..self.states.len() {
            let owner = match &self.states[s] {
                Some(st) if !st.kind.is_active() && st.kind != StateKind::Error => st.owner,
                _ => continue,
            };
            let table = match owner {
                Some(sc) => Some(self.scopes[sc].table),
                None => root,
            };
            for (m, kind) in table.map(|t| t.entries()).unwrap_or(&[]) {
                let label = |role| Label::Consume { matcher: m.clone(), role };
                match kind {
                    ConstraintKind::Allow if owner.is_some() => self.edge(s, s, label(Role::Allow), vec![], vec![]),
                    ConstraintKind::Drop if owner.is_some() => self.edge(s, s, label(Role::Drop), vec![], vec![]),
                    ConstraintKind::Disallow => {
                        let e = match err {
                            Some(e) => e,
                            None => *err.insert(self.state(StateKind::Error, None)),
                        };
                        self.edge(s, e, label(Role::Disallow), vec![], vec![]);
                    }
                    _ => {}
                }
            }
            let mut sc = owner;
            while let Some(i) = sc {
                if let Some((slot, ms)) = self.scopes[i].expect.clone() {
                    for (bit, m) in ms.into_iter().enumerate() {
                        let bit = bit as u32;
                        self.edge(
                            s,
                            s,
                            Label::Consume { matcher: m, role: Role::BlockExpect },
                            vec![Cond::BitClear { slot, bit }],
                            vec![Effect::SetBit { slot, bit }],
                        );
                    }
                }
                sc = self.scopes[i].parent;
            }
        }
    }

    /// Renumbers live states breadth-first from the start state.
    fn finish(self, root: Frag, spec: &ValidatedSpec) -> Automaton {
        let n = self.states.len();
        let mut order = Vec::with_capacity(n);
        let mut id = vec![usize::MAX; n];
        let mut queue = VecDeque::from([root.entry]);
        id[root.entry] = 0;
        let mut error_state = None;
        while let Some(s) = queue.pop_front() {
            order.push(s);
            for e in self.edges.iter().flatten().filter(|e| e.from == s) {
                if id[e.to] == usize::MAX {
                    if self.st(e.to).kind == StateKind::Error {
                        error_state = Some(e.to);
                        continue;
                    }
                    id[e.to] = order.len() + queue.len();
                    queue.push_back(e.to);
                }
            }
        }
        #[allow(clippy::needless_range_loop)]
        for s in 0..n {
            if self.states[s].is_some() && id[s] == usize::MAX && Some(s) != error_state {
                id[s] = order.len();
                order.push(s);
            }
        }
        if let Some(e) = error_state {
            id[e] = order.len();
            order.push(e);
        }
        let states: Vec<State> = order.iter().map(|&s| self.st(s).clone()).collect();
        let mut edges: Vec<Edge> = self
            .edges
            .into_iter()
            .flatten()
            .map(|mut e| {
                e.from = id[e.from];
                e.to = id[e.to];
                e
            })
            .collect();
        // Stable by source so per-state edge order follows construction order.
        edges.sort_by_key(|e| e.from);
        let mut out = vec![Vec::new(); states.len()];
        for (i, e) in edges.iter().enumerate() {
            out[e.from].push(i);
        }
        let mut finals: Vec<StateId> = root.exits.iter().map(|&x| id[x]).collect();
        finals.sort_unstable();
        finals.dedup();
        Automaton {
            states,
            edges,
            out,
            start: 0,
            finals,
            slots: self.slots,
            counters: self.counters,
            comparators: spec.ast.comparators.clone(),
        }
    }
}

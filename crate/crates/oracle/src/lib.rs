//! Test-only helpers: a set-semantics interpreter over the spec tree and a
//! random spec generator.
//!
//! The interpreter computes languages directly on sets of words, with no
//! automaton involved, so it can serve as a reference for the compiled form.

use std::collections::BTreeSet;

use ktest_core::text::SymbolTable;
use ktest_core::{
    Block, BodyStmt, ComponentId, Direction, Event, EventKind, EventSymbol, HeaderStmt, Inspect, Matcher, PortRef,
    PortType, Predicate, Role, SpecAst,
};
use rand::seq::SliceRandom;
use rand::Rng;

pub type Word = Vec<usize>;
pub type Lang = BTreeSet<Word>;

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Unsupported {
    Active,
    Mapped,
    Predicate,
    Constraint,
    /// A matcher whose symbol is not in the alphabet.
    Foreign(String),
}

/// Words of length at most `max_len` accepted by `ast`, as indices into
/// `alphabet`.
pub fn language(ast: &SpecAst, alphabet: &[EventSymbol], max_len: usize) -> Result<Lang, Unsupported> {
    Interp { alphabet, max: max_len }.block(&ast.root)
}

struct Interp<'a> {
    alphabet: &'a [EventSymbol],
    max: usize,
}

fn unit() -> Lang {
    BTreeSet::from([Vec::new()])
}

impl Interp<'_> {
    fn index(&self, m: &Matcher) -> Result<usize, Unsupported> {
        let s = m.symbol().ok_or(Unsupported::Predicate)?;
        self.alphabet.iter().position(|a| *a == s).ok_or_else(|| Unsupported::Foreign(m.to_string()))
    }

    fn concat(&self, a: &Lang, b: &Lang) -> Lang {
        let mut out = BTreeSet::new();
        for x in a {
            for y in b {
                if x.len() + y.len() <= self.max {
                    let mut w = x.clone();
                    w.extend(y);
                    out.insert(w);
                }
            }
        }
        out
    }

    fn star(&self, l: &Lang) -> Lang {
        let mut acc = unit();
        loop {
            let next: Lang = acc.union(&self.concat(&acc, l)).cloned().collect();
            if next == acc {
                return acc;
            }
            acc = next;
        }
    }

    fn stmts(&self, stmts: &[BodyStmt]) -> Result<Lang, Unsupported> {
        let mut acc = unit();
        for s in stmts {
            acc = self.concat(&acc, &self.stmt(s)?);
        }
        Ok(acc)
    }

    fn stmt(&self, s: &BodyStmt) -> Result<Lang, Unsupported> {
        Ok(match s {
            BodyStmt::Expect(m) => BTreeSet::from([vec![self.index(m)?]]),
            BodyStmt::Unordered(ms) => {
                let idx = ms.iter().map(|m| self.index(m)).collect::<Result<Vec<_>, _>>()?;
                if idx.len() > self.max {
                    return Ok(BTreeSet::new());
                }
                permutations(&idx)
            }
            BodyStmt::EitherOr(a, b) => self.stmts(a)?.union(&self.stmts(b)?).cloned().collect(),
            BodyStmt::Block(b) => self.block(b)?,
            BodyStmt::Trigger { .. } | BodyStmt::Inspect(_) => return Err(Unsupported::Active),
            BodyStmt::ExpectMapped(_) => return Err(Unsupported::Mapped),
        })
    }

    fn block(&self, b: &Block) -> Result<Lang, Unsupported> {
        let mut required = Vec::new();
        for h in &b.headers {
            match h {
                HeaderStmt::BlockExpect(ms) => {
                    for m in ms {
                        required.push(self.index(m)?);
                    }
                }
                _ => return Err(Unsupported::Constraint),
            }
        }
        let body = self.stmts(&b.body)?;
        // Each pass through the body must also contain every required symbol,
        // at any position.
        let once = if required.is_empty() {
            body
        } else {
            let mut out = BTreeSet::new();
            for w in &body {
                for r in required.iter().map(|&r| vec![r]).fold(BTreeSet::from([w.clone()]), |acc, r| {
                    acc.iter().flat_map(|x| shuffle(x, &r, self.max)).collect()
                }) {
                    out.insert(r);
                }
            }
            out
        };
        Ok(match b.count {
            None => self.star(&once),
            Some(n) => (0..n.get()).fold(unit(), |acc, _| self.concat(&acc, &once)),
        })
    }
}

fn permutations(idx: &[usize]) -> Lang {
    if idx.is_empty() {
        return unit();
    }
    let mut out = BTreeSet::new();
    for i in 0..idx.len() {
        let mut rest = idx.to_vec();
        let head = rest.remove(i);
        for mut w in permutations(&rest) {
            w.insert(0, head);
            out.insert(w);
        }
    }
    out
}

/// All interleavings of `a` and `b` no longer than `max`.
pub fn shuffle(a: &[usize], b: &[usize], max: usize) -> Lang {
    if a.len() + b.len() > max {
        return BTreeSet::new();
    }
    fn go(a: &[usize], b: &[usize], cur: &mut Word, out: &mut Lang) {
        if a.is_empty() && b.is_empty() {
            out.insert(cur.clone());
            return;
        }
        if let Some((&x, rest)) = a.split_first() {
            cur.push(x);
            go(rest, b, cur, out);
            cur.pop();
        }
        if let Some((&x, rest)) = b.split_first() {
            cur.push(x);
            go(a, rest, cur, out);
            cur.pop();
        }
    }
    let mut out = BTreeSet::new();
    go(a, b, &mut Vec::new(), &mut out);
    out
}

/// Which constructs the generator may emit.
#[derive(Clone, Copy, Debug)]
pub struct GenConfig {
    /// Symbols drawn from the front of the universe's alphabet, at most 4.
    pub symbols: usize,
    pub max_depth: usize,
    pub max_repeat: u32,
    pub block_expect: bool,
    /// allow/disallow/drop headers.
    pub constraints: bool,
    pub active: bool,
    pub predicates: bool,
}

impl GenConfig {
    /// Passive specs the interpreter can evaluate.
    pub fn passive() -> Self {
        GenConfig {
            symbols: 4,
            max_depth: 3,
            max_repeat: 3,
            block_expect: false,
            constraints: false,
            active: false,
            predicates: false,
        }
    }

    /// Everything the textual form can carry.
    pub fn textual() -> Self {
        GenConfig { block_expect: true, constraints: true, active: true, predicates: true, ..GenConfig::passive() }
    }
}

/// Names and values shared by generated specs.
pub struct Universe {
    pub table: SymbolTable,
    pub alphabet: Vec<EventSymbol>,
    pub ports: Vec<PortRef>,
    pub events: Vec<Event>,
    pub kind: EventKind,
    pub predicates: Vec<Predicate>,
    pub inspects: Vec<Inspect>,
}

impl Universe {
    /// Events `e0..e3` on ports `p` and `q`; the alphabet is the first
    /// `symbols` entries of a fixed four-symbol list.
    pub fn new(symbols: usize) -> Self {
        let kind = EventKind::new("Msg");
        let pt = PortType::new("Chan", [kind.clone()], [kind.clone()]);
        let (_, p) = PortRef::declare("P", &pt, Role::Provided, ComponentId(1), Some(ComponentId(0)));
        let (_, q) = PortRef::declare("Q", &pt, Role::Required, ComponentId(1), Some(ComponentId(0)));
        let events: Vec<Event> = (0..4).map(|i| Event::new(&kind, i as i64)).collect();
        let predicates = vec![Predicate::new(|e: &Event| e.payload.as_int().is_some_and(|v| v % 2 == 0))];
        let inspects = vec![Inspect::any(|_| true)];
        let mut table = SymbolTable::new();
        table.port("p", p.clone()).port("q", q.clone());
        for (i, e) in events.iter().enumerate() {
            table.event(format!("e{i}"), e.clone());
        }
        table.predicate("even", &kind, predicates[0].clone());
        table.inspect("ok", inspects[0].clone());
        let all = [(0, &p, Direction::In), (1, &p, Direction::Out), (2, &q, Direction::Out), (3, &q, Direction::In)];
        let alphabet = all[..symbols.min(4)]
            .iter()
            .map(|&(i, port, direction)| EventSymbol { event: events[i].clone(), port: port.clone(), direction })
            .collect();
        Universe { table, alphabet, ports: vec![p, q], events, kind, predicates, inspects }
    }

    pub fn matcher(&self, i: usize) -> Matcher {
        Matcher::of_symbol(&self.alphabet[i])
    }
}

/// Generates random specs that pass validation.
pub struct Generator<'u> {
    pub universe: &'u Universe,
    pub config: GenConfig,
}

impl Generator<'_> {
    pub fn spec(&self, rng: &mut impl Rng) -> SpecAst {
        let headers = self.headers(rng, true);
        let body = self.stmts(rng, 0, 1..4);
        SpecAst::new(Block { headers, body, ..Block::once() })
    }

    fn range(&self) -> std::ops::Range<usize> {
        0..self.config.symbols.clamp(1, self.universe.alphabet.len())
    }

    fn sym(&self, rng: &mut impl Rng) -> Matcher {
        let i = rng.gen_range(self.range());
        if self.config.predicates && rng.gen_bool(0.15) {
            let s = &self.universe.alphabet[i];
            Matcher::with_predicate(&self.universe.kind, self.universe.predicates[0].clone(), &s.port, s.direction)
        } else {
            self.universe.matcher(i)
        }
    }

    fn concrete(&self, rng: &mut impl Rng) -> Matcher {
        self.universe.matcher(rng.gen_range(self.range()))
    }

    fn headers(&self, rng: &mut impl Rng, root: bool) -> Vec<HeaderStmt> {
        let mut out = Vec::new();
        if self.config.constraints && rng.gen_bool(if root { 0.3 } else { 0.2 }) {
            let ms: Vec<Matcher> = (0..rng.gen_range(1..3)).map(|_| self.concrete(rng)).collect();
            out.push(match rng.gen_range(0..3) {
                0 => HeaderStmt::Allow(ms),
                1 => HeaderStmt::Drop(ms),
                _ => HeaderStmt::Disallow(ms),
            });
        }
        if self.config.block_expect && rng.gen_bool(0.2) {
            out.push(HeaderStmt::BlockExpect(vec![self.concrete(rng)]));
        }
        out
    }

    fn stmts(&self, rng: &mut impl Rng, depth: usize, len: std::ops::Range<usize>) -> Vec<BodyStmt> {
        (0..rng.gen_range(len)).map(|_| self.stmt(rng, depth)).collect()
    }

    fn stmt(&self, rng: &mut impl Rng, depth: usize) -> BodyStmt {
        let nest = depth < self.config.max_depth;
        loop {
            match rng.gen_range(0..10) {
                0..=3 => return BodyStmt::Expect(self.sym(rng)),
                4 if self.config.active => {
                    let e = self.universe.events[rng.gen_range(0..4)].clone();
                    let port = self.universe.ports.choose(rng).unwrap().clone();
                    return BodyStmt::Trigger { event: e, port };
                }
                5 if self.config.active => return BodyStmt::Inspect(self.universe.inspects[0].clone()),
                6 => {
                    let ms = (0..rng.gen_range(1..4)).map(|_| self.concrete(rng)).collect();
                    return BodyStmt::Unordered(ms);
                }
                7 if nest => {
                    // Branches start with an expect, so at most one active head.
                    let mut a = vec![BodyStmt::Expect(self.concrete(rng))];
                    a.extend(self.stmts(rng, depth + 1, 0..2));
                    let b = self.stmts(rng, depth + 1, 1..3);
                    return BodyStmt::EitherOr(a, b);
                }
                8 | 9 if nest => {
                    let kleene = rng.gen_bool(0.4);
                    let mut body = Vec::new();
                    if kleene {
                        body.push(BodyStmt::Expect(self.concrete(rng)));
                    }
                    body.extend(self.stmts(rng, depth + 1, if kleene { 0..2 } else { 1..3 }));
                    let count = if kleene {
                        None
                    } else {
                        std::num::NonZeroU32::new(rng.gen_range(1..=self.config.max_repeat))
                    };
                    return BodyStmt::Block(Block { count, headers: self.headers(rng, false), body });
                }
                _ => {}
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn u() -> Universe {
        Universe::new(4)
    }

    fn words(ws: &[&[usize]]) -> Lang {
        ws.iter().map(|w| w.to_vec()).collect()
    }

    #[test]
    fn sequence_union_closure() {
        let u = u();
        let m = |i| BodyStmt::Expect(u.matcher(i));
        let ast =
            SpecAst::new(Block { body: vec![BodyStmt::EitherOr(vec![m(0), m(1)], vec![m(0), m(2)])], ..Block::once() });
        assert_eq!(language(&ast, &u.alphabet, 4).unwrap(), words(&[&[0, 1], &[0, 2]]));
        let k = SpecAst::new(Block {
            body: vec![BodyStmt::Block(Block { body: vec![m(0)], ..Block::kleene() })],
            ..Block::once()
        });
        assert_eq!(language(&k, &u.alphabet, 2).unwrap(), words(&[&[], &[0], &[0, 0]]));
    }

    #[test]
    fn block_expect_shuffles() {
        let u = u();
        let b = Block {
            headers: vec![HeaderStmt::BlockExpect(vec![u.matcher(3)])],
            body: vec![BodyStmt::Expect(u.matcher(1)), BodyStmt::Expect(u.matcher(2))],
            ..Block::once()
        };
        assert_eq!(language(&SpecAst::new(b), &u.alphabet, 3).unwrap(), words(&[&[3, 1, 2], &[1, 3, 2], &[1, 2, 3]]));
    }

    #[test]
    fn generated_specs_validate() {
        use rand::SeedableRng;
        let u = u();
        let mut rng = rand::rngs::StdRng::seed_from_u64(7);
        for cfg in [GenConfig::passive(), GenConfig::textual()] {
            let g = Generator { universe: &u, config: cfg };
            for _ in 0..200 {
                let ast = g.spec(&mut rng);
                ktest_core::validate(&ast).unwrap();
            }
        }
    }
}

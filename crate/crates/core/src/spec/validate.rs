use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;

use super::{Block, BodyStmt, HeaderStmt, SpecAst};
use crate::event::{Matcher, Pattern};

/// Upper bound on the members of one unordered group, blockExpect list, or
/// mapper group; each member takes one bit of extended state.
pub const MAX_GROUP: usize = 64;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum PathSeg {
    Root,
    Stmt(usize),
    Either(usize),
    Or(usize),
}

/// Location of a construct inside a spec, e.g. `root/body[1]/either[0]`.
#[derive(Clone, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ConstructPath(pub Vec<PathSeg>);

impl ConstructPath {
    pub fn root() -> Self {
        ConstructPath(alloc::vec![PathSeg::Root])
    }

    pub fn child(&self, seg: PathSeg) -> Self {
        let mut v = self.0.clone();
        v.push(seg);
        ConstructPath(v)
    }
}

impl fmt::Display for ConstructPath {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, seg) in self.0.iter().enumerate() {
            if i > 0 {
                f.write_str("/")?;
            }
            match seg {
                PathSeg::Root => f.write_str("root")?,
                PathSeg::Stmt(n) => write!(f, "body[{n}]")?,
                PathSeg::Either(n) => write!(f, "either[{n}]")?,
                PathSeg::Or(n) => write!(f, "or[{n}]")?,
            }
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum ConstraintKind {
    Allow,
    Disallow,
    Drop,
}

impl ConstraintKind {
    pub fn keyword(self) -> &'static str {
        match self {
            ConstraintKind::Allow => "allow",
            ConstraintKind::Disallow => "disallow",
            ConstraintKind::Drop => "drop",
        }
    }
}

/// Constraints in force inside one block after inheritance and shadowing.
#[derive(Clone, Debug, PartialEq)]
pub struct EffectiveTable {
    pub path: ConstructPath,
    /// Whether the block declares any header of its own.
    pub has_headers: bool,
    entries: Vec<(Matcher, ConstraintKind)>,
}

impl EffectiveTable {
    pub fn entries(&self) -> &[(Matcher, ConstraintKind)] {
        &self.entries
    }

    pub fn lookup(&self, m: &Matcher) -> Option<ConstraintKind> {
        self.entries.iter().find(|(k, _)| k.same_identity(m)).map(|(_, c)| *c)
    }

    fn set(&mut self, m: &Matcher, kind: ConstraintKind) {
        self.entries.retain(|(k, _)| !k.same_identity(m));
        self.entries.push((m.clone(), kind));
    }
}

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
pub enum AmbiguousSpec {
    #[error("{path}: Kleene block has no passive entry condition")]
    EmptyKleene { path: ConstructPath },
    #[error("{path}: both branches of either start with trigger/inspect")]
    ActiveEither { path: ConstructPath },
    #[error("{path}: two predicate matchers with the same signature {signature}")]
    DuplicatePredicate { path: ConstructPath, signature: String },
    #[error("{path}: {reason}")]
    Malformed { path: ConstructPath, reason: &'static str },
}

impl AmbiguousSpec {
    pub fn path(&self) -> &ConstructPath {
        match self {
            AmbiguousSpec::EmptyKleene { path }
            | AmbiguousSpec::ActiveEither { path }
            | AmbiguousSpec::DuplicatePredicate { path, .. }
            | AmbiguousSpec::Malformed { path, .. } => path,
        }
    }
}

/// A spec that passed validation, with one constraint table per block in
/// pre-order (the root first).
#[derive(Clone, Debug, PartialEq)]
pub struct ValidatedSpec {
    pub ast: SpecAst,
    tables: Vec<EffectiveTable>,
}

impl ValidatedSpec {
    pub fn tables(&self) -> &[EffectiveTable] {
        &self.tables
    }

    pub fn table(&self, path: &ConstructPath) -> Option<&EffectiveTable> {
        self.tables.iter().find(|t| &t.path == path)
    }

    /// Resolves constraint tables without any of the checks of [`validate`].
    /// Ambiguities then surface at run time, e.g. as
    /// `SimError::AmbiguousRuntimeChoice`.
    pub fn unchecked(ast: SpecAst) -> Self {
        fn walk(
            stmts: &[BodyStmt],
            path: &ConstructPath,
            seg: fn(usize) -> PathSeg,
            t: &EffectiveTable,
            out: &mut Vec<EffectiveTable>,
        ) {
            for (i, s) in stmts.iter().enumerate() {
                let p = path.child(seg(i));
                match s {
                    BodyStmt::EitherOr(a, b) => {
                        walk(a, &p, PathSeg::Either, t, out);
                        walk(b, &p, PathSeg::Or, t, out);
                    }
                    BodyStmt::Block(b) => block(b, p, t, out),
                    _ => {}
                }
            }
        }
        fn block(b: &Block, path: ConstructPath, parent: &EffectiveTable, out: &mut Vec<EffectiveTable>) {
            let mut t = EffectiveTable {
                path: path.clone(),
                has_headers: !b.headers.is_empty(),
                entries: parent.entries.clone(),
            };
            for h in &b.headers {
                let kind = match h {
                    HeaderStmt::Allow(_) => ConstraintKind::Allow,
                    HeaderStmt::Disallow(_) => ConstraintKind::Disallow,
                    HeaderStmt::Drop(_) => ConstraintKind::Drop,
                    HeaderStmt::BlockExpect(_) => continue,
                };
                h.matchers().iter().for_each(|m| t.set(m, kind));
            }
            out.push(t.clone());
            walk(&b.body, &path, PathSeg::Stmt, &t, out);
        }
        let root = ConstructPath::root();
        let empty = EffectiveTable { path: root.clone(), has_headers: false, entries: Vec::new() };
        let mut tables = Vec::new();
        block(&ast.root, root, &empty, &mut tables);
        ValidatedSpec { ast, tables }
    }
}

pub fn validate(ast: &SpecAst) -> Result<ValidatedSpec, AmbiguousSpec> {
    let root = ConstructPath::root();
    if ast.root.count.map(|n| n.get()) != Some(1) {
        return Err(AmbiguousSpec::Malformed { path: root, reason: "root block must repeat exactly once" });
    }
    let mut tables = Vec::new();
    let empty = EffectiveTable { path: root.clone(), has_headers: false, entries: Vec::new() };
    walk_block(&ast.root, root, &empty, &mut tables)?;
    Ok(ValidatedSpec { ast: ast.clone(), tables })
}

fn group_size(path: &ConstructPath, n: usize, what: &'static str) -> Result<(), AmbiguousSpec> {
    if n == 0 {
        return Err(AmbiguousSpec::Malformed { path: path.clone(), reason: what });
    }
    if n > MAX_GROUP {
        return Err(AmbiguousSpec::Malformed { path: path.clone(), reason: "group exceeds 64 members" });
    }
    Ok(())
}

fn distinct_predicates<'a>(
    path: &ConstructPath,
    ms: impl IntoIterator<Item = &'a Matcher>,
) -> Result<(), AmbiguousSpec> {
    let preds: Vec<&Matcher> = ms.into_iter().filter(|m| m.is_predicate()).collect();
    for (i, a) in preds.iter().enumerate() {
        for b in &preds[i + 1..] {
            if a.same_identity(b) {
                let signature = match &a.pattern {
                    Pattern::Kind { kind, .. } => alloc::format!("{kind}@{}:{}", a.port, a.direction),
                    Pattern::Concrete(_) => a.to_string(),
                };
                return Err(AmbiguousSpec::DuplicatePredicate { path: path.clone(), signature });
            }
        }
    }
    Ok(())
}

fn walk_block(
    block: &Block,
    path: ConstructPath,
    parent: &EffectiveTable,
    out: &mut Vec<EffectiveTable>,
) -> Result<(), AmbiguousSpec> {
    let mut table =
        EffectiveTable { path: path.clone(), has_headers: !block.headers.is_empty(), entries: parent.entries.clone() };
    for h in &block.headers {
        group_size(&path, h.matchers().len(), "empty header list")?;
        let kind = match h {
            HeaderStmt::Allow(_) => ConstraintKind::Allow,
            HeaderStmt::Disallow(_) => ConstraintKind::Disallow,
            HeaderStmt::Drop(_) => ConstraintKind::Drop,
            HeaderStmt::BlockExpect(_) => continue,
        };
        for m in h.matchers() {
            table.set(m, kind);
        }
    }
    let required: Vec<&Matcher> = block.block_expect().collect();
    if required.len() > MAX_GROUP {
        return Err(AmbiguousSpec::Malformed { path, reason: "group exceeds 64 members" });
    }
    distinct_predicates(&path, required)?;
    if block.is_kleene() && !entry(&block.body).passive {
        return Err(AmbiguousSpec::EmptyKleene { path });
    }
    out.push(table.clone());
    walk_stmts(&block.body, &path, PathSeg::Stmt, &table, out)
}

fn walk_stmts(
    stmts: &[BodyStmt],
    path: &ConstructPath,
    seg: fn(usize) -> PathSeg,
    table: &EffectiveTable,
    out: &mut Vec<EffectiveTable>,
) -> Result<(), AmbiguousSpec> {
    for (i, s) in stmts.iter().enumerate() {
        let p = path.child(seg(i));
        match s {
            BodyStmt::Expect(_) | BodyStmt::Trigger { .. } | BodyStmt::Inspect(_) => {}
            BodyStmt::Unordered(ms) => {
                group_size(&p, ms.len(), "empty unordered")?;
                distinct_predicates(&p, ms)?;
            }
            BodyStmt::ExpectMapped(es) => group_size(&p, es.len(), "empty expectWithMapper")?,
            BodyStmt::EitherOr(a, b) => {
                if a.is_empty() || b.is_empty() {
                    return Err(AmbiguousSpec::Malformed { path: p, reason: "empty either branch" });
                }
                let (ea, eb) = (entry(a), entry(b));
                if ea.active && eb.active {
                    return Err(AmbiguousSpec::ActiveEither { path: p });
                }
                distinct_predicates(&p, ea.first.iter().chain(eb.first.iter()).copied())?;
                walk_stmts(a, &p, PathSeg::Either, table, out)?;
                walk_stmts(b, &p, PathSeg::Or, table, out)?;
            }
            BodyStmt::Block(block) => walk_block(block, p, table, out)?,
        }
    }
    Ok(())
}

/// What can happen first when a statement list is entered.
#[derive(Default)]
struct Entry<'a> {
    /// Some path starts by consuming an event.
    passive: bool,
    /// Some path starts with trigger/inspect.
    active: bool,
    /// The list can be traversed without consuming or acting.
    nullable: bool,
    first: Vec<&'a Matcher>,
}

fn entry(stmts: &[BodyStmt]) -> Entry<'_> {
    let mut acc = Entry::default();
    for s in stmts {
        let e = entry_stmt(s);
        acc.passive |= e.passive;
        acc.active |= e.active;
        acc.first.extend(e.first);
        if !e.nullable {
            return acc;
        }
    }
    acc.nullable = true;
    acc
}

fn entry_stmt(s: &BodyStmt) -> Entry<'_> {
    match s {
        BodyStmt::Expect(m) => Entry { passive: true, first: alloc::vec![m], ..Entry::default() },
        BodyStmt::Unordered(ms) => Entry { passive: true, first: ms.iter().collect(), ..Entry::default() },
        BodyStmt::ExpectMapped(_) => Entry { passive: true, ..Entry::default() },
        BodyStmt::Trigger { .. } | BodyStmt::Inspect(_) => Entry { active: true, ..Entry::default() },
        BodyStmt::EitherOr(a, b) => {
            let (ea, eb) = (entry(a), entry(b));
            let mut first = ea.first;
            first.extend(eb.first);
            Entry {
                passive: ea.passive || eb.passive,
                active: ea.active || eb.active,
                nullable: ea.nullable || eb.nullable,
                first,
            }
        }
        BodyStmt::Block(block) => {
            let mut e = entry(&block.body);
            let required: Vec<&Matcher> = block.block_expect().collect();
            if !required.is_empty() {
                e.passive = true;
                e.first.extend(required);
                if !block.is_kleene() {
                    e.nullable = false;
                }
            }
            if block.is_kleene() {
                e.nullable = true;
            }
            e
        }
    }
}

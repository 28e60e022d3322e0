use alloc::collections::BTreeSet;
use alloc::vec::Vec;

use super::{Automaton, Label, Simulation, StateKind};
use crate::event::EventSymbol;

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
pub enum OracleUnsupported {
    #[error("automaton contains trigger/inspect states")]
    Active,
    #[error("automaton contains a request-response state")]
    ReqRes,
    #[error("automaton contains predicate matchers")]
    Predicate,
}

/// Accepted words over a finite alphabet, each word a list of alphabet indices.
#[derive(Clone, Debug, PartialEq)]
pub struct Language {
    pub alphabet: Vec<EventSymbol>,
    pub words: BTreeSet<Vec<usize>>,
}

impl Language {
    pub fn index_of(&self, s: &EventSymbol) -> Option<usize> {
        self.alphabet.iter().position(|a| a == s)
    }

    /// Encodes a word over this alphabet; `None` if a symbol is foreign.
    pub fn encode(&self, word: &[EventSymbol]) -> Option<Vec<usize>> {
        word.iter().map(|s| self.index_of(s)).collect()
    }

    pub fn contains(&self, word: &[EventSymbol]) -> bool {
        self.encode(word).is_some_and(|w| self.words.contains(&w))
    }
}

/// Every accepted word of length at most `max_len`, by exhaustive search over
/// the concrete symbols that label the automaton's edges.
pub fn enumerate_language(a: &Automaton, max_len: usize) -> Result<Language, OracleUnsupported> {
    for s in &a.states {
        match s.kind {
            StateKind::Trigger { .. } | StateKind::Inspect(_) => return Err(OracleUnsupported::Active),
            StateKind::ReqRes { .. } => return Err(OracleUnsupported::ReqRes),
            _ => {}
        }
    }
    let mut alphabet: Vec<EventSymbol> = Vec::new();
    for e in &a.edges {
        if let Label::Consume { matcher, .. } = &e.label {
            let sym = matcher.symbol().ok_or(OracleUnsupported::Predicate)?;
            if !alphabet.contains(&sym) {
                alphabet.push(sym);
            }
        }
    }
    let mut words = BTreeSet::new();
    let mut word = Vec::new();
    dfs(&Simulation::new(a), &alphabet, max_len, &mut word, &mut words);
    Ok(Language { alphabet, words })
}

fn dfs(
    sim: &Simulation<'_>,
    alphabet: &[EventSymbol],
    max_len: usize,
    word: &mut Vec<usize>,
    words: &mut BTreeSet<Vec<usize>>,
) {
    if sim.is_accepting() {
        words.insert(word.clone());
    }
    if word.len() == max_len {
        return;
    }
    let registry = sim.automaton().comparators();
    for (i, sym) in alphabet.iter().enumerate() {
        let mut next = sim.clone();
        match next.step(sym, registry) {
            Ok(out) if !out.decision.is_fail() => {
                word.push(i);
                dfs(&next, alphabet, max_len, word, words);
                word.pop();
            }
            _ => {}
        }
    }
}

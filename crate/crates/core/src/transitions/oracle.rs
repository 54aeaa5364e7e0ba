//! Static oracle: gold mentions to a gold action sequence.
//!
//! Tokens are scanned left to right. A token outside every target mention is
//! dropped with `OUT`, any other token is shifted. Tokens that are adjacent
//! and belong to exactly the same set of target mentions form a unit; once
//! the last token of a unit is on the stack the oracle settles the stack:
//!
//! 1. `COMPLETE-y` when the top span equals an unfinished target of type `y`;
//! 2. `REDUCE` when the top two spans lie in the same unit;
//! 3. otherwise, when `s1 ∪ s0` is a prefix of an unfinished target, a
//!    reduction: `LEFT-REDUCE` if `s1` is still needed as a prefix of another
//!    unfinished target, `RIGHT-REDUCE` if `s0` is still needed by one,
//!    plain `REDUCE` if neither is.
//!
//! Crossing compositions can leave spans on the stack that only a wrong
//! `COMPLETE` could remove. In that case the pass is repeated with the
//! targets it did manage to build, until a pass builds all its targets and
//! ends with an empty stack. If that drops mentions, a bounded search over
//! parser states looks for a sequence that outputs more of them. Gold
//! mentions outside the final target set are reported as uncovered.

use std::collections::{BTreeSet, HashSet, VecDeque};

use super::{default_budget, Action, ParserState, Span, TransitionError};
use crate::corpus::{Mention, Sentence};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OracleResult {
    pub actions: Vec<Action>,
    /// Gold mentions the action sequence does not produce.
    pub uncovered: Vec<Mention>,
}

struct Target {
    tokens: BTreeSet<usize>,
    entity_type: String,
}

impl Target {
    /// `span` equals the target restricted to tokens up to the span's last
    /// token.
    fn has_prefix(&self, span: &BTreeSet<usize>) -> bool {
        let Some(&last) = span.last() else {
            return false;
        };
        self.tokens.range(..=last).eq(span.iter())
    }
}

/// State cap for the fallback search.
const SEARCH_LIMIT: usize = 200_000;

pub fn oracle(sentence: &Sentence) -> Result<OracleResult, TransitionError> {
    check_not_nested(&sentence.mentions)?;
    let n = sentence.len();
    let all: Vec<&Mention> = sentence.mentions.iter().collect();
    let (mut kept, mut actions) = fixpoint(n, all.clone());
    if kept.len() < all.len() {
        if let Some((k, a)) = widest_derivation(n, &all, kept.len() + 1) {
            kept = k;
            actions = a;
        }
    }
    let kept: BTreeSet<&Mention> = kept.into_iter().collect();
    let uncovered = sentence
        .mentions
        .iter()
        .filter(|m| !kept.contains(m))
        .cloned()
        .collect();
    Ok(OracleResult { actions, uncovered })
}

fn fixpoint(n: usize, mut targets: Vec<&Mention>) -> (Vec<&Mention>, Vec<Action>) {
    loop {
        let pass = Pass::run(n, &targets);
        if pass.builds_all(&targets) {
            return (targets, pass.state.history);
        }
        let built: Vec<&Mention> = pass.built.iter().map(|&i| targets[i]).collect();
        targets = if built.len() < targets.len() {
            built
        } else {
            let left: BTreeSet<usize> = pass.state.stack.iter().flat_map(Span::tokens).collect();
            built
                .into_iter()
                .filter(|m| !m.tokens().any(|t| left.contains(&t)))
                .collect()
        };
    }
}

/// Breadth-first search over parser states for the largest set of at least
/// `min` gold mentions that one action sequence outputs exactly. Spans that
/// fit inside no gold mention are never kept, since whatever contains them
/// ends up as a wrong output. Ties go to the shorter sequence, then to the
/// smaller set. Gives up after [`SEARCH_LIMIT`] states.
fn widest_derivation<'a>(
    n: usize,
    all: &[&'a Mention],
    min: usize,
) -> Option<(Vec<&'a Mention>, Vec<Action>)> {
    let budget = default_budget(n);
    let gold: Vec<BTreeSet<usize>> = all.iter().map(|m| m.token_set()).collect();
    let types: BTreeSet<&str> = all.iter().map(|m| m.entity_type.as_str()).collect();
    let types: Vec<String> = types.into_iter().map(str::to_string).collect();
    let fits = |t: &BTreeSet<usize>| gold.iter().any(|g| t.is_subset(g));

    type Key = (usize, Vec<BTreeSet<usize>>, BTreeSet<Mention>);
    let key = |st: &ParserState| -> Key {
        (
            st.buffer_pos,
            st.stack.iter().map(Span::token_set).collect(),
            st.outputs.iter().cloned().collect(),
        )
    };
    let mut seen: HashSet<Key> = HashSet::new();
    let mut queue = VecDeque::from([ParserState::initial(n)]);
    let mut best: Option<(Vec<Mention>, Vec<Action>)> = None;
    while let Some(st) = queue.pop_front() {
        if seen.len() >= SEARCH_LIMIT {
            return None;
        }
        if !seen.insert(key(&st)) {
            continue;
        }
        if st.is_terminal() {
            let set = st.mention_set();
            let better = match &best {
                None => set.len() >= min,
                Some((b, _)) => set.len() > b.len(),
            };
            if better {
                let full = set.len() == all.len();
                best = Some((set, st.history));
                if full {
                    break;
                }
            }
            continue;
        }
        if st.step_count >= budget {
            continue;
        }
        for a in st.valid_actions(&types, budget) {
            let next = st.apply(&a).expect("valid action applies");
            let emitted_ok = match (&a, next.outputs.last()) {
                (Action::Complete(_), Some(m)) => all.contains(&m),
                _ => true,
            };
            if emitted_ok && next.stack.iter().all(|sp| fits(&sp.token_set())) {
                queue.push_back(next);
            }
        }
    }
    let (set, actions) = best?;
    let kept = all.iter().copied().filter(|m| set.contains(m)).collect();
    Some((kept, actions))
}

fn check_not_nested(mentions: &[Mention]) -> Result<(), TransitionError> {
    for (i, a) in mentions.iter().enumerate() {
        for (j, b) in mentions.iter().enumerate() {
            if i != j && a.covers(b) && (a.fragments != b.fragments || i < j) {
                return Err(TransitionError::NestedMentions {
                    outer: a.to_inline(),
                    inner: b.to_inline(),
                });
            }
        }
    }
    Ok(())
}

struct Pass {
    state: ParserState,
    /// Indices into the target list, in completion order.
    built: Vec<usize>,
}

impl Pass {
    fn run(n: usize, mentions: &[&Mention]) -> Pass {
        let targets: Vec<Target> = mentions
            .iter()
            .map(|m| Target {
                tokens: m.token_set(),
                entity_type: m.entity_type.clone(),
            })
            .collect();
        let signature = |t: usize| -> Vec<usize> {
            (0..targets.len())
                .filter(|&i| targets[i].tokens.contains(&t))
                .collect()
        };
        let signatures: Vec<Vec<usize>> = (0..n).map(signature).collect();
        let mut pass = Pass {
            state: ParserState::initial(n),
            built: Vec::new(),
        };
        let mut done = vec![false; targets.len()];
        for t in 0..n {
            if signatures[t].is_empty() {
                pass.step(Action::Out);
                continue;
            }
            pass.step(Action::Shift);
            let unit_ends = t + 1 == n || signatures[t + 1] != signatures[t];
            if unit_ends {
                pass.settle(&targets, &signatures, &mut done);
            }
        }
        pass
    }

    fn builds_all(&self, targets: &[&Mention]) -> bool {
        self.built.len() == targets.len() && self.state.stack.is_empty()
    }

    fn step(&mut self, action: Action) {
        self.state = self
            .state
            .apply(&action)
            .expect("oracle emits structurally valid actions");
    }

    fn settle(&mut self, targets: &[Target], signatures: &[Vec<usize>], done: &mut [bool]) {
        loop {
            let depth = self.state.stack.len();
            let Some(top) = self.state.stack.last() else {
                return;
            };
            let top_set = top.token_set();
            if let Some(i) = (0..targets.len()).find(|&i| !done[i] && targets[i].tokens == top_set)
            {
                done[i] = true;
                self.built.push(i);
                self.step(Action::Complete(targets[i].entity_type.clone()));
                continue;
            }
            if depth < 2 {
                return;
            }
            let s1 = self.state.stack[depth - 2].token_set();
            let s0 = top_set;
            if same_unit(&s1, &s0, signatures) {
                self.step(Action::Reduce);
                continue;
            }
            let merged: BTreeSet<usize> = s1.union(&s0).copied().collect();
            let open = |i: &usize| !done[*i];
            if !(0..targets.len())
                .filter(open)
                .any(|i| targets[i].has_prefix(&merged))
            {
                return;
            }
            let elsewhere = |part: &BTreeSet<usize>, as_prefix: bool| {
                (0..targets.len()).filter(open).any(|i| {
                    let t = &targets[i];
                    let needs = if as_prefix {
                        t.has_prefix(part)
                    } else {
                        part.is_subset(&t.tokens)
                    };
                    needs && !t.has_prefix(&merged)
                })
            };
            let action = if elsewhere(&s1, true) {
                Action::LeftReduce
            } else if elsewhere(&s0, false) {
                Action::RightReduce
            } else {
                Action::Reduce
            };
            self.step(action);
        }
    }
}

/// Both spans are contiguous pieces of one run of tokens sharing a
/// signature.
fn same_unit(s1: &BTreeSet<usize>, s0: &BTreeSet<usize>, signatures: &[Vec<usize>]) -> bool {
    let (Some(&lo), Some(&hi)) = (s1.first(), s0.last()) else {
        return false;
    };
    if hi < lo || s1.len() + s0.len() != hi - lo + 1 {
        return false;
    }
    let sig = &signatures[lo];
    (lo..=hi).all(|t| &signatures[t] == sig)
        && s1.iter().chain(s0.iter()).all(|&t| lo <= t && t <= hi)
}

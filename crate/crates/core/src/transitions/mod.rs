//! Shift-reduce transition system over a stack of spans and a buffer of
//! tokens.
//!
//! Six actions drive the machine: `SHIFT` moves the next buffer token onto
//! the stack, `OUT` drops it, `COMPLETE-y` pops the top span as a mention of
//! type `y`, and `REDUCE`, `LEFT-REDUCE`, `RIGHT-REDUCE` merge the top two
//! spans. The two directional reductions keep one of the merged spans on the
//! stack (directly beneath the merged span) so that it can be shared by
//! another mention.

mod oracle;
mod trace;

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{fragments_from_tokens, Fragment, Mention};

pub use oracle::{oracle, OracleResult};
pub use trace::{trace, TraceRecord, TraceReport};

/// Step budget multiplier: a sentence of `N` tokens gets `8 * N` actions
/// before only `COMPLETE` (or `OUT` on an empty stack) remains valid.
pub const BUDGET_MULTIPLIER: usize = 8;

pub fn default_budget(sentence_len: usize) -> usize {
    BUDGET_MULTIPLIER * sentence_len
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TransitionError {
    #[error("step {step}: action {action} is not valid in this state")]
    InvalidAction { step: usize, action: Action },
    #[error("action sequence ends in a non-terminal state")]
    NotTerminal,
    #[error("nested mentions {outer} and {inner}")]
    NestedMentions { outer: String, inner: String },
    #[error("unknown action `{0}`")]
    UnknownAction(String),
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Action {
    Shift,
    Out,
    Reduce,
    LeftReduce,
    RightReduce,
    Complete(String),
}

impl Action {
    pub fn is_complete(&self) -> bool {
        matches!(self, Action::Complete(_))
    }

    pub fn is_reduce(&self) -> bool {
        matches!(
            self,
            Action::Reduce | Action::LeftReduce | Action::RightReduce
        )
    }

    /// Canonical action inventory for a label set: the five structural
    /// actions followed by one `COMPLETE` per label.
    pub fn inventory(types: &[String]) -> Vec<Action> {
        let mut v = vec![
            Action::Shift,
            Action::Out,
            Action::Reduce,
            Action::LeftReduce,
            Action::RightReduce,
        ];
        v.extend(types.iter().cloned().map(Action::Complete));
        v
    }
}

impl fmt::Display for Action {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Action::Shift => f.write_str("SHIFT"),
            Action::Out => f.write_str("OUT"),
            Action::Reduce => f.write_str("REDUCE"),
            Action::LeftReduce => f.write_str("LREDUCE"),
            Action::RightReduce => f.write_str("RREDUCE"),
            Action::Complete(t) => write!(f, "COMPLETE:{t}"),
        }
    }
}

impl FromStr for Action {
    type Err = TransitionError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Ok(match s {
            "SHIFT" => Action::Shift,
            "OUT" => Action::Out,
            "REDUCE" => Action::Reduce,
            "LREDUCE" => Action::LeftReduce,
            "RREDUCE" => Action::RightReduce,
            _ => match s.strip_prefix("COMPLETE:") {
                Some(t) if !t.is_empty() => Action::Complete(t.to_string()),
                _ => return Err(TransitionError::UnknownAction(s.to_string())),
            },
        })
    }
}

/// One action sequence per line, space separated.
pub fn write_actions(sequences: &[Vec<Action>]) -> String {
    sequences
        .iter()
        .map(|seq| {
            let words: Vec<String> = seq.iter().map(ToString::to_string).collect();
            format!("{}\n", words.join(" "))
        })
        .collect()
}

pub fn parse_actions(text: &str) -> Result<Vec<Vec<Action>>, TransitionError> {
    text.lines()
        .map(|line| line.split_whitespace().map(str::parse).collect())
        .collect()
}

/// A partially built mention on the stack.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Span {
    pub fragments: Vec<Fragment>,
    /// Creation counter; a span kept by a directional reduction keeps its id.
    pub id: usize,
}

impl Span {
    pub fn tokens(&self) -> impl Iterator<Item = usize> + '_ {
        self.fragments.iter().flat_map(|f| f.start..f.end)
    }

    pub fn token_set(&self) -> BTreeSet<usize> {
        self.tokens().collect()
    }
}

/// Parser configuration. Values are immutable; [`ParserState::apply`]
/// returns a successor.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParserState {
    pub sentence_len: usize,
    pub buffer_pos: usize,
    /// Top of the stack is the last element.
    pub stack: Vec<Span>,
    pub outputs: Vec<Mention>,
    pub history: Vec<Action>,
    pub step_count: usize,
    next_span_id: usize,
}

impl ParserState {
    pub fn initial(sentence_len: usize) -> Self {
        ParserState {
            sentence_len,
            buffer_pos: 0,
            stack: Vec::new(),
            outputs: Vec::new(),
            history: Vec::new(),
            step_count: 0,
            next_span_id: 0,
        }
    }

    pub fn buffer_empty(&self) -> bool {
        self.buffer_pos >= self.sentence_len
    }

    pub fn is_terminal(&self) -> bool {
        self.buffer_empty() && self.stack.is_empty()
    }

    /// Validity ignoring the label set: any `COMPLETE` type is accepted.
    pub fn is_valid(&self, action: &Action, budget: usize) -> bool {
        let depth = self.stack.len();
        if self.step_count >= budget {
            return match action {
                Action::Complete(_) => depth > 0,
                Action::Out => depth == 0 && !self.buffer_empty(),
                _ => false,
            };
        }
        match action {
            Action::Shift | Action::Out => !self.buffer_empty(),
            Action::Complete(_) => depth > 0,
            Action::Reduce | Action::LeftReduce | Action::RightReduce => depth >= 2,
        }
    }

    /// Valid actions in inventory order. Empty exactly when terminal.
    pub fn valid_actions(&self, types: &[String], budget: usize) -> Vec<Action> {
        Action::inventory(types)
            .into_iter()
            .filter(|a| self.is_valid(a, budget))
            .collect()
    }

    /// Applies `action` without consulting the step budget.
    pub fn apply(&self, action: &Action) -> Result<ParserState, TransitionError> {
        if !self.is_valid(action, usize::MAX) {
            return Err(TransitionError::InvalidAction {
                step: self.step_count + 1,
                action: action.clone(),
            });
        }
        let mut next = self.clone();
        match action {
            Action::Shift => {
                let pos = next.buffer_pos;
                let span = next.new_span(vec![Fragment::new(pos, pos + 1)]);
                next.stack.push(span);
                next.buffer_pos += 1;
            }
            Action::Out => next.buffer_pos += 1,
            Action::Complete(ty) => {
                let span = next.stack.pop().expect("checked nonempty");
                next.outputs.push(Mention {
                    fragments: span.fragments,
                    entity_type: ty.clone(),
                });
            }
            Action::Reduce | Action::LeftReduce | Action::RightReduce => {
                let s0 = next.stack.pop().expect("checked depth");
                let s1 = next.stack.pop().expect("checked depth");
                let merged = next.new_span(fragments_from_tokens(s1.tokens().chain(s0.tokens())));
                match action {
                    Action::LeftReduce => next.stack.push(s1),
                    Action::RightReduce => next.stack.push(s0),
                    _ => {}
                }
                next.stack.push(merged);
            }
        }
        next.history.push(action.clone());
        next.step_count += 1;
        Ok(next)
    }

    fn new_span(&mut self, fragments: Vec<Fragment>) -> Span {
        let id = self.next_span_id;
        self.next_span_id += 1;
        Span { fragments, id }
    }

    /// Output mentions, sorted with duplicates collapsed.
    pub fn mention_set(&self) -> Vec<Mention> {
        let set: BTreeSet<Mention> = self.outputs.iter().cloned().collect();
        set.into_iter().collect()
    }
}

/// Replays `actions` from the initial state and returns the mention set.
pub fn decode(actions: &[Action], sentence_len: usize) -> Result<Vec<Mention>, TransitionError> {
    let budget = default_budget(sentence_len);
    let mut state = ParserState::initial(sentence_len);
    for (i, a) in actions.iter().enumerate() {
        if !state.is_valid(a, budget) {
            return Err(TransitionError::InvalidAction {
                step: i + 1,
                action: a.clone(),
            });
        }
        state = state.apply(a)?;
    }
    if !state.is_terminal() {
        return Err(TransitionError::NotTerminal);
    }
    Ok(state.mention_set())
}

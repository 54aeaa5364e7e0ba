use serde::{Deserialize, Serialize};

use super::{default_budget, Action, ParserState, TransitionError};
use crate::corpus::Sentence;

/// Parser state before one step, and the action taken from it.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TraceRecord {
    /// 1-based.
    pub step: usize,
    /// Bottom to top; each span rendered as its tokens.
    pub stack: Vec<String>,
    pub buffer: Vec<String>,
    pub valid: Vec<String>,
    pub action: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TraceReport {
    pub records: Vec<TraceRecord>,
}

impl TraceReport {
    pub fn to_json_lines(&self) -> String {
        self.records
            .iter()
            .map(|r| {
                format!(
                    "{}\n",
                    serde_json::to_string(r).expect("trace records serialize")
                )
            })
            .collect()
    }

    /// Aligned plain-text table.
    pub fn to_table(&self) -> String {
        let rows: Vec<[String; 4]> = self
            .records
            .iter()
            .map(|r| {
                let stack: Vec<String> = r.stack.iter().map(|s| format!("[{s}]")).collect();
                [
                    r.step.to_string(),
                    stack.join(" "),
                    r.buffer.join(" "),
                    r.action.clone(),
                ]
            })
            .collect();
        let header = [
            "step".to_string(),
            "stack".to_string(),
            "buffer".to_string(),
            "action".to_string(),
        ];
        let mut widths = header.clone().map(|h| h.len());
        for row in &rows {
            for (w, cell) in widths.iter_mut().zip(row) {
                *w = (*w).max(cell.chars().count());
            }
        }
        let line = |cells: &[String; 4]| {
            let padded: Vec<String> = cells
                .iter()
                .zip(widths)
                .map(|(c, w)| format!("{c:<w$}"))
                .collect();
            format!("{}\n", padded.join("  ").trim_end())
        };
        std::iter::once(line(&header))
            .chain(rows.iter().map(line))
            .collect()
    }
}

/// Replays `actions` over `sentence`, recording each step.
pub fn trace(
    sentence: &Sentence,
    actions: &[Action],
    types: &[String],
) -> Result<TraceReport, TransitionError> {
    let n = sentence.len();
    let budget = default_budget(n);
    let mut state = ParserState::initial(n);
    let mut records = Vec::with_capacity(actions.len());
    for a in actions {
        let valid = state.valid_actions(types, budget);
        if !state.is_valid(a, budget) {
            return Err(TransitionError::InvalidAction {
                step: state.step_count + 1,
                action: a.clone(),
            });
        }
        records.push(TraceRecord {
            step: state.step_count + 1,
            stack: state
                .stack
                .iter()
                .map(|s| {
                    s.tokens()
                        .map(|t| sentence.tokens[t].as_str())
                        .collect::<Vec<_>>()
                        .join(" ")
                })
                .collect(),
            buffer: sentence.tokens[state.buffer_pos.min(n)..].to_vec(),
            valid: valid.iter().map(ToString::to_string).collect(),
            action: a.to_string(),
        });
        state = state.apply(a)?;
    }
    Ok(TraceReport { records })
}

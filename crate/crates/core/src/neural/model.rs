use super::params::{self, Grads, ParamId, ScorerParams, Vocab};
use super::tape::{softmax, NodeId, Tape};
use super::{NeuralError, ScorerConfig};
use crate::corpus::Mention;
use crate::transitions::{Action, ParserState};

/// Everything needed to score a sentence.
#[derive(Debug, Clone, PartialEq)]
pub struct Model {
    pub config: ScorerConfig,
    pub vocab: Vocab,
    /// Sorted entity types; fixes the action inventory.
    pub types: Vec<String>,
    pub params: ScorerParams,
}

impl Model {
    pub fn new(
        config: ScorerConfig,
        vocab: Vocab,
        types: Vec<String>,
    ) -> Result<Self, NeuralError> {
        config.validate()?;
        if types.is_empty() {
            return Err(NeuralError::NoTypes);
        }
        let n_actions = Action::inventory(&types).len();
        let params = params::init_params(&config, &vocab, n_actions, config.seed);
        Ok(Model {
            config,
            vocab,
            types,
            params,
        })
    }

    pub fn actions(&self) -> Vec<Action> {
        Action::inventory(&self.types)
    }

    pub fn rep_dim(&self) -> usize {
        params::rep_dim(&self.config)
    }
}

/// Contextual token vectors: word embedding and max-pooled character CNN,
/// a BiLSTM over those, then the external vector if configured.
pub fn token_reps(
    tape: &mut Tape,
    model: &Model,
    tokens: &[String],
    external: Option<&[Vec<f64>]>,
) -> Result<Vec<NodeId>, NeuralError> {
    let cfg = &model.config;
    let p = &model.params;
    if cfg.external_vec_dim > 0 {
        let ext = external.ok_or(NeuralError::MissingExternal)?;
        if ext.len() != tokens.len() {
            return Err(NeuralError::ExternalShape {
                expected: tokens.len(),
                found: ext.len(),
            });
        }
        if let Some(bad) = ext.iter().find(|v| v.len() != cfg.external_vec_dim) {
            return Err(NeuralError::ExternalShape {
                expected: cfg.external_vec_dim,
                found: bad.len(),
            });
        }
    }
    let half = cfg.char_cnn_window / 2;
    let pad = tape.input(vec![0.0; cfg.char_dim]);
    let mut t = Vec::with_capacity(tokens.len());
    for tok in tokens {
        let word = tape.row(p, params::WORD_EMB, model.vocab.word(tok));
        let chars: Vec<NodeId> = tok
            .chars()
            .map(|c| tape.row(p, params::CHAR_EMB, model.vocab.char(c)))
            .collect();
        let mut padded = vec![pad; half];
        padded.extend(&chars);
        padded.extend(std::iter::repeat(pad).take(half));
        let windows: Vec<NodeId> = (0..chars.len().max(1))
            .map(|i| {
                let cols: Vec<NodeId> = (0..cfg.char_cnn_window)
                    .map(|k| padded.get(i + k).copied().unwrap_or(pad))
                    .collect();
                let x = tape.concat(cols);
                let conv = tape.affine(p, params::CHAR_CNN_W, Some(params::CHAR_CNN_B), x);
                tape.tanh(conv)
            })
            .collect();
        let pooled = tape.max(windows);
        t.push(tape.concat(vec![word, pooled]));
    }
    let h = cfg.hidden_dim;
    let run = |tape: &mut Tape, order: &mut dyn Iterator<Item = usize>, w: ParamId, b: ParamId| {
        let mut out = vec![0; t.len()];
        let mut prev = None;
        for i in order {
            let state = tape.lstm(p, w, b, t[i], prev);
            out[i] = tape.slice(state, 0, h);
            prev = Some(state);
        }
        out
    };
    let fwd = run(tape, &mut (0..t.len()), params::FWD_W, params::FWD_B);
    let bwd = run(tape, &mut (0..t.len()).rev(), params::BWD_W, params::BWD_B);
    Ok((0..t.len())
        .map(|i| {
            let mut parts = vec![fwd[i], bwd[i]];
            if let Some(ext) = external.filter(|_| cfg.external_vec_dim > 0) {
                parts.push(tape.input(ext[i].clone()));
            }
            tape.concat(parts)
        })
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StackSlot {
    /// Vector that was pushed.
    pub input: NodeId,
    /// `[h; c]` after the push.
    pub state: NodeId,
    /// Summary of the stack up to and including this slot.
    pub h: NodeId,
}

/// LSTM whose state follows a stack: a push runs one step from the current
/// top, a pop returns to the state beneath.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct StackLstm {
    pub slots: Vec<StackSlot>,
}

impl StackLstm {
    pub fn push(&mut self, tape: &mut Tape, model: &Model, input: NodeId) {
        let prev = self.slots.last().map(|s| s.state);
        let state = tape.lstm(&model.params, params::STACK_W, params::STACK_B, input, prev);
        let h = tape.slice(state, 0, model.config.stack_dim);
        self.slots.push(StackSlot { input, state, h });
    }

    pub fn pop(&mut self) -> Result<StackSlot, NeuralError> {
        self.slots.pop().ok_or(NeuralError::EmptyStack)
    }

    /// Summary at depth `k` from the top.
    pub fn summary(&self, k: usize) -> Option<NodeId> {
        self.slots.len().checked_sub(k + 1).map(|i| self.slots[i].h)
    }
}

/// `W [s0; s1] + b`; the result is pushed like a token vector.
pub fn compose(tape: &mut Tape, model: &Model, s0: NodeId, s1: NodeId) -> NodeId {
    let x = tape.concat(vec![s0, s1]);
    tape.affine(&model.params, params::COMPOSE_W, Some(params::COMPOSE_B), x)
}

/// Per-sentence graph state shared by the rollout steps.
pub struct Encoder<'m> {
    pub model: &'m Model,
    pub tape: Tape,
    pub reps: Vec<NodeId>,
    pub stack: StackLstm,
    action_state: Option<NodeId>,
    action_h: Option<NodeId>,
    s_empty: NodeId,
    a_empty: NodeId,
    b_empty: NodeId,
    zero_rep: NodeId,
}

impl<'m> Encoder<'m> {
    pub fn new(
        model: &'m Model,
        tokens: &[String],
        external: Option<&[Vec<f64>]>,
    ) -> Result<Self, NeuralError> {
        let mut tape = Tape::new();
        let reps = token_reps(&mut tape, model, tokens, external)?;
        let s_empty = tape.param(&model.params, params::S_EMPTY);
        let a_empty = tape.param(&model.params, params::A_EMPTY);
        let b_empty = tape.param(&model.params, params::B_EMPTY);
        let zero_rep = tape.input(vec![0.0; model.rep_dim()]);
        Ok(Encoder {
            model,
            tape,
            reps,
            stack: StackLstm::default(),
            action_state: None,
            action_h: None,
            s_empty,
            a_empty,
            b_empty,
            zero_rep,
        })
    }

    /// `[s0, s1, s2, att(s0), att(s1), att(s2), a, buffer front]`.
    pub fn features(&mut self, state: &ParserState) -> NodeId {
        let cfg = &self.model.config;
        let buffer: Vec<NodeId> = self.reps[state.buffer_pos.min(self.reps.len())..].to_vec();
        let mut spans = Vec::with_capacity(3);
        let mut attended = Vec::with_capacity(3);
        for k in 0..3 {
            match self.stack.summary(k) {
                Some(h) => {
                    spans.push(h);
                    let a = if cfg.attention {
                        self.tape.attend(
                            &self.model.params,
                            params::ATTN_W[k],
                            h,
                            buffer.clone(),
                            self.model.rep_dim(),
                        )
                    } else {
                        self.zero_rep
                    };
                    attended.push(a);
                }
                None => {
                    spans.push(self.s_empty);
                    attended.push(self.zero_rep);
                }
            }
        }
        let mut parts = spans;
        parts.extend(attended);
        parts.push(self.action_h.unwrap_or(self.a_empty));
        parts.push(buffer.first().copied().unwrap_or(self.b_empty));
        self.tape.concat(parts)
    }

    pub fn logits(&mut self, feature: NodeId) -> NodeId {
        self.tape.affine(
            &self.model.params,
            params::OUT_W,
            Some(params::OUT_B),
            feature,
        )
    }

    /// Mirrors `action` on the stack LSTM and the action history.
    pub fn advance(
        &mut self,
        state: &ParserState,
        action: &Action,
        index: usize,
    ) -> Result<(), NeuralError> {
        match action {
            Action::Shift => {
                let input = self.reps[state.buffer_pos];
                self.stack.push(&mut self.tape, self.model, input);
            }
            Action::Out => {}
            Action::Complete(_) => {
                self.stack.pop()?;
            }
            Action::Reduce => {
                let s0 = self.stack.pop()?;
                let s1 = self.stack.pop()?;
                let merged = compose(&mut self.tape, self.model, s0.h, s1.h);
                self.stack.push(&mut self.tape, self.model, merged);
            }
            Action::LeftReduce => {
                let s0 = self.stack.pop()?;
                let s1 = *self.stack.slots.last().ok_or(NeuralError::EmptyStack)?;
                let merged = compose(&mut self.tape, self.model, s0.h, s1.h);
                self.stack.push(&mut self.tape, self.model, merged);
            }
            Action::RightReduce => {
                let s0 = self.stack.pop()?;
                let s1 = self.stack.pop()?;
                let merged = compose(&mut self.tape, self.model, s0.h, s1.h);
                self.stack.push(&mut self.tape, self.model, s0.input);
                self.stack.push(&mut self.tape, self.model, merged);
            }
        }
        let emb = self.tape.row(&self.model.params, params::ACTION_EMB, index);
        let next = self.tape.lstm(
            &self.model.params,
            params::ACTION_W,
            params::ACTION_B,
            emb,
            self.action_state,
        );
        self.action_h = Some(self.tape.slice(next, 0, self.model.config.action_dim));
        self.action_state = Some(next);
        Ok(())
    }
}

/// Masked distribution over the action inventory: invalid entries are 0.
pub fn action_distribution(logits: &[f64], valid: &[usize]) -> Vec<f64> {
    let masked: Vec<f64> = valid.iter().map(|&i| logits[i]).collect();
    let mut out = vec![0.0; logits.len()];
    for (&i, p) in valid.iter().zip(softmax(&masked)) {
        out[i] = p;
    }
    out
}

fn valid_indices(state: &ParserState, actions: &[Action], budget: usize) -> Vec<usize> {
    (0..actions.len())
        .filter(|&i| state.is_valid(&actions[i], budget))
        .collect()
}

/// Teacher-forced loss: sum of negative log-probabilities of `gold` under
/// the valid-masked distribution at each step. Returns the loss, the tape
/// and its root node.
pub fn sentence_loss(
    model: &Model,
    tokens: &[String],
    external: Option<&[Vec<f64>]>,
    gold: &[Action],
) -> Result<(f64, Tape, NodeId), NeuralError> {
    let actions = model.actions();
    let budget = model.config.budget_multiplier * tokens.len();
    let mut enc = Encoder::new(model, tokens, external)?;
    let mut state = ParserState::initial(tokens.len());
    let mut losses = Vec::with_capacity(gold.len());
    for a in gold {
        let idx = actions
            .iter()
            .position(|x| x == a)
            .ok_or_else(|| NeuralError::UnknownAction(a.to_string()))?;
        if !state.is_valid(a, budget) {
            return Err(NeuralError::InvalidGold {
                step: state.step_count + 1,
                action: a.to_string(),
            });
        }
        let valid = valid_indices(&state, &actions, budget);
        let feature = enc.features(&state);
        let logits = enc.logits(feature);
        losses.push(enc.tape.nll(logits, valid, idx));
        enc.advance(&state, a, idx)?;
        state = state.apply(a).map_err(|e| NeuralError::InvalidGold {
            step: state.step_count + 1,
            action: e.to_string(),
        })?;
    }
    if !state.is_terminal() {
        return Err(NeuralError::InvalidGold {
            step: state.step_count,
            action: "end of sequence".to_string(),
        });
    }
    let mut tape = enc.tape;
    let root = if losses.is_empty() {
        tape.input(vec![0.0])
    } else {
        tape.add(losses)
    };
    Ok((tape.value(root)[0], tape, root))
}

/// Loss and its parameter gradients for one sentence.
pub fn loss_and_grads(
    model: &Model,
    tokens: &[String],
    external: Option<&[Vec<f64>]>,
    gold: &[Action],
) -> Result<(f64, Grads), NeuralError> {
    let (loss, tape, root) = sentence_loss(model, tokens, external, gold)?;
    let mut grads = Grads::zeros(&model.params);
    tape.backward(root, &model.params, &mut grads);
    if !grads.is_finite() {
        return Err(NeuralError::NonFinite(format!(
            "loss {loss} on `{}`",
            tokens.join(" ")
        )));
    }
    Ok((loss, grads))
}

/// Greedy decoding: the highest-scoring valid action at every step, ties
/// going to the earlier action in the inventory.
pub fn predict_actions(
    model: &Model,
    tokens: &[String],
    external: Option<&[Vec<f64>]>,
) -> Result<Vec<Action>, NeuralError> {
    let actions = model.actions();
    let budget = model.config.budget_multiplier * tokens.len();
    let mut enc = Encoder::new(model, tokens, external)?;
    let mut state = ParserState::initial(tokens.len());
    while !state.is_terminal() {
        let valid = valid_indices(&state, &actions, budget);
        let feature = enc.features(&state);
        let logits = enc.logits(feature);
        let scores = enc.tape.value(logits);
        let best = valid
            .iter()
            .copied()
            .reduce(|a, b| if scores[b] > scores[a] { b } else { a })
            .expect("a non-terminal state has a valid action");
        let a = &actions[best];
        enc.advance(&state, a, best)?;
        state = state.apply(a).expect("chosen among valid actions");
    }
    Ok(state.history)
}

pub fn predict(
    model: &Model,
    tokens: &[String],
    external: Option<&[Vec<f64>]>,
) -> Result<Vec<Mention>, NeuralError> {
    let actions = predict_actions(model, tokens, external)?;
    let mut state = ParserState::initial(tokens.len());
    for a in &actions {
        state = state.apply(a).expect("replaying a valid rollout");
    }
    Ok(state.mention_set())
}

//! Neural action scorer.
//!
//! Tokens are encoded by word embeddings and a character CNN, contextualized
//! by a BiLSTM and optionally extended with precomputed external vectors.
//! Stack contents are summarized by a Stack-LSTM; reductions push the affine
//! composition of the top two summaries. Each step scores actions from the
//! top three summaries, their attention over the buffer, an LSTM over the
//! action history and the front of the buffer, with invalid actions masked
//! out of the softmax.
//!
//! Everything runs in `f64` on a per-sentence [`Tape`].

mod io;
mod model;
mod params;
mod tape;
mod train;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use io::{
    load_checkpoint, parse_external_vectors, save_checkpoint, write_external_vectors,
    CHECKPOINT_VERSION,
};
pub use model::{
    action_distribution, compose, loss_and_grads, predict, predict_actions, sentence_loss,
    token_reps, Encoder, Model, StackLstm, StackSlot,
};
pub use params::{
    feature_dim, init_params, rep_dim, sgd_step, Grads, ParamId, ScorerParams, Tensor, Vocab,
    ATTN_W, PARAM_COUNT,
};
pub use tape::{softmax, NodeId, Tape};
pub use train::{
    finite_diff_check, prepare, train, train_with, EpochReport, GradCheck, Prepared, TrainItem,
};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum NeuralError {
    #[error("invalid config: {0}")]
    Config(String),
    #[error("no entity types to predict")]
    NoTypes,
    #[error("empty training corpus")]
    EmptyCorpus,
    #[error("external vectors required (external_vec_dim > 0) but none given")]
    MissingExternal,
    #[error("external vectors: expected {expected}, found {found}")]
    ExternalShape { expected: usize, found: usize },
    #[error("external vectors line {line}: {msg}")]
    ExternalParse { line: usize, msg: String },
    #[error("gold action {action} is invalid at step {step}")]
    InvalidGold { step: usize, action: String },
    #[error("action {0} is not in the model's inventory")]
    UnknownAction(String),
    #[error("pop from an empty stack")]
    EmptyStack,
    #[error("non-finite gradient: {0}")]
    NonFinite(String),
    #[error("checkpoint: {0}")]
    Checkpoint(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScorerConfig {
    pub word_dim: usize,
    pub char_dim: usize,
    pub char_cnn_window: usize,
    pub char_filters: usize,
    /// Per direction.
    pub hidden_dim: usize,
    pub stack_dim: usize,
    pub action_dim: usize,
    pub attention: bool,
    /// 0 disables external vectors.
    pub external_vec_dim: usize,
    pub learning_rate: f64,
    pub epochs: usize,
    pub seed: u64,
    pub budget_multiplier: usize,
}

impl Default for ScorerConfig {
    fn default() -> Self {
        ScorerConfig {
            word_dim: 24,
            char_dim: 8,
            char_cnn_window: 3,
            char_filters: 12,
            hidden_dim: 24,
            stack_dim: 32,
            action_dim: 12,
            attention: true,
            external_vec_dim: 0,
            learning_rate: 0.05,
            epochs: 20,
            seed: 1,
            budget_multiplier: crate::transitions::BUDGET_MULTIPLIER,
        }
    }
}

impl ScorerConfig {
    pub const KEYS: [&'static str; 13] = [
        "word_dim",
        "char_dim",
        "char_cnn_window",
        "char_filters",
        "hidden_dim",
        "stack_dim",
        "action_dim",
        "attention",
        "external_vec_dim",
        "learning_rate",
        "epochs",
        "seed",
        "budget_multiplier",
    ];

    pub fn validate(&self) -> Result<(), NeuralError> {
        let dims = [
            ("word_dim", self.word_dim),
            ("char_dim", self.char_dim),
            ("char_cnn_window", self.char_cnn_window),
            ("char_filters", self.char_filters),
            ("hidden_dim", self.hidden_dim),
            ("stack_dim", self.stack_dim),
            ("action_dim", self.action_dim),
            ("budget_multiplier", self.budget_multiplier),
        ];
        if let Some((name, _)) = dims.iter().find(|(_, v)| *v == 0) {
            return Err(NeuralError::Config(format!("{name} must be positive")));
        }
        if self.char_cnn_window % 2 == 0 {
            return Err(NeuralError::Config(
                "char_cnn_window must be odd".to_string(),
            ));
        }
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            return Err(NeuralError::Config(
                "learning_rate must be positive".to_string(),
            ));
        }
        Ok(())
    }

    /// Sets a field from its textual form. Returns `Ok(false)` for an
    /// unknown key.
    pub fn set(&mut self, key: &str, value: &str) -> Result<bool, NeuralError> {
        fn num<T: std::str::FromStr>(key: &str, value: &str) -> Result<T, NeuralError> {
            value
                .parse()
                .map_err(|_| NeuralError::Config(format!("{key}: cannot parse `{value}`")))
        }
        match key {
            "word_dim" => self.word_dim = num(key, value)?,
            "char_dim" => self.char_dim = num(key, value)?,
            "char_cnn_window" => self.char_cnn_window = num(key, value)?,
            "char_filters" => self.char_filters = num(key, value)?,
            "hidden_dim" => self.hidden_dim = num(key, value)?,
            "stack_dim" => self.stack_dim = num(key, value)?,
            "action_dim" => self.action_dim = num(key, value)?,
            "attention" => self.attention = num(key, value)?,
            "external_vec_dim" => self.external_vec_dim = num(key, value)?,
            "learning_rate" => self.learning_rate = num(key, value)?,
            "epochs" => self.epochs = num(key, value)?,
            "seed" => self.seed = num(key, value)?,
            "budget_multiplier" => self.budget_multiplier = num(key, value)?,
            _ => return Ok(false),
        }
        Ok(true)
    }

    /// `key = value` lines in field order.
    pub fn to_text(&self) -> String {
        let v = serde_json::to_value(self).expect("config serializes");
        Self::KEYS
            .iter()
            .map(|k| format!("{k} = {}\n", v[k]))
            .collect()
    }
}

#[cfg(test)]
mod tests;

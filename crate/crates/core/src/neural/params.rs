use std::collections::HashMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{NeuralError, ScorerConfig};
use crate::corpus::Corpus;

pub type ParamId = usize;

pub const WORD_EMB: ParamId = 0;
pub const CHAR_EMB: ParamId = 1;
pub const CHAR_CNN_W: ParamId = 2;
pub const CHAR_CNN_B: ParamId = 3;
pub const FWD_W: ParamId = 4;
pub const FWD_B: ParamId = 5;
pub const BWD_W: ParamId = 6;
pub const BWD_B: ParamId = 7;
pub const STACK_W: ParamId = 8;
pub const STACK_B: ParamId = 9;
pub const COMPOSE_W: ParamId = 10;
pub const COMPOSE_B: ParamId = 11;
pub const ATTN_W: [ParamId; 3] = [12, 13, 14];
pub const ACTION_EMB: ParamId = 15;
pub const ACTION_W: ParamId = 16;
pub const ACTION_B: ParamId = 17;
pub const OUT_W: ParamId = 18;
pub const OUT_B: ParamId = 19;
pub const S_EMPTY: ParamId = 20;
pub const A_EMPTY: ParamId = 21;
pub const B_EMPTY: ParamId = 22;
pub const PARAM_COUNT: usize = 23;

/// Row-major matrix; vectors have one column.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tensor {
    pub name: String,
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScorerParams {
    pub tensors: Vec<Tensor>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Grads {
    pub tensors: Vec<Vec<f64>>,
}

impl Grads {
    pub fn zeros(params: &ScorerParams) -> Self {
        Grads {
            tensors: params
                .tensors
                .iter()
                .map(|t| vec![0.0; t.data.len()])
                .collect(),
        }
    }

    pub fn is_finite(&self) -> bool {
        self.tensors.iter().flatten().all(|v| v.is_finite())
    }
}

/// Word and character vocabularies; index 0 is the unknown symbol.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Vocab {
    pub words: Vec<String>,
    pub chars: Vec<char>,
    #[serde(skip)]
    word_index: HashMap<String, usize>,
    #[serde(skip)]
    char_index: HashMap<char, usize>,
}

pub const UNK: &str = "<unk>";

impl Vocab {
    pub fn new(words: Vec<String>, chars: Vec<char>) -> Self {
        let word_index = words
            .iter()
            .enumerate()
            .map(|(i, w)| (w.clone(), i))
            .collect();
        let char_index = chars.iter().enumerate().map(|(i, &c)| (c, i)).collect();
        Vocab {
            words,
            chars,
            word_index,
            char_index,
        }
    }

    /// Lowercased words and raw characters of `corpus`, in first-seen order.
    pub fn from_corpus(corpus: &Corpus) -> Self {
        let mut words = vec![UNK.to_string()];
        let mut chars = vec!['\u{0}'];
        let mut seen_w = std::collections::HashSet::new();
        let mut seen_c = std::collections::HashSet::new();
        for tok in corpus.sentences.iter().flat_map(|s| &s.tokens) {
            let lw = tok.to_lowercase();
            if seen_w.insert(lw.clone()) {
                words.push(lw);
            }
            for c in tok.chars() {
                if seen_c.insert(c) {
                    chars.push(c);
                }
            }
        }
        Vocab::new(words, chars)
    }

    pub fn word(&self, token: &str) -> usize {
        self.word_index
            .get(&token.to_lowercase())
            .copied()
            .unwrap_or(0)
    }

    pub fn char(&self, c: char) -> usize {
        self.char_index.get(&c).copied().unwrap_or(0)
    }

    /// Rebuilds lookup maps after deserialization.
    pub fn reindex(self) -> Self {
        Vocab::new(self.words, self.chars)
    }
}

/// Width of the per-token representation fed to the stack and attention.
pub fn rep_dim(config: &ScorerConfig) -> usize {
    2 * config.hidden_dim + config.external_vec_dim
}

pub fn feature_dim(config: &ScorerConfig) -> usize {
    3 * config.stack_dim + 3 * rep_dim(config) + config.action_dim + rep_dim(config)
}

fn shapes(
    config: &ScorerConfig,
    vocab: &Vocab,
    n_actions: usize,
) -> Vec<(&'static str, usize, usize)> {
    let c = config;
    let token_dim = c.word_dim + c.char_filters;
    let rep = rep_dim(c);
    let h = c.hidden_dim;
    vec![
        ("word_emb", vocab.words.len(), c.word_dim),
        ("char_emb", vocab.chars.len(), c.char_dim),
        ("char_cnn_w", c.char_filters, c.char_cnn_window * c.char_dim),
        ("char_cnn_b", c.char_filters, 1),
        ("bilstm_fwd_w", 4 * h, token_dim + h),
        ("bilstm_fwd_b", 4 * h, 1),
        ("bilstm_bwd_w", 4 * h, token_dim + h),
        ("bilstm_bwd_b", 4 * h, 1),
        ("stack_lstm_w", 4 * c.stack_dim, rep + c.stack_dim),
        ("stack_lstm_b", 4 * c.stack_dim, 1),
        ("compose_w", rep, 2 * c.stack_dim),
        ("compose_b", rep, 1),
        ("attn_w0", c.stack_dim, rep),
        ("attn_w1", c.stack_dim, rep),
        ("attn_w2", c.stack_dim, rep),
        ("action_emb", n_actions, c.action_dim),
        ("action_lstm_w", 4 * c.action_dim, 2 * c.action_dim),
        ("action_lstm_b", 4 * c.action_dim, 1),
        ("out_w", n_actions, feature_dim(c)),
        ("out_b", n_actions, 1),
        ("s_empty", c.stack_dim, 1),
        ("a_empty", c.action_dim, 1),
        ("b_empty", rep, 1),
    ]
}

/// Uniform in `[-r, r]` with `r = sqrt(6 / (rows + cols))` per tensor.
pub fn init_params(
    config: &ScorerConfig,
    vocab: &Vocab,
    n_actions: usize,
    seed: u64,
) -> ScorerParams {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let tensors = shapes(config, vocab, n_actions)
        .into_iter()
        .map(|(name, rows, cols)| {
            let r = (6.0 / (rows + cols) as f64).sqrt();
            let data = (0..rows * cols).map(|_| rng.gen_range(-r..=r)).collect();
            Tensor {
                name: name.to_string(),
                rows,
                cols,
                data,
            }
        })
        .collect();
    ScorerParams { tensors }
}

impl ScorerParams {
    pub fn check_shapes(
        &self,
        config: &ScorerConfig,
        vocab: &Vocab,
        n_actions: usize,
    ) -> Result<(), NeuralError> {
        let expected = shapes(config, vocab, n_actions);
        if expected.len() != self.tensors.len() {
            return Err(NeuralError::Checkpoint(format!(
                "expected {} tensors, found {}",
                expected.len(),
                self.tensors.len()
            )));
        }
        for ((name, rows, cols), t) in expected.iter().zip(&self.tensors) {
            if t.name != *name || t.rows != *rows || t.cols != *cols || t.data.len() != rows * cols
            {
                return Err(NeuralError::Checkpoint(format!(
                    "tensor {} is {}x{}, expected {name} {rows}x{cols}",
                    t.name, t.rows, t.cols
                )));
            }
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.tensors.iter().map(|t| t.data.len()).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// `params -= lr * grads`.
pub fn sgd_step(params: &mut ScorerParams, grads: &Grads, lr: f64) {
    for (t, g) in params.tensors.iter_mut().zip(&grads.tensors) {
        for (p, d) in t.data.iter_mut().zip(g) {
            *p -= lr * d;
        }
    }
}

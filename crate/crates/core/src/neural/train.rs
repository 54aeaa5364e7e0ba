use std::collections::BTreeSet;
use std::ops::ControlFlow;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::model::{loss_and_grads, sentence_loss, Model};
use super::params::{self, sgd_step, Vocab};
use super::{NeuralError, ScorerConfig};
use crate::corpus::{Corpus, Sentence};
use crate::transitions::{oracle, Action};

#[derive(Debug, Clone, PartialEq)]
pub struct TrainItem {
    pub tokens: Vec<String>,
    pub external: Option<Vec<Vec<f64>>>,
    pub actions: Vec<Action>,
}

/// Oracle-derived training items plus what had to be left out.
#[derive(Debug, Clone, PartialEq)]
pub struct Prepared {
    pub items: Vec<TrainItem>,
    /// Sentences skipped because their mentions nest.
    pub nested_sentences: usize,
    /// Gold mentions the oracle could not produce.
    pub uncovered_mentions: usize,
}

pub fn prepare(
    corpus: &Corpus,
    external: Option<&[Vec<Vec<f64>>]>,
) -> Result<Prepared, NeuralError> {
    if let Some(ext) = external {
        if ext.len() != corpus.len() {
            return Err(NeuralError::ExternalShape {
                expected: corpus.len(),
                found: ext.len(),
            });
        }
    }
    let mut out = Prepared {
        items: Vec::new(),
        nested_sentences: 0,
        uncovered_mentions: 0,
    };
    for (i, s) in corpus.sentences.iter().enumerate() {
        match oracle(s) {
            Ok(r) => {
                out.uncovered_mentions += r.uncovered.len();
                out.items.push(TrainItem {
                    tokens: s.tokens.clone(),
                    external: external.map(|e| e[i].clone()),
                    actions: r.actions,
                });
            }
            Err(_) => out.nested_sentences += 1,
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochReport {
    /// 1-based.
    pub epoch: usize,
    pub mean_loss: f64,
}

pub fn train(corpus: &Corpus, config: &ScorerConfig) -> Result<Model, NeuralError> {
    train_with(corpus, None, config, |_, _| {
        Ok::<_, NeuralError>(ControlFlow::Continue(()))
    })
}

/// Per-sentence SGD over shuffled teacher-forced rollouts. `on_epoch` runs
/// after every epoch and may stop training early.
pub fn train_with<E, F>(
    corpus: &Corpus,
    external: Option<&[Vec<Vec<f64>>]>,
    config: &ScorerConfig,
    mut on_epoch: F,
) -> Result<Model, E>
where
    E: From<NeuralError>,
    F: FnMut(&EpochReport, &Model) -> Result<ControlFlow<()>, E>,
{
    let prepared = prepare(corpus, external)?;
    if prepared.items.is_empty() {
        return Err(NeuralError::EmptyCorpus.into());
    }
    let mut model = Model::new(
        config.clone(),
        Vocab::from_corpus(corpus),
        corpus.entity_types(),
    )?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed.wrapping_add(0x5eed));
    let mut order: Vec<usize> = (0..prepared.items.len()).collect();
    for epoch in 1..=config.epochs {
        order.shuffle(&mut rng);
        let mut total = 0.0;
        for &i in &order {
            let item = &prepared.items[i];
            let (loss, grads) = loss_and_grads(
                &model,
                &item.tokens,
                item.external.as_deref(),
                &item.actions,
            )?;
            sgd_step(&mut model.params, &grads, config.learning_rate);
            total += loss;
        }
        let report = EpochReport {
            epoch,
            mean_loss: total / order.len() as f64,
        };
        if on_epoch(&report, &model)?.is_break() {
            break;
        }
    }
    Ok(model)
}

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheck {
    pub max_rel_error: f64,
    /// (tensor, flat index, analytic, numeric) for every sampled coordinate.
    pub coordinates: Vec<(String, usize, f64, f64)>,
}

impl GradCheck {
    pub fn groups(&self) -> BTreeSet<&str> {
        self.coordinates.iter().map(|c| c.0.as_str()).collect()
    }
}

/// Denominator floor for the relative error. Central differences at
/// `epsilon = 1e-5` carry round-off near 1e-10, so gradients smaller than
/// this are compared on an absolute scale.
const REL_FLOOR: f64 = 1e-5;

fn rel_error(a: f64, n: f64) -> f64 {
    (a - n).abs() / a.abs().max(n.abs()).max(REL_FLOOR)
}

/// Central differences against analytic gradients on `samples` coordinates:
/// one from every tensor first, the rest uniformly over tensors. Embedding
/// rows are drawn only from rows the sentence uses.
pub fn finite_diff_check(
    model: &Model,
    sentence: &Sentence,
    external: Option<&[Vec<f64>]>,
    epsilon: f64,
    samples: usize,
    seed: u64,
) -> Result<GradCheck, NeuralError> {
    if sentence.is_empty() {
        return Ok(GradCheck {
            max_rel_error: 0.0,
            coordinates: Vec::new(),
        });
    }
    let gold = oracle(sentence)
        .map_err(|e| NeuralError::InvalidGold {
            step: 0,
            action: e.to_string(),
        })?
        .actions;
    let (_, grads) = loss_and_grads(model, &sentence.tokens, external, &gold)?;
    let inventory = model.actions();

    let active_rows = |p: usize| -> Vec<usize> {
        let t = &model.params.tensors[p];
        let rows: BTreeSet<usize> = match p {
            params::WORD_EMB => sentence
                .tokens
                .iter()
                .map(|w| model.vocab.word(w))
                .collect(),
            params::CHAR_EMB => sentence
                .tokens
                .iter()
                .flat_map(|w| w.chars())
                .map(|c| model.vocab.char(c))
                .collect(),
            params::ACTION_EMB => gold
                .iter()
                .filter_map(|a| inventory.iter().position(|x| x == a))
                .collect(),
            _ => (0..t.rows).collect(),
        };
        rows.into_iter().collect()
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut picks = Vec::with_capacity(samples.max(params::PARAM_COUNT));
    for k in 0..samples.max(params::PARAM_COUNT) {
        let p = if k < params::PARAM_COUNT {
            k
        } else {
            rng.gen_range(0..params::PARAM_COUNT)
        };
        let rows = active_rows(p);
        let cols = model.params.tensors[p].cols;
        let row = rows[rng.gen_range(0..rows.len())];
        picks.push((p, row * cols + rng.gen_range(0..cols)));
    }

    let mut probe = model.clone();
    let mut out = GradCheck {
        max_rel_error: 0.0,
        coordinates: Vec::with_capacity(picks.len()),
    };
    for (p, i) in picks {
        let orig = model.params.tensors[p].data[i];
        let mut loss_at = |v: f64| -> Result<f64, NeuralError> {
            probe.params.tensors[p].data[i] = v;
            Ok(sentence_loss(&probe, &sentence.tokens, external, &gold)?.0)
        };
        let numeric = (loss_at(orig + epsilon)? - loss_at(orig - epsilon)?) / (2.0 * epsilon);
        probe.params.tensors[p].data[i] = orig;
        let analytic = grads.tensors[p][i];
        out.max_rel_error = out.max_rel_error.max(rel_error(analytic, numeric));
        out.coordinates
            .push((model.params.tensors[p].name.clone(), i, analytic, numeric));
    }
    Ok(out)
}

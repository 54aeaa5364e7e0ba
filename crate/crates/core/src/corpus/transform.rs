use std::collections::{BTreeMap, BTreeSet};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{Corpus, CorpusError, Fragment, Mention, Sentence};

/// Training-set rebalancing toward sentences with discontinuous mentions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ResampleMode {
    /// Keep only sentences with at least one discontinuous mention.
    DiscOnly,
    /// Keep every discontinuous sentence plus as many randomly chosen others.
    UnderSample,
    /// Duplicate discontinuous sentences until both groups are the same size.
    OverSample,
}

impl std::str::FromStr for ResampleMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "disc-only" | "disconly" | "i" => Ok(ResampleMode::DiscOnly),
            "under" | "undersample" | "ii" => Ok(ResampleMode::UnderSample),
            "over" | "oversample" | "iii" => Ok(ResampleMode::OverSample),
            other => Err(format!("unknown resample mode `{other}`")),
        }
    }
}

/// Replaces every discontinuous mention with its covering span and merges
/// transitively overlapping mentions into one. A merged mention takes the
/// majority type of its group; ties go to the leftmost member.
pub fn flatten_for_flat_model(c: &Corpus) -> Corpus {
    let sentences = c.sentences.iter().map(flatten_sentence).collect();
    Corpus {
        sentences,
        split_name: c.split_name.clone(),
    }
}

fn flatten_sentence(s: &Sentence) -> Sentence {
    // Mentions are sorted by first fragment, so their covering spans are
    // sorted by start and a single sweep finds the overlap groups.
    let mut groups: Vec<(Fragment, Vec<&Mention>)> = Vec::new();
    let mut spans: Vec<(Fragment, &Mention)> = s
        .mentions
        .iter()
        .map(|m| (Fragment::new(m.start(), m.end()), m))
        .collect();
    spans.sort_by_key(|(f, _)| (f.start, f.end));
    for (span, m) in spans {
        match groups.last_mut() {
            Some((cover, members)) if span.start < cover.end => {
                cover.end = cover.end.max(span.end);
                members.push(m);
            }
            _ => groups.push((span, vec![m])),
        }
    }
    let mentions = groups
        .into_iter()
        .map(|(cover, members)| {
            let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
            for m in &members {
                *counts.entry(m.entity_type.as_str()).or_insert(0) += 1;
            }
            let best = counts.values().copied().max().unwrap_or(0);
            let ty = members
                .iter()
                .map(|m| m.entity_type.as_str())
                .find(|t| counts[t] == best)
                .unwrap_or_default();
            Mention {
                fragments: vec![cover],
                entity_type: ty.to_string(),
            }
        })
        .collect();
    Sentence {
        tokens: s.tokens.clone(),
        mentions: dedup_sorted(mentions),
        doc_id: s.doc_id.clone(),
        sent_index: s.sent_index,
    }
}

fn dedup_sorted(mut mentions: Vec<Mention>) -> Vec<Mention> {
    mentions.sort();
    mentions.dedup();
    mentions
}

pub fn resample(c: &Corpus, mode: ResampleMode, seed: u64) -> Result<Corpus, CorpusError> {
    let (disc, flat): (Vec<usize>, Vec<usize>) =
        (0..c.len()).partition(|&i| c.sentences[i].has_discontinuous());
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let keep: Vec<usize> = match mode {
        ResampleMode::DiscOnly => disc,
        ResampleMode::UnderSample => {
            if disc.is_empty() {
                return Err(CorpusError::NoDiscontinuousSentences);
            }
            let mut chosen = flat.clone();
            chosen.shuffle(&mut rng);
            chosen.truncate(disc.len());
            let mut keep: Vec<usize> = disc.into_iter().chain(chosen).collect();
            keep.sort_unstable();
            keep
        }
        ResampleMode::OverSample => {
            if disc.is_empty() {
                return Err(CorpusError::NoDiscontinuousSentences);
            }
            let extra = flat.len().saturating_sub(disc.len());
            let mut order = disc.clone();
            order.shuffle(&mut rng);
            let mut keep: Vec<usize> = (0..c.len()).collect();
            keep.extend(order.iter().cycle().take(extra));
            keep
        }
    };
    Ok(Corpus {
        sentences: keep.into_iter().map(|i| c.sentences[i].clone()).collect(),
        split_name: c.split_name.clone(),
    })
}

/// Document-level random split into train, dev and test.
pub fn split(
    c: &Corpus,
    train_frac: f64,
    dev_frac: f64,
    seed: u64,
) -> Result<(Corpus, Corpus, Corpus), CorpusError> {
    if !(train_frac > 0.0 && dev_frac > 0.0 && train_frac + dev_frac < 1.0) {
        return Err(CorpusError::BadFractions {
            train: train_frac,
            dev: dev_frac,
        });
    }
    let mut docs: Vec<String> = Vec::new();
    let mut seen = BTreeSet::new();
    for (i, s) in c.sentences.iter().enumerate() {
        let key = s.doc_key(i);
        if seen.insert(key.clone()) {
            docs.push(key);
        }
    }
    let n = docs.len();
    if n < 3 {
        return Err(CorpusError::TooFewDocuments(n));
    }
    docs.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let n_train = ((train_frac * n as f64).round() as usize).clamp(1, n - 2);
    let n_dev = ((dev_frac * n as f64).round() as usize).clamp(1, n - 1 - n_train);
    let assign: BTreeMap<&str, usize> = docs
        .iter()
        .enumerate()
        .map(|(rank, d)| {
            (
                d.as_str(),
                usize::from(rank >= n_train) + usize::from(rank >= n_train + n_dev),
            )
        })
        .collect();
    let mut parts = [Vec::new(), Vec::new(), Vec::new()];
    for (i, s) in c.sentences.iter().enumerate() {
        parts[assign[s.doc_key(i).as_str()]].push(s.clone());
    }
    let [train, dev, test] = parts;
    let named = |sentences, name: &str| Corpus {
        sentences,
        split_name: name.to_string(),
    };
    Ok((
        named(train, "train"),
        named(dev, "dev"),
        named(test, "test"),
    ))
}

//! Strict-match scoring.
//!
//! A predicted mention is correct only when a gold mention of the same
//! sentence has the same type and the same fragments. Counts are summed over
//! all sentences before precision and recall are computed.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use serde_json::json;
use thiserror::Error;

use crate::corpus::{category_within, Corpus, Mention, OverlapCategory};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EvalError {
    #[error("gold has {gold} sentences but predictions have {pred}")]
    LengthMismatch { gold: usize, pred: usize },
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Prf {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub correct: usize,
    pub gold: usize,
    pub predicted: usize,
}

impl Prf {
    /// Precision is 0 when nothing was predicted, recall 0 when nothing was
    /// expected.
    pub fn from_counts(correct: usize, gold: usize, predicted: usize) -> Self {
        let ratio = |a: usize, b: usize| if b == 0 { 0.0 } else { a as f64 / b as f64 };
        let precision = ratio(correct, predicted);
        let recall = ratio(correct, gold);
        let f1 = if precision + recall > 0.0 {
            2.0 * precision * recall / (precision + recall)
        } else {
            0.0
        };
        Prf {
            precision,
            recall,
            f1,
            correct,
            gold,
            predicted,
        }
    }
}

/// Mentions per sentence, in corpus order.
pub fn mentions_of(c: &Corpus) -> Vec<Vec<Mention>> {
    c.sentences.iter().map(|s| s.mentions.clone()).collect()
}

fn check_lengths(gold: &[Vec<Mention>], pred: &[Vec<Mention>]) -> Result<(), EvalError> {
    if gold.len() != pred.len() {
        return Err(EvalError::LengthMismatch {
            gold: gold.len(),
            pred: pred.len(),
        });
    }
    Ok(())
}

fn as_set<'a>(ms: impl IntoIterator<Item = &'a Mention>) -> BTreeSet<&'a Mention> {
    ms.into_iter().collect()
}

fn count<'a, F>(gold: &'a [Vec<Mention>], pred: &'a [Vec<Mention>], keep: F) -> Prf
where
    F: Fn(&Mention) -> bool,
{
    let (mut correct, mut n_gold, mut n_pred) = (0, 0, 0);
    for (g, p) in gold.iter().zip(pred) {
        let g = as_set(g.iter().filter(|m| keep(m)));
        let p = as_set(p.iter().filter(|m| keep(m)));
        correct += g.intersection(&p).count();
        n_gold += g.len();
        n_pred += p.len();
    }
    Prf::from_counts(correct, n_gold, n_pred)
}

pub fn strict_prf(gold: &[Vec<Mention>], pred: &[Vec<Mention>]) -> Result<Prf, EvalError> {
    check_lengths(gold, pred)?;
    Ok(count(gold, pred, |_| true))
}

/// Scores only the sentences whose gold has a discontinuous mention; `None`
/// when there are no such sentences.
pub fn eval_disc_sentences(
    gold: &[Vec<Mention>],
    pred: &[Vec<Mention>],
) -> Result<Option<Prf>, EvalError> {
    check_lengths(gold, pred)?;
    let (g, p): (Vec<Vec<Mention>>, Vec<Vec<Mention>>) = gold
        .iter()
        .zip(pred)
        .filter(|(g, _)| g.iter().any(Mention::is_discontinuous))
        .map(|(g, p)| (g.clone(), p.clone()))
        .unzip();
    if g.is_empty() {
        return Ok(None);
    }
    Ok(Some(count(&g, &p, |_| true)))
}

/// Both sides restricted to discontinuous mentions.
pub fn eval_disc_only(gold: &[Vec<Mention>], pred: &[Vec<Mention>]) -> Result<Prf, EvalError> {
    check_lengths(gold, pred)?;
    Ok(count(gold, pred, Mention::is_discontinuous))
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct CategoryScore {
    pub prf: Prf,
    pub gold_count: usize,
}

/// Gold discontinuous mentions are bucketed by their overlap category among
/// the gold mentions of their sentence, predicted ones by their category
/// among the predictions. Recall of a bucket counts its gold mentions found
/// anywhere in the predictions; precision counts its predicted mentions found
/// in the gold.
pub fn eval_by_category(
    gold: &[Vec<Mention>],
    pred: &[Vec<Mention>],
) -> Result<BTreeMap<OverlapCategory, CategoryScore>, EvalError> {
    check_lengths(gold, pred)?;
    let mut hits: BTreeMap<OverlapCategory, [usize; 4]> =
        OverlapCategory::ALL.iter().map(|&c| (c, [0; 4])).collect();
    for (g, p) in gold.iter().zip(pred) {
        let g = dedup(g);
        let p = dedup(p);
        let gs = as_set(&g);
        let ps = as_set(&p);
        for i in 0..g.len() {
            if let Some(cat) = category_within(&g, i) {
                let e = hits.get_mut(&cat).expect("all categories present");
                e[0] += 1;
                e[1] += usize::from(ps.contains(&g[i]));
            }
        }
        for i in 0..p.len() {
            if let Some(cat) = category_within(&p, i) {
                let e = hits.get_mut(&cat).expect("all categories present");
                e[2] += 1;
                e[3] += usize::from(gs.contains(&p[i]));
            }
        }
    }
    Ok(hits
        .into_iter()
        .map(|(cat, [n_gold, found, n_pred, right])| {
            let ratio = |a: usize, b: usize| if b == 0 { 0.0 } else { a as f64 / b as f64 };
            let precision = ratio(right, n_pred);
            let recall = ratio(found, n_gold);
            let f1 = if precision + recall > 0.0 {
                2.0 * precision * recall / (precision + recall)
            } else {
                0.0
            };
            let prf = Prf {
                precision,
                recall,
                f1,
                correct: found,
                gold: n_gold,
                predicted: n_pred,
            };
            (
                cat,
                CategoryScore {
                    prf,
                    gold_count: n_gold,
                },
            )
        })
        .collect())
}

fn dedup(ms: &[Mention]) -> Vec<Mention> {
    let mut v = ms.to_vec();
    v.sort();
    v.dedup();
    v
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Bucket {
    pub label: String,
    pub gold: usize,
    pub found: usize,
    pub recall: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LengthBuckets {
    /// Mention token length 1, 2, 3, 4, 5+.
    pub mention_length: Vec<Bucket>,
    /// Interval length 0 (continuous), 1, 2, 3, 4+.
    pub interval_length: Vec<Bucket>,
}

pub fn recall_by_length(
    gold: &[Vec<Mention>],
    pred: &[Vec<Mention>],
) -> Result<LengthBuckets, EvalError> {
    check_lengths(gold, pred)?;
    let mut by_len = [(0usize, 0usize); 5];
    let mut by_gap = [(0usize, 0usize); 5];
    for (g, p) in gold.iter().zip(pred) {
        let ps = as_set(p);
        for m in as_set(g) {
            let hit = usize::from(ps.contains(m));
            let l = &mut by_len[(m.token_len().max(1) - 1).min(4)];
            l.0 += 1;
            l.1 += hit;
            let i = &mut by_gap[m.interval_len().min(4)];
            i.0 += 1;
            i.1 += hit;
        }
    }
    let buckets = |counts: [(usize, usize); 5], labels: [&str; 5]| -> Vec<Bucket> {
        counts
            .iter()
            .zip(labels)
            .map(|(&(gold, found), label)| Bucket {
                label: label.to_string(),
                gold,
                found,
                recall: if gold == 0 {
                    0.0
                } else {
                    found as f64 / gold as f64
                },
            })
            .collect()
    };
    Ok(LengthBuckets {
        mention_length: buckets(by_len, ["1", "2", "3", "4", "5+"]),
        interval_length: buckets(by_gap, ["0", "1", "2", "3", "4+"]),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub overall: Prf,
    pub disc_sentences: Option<Prf>,
    pub disc_only: Prf,
    pub by_category: BTreeMap<OverlapCategory, CategoryScore>,
    pub by_length: LengthBuckets,
}

pub fn evaluate(gold: &[Vec<Mention>], pred: &[Vec<Mention>]) -> Result<EvalReport, EvalError> {
    Ok(EvalReport {
        overall: strict_prf(gold, pred)?,
        disc_sentences: eval_disc_sentences(gold, pred)?,
        disc_only: eval_disc_only(gold, pred)?,
        by_category: eval_by_category(gold, pred)?,
        by_length: recall_by_length(gold, pred)?,
    })
}

fn prf_json(p: &Prf) -> serde_json::Value {
    json!({
        "precision": p.precision,
        "recall": p.recall,
        "f1": p.f1,
        "correct": p.correct,
        "gold": p.gold,
        "predicted": p.predicted,
    })
}

impl EvalReport {
    pub fn to_json(&self) -> serde_json::Value {
        let by_category: serde_json::Map<String, serde_json::Value> = self
            .by_category
            .iter()
            .map(|(c, s)| (c.name().to_string(), json!({ "f1": s.prf.f1, "precision": s.prf.precision, "recall": s.prf.recall, "gold_count": s.gold_count })))
            .collect();
        let buckets = |bs: &[Bucket]| -> serde_json::Value {
            bs.iter().map(|b| json!({ "bucket": b.label, "gold": b.gold, "found": b.found, "recall": b.recall })).collect()
        };
        json!({
            "overall": prf_json(&self.overall),
            "disc_sentences": self.disc_sentences.as_ref().map(prf_json),
            "disc_only": prf_json(&self.disc_only),
            "by_category": by_category,
            "by_length": {
                "mention_length": buckets(&self.by_length.mention_length),
                "interval_length": buckets(&self.by_length.interval_length),
            },
        })
    }

    pub fn to_table(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!(
            "{:<16} {:>9} {:>9} {:>9}\n",
            "subset", "precision", "recall", "f1"
        ));
        let mut row = |name: &str, p: Option<&Prf>| match p {
            Some(p) => out.push_str(&format!(
                "{:<16} {:>9.4} {:>9.4} {:>9.4}\n",
                name, p.precision, p.recall, p.f1
            )),
            None => out.push_str(&format!("{:<16} {:>9} {:>9} {:>9}\n", name, "-", "-", "-")),
        };
        row("overall", Some(&self.overall));
        row("disc_sentences", self.disc_sentences.as_ref());
        row("disc_only", Some(&self.disc_only));
        out.push('\n');
        out.push_str(&format!("{:<16} {:>9} {:>9}\n", "category", "gold", "f1"));
        for (c, s) in &self.by_category {
            out.push_str(&format!(
                "{:<16} {:>9} {:>9.4}\n",
                c.name(),
                s.gold_count,
                s.prf.f1
            ));
        }
        for (title, bs) in [
            ("mention_length", &self.by_length.mention_length),
            ("interval_length", &self.by_length.interval_length),
        ] {
            out.push('\n');
            out.push_str(&format!("{:<16} {:>9} {:>9}\n", title, "gold", "recall"));
            for b in bs {
                out.push_str(&format!(
                    "{:<16} {:>9} {:>9.4}\n",
                    b.label, b.gold, b.recall
                ));
            }
        }
        out
    }
}

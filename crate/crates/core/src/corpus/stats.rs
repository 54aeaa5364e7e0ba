use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use super::{Corpus, CorpusError, Mention};

/// How a discontinuous mention shares its components with other mentions
/// of the same sentence.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum OverlapCategory {
    NoOverlap,
    LeftOverlap,
    RightOverlap,
    MultiOverlap,
}

impl OverlapCategory {
    pub const ALL: [OverlapCategory; 4] = [
        OverlapCategory::NoOverlap,
        OverlapCategory::LeftOverlap,
        OverlapCategory::RightOverlap,
        OverlapCategory::MultiOverlap,
    ];

    pub fn name(self) -> &'static str {
        match self {
            OverlapCategory::NoOverlap => "no_overlap",
            OverlapCategory::LeftOverlap => "left_overlap",
            OverlapCategory::RightOverlap => "right_overlap",
            OverlapCategory::MultiOverlap => "multi_overlap",
        }
    }
}

impl fmt::Display for OverlapCategory {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Categorizes a discontinuous mention. A fragment counts as shared when it
/// intersects any mention in `others`. Sharing only the first fragment is a
/// left overlap, only the last a right overlap; any other non-empty pattern
/// (two or more fragments, or a single middle fragment) is a multi overlap.
pub fn overlap_category(m: &Mention, others: &[Mention]) -> Result<OverlapCategory, CorpusError> {
    if !m.is_discontinuous() {
        return Err(CorpusError::ContinuousMention(m.to_inline()));
    }
    let shared: Vec<usize> = m
        .fragments
        .iter()
        .enumerate()
        .filter(|(_, f)| {
            others
                .iter()
                .filter(|o| *o != m)
                .any(|o| o.fragments.iter().any(|g| g.intersects(f)))
        })
        .map(|(i, _)| i)
        .collect();
    let last = m.fragments.len() - 1;
    Ok(match shared.as_slice() {
        [] => OverlapCategory::NoOverlap,
        [0] => OverlapCategory::LeftOverlap,
        [i] if *i == last => OverlapCategory::RightOverlap,
        _ => OverlapCategory::MultiOverlap,
    })
}

/// Category of the `index`-th mention against the rest of `mentions`.
pub(crate) fn category_within(mentions: &[Mention], index: usize) -> Option<OverlapCategory> {
    let m = &mentions[index];
    if !m.is_discontinuous() {
        return None;
    }
    let others: Vec<Mention> = mentions
        .iter()
        .enumerate()
        .filter(|&(j, _)| j != index)
        .map(|(_, o)| o.clone())
        .collect();
    overlap_category(m, &others).ok()
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct StatsReport {
    pub documents: usize,
    pub sentences: usize,
    pub tokens: usize,
    pub mention_count: usize,
    pub disc_mention_count: usize,
    pub disc_percentage: f64,
    /// Tokens inside fragments only.
    pub avg_mention_len: f64,
    pub avg_disc_mention_len: f64,
    /// Mean over discontinuous mentions of the total gap per mention.
    pub avg_interval_len: f64,
    pub component_histogram: BTreeMap<usize, usize>,
    pub overlap_histogram: BTreeMap<OverlapCategory, usize>,
    pub continuous_overlap_count: usize,
    pub continuous_overlap_percentage: f64,
}

fn mean(sum: usize, n: usize) -> f64 {
    if n == 0 {
        0.0
    } else {
        sum as f64 / n as f64
    }
}

fn pct(part: usize, whole: usize) -> f64 {
    mean(part, whole) * 100.0
}

pub fn corpus_stats(c: &Corpus) -> StatsReport {
    let mut r = StatsReport::default();
    for cat in OverlapCategory::ALL {
        r.overlap_histogram.insert(cat, 0);
    }
    let docs: BTreeSet<String> = c
        .sentences
        .iter()
        .enumerate()
        .map(|(i, s)| s.doc_key(i))
        .collect();
    r.documents = docs.len();
    r.sentences = c.sentences.len();
    let (mut len_sum, mut disc_len_sum, mut gap_sum, mut continuous) = (0, 0, 0, 0);
    for s in &c.sentences {
        r.tokens += s.tokens.len();
        for (i, m) in s.mentions.iter().enumerate() {
            r.mention_count += 1;
            len_sum += m.token_len();
            if let Some(cat) = category_within(&s.mentions, i) {
                r.disc_mention_count += 1;
                disc_len_sum += m.token_len();
                gap_sum += m.interval_len();
                *r.component_histogram.entry(m.fragments.len()).or_insert(0) += 1;
                *r.overlap_histogram.entry(cat).or_insert(0) += 1;
            } else {
                continuous += 1;
                let overlaps = s
                    .mentions
                    .iter()
                    .enumerate()
                    .any(|(j, o)| j != i && o.intersects(m));
                if overlaps {
                    r.continuous_overlap_count += 1;
                }
            }
        }
    }
    r.disc_percentage = pct(r.disc_mention_count, r.mention_count);
    r.avg_mention_len = mean(len_sum, r.mention_count);
    r.avg_disc_mention_len = mean(disc_len_sum, r.disc_mention_count);
    r.avg_interval_len = mean(gap_sum, r.disc_mention_count);
    r.continuous_overlap_percentage = pct(r.continuous_overlap_count, continuous);
    r
}

impl StatsReport {
    /// Flat `(key, value)` pairs in a fixed order.
    pub fn metrics(&self) -> Vec<(String, serde_json::Value)> {
        use serde_json::json;
        let mut out = vec![
            ("documents".to_string(), json!(self.documents)),
            ("sentences".to_string(), json!(self.sentences)),
            ("tokens".to_string(), json!(self.tokens)),
            ("mentions".to_string(), json!(self.mention_count)),
            ("disc_mentions".to_string(), json!(self.disc_mention_count)),
            ("disc_percentage".to_string(), json!(self.disc_percentage)),
            ("avg_mention_len".to_string(), json!(self.avg_mention_len)),
            (
                "avg_disc_mention_len".to_string(),
                json!(self.avg_disc_mention_len),
            ),
            ("avg_interval_len".to_string(), json!(self.avg_interval_len)),
        ];
        for (k, v) in &self.component_histogram {
            out.push((format!("components_{k}"), json!(v)));
        }
        for (k, v) in &self.overlap_histogram {
            out.push((k.name().to_string(), json!(v)));
        }
        out.push((
            "continuous_overlap".to_string(),
            json!(self.continuous_overlap_count),
        ));
        out.push((
            "continuous_overlap_percentage".to_string(),
            json!(self.continuous_overlap_percentage),
        ));
        out
    }

    /// `key=value` lines.
    pub fn to_text(&self) -> String {
        self.metrics()
            .into_iter()
            .map(|(k, v)| match v {
                serde_json::Value::Number(n) if n.is_f64() => {
                    format!("{k}={:.4}\n", n.as_f64().unwrap_or(0.0))
                }
                other => format!("{k}={other}\n"),
            })
            .collect()
    }

    /// One JSON record per metric.
    pub fn to_json_lines(&self) -> String {
        self.metrics()
            .into_iter()
            .map(|(k, v)| format!("{}\n", serde_json::json!({ "metric": k, "value": v })))
            .collect()
    }
}

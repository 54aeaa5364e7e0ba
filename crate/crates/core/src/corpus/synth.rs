//! Synthetic sentence generators used by tests, the acceptance suite and
//! the CLI demos.
//!
//! [`structural_sentence`] builds sentences out of blocks whose mentions the
//! transition system can always derive: continuous mentions, discontinuous
//! mentions without sharing (optionally with a mention inside a gap), left
//! overlaps (`muscle pain and fatigue`) and right overlaps (`hip / leg / foot
//! pain`). [`templated_corpus`] draws from a small adverse-event vocabulary
//! so that a scorer can actually learn the patterns.

use rand::seq::SliceRandom;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{Corpus, Mention, Sentence};

pub const BODY_PARTS: &[&str] = &[
    "muscle", "joint", "knee", "back", "neck", "stomach", "chest", "leg", "hip", "foot",
    "shoulder", "head", "arm", "hand", "jaw", "ankle",
];
pub const SYMPTOMS: &[&str] = &[
    "pain",
    "ache",
    "fatigue",
    "stiffness",
    "cramps",
    "weakness",
    "swelling",
    "numbness",
    "soreness",
    "spasms",
    "tenderness",
    "burning",
];
pub const SEVERITY: &[&str] = &["severe", "mild", "terrible", "constant", "bad", "slight"];
pub const FILLERS: &[&str] = &[
    "i", "have", "had", "some", "after", "taking", "the", "drug", "felt", "was", "with", "today",
    "also", "my", "then", "it", "really", "started", "got", "from", "still", "week", "days", "is",
    "mildly", "very",
];

struct Builder {
    tokens: Vec<String>,
    mentions: Vec<(String, Vec<usize>)>,
}

impl Builder {
    fn new() -> Self {
        Builder {
            tokens: Vec::new(),
            mentions: Vec::new(),
        }
    }

    fn push(&mut self, word: impl Into<String>) -> usize {
        self.tokens.push(word.into());
        self.tokens.len() - 1
    }

    fn push_n(&mut self, words: impl IntoIterator<Item = String>) -> Vec<usize> {
        words.into_iter().map(|w| self.push(w)).collect()
    }

    fn mention(&mut self, ty: &str, parts: &[&[usize]]) {
        let toks: Vec<usize> = parts.iter().flat_map(|p| p.iter().copied()).collect();
        self.mentions.push((ty.to_string(), toks));
    }

    fn finish(self) -> Sentence {
        let mut mentions: Vec<Mention> = self
            .mentions
            .into_iter()
            .map(|(ty, toks)| Mention::from_tokens(ty, toks).expect("generated mention has tokens"))
            .collect();
        mentions.sort();
        mentions.dedup();
        Sentence::new(self.tokens, mentions, "", 0).expect("generated sentence is valid")
    }
}

/// Knobs for [`structural_sentence`].
#[derive(Debug, Clone)]
pub struct StructuralConfig {
    pub max_mentions: usize,
    pub entity_types: Vec<String>,
    /// Allow nesting a block inside the gap of a discontinuous mention.
    pub gap_blocks: bool,
}

impl Default for StructuralConfig {
    fn default() -> Self {
        StructuralConfig {
            max_mentions: 4,
            entity_types: vec!["ADR".into(), "DIS".into()],
            gap_blocks: true,
        }
    }
}

struct Structural<'a, R: Rng> {
    rng: &'a mut R,
    cfg: &'a StructuralConfig,
    b: Builder,
    counter: usize,
}

impl<R: Rng> Structural<'_, R> {
    fn word(&mut self, prefix: &str) -> String {
        self.counter += 1;
        format!("{prefix}{}", self.counter)
    }

    fn filler(&mut self, lo: usize, hi: usize) {
        let n = self.rng.gen_range(lo..=hi);
        for _ in 0..n {
            let w = self.word("o");
            self.b.push(w);
        }
    }

    fn component(&mut self) -> Vec<usize> {
        let n = self.rng.gen_range(1..=2);
        let words: Vec<String> = (0..n).map(|_| self.word("e")).collect();
        self.b.push_n(words)
    }

    fn ty(&mut self) -> String {
        self.cfg
            .entity_types
            .choose(self.rng)
            .cloned()
            .unwrap_or_else(|| "ENT".to_string())
    }

    /// Emits one block using at most `budget` mentions; returns mentions used.
    fn block(&mut self, budget: usize, depth: usize) -> usize {
        let kind = self.rng.gen_range(0..4);
        match kind {
            0 => {
                let c = self.component();
                let ty = self.ty();
                self.b.mention(&ty, &[&c]);
                1
            }
            1 => {
                let k = self.rng.gen_range(2..=3);
                let mut comps = vec![self.component()];
                let mut used = 1;
                for _ in 1..k {
                    if self.cfg.gap_blocks && depth == 0 && used < budget && self.rng.gen_bool(0.3)
                    {
                        self.filler(0, 1);
                        used += self.block(budget - used, depth + 1);
                        self.filler(0, 1);
                    } else {
                        self.filler(1, 3);
                    }
                    comps.push(self.component());
                }
                let parts: Vec<&[usize]> = comps.iter().map(Vec::as_slice).collect();
                let ty = self.ty();
                self.b.mention(&ty, &parts);
                used
            }
            2 if budget >= 2 => {
                let k = self.rng.gen_range(2..=budget.min(3));
                let head = self.component();
                for i in 0..k {
                    if i > 0 || self.rng.gen_bool(0.5) {
                        self.filler(1, 2);
                    }
                    let body = self.component();
                    let ty = self.ty();
                    self.b.mention(&ty, &[&head, &body]);
                }
                k
            }
            3 if budget >= 2 => {
                let k = self.rng.gen_range(2..=budget.min(3));
                let adjacent_last = self.rng.gen_bool(0.5);
                let mut bodies = Vec::new();
                for i in 0..k {
                    bodies.push(self.component());
                    if i + 1 < k || !adjacent_last {
                        self.filler(1, 2);
                    }
                }
                let tail = self.component();
                for body in &bodies {
                    let ty = self.ty();
                    self.b.mention(&ty, &[body, &tail]);
                }
                k
            }
            _ => {
                let c = self.component();
                let ty = self.ty();
                self.b.mention(&ty, &[&c]);
                1
            }
        }
    }
}

/// A random sentence whose mentions fall in the no/left/right overlap
/// categories, with at most three components per mention.
pub fn structural_sentence<R: Rng>(rng: &mut R, cfg: &StructuralConfig) -> Sentence {
    let mut g = Structural {
        rng,
        cfg,
        b: Builder::new(),
        counter: 0,
    };
    let mut used = 0;
    g.filler(0, 2);
    while used < cfg.max_mentions {
        used += g.block(cfg.max_mentions - used, 0);
        g.filler(0, 2);
        if g.rng.gen_bool(0.35) {
            break;
        }
    }
    g.b.finish()
}

pub fn structural_corpus(n: usize, seed: u64, cfg: &StructuralConfig) -> Corpus {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Corpus::new((0..n).map(|_| structural_sentence(&mut rng, cfg)).collect())
}

/// A sentence with continuous, pairwise disjoint mentions only.
pub fn flat_sentence<R: Rng>(rng: &mut R, max_len: usize, types: &[&str]) -> Sentence {
    let len = rng.gen_range(0..=max_len);
    let tokens: Vec<String> = (0..len).map(|i| format!("t{i}")).collect();
    let mut mentions = Vec::new();
    let mut i = 0;
    while i < len {
        if rng.gen_bool(0.4) {
            let end = rng.gen_range(i + 1..=len.min(i + 3));
            let ty = types.choose(rng).copied().unwrap_or("ENT");
            mentions.push(Mention::from_tokens(ty, i..end).expect("nonempty"));
            i = end;
        } else {
            i += 1;
        }
    }
    Sentence::new(tokens, mentions, "", 0).expect("valid flat sentence")
}

/// Mix of clause templates for [`templated_corpus`].
#[derive(Debug, Clone)]
pub struct TemplateConfig {
    /// Probability that a clause carries a discontinuous structure.
    pub disc_rate: f64,
    /// Gap length range for discontinuous mentions without sharing.
    pub gap: (usize, usize),
    /// Share of discontinuous clauses that are long-gap (no sharing).
    pub gap_share: f64,
    /// Share of long-gap mentions written symptom first.
    pub symptom_first: f64,
    /// Filler run before each clause after the first; the first clause
    /// takes between none and the upper bound.
    pub lead: (usize, usize),
    pub max_clauses: usize,
}

impl Default for TemplateConfig {
    fn default() -> Self {
        TemplateConfig {
            disc_rate: 0.35,
            gap: (1, 3),
            gap_share: 0.34,
            symptom_first: 0.0,
            lead: (1, 2),
            max_clauses: 3,
        }
    }
}

impl TemplateConfig {
    /// Discontinuity dominated by long gaps, with continuous mentions still
    /// the majority. Gaps follow the symptom and are as long as the filler
    /// runs between clauses, so whether a symptom stands alone is decided
    /// only by the next content word several tokens later.
    pub fn long_gap() -> Self {
        TemplateConfig {
            disc_rate: 0.1,
            gap: (4, 8),
            gap_share: 1.0,
            symptom_first: 1.0,
            lead: (4, 8),
            max_clauses: 3,
        }
    }
}

const ADR: &str = "ADR";

fn pick<'a, R: Rng>(rng: &mut R, words: &[&'a str]) -> &'a str {
    words.choose(rng).copied().unwrap_or("x")
}

fn distinct<'a, R: Rng>(rng: &mut R, words: &[&'a str], n: usize) -> Vec<&'a str> {
    words.choose_multiple(rng, n).copied().collect()
}

fn clause<R: Rng>(rng: &mut R, cfg: &TemplateConfig, b: &mut Builder) {
    if rng.gen_bool(cfg.disc_rate) {
        if rng.gen_bool(cfg.gap_share) {
            let n = rng.gen_range(cfg.gap.0..=cfg.gap.1);
            if cfg.symptom_first > 0.0 && rng.gen_bool(cfg.symptom_first) {
                // pain was really very bad in the knee: symptom <gap> part
                let sym = b.push(pick(rng, SYMPTOMS));
                for _ in 0..n {
                    b.push(pick(rng, FILLERS));
                }
                let part = b.push(pick(rng, BODY_PARTS));
                b.mention(ADR, &[&[sym], &[part]]);
            } else {
                // knee was really very swollen: part <gap> symptom
                let part = b.push(pick(rng, BODY_PARTS));
                for _ in 0..n {
                    b.push(pick(rng, FILLERS));
                }
                let sym = b.push(pick(rng, SYMPTOMS));
                b.mention(ADR, &[&[part], &[sym]]);
            }
        } else if rng.gen_bool(0.5) {
            // muscle pain and fatigue
            let part = b.push(pick(rng, BODY_PARTS));
            let k = rng.gen_range(2..=3);
            let syms = distinct(rng, SYMPTOMS, k);
            for (i, s) in syms.iter().enumerate() {
                if i > 0 {
                    b.push(if i + 1 == k { "and" } else { "," });
                }
                let t = b.push(*s);
                b.mention(ADR, &[&[part], &[t]]);
            }
        } else {
            // hip / leg pain
            let k = rng.gen_range(2..=3);
            let parts = distinct(rng, BODY_PARTS, k);
            let mut idx = Vec::new();
            for (i, p) in parts.iter().enumerate() {
                if i > 0 {
                    b.push("/");
                }
                idx.push(b.push(*p));
            }
            let sym = b.push(pick(rng, SYMPTOMS));
            for p in idx {
                b.mention(ADR, &[&[p], &[sym]]);
            }
        }
    } else {
        match rng.gen_range(0..3) {
            0 => {
                let sym = b.push(pick(rng, SYMPTOMS));
                b.mention(ADR, &[&[sym]]);
            }
            1 => {
                b.push(pick(rng, SEVERITY));
                let part = b.push(pick(rng, BODY_PARTS));
                let sym = b.push(pick(rng, SYMPTOMS));
                b.mention(ADR, &[&[part, sym]]);
            }
            _ => {
                let part = b.push(pick(rng, BODY_PARTS));
                let sym = b.push(pick(rng, SYMPTOMS));
                b.mention(ADR, &[&[part, sym]]);
            }
        }
    }
}

pub fn templated_sentence<R: Rng>(rng: &mut R, cfg: &TemplateConfig) -> Sentence {
    let mut b = Builder::new();
    let clauses = rng.gen_range(1..=cfg.max_clauses);
    for i in 0..clauses {
        let lead = rng.gen_range(if i == 0 { 0 } else { cfg.lead.0 }..=cfg.lead.1);
        for _ in 0..lead {
            b.push(pick(rng, FILLERS));
        }
        clause(rng, cfg, &mut b);
    }
    if rng.gen_bool(0.5) {
        b.push(".");
    }
    b.finish()
}

pub fn templated_corpus(n: usize, seed: u64, cfg: &TemplateConfig) -> Corpus {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let sentences = (0..n)
        .map(|i| {
            let mut s = templated_sentence(&mut rng, cfg);
            s.doc_id = format!("doc{}", i / 2);
            s.sent_index = i % 2;
            s
        })
        .collect();
    Corpus::new(sentences)
}

/// Ten templated sentences holding exactly three discontinuous mentions,
/// one in each of three sentences.
pub fn overfit_corpus(seed: u64) -> Corpus {
    let cfg = TemplateConfig::default();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut disc, mut flat) = (Vec::new(), Vec::new());
    while disc.len() < 3 || flat.len() < 7 {
        let s = templated_sentence(&mut rng, &cfg);
        match s.mentions.iter().filter(|m| m.is_discontinuous()).count() {
            0 if flat.len() < 7 => flat.push(s),
            1 if disc.len() < 3 => disc.push(s),
            _ => {}
        }
    }
    let mut sentences: Vec<Sentence> = flat.into_iter().chain(disc).collect();
    sentences.shuffle(&mut rng);
    for (i, s) in sentences.iter_mut().enumerate() {
        s.doc_id = format!("doc{i}");
    }
    Corpus::new(sentences)
}

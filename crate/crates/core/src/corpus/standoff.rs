//! Standoff annotations (`.txt` + `.ann` pairs with character offsets).

use serde::Serialize;

use super::{Corpus, CorpusError, Fragment, Mention, Sentence};

/// A mention that was dropped while reading standoff annotations.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct StandoffWarning {
    pub line: usize,
    pub id: String,
    pub reason: String,
}

#[derive(Debug, Clone)]
pub struct StandoffParse {
    pub corpus: Corpus,
    pub warnings: Vec<StandoffWarning>,
}

#[derive(Debug, Clone, Copy)]
struct Token {
    start: usize,
    end: usize,
}

fn is_split_char(c: char) -> bool {
    !c.is_alphanumeric() && !c.is_whitespace()
}

/// Whitespace tokenization with every punctuation character split off.
/// Offsets are character (not byte) positions.
fn tokenize(chars: &[char], range: (usize, usize)) -> Vec<Token> {
    let mut tokens = Vec::new();
    let mut start: Option<usize> = None;
    for (i, &c) in chars.iter().enumerate().take(range.1).skip(range.0) {
        if c.is_whitespace() || is_split_char(c) {
            if let Some(s) = start.take() {
                tokens.push(Token { start: s, end: i });
            }
            if is_split_char(c) {
                tokens.push(Token {
                    start: i,
                    end: i + 1,
                });
            }
        } else if start.is_none() {
            start = Some(i);
        }
    }
    if let Some(s) = start {
        tokens.push(Token {
            start: s,
            end: range.1,
        });
    }
    tokens
}

/// Character ranges of the non-empty lines of `text`, one sentence per line.
pub fn line_boundaries(text: &str) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    let mut start = 0;
    let mut pos = 0;
    for c in text.chars() {
        if c == '\n' {
            if pos > start {
                out.push((start, pos));
            }
            start = pos + 1;
        }
        pos += 1;
    }
    if pos > start {
        out.push((start, pos));
    }
    out
}

struct EntityLine {
    id: String,
    entity_type: String,
    spans: Vec<(usize, usize)>,
}

fn parse_entity_line(line: &str, line_no: usize) -> Result<EntityLine, CorpusError> {
    let bad = |msg: &str| CorpusError::Malformed {
        line: line_no,
        msg: msg.to_string(),
    };
    let mut cols = line.split('\t');
    let id = cols.next().ok_or_else(|| bad("missing id"))?.to_string();
    let body = cols.next().ok_or_else(|| bad("missing type and offsets"))?;
    let (entity_type, offsets) = body.split_once(' ').ok_or_else(|| bad("missing offsets"))?;
    if entity_type.is_empty() {
        return Err(bad("empty entity type"));
    }
    let mut spans = Vec::new();
    for part in offsets.split(';') {
        let mut nums = part.split_whitespace();
        let (Some(s), Some(e), None) = (nums.next(), nums.next(), nums.next()) else {
            return Err(bad(&format!("bad offset pair `{part}`")));
        };
        let s: usize = s.parse().map_err(|_| bad(&format!("bad offset `{s}`")))?;
        let e: usize = e.parse().map_err(|_| bad(&format!("bad offset `{e}`")))?;
        if s >= e {
            return Err(bad(&format!("empty span {s} {e}")));
        }
        spans.push((s, e));
    }
    Ok(EntityLine {
        id,
        entity_type: entity_type.to_string(),
        spans,
    })
}

/// Reads one document. `sentence_boundaries` are character ranges; use
/// [`line_boundaries`] for one-sentence-per-line text. Mentions that cross
/// a sentence boundary, do not align with token boundaries, or duplicate an
/// earlier mention are skipped and reported as warnings.
pub fn parse_standoff(
    text: &str,
    ann: &str,
    sentence_boundaries: &[(usize, usize)],
    doc_id: &str,
) -> Result<StandoffParse, CorpusError> {
    let chars: Vec<char> = text.chars().collect();
    let sent_tokens: Vec<Vec<Token>> = sentence_boundaries
        .iter()
        .map(|&(s, e)| tokenize(&chars, (s, e.min(chars.len()))))
        .collect();
    let mut mentions: Vec<Vec<Mention>> = vec![Vec::new(); sentence_boundaries.len()];
    let mut warnings = Vec::new();

    for (idx, line) in ann.lines().enumerate() {
        let line_no = idx + 1;
        if !line.starts_with('T') {
            continue;
        }
        let entity = parse_entity_line(line, line_no)?;
        let warn = |reason: String| StandoffWarning {
            line: line_no,
            id: entity.id.clone(),
            reason,
        };

        let first = entity.spans[0].0;
        let Some(sent) = sentence_boundaries
            .iter()
            .position(|&(s, e)| s <= first && first < e)
        else {
            warnings.push(warn(format!("offset {first} outside every sentence")));
            continue;
        };
        let (ss, se) = sentence_boundaries[sent];
        if entity.spans.iter().any(|&(s, e)| s < ss || e > se) {
            warnings.push(warn("mention crosses a sentence boundary".to_string()));
            continue;
        }
        let toks = &sent_tokens[sent];
        let mut frags = Vec::new();
        let mut aligned = true;
        for &(s, e) in &entity.spans {
            let first_tok = toks.iter().position(|t| t.start == s);
            let last_tok = toks.iter().position(|t| t.end == e);
            match (first_tok, last_tok) {
                (Some(a), Some(b)) if a <= b => frags.push(Fragment::new(a, b + 1)),
                _ => {
                    warnings.push(warn(format!("span {s} {e} is not on token boundaries")));
                    aligned = false;
                    break;
                }
            }
        }
        if !aligned {
            continue;
        }
        match Mention::new(entity.entity_type.clone(), &frags) {
            Ok(m) if mentions[sent].contains(&m) => {
                warnings.push(warn(format!("duplicate mention {m}")))
            }
            Ok(m) => mentions[sent].push(m),
            Err(e) => warnings.push(warn(e.to_string())),
        }
    }

    let mut sentences = Vec::with_capacity(sentence_boundaries.len());
    for (i, (toks, ms)) in sent_tokens.iter().zip(mentions).enumerate() {
        let tokens = toks
            .iter()
            .map(|t| chars[t.start..t.end].iter().collect())
            .collect();
        sentences.push(Sentence::new(tokens, ms, doc_id, i)?);
    }
    Ok(StandoffParse {
        corpus: Corpus::new(sentences),
        warnings,
    })
}

/// Renders a corpus as one text line per sentence plus a matching `.ann`.
pub fn write_standoff(corpus: &Corpus) -> (String, String) {
    let mut text = String::new();
    let mut ann = String::new();
    let mut offset = 0;
    let mut next_id = 1;
    for s in &corpus.sentences {
        let mut starts = Vec::with_capacity(s.tokens.len());
        let mut pos = offset;
        for t in &s.tokens {
            starts.push(pos);
            pos += t.chars().count() + 1;
        }
        for m in &s.mentions {
            let spans: Vec<String> = m
                .fragments
                .iter()
                .map(|f| {
                    let last = f.end - 1;
                    format!(
                        "{} {}",
                        starts[f.start],
                        starts[last] + s.tokens[last].chars().count()
                    )
                })
                .collect();
            let surface: Vec<&str> = m.tokens().map(|t| s.tokens[t].as_str()).collect();
            ann.push_str(&format!(
                "T{next_id}\t{} {}\t{}\n",
                m.entity_type,
                spans.join(";"),
                surface.join(" ")
            ));
            next_id += 1;
        }
        let line = s.tokens.join(" ");
        offset += line.chars().count() + 1;
        text.push_str(&line);
        text.push('\n');
    }
    (text, ann)
}

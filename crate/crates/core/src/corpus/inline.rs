//! Inline corpus format.
//!
//! ```text
//! #doc post-17
//! muscle pain and fatigue
//! 0,2 ADR|0,1;3,4 ADR
//!
//! ```
//!
//! Each block is a token line (single spaces), a mention line (`|`
//! separated, each `s,e[;s,e]* TYPE`, possibly empty) and a blank line. An
//! optional `#doc ID` line before a block starts a new document.

use super::{Corpus, CorpusError, Fragment, Mention, Sentence};

const DOC_MARKER: &str = "#doc";

fn malformed(line: usize, msg: impl Into<String>) -> CorpusError {
    CorpusError::Malformed {
        line,
        msg: msg.into(),
    }
}

pub fn parse_inline(text: &str) -> Result<Corpus, CorpusError> {
    let lines: Vec<&str> = text.lines().collect();
    let mut sentences = Vec::new();
    let mut doc_id = String::new();
    let mut sent_index = 0;
    let mut i = 0;
    while i < lines.len() {
        let line = lines[i];
        if line.is_empty() {
            i += 1;
            continue;
        }
        if line == DOC_MARKER || line.starts_with("#doc ") {
            doc_id = line[DOC_MARKER.len()..].trim().to_string();
            sent_index = 0;
            i += 1;
            continue;
        }
        let token_line = i + 1;
        let tokens: Vec<String> = line.split(' ').map(str::to_string).collect();
        if tokens.iter().any(String::is_empty) {
            return Err(malformed(
                token_line,
                "empty token (tokens must be separated by single spaces)",
            ));
        }
        let mention_line = lines.get(i + 1).copied().unwrap_or("");
        let mentions = parse_mentions(mention_line, tokens.len(), token_line + 1)?;
        if let Some(next) = lines.get(i + 2) {
            if !next.is_empty() {
                return Err(malformed(i + 3, "expected blank line after mention line"));
            }
        }
        let sentence = Sentence::new(tokens, mentions, doc_id.clone(), sent_index)
            .map_err(|e| malformed(token_line + 1, e.to_string()))?;
        sentences.push(sentence);
        sent_index += 1;
        i += 3;
    }
    Ok(Corpus::new(sentences))
}

fn parse_mentions(line: &str, len: usize, line_no: usize) -> Result<Vec<Mention>, CorpusError> {
    if line.is_empty() {
        return Ok(Vec::new());
    }
    line.split('|')
        .map(|entry| {
            let (spans, ty) = entry
                .split_once(' ')
                .ok_or_else(|| malformed(line_no, format!("mention `{entry}` lacks a type")))?;
            if ty.is_empty() || ty.contains(' ') {
                return Err(malformed(line_no, format!("bad entity type in `{entry}`")));
            }
            let mut frags = Vec::new();
            for span in spans.split(';') {
                let (s, e) = span
                    .split_once(',')
                    .ok_or_else(|| malformed(line_no, format!("bad fragment `{span}`")))?;
                let s: usize = s
                    .parse()
                    .map_err(|_| malformed(line_no, format!("bad offset `{s}`")))?;
                let e: usize = e
                    .parse()
                    .map_err(|_| malformed(line_no, format!("bad offset `{e}`")))?;
                if s >= e || e > len {
                    return Err(malformed(
                        line_no,
                        CorpusError::FragmentOutOfRange {
                            start: s,
                            end: e,
                            len,
                        }
                        .to_string(),
                    ));
                }
                frags.push(Fragment::new(s, e));
            }
            Mention::new(ty, &frags).map_err(|e| malformed(line_no, e.to_string()))
        })
        .collect()
}

/// Canonical serialization; [`parse_inline`] is its left inverse.
pub fn write_inline(corpus: &Corpus) -> String {
    let mut out = String::new();
    let mut current_doc = "";
    for s in &corpus.sentences {
        if s.doc_id != current_doc {
            out.push_str(DOC_MARKER);
            if !s.doc_id.is_empty() {
                out.push(' ');
                out.push_str(&s.doc_id);
            }
            out.push('\n');
            current_doc = &s.doc_id;
        }
        out.push_str(&s.tokens.join(" "));
        out.push('\n');
        let mentions: Vec<String> = s.mentions.iter().map(Mention::to_inline).collect();
        out.push_str(&mentions.join("|"));
        out.push_str("\n\n");
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn figure_one_example() {
        let c = parse_inline("muscle pain and fatigue\n0,2 ADR|0,1;3,4 ADR\n\n").unwrap();
        assert_eq!(c.len(), 1);
        let s = &c.sentences[0];
        assert_eq!(s.len(), 4);
        assert_eq!(s.mentions.len(), 2);
        assert_eq!(
            s.mentions.iter().filter(|m| m.is_discontinuous()).count(),
            1
        );
    }

    #[test]
    fn empty_text_is_empty_corpus() {
        assert!(parse_inline("").unwrap().is_empty());
        assert_eq!(write_inline(&Corpus::default()), "");
    }

    #[test]
    fn no_mentions_block() {
        let c = parse_inline("a b\n\n\n").unwrap();
        assert_eq!(c.sentences[0].mentions.len(), 0);
        assert_eq!(write_inline(&c), "a b\n\n\n");
    }

    #[test]
    fn canonicalizes_mentions() {
        let c = parse_inline("a b c d\n3,4;0,1 X|0,1;1,2 Y\n\n").unwrap();
        assert_eq!(write_inline(&c), "a b c d\n0,1;3,4 X|0,2 Y\n\n");
    }

    #[test]
    fn doc_markers_round_trip() {
        let text = "#doc d1\na\n\n\nb\n0,1 X\n\n#doc d2\nc\n\n\n";
        let c = parse_inline(text).unwrap();
        assert_eq!(c.sentences[1].doc_id, "d1");
        assert_eq!(c.sentences[1].sent_index, 1);
        assert_eq!(c.sentences[2].sent_index, 0);
        assert_eq!(write_inline(&c), text);
    }

    #[test]
    fn errors_report_line_numbers() {
        let err = parse_inline("a b\n0,1 X\n\nc d\n0,5 X\n\n").unwrap_err();
        assert!(
            matches!(err, CorpusError::Malformed { line: 5, .. }),
            "{err:?}"
        );
        let err = parse_inline("a b\n0,1\n\n").unwrap_err();
        assert!(matches!(err, CorpusError::Malformed { line: 2, .. }));
        let err = parse_inline("a b c\n0,2;1,3 X\n\n").unwrap_err();
        assert!(matches!(err, CorpusError::Malformed { line: 2, .. }));
        let err = parse_inline("a  b\n\n\n").unwrap_err();
        assert!(matches!(err, CorpusError::Malformed { line: 1, .. }));
        let err = parse_inline("a b\n0,1 X|0,1 X\n\n").unwrap_err();
        assert!(matches!(err, CorpusError::Malformed { line: 2, .. }));
    }
}

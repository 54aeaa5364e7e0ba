use super::{SchemaError, TagSequence};

/// Two tab-separated columns, one token per line, a blank line after each
/// sentence.
pub fn write_conll(sentences: &[(Vec<String>, TagSequence)]) -> String {
    let mut out = String::new();
    for (tokens, tags) in sentences {
        for (tok, tag) in tokens.iter().zip(&tags.tags) {
            out.push_str(&format!("{tok}\t{tag}\n"));
        }
        out.push('\n');
    }
    out
}

pub fn parse_conll(text: &str) -> Result<Vec<(Vec<String>, TagSequence)>, SchemaError> {
    let mut out = Vec::new();
    let mut tokens = Vec::new();
    let mut tags = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim_end_matches('\r');
        if line.trim().is_empty() {
            if !tokens.is_empty() {
                out.push((
                    std::mem::take(&mut tokens),
                    TagSequence {
                        tags: std::mem::take(&mut tags),
                    },
                ));
            }
            continue;
        }
        let (tok, tag) = line.split_once('\t').ok_or(SchemaError::BadLine(i + 1))?;
        tokens.push(tok.to_string());
        tags.push(tag.trim().parse()?);
    }
    if !tokens.is_empty() {
        out.push((tokens, TagSequence { tags }));
    }
    Ok(out)
}

//! Tag-schema codecs for sequence-labelling baselines.
//!
//! Plain BIO handles continuous, disjoint mentions only. The BIO extension
//! adds `BH`/`IH` for components shared by several mentions and `BD`/`ID` for
//! the exclusive components of a discontinuous mention. Decoding the
//! extension is ambiguous; [`ambiguity_witnesses`] enumerates the mention
//! sets that produce a given tag sequence.

mod biohd;
mod conll;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{Mention, Sentence};

pub use biohd::{ambiguity_witnesses, decode_biohd, encode_biohd, DEFAULT_WITNESS_LIMIT};
pub use conll::{parse_conll, write_conll};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SchemaError {
    #[error("mention {0} is discontinuous; plain BIO cannot encode it")]
    Discontinuous(String),
    #[error("mentions {0} and {1} overlap; plain BIO cannot encode them")]
    Overlapping(String, String),
    #[error("mentions {0} and {1} are nested")]
    Nested(String, String),
    #[error("bad tag `{0}`")]
    BadTag(String),
    #[error("line {0}: expected `token<TAB>tag`")]
    BadLine(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Indicator {
    B,
    I,
    O,
    BH,
    IH,
    BD,
    ID,
}

impl Indicator {
    fn as_str(self) -> &'static str {
        match self {
            Indicator::B => "B",
            Indicator::I => "I",
            Indicator::O => "O",
            Indicator::BH => "BH",
            Indicator::IH => "IH",
            Indicator::BD => "BD",
            Indicator::ID => "ID",
        }
    }
}

/// Position indicator plus entity type (absent only for `O`).
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Tag {
    pub indicator: Indicator,
    pub entity_type: Option<String>,
}

impl Tag {
    pub fn outside() -> Self {
        Tag {
            indicator: Indicator::O,
            entity_type: None,
        }
    }

    /// An empty `entity_type` gives an untyped tag.
    pub fn new(indicator: Indicator, entity_type: &str) -> Self {
        let entity_type = (!entity_type.is_empty()).then(|| entity_type.to_string());
        Tag {
            indicator,
            entity_type,
        }
    }

    pub fn is_outside(&self) -> bool {
        self.indicator == Indicator::O
    }

    fn type_str(&self) -> &str {
        self.entity_type.as_deref().unwrap_or("")
    }
}

impl fmt::Display for Tag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.entity_type {
            Some(t) if self.indicator != Indicator::O => {
                write!(f, "{}-{}", self.indicator.as_str(), t)
            }
            _ => f.write_str(self.indicator.as_str()),
        }
    }
}

impl FromStr for Tag {
    type Err = SchemaError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s == "O" {
            return Ok(Tag::outside());
        }
        let (ind, ty) = match s.split_once('-') {
            Some((i, t)) if !t.is_empty() => (i, Some(t.to_string())),
            Some(_) => return Err(SchemaError::BadTag(s.to_string())),
            None => (s, None),
        };
        let indicator = match ind {
            "B" => Indicator::B,
            "I" => Indicator::I,
            "BH" => Indicator::BH,
            "IH" => Indicator::IH,
            "BD" => Indicator::BD,
            "ID" => Indicator::ID,
            _ => return Err(SchemaError::BadTag(s.to_string())),
        };
        Ok(Tag {
            indicator,
            entity_type: ty,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct TagSequence {
    pub tags: Vec<Tag>,
}

impl TagSequence {
    pub fn len(&self) -> usize {
        self.tags.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tags.is_empty()
    }
}

impl fmt::Display for TagSequence {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.tags.iter().map(ToString::to_string).collect();
        f.write_str(&parts.join(" "))
    }
}

impl FromStr for TagSequence {
    type Err = SchemaError;

    /// Space-separated tags; untyped tags are accepted.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let tags = s
            .split_whitespace()
            .map(str::parse)
            .collect::<Result<_, _>>()?;
        Ok(TagSequence { tags })
    }
}

pub fn encode_bio(s: &Sentence) -> Result<TagSequence, SchemaError> {
    let mut tags = vec![Tag::outside(); s.len()];
    for (i, m) in s.mentions.iter().enumerate() {
        if m.is_discontinuous() {
            return Err(SchemaError::Discontinuous(m.to_inline()));
        }
        if let Some(o) = s.mentions[i + 1..].iter().find(|o| o.intersects(m)) {
            return Err(SchemaError::Overlapping(m.to_inline(), o.to_inline()));
        }
        for t in m.tokens() {
            let ind = if t == m.start() {
                Indicator::B
            } else {
                Indicator::I
            };
            tags[t] = Tag::new(ind, &m.entity_type);
        }
    }
    Ok(TagSequence { tags })
}

/// Maximal `B I*` runs become mentions. An `I` that does not continue a run
/// of the same type starts a new one. Extension indicators are read as `O`.
pub fn decode_bio(t: &TagSequence) -> Vec<Mention> {
    let mut out = Vec::new();
    let mut current: Option<(usize, &str)> = None;
    for (i, tag) in t.tags.iter().enumerate() {
        let continues = matches!(current, Some((_, ty)) if tag.indicator == Indicator::I && ty == tag.type_str());
        if continues {
            continue;
        }
        if let Some((start, ty)) = current.take() {
            out.push(Mention::from_tokens(ty, start..i).expect("nonempty run"));
        }
        if matches!(tag.indicator, Indicator::B | Indicator::I) {
            current = Some((i, tag.type_str()));
        }
    }
    if let Some((start, ty)) = current {
        out.push(Mention::from_tokens(ty, start..t.len()).expect("nonempty run"));
    }
    out.sort();
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn seq(s: &str) -> TagSequence {
        s.parse().unwrap()
    }

    #[test]
    fn bio_muscle_pain() {
        let s = Sentence::from_text(
            "muscle pain and fatigue",
            vec![Mention::from_spans("ADR", &[(0, 2)]).unwrap()],
        )
        .unwrap();
        assert_eq!(encode_bio(&s).unwrap().to_string(), "B-ADR I-ADR O O");
    }

    #[test]
    fn bio_no_mentions() {
        let s = Sentence::from_text("a b", vec![]).unwrap();
        assert_eq!(encode_bio(&s).unwrap().to_string(), "O O");
    }

    #[test]
    fn bio_rejects_discontinuous_and_overlap() {
        let d = Sentence::from_text(
            "a b c",
            vec![Mention::from_spans("X", &[(0, 1), (2, 3)]).unwrap()],
        )
        .unwrap();
        assert!(matches!(encode_bio(&d), Err(SchemaError::Discontinuous(_))));
        let o = Sentence::from_text(
            "a b c",
            vec![
                Mention::from_spans("X", &[(0, 2)]).unwrap(),
                Mention::from_spans("X", &[(1, 3)]).unwrap(),
            ],
        )
        .unwrap();
        assert!(matches!(encode_bio(&o), Err(SchemaError::Overlapping(..))));
    }

    #[test]
    fn bio_decode() {
        assert!(decode_bio(&seq("O O O")).is_empty());
        assert_eq!(
            decode_bio(&seq("B-X I-X I-X")),
            vec![Mention::from_spans("X", &[(0, 3)]).unwrap()]
        );
        assert_eq!(
            decode_bio(&seq("O I-X B-X I-Y")),
            vec![
                Mention::from_spans("X", &[(1, 2)]).unwrap(),
                Mention::from_spans("X", &[(2, 3)]).unwrap(),
                Mention::from_spans("Y", &[(3, 4)]).unwrap(),
            ]
        );
    }

    #[test]
    fn tag_parsing() {
        assert_eq!(
            "BH-ADR".parse::<Tag>().unwrap(),
            Tag::new(Indicator::BH, "ADR")
        );
        assert_eq!("O".parse::<Tag>().unwrap(), Tag::outside());
        assert!("X-ADR".parse::<Tag>().is_err());
        assert!("B-".parse::<Tag>().is_err());
    }
}

use std::collections::BTreeSet;

use super::{Indicator, SchemaError, Tag, TagSequence};
use crate::corpus::{Mention, Sentence};

pub const DEFAULT_WITNESS_LIMIT: usize = 64;

/// Upper bound on the components (atoms) a single candidate mention may
/// join during witness enumeration.
const MAX_ATOMS_PER_MENTION: usize = 6;

pub fn encode_biohd(s: &Sentence) -> Result<TagSequence, SchemaError> {
    for (i, a) in s.mentions.iter().enumerate() {
        for (j, b) in s.mentions.iter().enumerate() {
            if i != j && a.covers(b) && (a.fragments != b.fragments || i < j) {
                return Err(SchemaError::Nested(a.to_inline(), b.to_inline()));
            }
        }
    }
    Ok(tag_mentions(s.len(), &s.mentions))
}

/// Tags `mentions` (sorted) without rejecting nesting.
fn tag_mentions(n: usize, mentions: &[Mention]) -> TagSequence {
    let containing: Vec<Vec<usize>> = (0..n)
        .map(|t| {
            (0..mentions.len())
                .filter(|&i| mentions[i].contains_token(t))
                .collect()
        })
        .collect();
    let tags = (0..n)
        .map(|t| {
            let here = &containing[t];
            let prev = if t > 0 {
                Some(&containing[t - 1])
            } else {
                None
            };
            match here.len() {
                0 => Tag::outside(),
                1 => {
                    let m = &mentions[here[0]];
                    let ind = if m.is_discontinuous() {
                        if prev == Some(here) {
                            Indicator::ID
                        } else {
                            Indicator::BD
                        }
                    } else if prev.is_some_and(|p| p.contains(&here[0])) {
                        Indicator::I
                    } else {
                        Indicator::B
                    };
                    Tag::new(ind, &m.entity_type)
                }
                _ => {
                    let ind = if prev == Some(here) {
                        Indicator::IH
                    } else {
                        Indicator::BH
                    };
                    Tag::new(ind, &mentions[here[0]].entity_type)
                }
            }
        })
        .collect();
    TagSequence { tags }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Class {
    Head,
    Body,
    Cont,
}

fn class_of(ind: Indicator) -> Option<Class> {
    match ind {
        Indicator::BH | Indicator::IH => Some(Class::Head),
        Indicator::BD | Indicator::ID => Some(Class::Body),
        Indicator::B | Indicator::I => Some(Class::Cont),
        Indicator::O => None,
    }
}

/// Maximal run of tokens that every consistent reading treats as a unit.
#[derive(Debug, Clone)]
struct Atom {
    start: usize,
    end: usize,
    class: Class,
    ty: String,
}

fn atoms(t: &TagSequence) -> Vec<Atom> {
    let mut out: Vec<Atom> = Vec::new();
    for (i, tag) in t.tags.iter().enumerate() {
        let Some(class) = class_of(tag.indicator) else {
            continue;
        };
        let ty = tag.type_str();
        let begins = matches!(tag.indicator, Indicator::B | Indicator::BH | Indicator::BD);
        if let Some(last) = out.last_mut() {
            let same_type = class == Class::Head || last.ty == ty;
            if !begins && last.end == i && last.class == class && same_type {
                last.end = i + 1;
                continue;
            }
        }
        out.push(Atom {
            start: i,
            end: i + 1,
            class,
            ty: ty.to_string(),
        });
    }
    out
}

/// Heuristic reading: bodies attach to the nearest head on their left (else
/// right), continuous runs adjacent to a head extend it, headless bodies of
/// one type form a single mention, and leftover heads stand alone.
pub fn decode_biohd(t: &TagSequence) -> Vec<Mention> {
    let atoms = atoms(t);
    let heads: Vec<&Atom> = atoms.iter().filter(|a| a.class == Class::Head).collect();
    let mut head_used = vec![false; heads.len()];
    let mut out = Vec::new();
    let join = |a: &Atom, b: &Atom, ty: &str| {
        Mention::from_tokens(ty, (a.start..a.end).chain(b.start..b.end)).expect("nonempty")
    };

    for a in atoms.iter().filter(|a| a.class == Class::Cont) {
        let continues_head = t.tags[a.start].indicator == Indicator::I;
        let left = heads
            .iter()
            .position(|h| h.end == a.start)
            .filter(|_| continues_head);
        let right = heads.iter().position(|h| h.start == a.end);
        match left.or(right) {
            Some(h) => {
                head_used[h] = true;
                out.push(join(heads[h], a, &a.ty));
            }
            None => out.push(Mention::from_tokens(&a.ty, a.start..a.end).expect("nonempty")),
        }
    }

    let mut headless: Vec<&Atom> = Vec::new();
    for a in atoms.iter().filter(|a| a.class == Class::Body) {
        let left = heads
            .iter()
            .enumerate()
            .filter(|(_, h)| h.end <= a.start)
            .max_by_key(|(_, h)| h.end);
        let right = heads
            .iter()
            .enumerate()
            .filter(|(_, h)| h.start >= a.end)
            .min_by_key(|(_, h)| h.start);
        match left.or(right) {
            Some((h, head)) => {
                head_used[h] = true;
                out.push(join(head, a, &a.ty));
            }
            None => headless.push(a),
        }
    }
    let types: BTreeSet<&str> = headless.iter().map(|a| a.ty.as_str()).collect();
    for ty in types {
        let tokens = headless
            .iter()
            .filter(|a| a.ty == ty)
            .flat_map(|a| a.start..a.end);
        out.push(Mention::from_tokens(ty, tokens).expect("nonempty"));
    }

    for (h, head) in heads.iter().enumerate() {
        if !head_used[h] {
            out.push(Mention::from_tokens(&head.ty, head.start..head.end).expect("nonempty"));
        }
    }
    out.sort();
    out.dedup();
    out
}

/// Distinct mention sets (each sorted) that tag to exactly `t`, found by
/// depth-first search over unions of atoms. Readings with nested mentions
/// count. Stops after `limit` sets.
pub fn ambiguity_witnesses(t: &TagSequence, limit: usize) -> Vec<Vec<Mention>> {
    let atoms = atoms(t);
    let all_types: BTreeSet<&str> = atoms.iter().map(|a| a.ty.as_str()).collect();

    // Candidates grouped by their first atom.
    let mut by_first: Vec<Vec<(Vec<usize>, Mention)>> = vec![Vec::new(); atoms.len()];
    let mut chosen = Vec::new();
    for first in 0..atoms.len() {
        subsets_from(first, atoms.len(), &mut chosen, &mut |ids: &[usize]| {
            for m in candidate_mentions(&atoms, ids, &all_types) {
                by_first[first].push((ids.to_vec(), m));
            }
        });
    }

    let mut search = Search {
        atoms: &atoms,
        by_first: &by_first,
        target: t,
        limit,
        coverage: vec![0; atoms.len()],
        picked: Vec::new(),
        found: Vec::new(),
    };
    search.atom(0);
    search.found
}

/// Calls `f` with every subset of `first..n` that contains `first` and has
/// at most `MAX_ATOMS_PER_MENTION` elements.
fn subsets_from(first: usize, n: usize, chosen: &mut Vec<usize>, f: &mut dyn FnMut(&[usize])) {
    chosen.clear();
    chosen.push(first);
    fn rec(next: usize, n: usize, chosen: &mut Vec<usize>, f: &mut dyn FnMut(&[usize])) {
        f(chosen);
        if chosen.len() == MAX_ATOMS_PER_MENTION {
            return;
        }
        for j in next..n {
            chosen.push(j);
            rec(j + 1, n, chosen, f);
            chosen.pop();
        }
    }
    rec(first + 1, n, chosen, f);
}

/// Mentions formed by a union of atoms that could be consistent with their
/// classes: continuous pieces only in continuous mentions, exclusive bodies
/// only in discontinuous ones, and one entity type across non-head atoms.
fn candidate_mentions(atoms: &[Atom], ids: &[usize], all_types: &BTreeSet<&str>) -> Vec<Mention> {
    let contiguous = ids.windows(2).all(|w| atoms[w[0]].end == atoms[w[1]].start);
    let has = |c: Class| ids.iter().any(|&i| atoms[i].class == c);
    if (has(Class::Cont) && !contiguous) || (has(Class::Body) && contiguous) {
        return Vec::new();
    }
    let own: BTreeSet<&str> = ids
        .iter()
        .filter(|&&i| atoms[i].class != Class::Head)
        .map(|&i| atoms[i].ty.as_str())
        .collect();
    let types: Vec<&str> = match own.len() {
        0 => all_types.iter().copied().collect(),
        1 => own.into_iter().collect(),
        _ => return Vec::new(),
    };
    types
        .into_iter()
        .map(|ty| {
            Mention::from_tokens(ty, ids.iter().flat_map(|&i| atoms[i].start..atoms[i].end))
                .expect("nonempty")
        })
        .collect()
}

struct Search<'a> {
    atoms: &'a [Atom],
    by_first: &'a [Vec<(Vec<usize>, Mention)>],
    target: &'a TagSequence,
    limit: usize,
    coverage: Vec<usize>,
    picked: Vec<&'a Mention>,
    found: Vec<Vec<Mention>>,
}

impl<'a> Search<'a> {
    fn atom(&mut self, i: usize) {
        if self.found.len() >= self.limit {
            return;
        }
        if i == self.atoms.len() {
            let mut set: Vec<Mention> = self.picked.iter().map(|&m| m.clone()).collect();
            set.sort();
            if tag_mentions(self.target.len(), &set) == *self.target {
                self.found.push(set);
            }
            return;
        }
        self.choose(i, 0);
    }

    /// Decides in turn whether each candidate starting at atom `i` is used.
    fn choose(&mut self, i: usize, k: usize) {
        if self.found.len() >= self.limit {
            return;
        }
        let cands = &self.by_first[i];
        if k == cands.len() {
            let ok = match self.atoms[i].class {
                Class::Head => self.coverage[i] >= 2,
                _ => self.coverage[i] == 1,
            };
            if ok {
                self.atom(i + 1);
            }
            return;
        }
        self.choose(i, k + 1);
        let (ids, mention) = &cands[k];
        let fits = ids
            .iter()
            .all(|&j| self.atoms[j].class == Class::Head || self.coverage[j] == 0);
        if fits {
            for &j in ids {
                self.coverage[j] += 1;
            }
            self.picked.push(mention);
            self.choose(i, k + 1);
            self.picked.pop();
            for &j in ids {
                self.coverage[j] -= 1;
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn seq(s: &str) -> TagSequence {
        s.parse().unwrap()
    }

    fn m(spans: &[(usize, usize)]) -> Mention {
        Mention::from_spans("ADR", spans).unwrap()
    }

    fn muscle() -> Sentence {
        Sentence::from_text(
            "muscle pain and fatigue",
            vec![m(&[(0, 2)]), m(&[(0, 1), (3, 4)])],
        )
        .unwrap()
    }

    #[test]
    fn encode_muscle_pain_and_fatigue() {
        assert_eq!(
            encode_biohd(&muscle()).unwrap().to_string(),
            "BH-ADR I-ADR O BD-ADR"
        );
    }

    #[test]
    fn encode_right_overlap() {
        let s = Sentence::from_text(
            "hip / leg / foot pain",
            vec![m(&[(0, 1), (5, 6)]), m(&[(2, 3), (5, 6)]), m(&[(4, 6)])],
        )
        .unwrap();
        assert_eq!(
            encode_biohd(&s).unwrap().to_string(),
            "BD-ADR O BD-ADR O B-ADR BH-ADR"
        );
        assert_eq!(decode_biohd(&encode_biohd(&s).unwrap()), s.mentions);
    }

    #[test]
    fn encode_rejects_nested() {
        let s = Sentence::from_text("a b c", vec![m(&[(0, 3)]), m(&[(1, 2)])]).unwrap();
        assert!(matches!(encode_biohd(&s), Err(SchemaError::Nested(..))));
    }

    #[test]
    fn decode_muscle_pain_and_fatigue() {
        assert_eq!(
            decode_biohd(&seq("BH-ADR I-ADR O BD-ADR")),
            muscle().mentions
        );
    }

    #[test]
    fn decode_headless_bodies_merge() {
        assert_eq!(
            decode_biohd(&seq("BD-ADR O BD-ADR")),
            vec![m(&[(0, 1), (2, 3)])]
        );
        assert_eq!(decode_biohd(&seq("BH-ADR O")), vec![m(&[(0, 1)])]);
    }

    #[test]
    fn untyped_tags_have_witnesses() {
        let w = ambiguity_witnesses(&seq("BH I O BD"), DEFAULT_WITNESS_LIMIT);
        assert!(w.len() >= 2);
        assert!(w
            .iter()
            .all(|set| set.iter().all(|m| m.entity_type.is_empty())));
        assert!(w.iter().any(|set| set.len() == 2) && w.iter().any(|set| set.len() == 3));
    }

    #[test]
    fn muscle_witnesses_include_both_readings() {
        let w = ambiguity_witnesses(&seq("BH-ADR I-ADR O BD-ADR"), DEFAULT_WITNESS_LIMIT);
        assert!(w.len() >= 2);
        assert!(w.contains(&muscle().mentions));
        let mut three = vec![m(&[(0, 1)]), m(&[(0, 2)]), m(&[(0, 1), (3, 4)])];
        three.sort();
        assert!(w.contains(&three));
        for (i, a) in w.iter().enumerate() {
            assert!(w[i + 1..].iter().all(|b| b != a));
        }
    }

    #[test]
    fn flat_sequences_have_one_witness() {
        assert_eq!(
            ambiguity_witnesses(&seq("B-ADR I-ADR"), usize::MAX),
            vec![vec![m(&[(0, 2)])]]
        );
        assert_eq!(
            ambiguity_witnesses(&seq("O O"), usize::MAX),
            vec![Vec::<Mention>::new()]
        );
        assert_eq!(
            ambiguity_witnesses(&seq("B-ADR B-ADR O B-DIS"), usize::MAX).len(),
            1
        );
    }

    #[test]
    fn witness_limit_is_respected() {
        assert_eq!(
            ambiguity_witnesses(&seq("BH-ADR I-ADR O BD-ADR"), 1).len(),
            1
        );
    }
}

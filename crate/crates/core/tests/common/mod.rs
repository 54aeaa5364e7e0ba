//! Token-level recounts that share no code with the library.

#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet};

use dner_core::corpus::{Mention, OverlapCategory};
use dner_core::eval::{
    eval_by_category, eval_disc_only, recall_by_length, strict_prf, EvalError, Prf,
};
use rand::Rng;

pub fn tokens(m: &Mention) -> BTreeSet<usize> {
    m.fragments.iter().flat_map(|f| f.start..f.end).collect()
}

/// Maximal runs of consecutive tokens.
pub fn runs(tokens: &BTreeSet<usize>) -> Vec<BTreeSet<usize>> {
    let mut out: Vec<BTreeSet<usize>> = Vec::new();
    let mut prev: Option<usize> = None;
    for &t in tokens {
        match (prev, out.last_mut()) {
            (Some(p), Some(run)) if p + 1 == t => {
                run.insert(t);
            }
            _ => out.push(BTreeSet::from([t])),
        }
        prev = Some(t);
    }
    out
}

pub fn same(a: &Mention, b: &Mention) -> bool {
    a.entity_type == b.entity_type && tokens(a) == tokens(b)
}

/// `None` for continuous mentions.
pub fn category(m: &Mention, sentence: &[Mention]) -> Option<OverlapCategory> {
    let rs = runs(&tokens(m));
    if rs.len() < 2 {
        return None;
    }
    let other: BTreeSet<usize> = sentence
        .iter()
        .filter(|o| !same(o, m))
        .flat_map(tokens)
        .collect();
    let shared: Vec<usize> = (0..rs.len())
        .filter(|&i| !rs[i].is_disjoint(&other))
        .collect();
    Some(if shared.is_empty() {
        OverlapCategory::NoOverlap
    } else if shared == [0] {
        OverlapCategory::LeftOverlap
    } else if shared == [rs.len() - 1] {
        OverlapCategory::RightOverlap
    } else {
        OverlapCategory::MultiOverlap
    })
}

/// Distinct mentions, first occurrence kept.
pub fn distinct(ms: &[Mention]) -> Vec<Mention> {
    let mut out: Vec<Mention> = Vec::new();
    for m in ms {
        if !out.iter().any(|o| same(o, m)) {
            out.push(m.clone());
        }
    }
    out
}

pub fn random_mention<R: Rng>(rng: &mut R, len: usize) -> Mention {
    let ty = if rng.gen_bool(0.7) { "A" } else { "B" };
    let mut tokens: Vec<usize> = (0..len).filter(|_| rng.gen_bool(0.35)).collect();
    if tokens.is_empty() {
        tokens.push(rng.gen_range(0..len));
    }
    Mention::from_tokens(ty, tokens).unwrap()
}

/// A few sentences of gold mentions and a noisy copy as predictions, with an
/// occasional duplicate prediction.
pub fn random_pair<R: Rng>(rng: &mut R) -> (Vec<Vec<Mention>>, Vec<Vec<Mention>>) {
    let n = rng.gen_range(1..=4);
    let mut gold = Vec::new();
    let mut pred = Vec::new();
    for _ in 0..n {
        let len = rng.gen_range(1..=8);
        let drawn: Vec<Mention> = (0..rng.gen_range(0..=4))
            .map(|_| random_mention(rng, len))
            .collect();
        let g = distinct(&drawn);
        let mut p: Vec<Mention> = g.iter().filter(|_| rng.gen_bool(0.6)).cloned().collect();
        for _ in 0..rng.gen_range(0..=2) {
            p.push(random_mention(rng, len));
        }
        if !p.is_empty() && rng.gen_bool(0.1) {
            p.push(p[0].clone());
        }
        gold.push(g);
        pred.push(p);
    }
    (gold, pred)
}

fn ratio(a: usize, b: usize) -> f64 {
    if b == 0 {
        0.0
    } else {
        a as f64 / b as f64
    }
}

fn check_prf(
    what: &str,
    got: &Prf,
    correct: usize,
    gold: usize,
    pred: usize,
) -> Result<(), String> {
    let p = ratio(correct, pred);
    let r = ratio(correct, gold);
    let f = if p + r == 0.0 {
        0.0
    } else {
        2.0 * p * r / (p + r)
    };
    let want = (correct, gold, pred, p, r, f);
    let have = (
        got.correct,
        got.gold,
        got.predicted,
        got.precision,
        got.recall,
        got.f1,
    );
    if want != have {
        return Err(format!("{what}: expected {want:?}, got {have:?}"));
    }
    Ok(())
}

fn found(m: &Mention, side: &[Mention]) -> bool {
    side.iter().any(|o| same(o, m))
}

fn recount<F: Fn(&Mention) -> bool>(
    gold: &[Vec<Mention>],
    pred: &[Vec<Mention>],
    keep: F,
) -> (usize, usize, usize) {
    let (mut c, mut g, mut p) = (0, 0, 0);
    for (gs, ps) in gold.iter().zip(pred) {
        let gs: Vec<Mention> = distinct(gs).into_iter().filter(|m| keep(m)).collect();
        let ps: Vec<Mention> = distinct(ps).into_iter().filter(|m| keep(m)).collect();
        g += gs.len();
        p += ps.len();
        c += gs.iter().filter(|m| found(m, &ps)).count();
    }
    (c, g, p)
}

/// Compares every metric against a recount; `Err` names the first mismatch.
pub fn check_metrics(gold: &[Vec<Mention>], pred: &[Vec<Mention>]) -> Result<(), String> {
    let e = |e: EvalError| e.to_string();
    let (c, g, p) = recount(gold, pred, |_| true);
    check_prf("strict", &strict_prf(gold, pred).map_err(e)?, c, g, p)?;
    let (c, g, p) = recount(gold, pred, |m| runs(&tokens(m)).len() > 1);
    check_prf(
        "disc_only",
        &eval_disc_only(gold, pred).map_err(e)?,
        c,
        g,
        p,
    )?;

    let mut cats: BTreeMap<OverlapCategory, [usize; 4]> = BTreeMap::new();
    for (gs, ps) in gold.iter().zip(pred) {
        let (gs, ps) = (distinct(gs), distinct(ps));
        for m in &gs {
            if let Some(cat) = category(m, &gs) {
                let e = cats.entry(cat).or_default();
                e[0] += 1;
                e[1] += usize::from(found(m, &ps));
            }
        }
        for m in &ps {
            if let Some(cat) = category(m, &ps) {
                let e = cats.entry(cat).or_default();
                e[2] += 1;
                e[3] += usize::from(found(m, &gs));
            }
        }
    }
    let by_cat = eval_by_category(gold, pred).map_err(e)?;
    for cat in OverlapCategory::ALL {
        let [ng, hit, np, right] = cats.get(&cat).copied().unwrap_or_default();
        let s = &by_cat[&cat];
        let want = (ng, ng, hit, np, ratio(hit, ng), ratio(right, np));
        let have = (
            s.gold_count,
            s.prf.gold,
            s.prf.correct,
            s.prf.predicted,
            s.prf.recall,
            s.prf.precision,
        );
        if want != have {
            return Err(format!("category {cat}: expected {want:?}, got {have:?}"));
        }
    }

    let mut by_len = [[0usize; 2]; 5];
    let mut by_gap = [[0usize; 2]; 5];
    for (gs, ps) in gold.iter().zip(pred) {
        for m in distinct(gs) {
            let t = tokens(&m);
            let hit = usize::from(found(&m, ps));
            let l = t.len().clamp(1, 5) - 1;
            let gap = (t.last().unwrap() - t.first().unwrap() + 1 - t.len()).min(4);
            by_len[l][0] += 1;
            by_len[l][1] += hit;
            by_gap[gap][0] += 1;
            by_gap[gap][1] += hit;
        }
    }
    let lb = recall_by_length(gold, pred).map_err(e)?;
    for (b, [g, f]) in lb
        .mention_length
        .iter()
        .zip(by_len)
        .chain(lb.interval_length.iter().zip(by_gap))
    {
        if (b.gold, b.found, b.recall) != (g, f, ratio(f, g)) {
            return Err(format!(
                "length bucket {}: expected {g}/{f}, got {}/{}",
                b.label, b.gold, b.found
            ));
        }
    }
    Ok(())
}

//! Edit-level precision, recall and F-beta.
//!
//! Hypothesis edits come from the same Levenshtein backtrace used for tag
//! conversion, with adjacent non-match operations merged into one span edit.
//! An edit counts as correct only if `(start, end, replacement)` matches a
//! gold edit exactly.

use std::collections::BTreeSet;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::align::{levenshtein_ops, AlignOp};
use crate::corpus::{Corpus, GoldEdit, GoldEditSet, Token};
use crate::{Error, Result};

pub const DEFAULT_BETA: f64 = 0.5;

/// Span edits turning `source` into `hypothesis`, sorted and non-overlapping.
pub fn extract_edits(source: &[Token], hypothesis: &[Token]) -> Vec<GoldEdit> {
    let mut edits = Vec::new();
    let mut open: Option<GoldEdit> = None;
    let mut cursor = 0;
    for op in levenshtein_ops(source, hypothesis) {
        match op {
            AlignOp::Match { src, .. } => {
                edits.extend(open.take());
                cursor = src + 1;
            }
            AlignOp::Substitute { src, tgt } => {
                let e = open.get_or_insert_with(|| span_at(src));
                e.end = src + 1;
                e.replacement.push(hypothesis[tgt].clone());
                cursor = src + 1;
            }
            AlignOp::Delete { src } => {
                let e = open.get_or_insert_with(|| span_at(src));
                e.end = src + 1;
                cursor = src + 1;
            }
            AlignOp::Insert { tgt } => {
                open.get_or_insert_with(|| span_at(cursor))
                    .replacement
                    .push(hypothesis[tgt].clone());
            }
        }
    }
    edits.extend(open);
    edits
}

fn span_at(pos: usize) -> GoldEdit {
    GoldEdit {
        start: pos,
        end: pos,
        replacement: Vec::new(),
    }
}

/// Applies sorted, non-overlapping span edits.
pub fn apply_edits(source: &[Token], edits: &[GoldEdit]) -> Result<Vec<Token>> {
    let mut out = Vec::with_capacity(source.len());
    let mut cursor = 0;
    for e in edits {
        if e.start < cursor || e.end < e.start || e.end > source.len() {
            return Err(Error::InvalidConfig(format!(
                "edit ({}, {}) is out of order or out of range for a sentence of {} tokens",
                e.start,
                e.end,
                source.len()
            )));
        }
        out.extend_from_slice(&source[cursor..e.start]);
        out.extend(e.replacement.iter().cloned());
        cursor = e.end;
    }
    out.extend_from_slice(&source[cursor..]);
    Ok(out)
}

/// Single-annotator gold edits read off a parallel corpus.
pub fn gold_from_corpus(corpus: &Corpus) -> Vec<GoldEditSet> {
    corpus
        .samples
        .iter()
        .map(|s| GoldEditSet::single(s.source.clone(), extract_edits(&s.source, &s.target)))
        .collect()
}

fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        1.0
    } else {
        num as f64 / den as f64
    }
}

/// `(1 + b^2) P R / (b^2 P + R)`, zero when the denominator is zero.
pub fn f_beta(precision: f64, recall: f64, beta: f64) -> f64 {
    let b2 = beta * beta;
    let den = b2 * precision + recall;
    if den == 0.0 {
        0.0
    } else {
        (1.0 + b2) * precision * recall / den
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScoreReport {
    pub tp: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
    pub precision: f64,
    pub recall: f64,
    pub f_beta: f64,
    pub beta: f64,
}

impl ScoreReport {
    pub fn from_counts(tp: usize, fp: usize, fn_: usize, beta: f64) -> Self {
        let precision = ratio(tp, tp + fp);
        let recall = ratio(tp, tp + fn_);
        ScoreReport {
            tp,
            fp,
            fn_,
            precision,
            recall,
            f_beta: f_beta(precision, recall, beta),
            beta,
        }
    }

    pub fn to_tsv(&self) -> String {
        format!(
            "tp\tfp\tfn\tprecision\trecall\tf{b}\n{}\t{}\t{}\t{:.4}\t{:.4}\t{:.4}\n",
            self.tp,
            self.fp,
            self.fn_,
            self.precision,
            self.recall,
            self.f_beta,
            b = self.beta
        )
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "TP {:>8}   FP {:>8}   FN {:>8}", self.tp, self.fp, self.fn_);
        let _ = writeln!(
            s,
            "P  {:.4}   R  {:.4}   F{} {:.4}",
            self.precision, self.recall, self.beta, self.f_beta
        );
        s
    }
}

/// `(tp, fp, fn)` of a hypothesis edit set against one annotator.
pub fn match_counts(hyp: &[GoldEdit], gold: &[GoldEdit]) -> (usize, usize, usize) {
    let gold: BTreeSet<&GoldEdit> = gold.iter().collect();
    let hyp: BTreeSet<&GoldEdit> = hyp.iter().collect();
    let tp = hyp.intersection(&gold).count();
    (tp, hyp.len() - tp, gold.len() - tp)
}

/// Per-sentence counts against the annotator with the best sentence-level
/// F-beta (ties go to the lower annotator id), plus that annotator's id.
pub fn best_annotator(hyp: &[GoldEdit], gold: &GoldEditSet, beta: f64) -> (Option<u32>, (usize, usize, usize)) {
    let mut best: Option<(u32, (usize, usize, usize), f64)> = None;
    for (&id, edits) in &gold.annotators {
        let c = match_counts(hyp, edits);
        let f = ScoreReport::from_counts(c.0, c.1, c.2, beta).f_beta;
        if best.as_ref().is_none_or(|(_, _, bf)| f > *bf) {
            best = Some((id, c, f));
        }
    }
    match best {
        Some((id, c, _)) => (Some(id), c),
        None => (None, (0, hyp.len(), 0)),
    }
}

pub fn score(sources: &[Vec<Token>], hypotheses: &[Vec<Token>], gold: &[GoldEditSet], beta: f64) -> Result<ScoreReport> {
    if sources.len() != hypotheses.len() || sources.len() != gold.len() {
        return Err(Error::LengthMismatch {
            what: "sources, hypotheses and gold sets".into(),
            expected: sources.len(),
            found: if hypotheses.len() != sources.len() {
                hypotheses.len()
            } else {
                gold.len()
            },
        });
    }
    let (mut tp, mut fp, mut fn_) = (0, 0, 0);
    for ((src, hyp), g) in sources.iter().zip(hypotheses).zip(gold) {
        let edits = extract_edits(src, hyp);
        let (_, c) = best_annotator(&edits, g, beta);
        tp += c.0;
        fp += c.1;
        fn_ += c.2;
    }
    Ok(ScoreReport::from_counts(tp, fp, fn_, beta))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn toks(s: &str) -> Vec<Token> {
        s.split_whitespace().map(str::to_owned).collect()
    }

    #[test]
    fn extraction_examples() {
        assert!(extract_edits(&toks("a b c"), &toks("a b c")).is_empty());
        assert_eq!(extract_edits(&toks("a b c"), &toks("a x c")), vec![GoldEdit::new(1, 2, &["x"])]);
        assert_eq!(
            extract_edits(&toks("he goes school"), &toks("he goes to school")),
            vec![GoldEdit::new(2, 2, &["to"])]
        );
        assert_eq!(extract_edits(&toks("the the cat"), &toks("the cat")), vec![GoldEdit::new(0, 1, &[])]);
        assert_eq!(
            extract_edits(&toks("a b c d"), &toks("a x y d")),
            vec![GoldEdit::new(1, 3, &["x", "y"])]
        );
        assert_eq!(extract_edits(&toks("b"), &toks("a b")), vec![GoldEdit::new(0, 0, &["a"])]);
    }

    #[test]
    fn formula_value() {
        // 1.25 * 0.75 * 0.3 / (0.25 * 0.75 + 0.3) = 0.28125 / 0.4875
        let expected = 0.28125 / 0.4875;
        assert!((f_beta(0.75, 0.3, 0.5) - 0.576_923_076_923_077).abs() < 1e-12);
        assert_eq!(f_beta(0.75, 0.3, 0.5), expected);
        assert_eq!(f_beta(0.0, 0.0, 0.5), 0.0);
    }

    #[test]
    fn perfect_and_do_nothing_systems() {
        let sources = vec![toks("he go home"), toks("a apple")];
        let targets = vec![toks("he goes home"), toks("an apple")];
        let gold: Vec<GoldEditSet> = sources
            .iter()
            .zip(&targets)
            .map(|(s, t)| GoldEditSet::single(s.clone(), extract_edits(s, t)))
            .collect();
        let r = score(&sources, &targets, &gold, 0.5).unwrap();
        assert_eq!((r.precision, r.recall, r.f_beta), (1.0, 1.0, 1.0));

        let r = score(&sources, &sources, &gold, 0.5).unwrap();
        assert_eq!((r.tp, r.fp, r.fn_), (0, 0, 2));
        assert_eq!((r.precision, r.recall, r.f_beta), (1.0, 0.0, 0.0));
    }

    #[test]
    fn picks_annotator_with_best_sentence_score() {
        let src = toks("a b c");
        let mut g = GoldEditSet::single(src.clone(), vec![GoldEdit::new(0, 1, &["x"])]);
        g.annotators.insert(1, vec![GoldEdit::new(1, 2, &["y"])]);
        let hyp = toks("a y c");
        assert_eq!(best_annotator(&extract_edits(&src, &hyp), &g, 0.5), (Some(1), (1, 0, 0)));
        // Equal scores: lower id wins.
        assert_eq!(best_annotator(&[], &g, 0.5), (Some(0), (0, 0, 1)));
    }

    #[test]
    fn mismatched_lengths_error() {
        assert!(score(&[toks("a")], &[], &[], 0.5).is_err());
    }

    #[test]
    fn report_renders() {
        let r = ScoreReport::from_counts(3, 1, 7, 0.5);
        assert!(r.to_tsv().starts_with("tp\tfp\tfn\tprecision\trecall\tf0.5\n3\t1\t7\t0.7500\t0.3000\t0.5769"));
        assert!(r.to_text().contains("F0.5 0.5769"));
    }

    fn sentence() -> impl Strategy<Value = Vec<Token>> {
        prop::collection::vec(prop::sample::select(vec!["a", "b", "c", "d"]), 0..8)
            .prop_map(|v| v.into_iter().map(str::to_owned).collect())
    }

    proptest! {
        #[test]
        fn extracted_edits_apply_back(src in sentence(), hyp in sentence()) {
            let edits = extract_edits(&src, &hyp);
            for w in edits.windows(2) {
                prop_assert!(w[0].end <= w[1].start && w[0] < w[1]);
            }
            prop_assert_eq!(apply_edits(&src, &edits).unwrap(), hyp);
        }

        #[test]
        fn f_is_bounded_by_p_and_r(tp in 0usize..50, fp in 0usize..50, fn_ in 0usize..50) {
            let r = ScoreReport::from_counts(tp, fp, fn_, 0.5);
            prop_assert!(r.f_beta <= r.precision.max(r.recall) + 1e-12);
            prop_assert!((0.0..=1.0).contains(&r.f_beta));
            if r.precision == r.recall && r.precision > 0.0 {
                prop_assert!((r.f_beta - r.precision).abs() < 1e-12);
            }
        }

        #[test]
        fn order_does_not_matter(pairs in prop::collection::vec((sentence(), sentence(), sentence()), 1..8), seed in any::<u64>()) {
            use rand::seq::SliceRandom;
            use rand::SeedableRng;
            let gold: Vec<GoldEditSet> = pairs
                .iter()
                .map(|(s, t, u)| {
                    let mut g = GoldEditSet::single(s.clone(), extract_edits(s, t));
                    g.annotators.insert(1, extract_edits(s, u));
                    g
                })
                .collect();
            let sources: Vec<Vec<Token>> = pairs.iter().map(|p| p.0.clone()).collect();
            let hyps: Vec<Vec<Token>> = pairs.iter().map(|p| p.2.clone()).collect();
            let a = score(&sources, &hyps, &gold, 0.5).unwrap();
            let mut idx: Vec<usize> = (0..pairs.len()).collect();
            idx.shuffle(&mut rand_chacha::ChaCha8Rng::seed_from_u64(seed));
            let b = score(
                &idx.iter().map(|&i| sources[i].clone()).collect::<Vec<_>>(),
                &idx.iter().map(|&i| hyps[i].clone()).collect::<Vec<_>>(),
                &idx.iter().map(|&i| gold[i].clone()).collect::<Vec<_>>(),
                0.5,
            ).unwrap();
            prop_assert_eq!(a, b);
        }

        #[test]
        fn spurious_edit_never_raises_precision(
            gold_n in 1usize..6,
            hit in 0usize..6,
            miss in 0usize..6,
        ) {
            // Edits are identified by disjoint spans; one annotator.
            let hit = hit.min(gold_n);
            let gold: Vec<GoldEdit> = (0..gold_n).map(|i| GoldEdit::new(2 * i, 2 * i + 1, &["g"])).collect();
            let mut hyp: Vec<GoldEdit> = gold[..hit].to_vec();
            hyp.extend((0..miss).map(|i| GoldEdit::new(2 * (gold_n + i), 2 * (gold_n + i) + 1, &["x"])));
            let set = GoldEditSet::single(Vec::new(), gold.clone());
            let before = best_annotator(&hyp, &set, 0.5).1;
            let spurious = GoldEdit::new(100, 101, &["z"]);
            let mut more = hyp.clone();
            more.push(spurious);
            let after = best_annotator(&more, &set, 0.5).1;
            let p = |c: (usize, usize, usize)| ScoreReport::from_counts(c.0, c.1, c.2, 0.5).precision;
            prop_assert!(p(after) <= p(before));

            if hit < gold_n {
                let mut better = hyp.clone();
                better.push(gold[hit].clone());
                let r = |c: (usize, usize, usize)| ScoreReport::from_counts(c.0, c.1, c.2, 0.5).recall;
                prop_assert!(r(best_annotator(&better, &set, 0.5).1) >= r(before));
            }
        }
    }
}

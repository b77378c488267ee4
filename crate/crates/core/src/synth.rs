//! Rule-based synthetic error corpus.
//!
//! Clean sentences follow `SUBJ VERB DET [ADJ] NOUN PREP the PLACE [TIME] .`
//! and are corrupted with subject-verb agreement errors, a/an confusion,
//! missing articles, wrong prepositions and duplicated words. A fraction of
//! samples can receive a deliberately wrong annotation: a missed correction,
//! a wrong correction or a spurious edit.

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::{Corpus, ParallelSample, Token};
use crate::{Error, Result};

const SINGULAR: [&str; 4] = ["he", "she", "Tom", "Anna"];
const PLURAL: [&str; 4] = ["they", "we", "you", "I"];
const VERBS: [(&str, &str); 8] = [
    ("see", "sees"),
    ("like", "likes"),
    ("want", "wants"),
    ("find", "finds"),
    ("carry", "carries"),
    ("watch", "watches"),
    ("need", "needs"),
    ("buy", "buys"),
];
const ADJS: [&str; 6] = ["old", "big", "red", "small", "empty", "interesting"];
const NOUNS: [&str; 8] = ["apple", "book", "car", "umbrella", "dog", "orange", "house", "egg"];
const PREPS: [&str; 4] = ["in", "at", "on", "near"];
const PLACES: [(&str, usize); 6] = [
    ("park", 0),
    ("station", 1),
    ("garden", 0),
    ("office", 1),
    ("table", 2),
    ("river", 3),
];
const TIMES: [&str; 4] = ["today", "again", "now", "often"];

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Det {
    Indefinite,
    The,
}

#[derive(Clone, Copy, Debug)]
struct Clean {
    subj: usize,
    plural: bool,
    verb: usize,
    det: Det,
    adj: Option<usize>,
    noun: usize,
    place: usize,
    time: Option<usize>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Role {
    Subj,
    Verb,
    Noun,
    Place,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Op {
    Agreement,
    ArticleSwap,
    DropArticle,
    PrepSwap(usize),
    Duplicate(Role),
    OtherVerb(usize),
    DropAdj,
    InsertAdverb,
}

fn starts_with_vowel(word: &str) -> bool {
    word.starts_with(['a', 'e', 'i', 'o', 'u'])
}

fn render(c: &Clean, ops: &[Op]) -> Vec<Token> {
    let has = |op: Op| ops.contains(&op);
    let dup = |role: Role| ops.contains(&Op::Duplicate(role));
    let mut out: Vec<&str> = Vec::with_capacity(12);
    let push = |w: &'static str, twice: bool, out: &mut Vec<&str>| {
        out.push(w);
        if twice {
            out.push(w);
        }
    };

    let subj = if c.plural { PLURAL[c.subj] } else { SINGULAR[c.subj] };
    push(subj, dup(Role::Subj), &mut out);
    if has(Op::InsertAdverb) {
        out.push("really");
    }
    let lemma = ops
        .iter()
        .find_map(|op| match op {
            Op::OtherVerb(v) => Some(*v),
            _ => None,
        })
        .unwrap_or(c.verb);
    let (base, third) = VERBS[lemma];
    let agrees_plural = c.plural != has(Op::Agreement);
    push(if agrees_plural { base } else { third }, dup(Role::Verb), &mut out);

    let adj = c.adj.filter(|_| !has(Op::DropAdj)).map(|a| ADJS[a]);
    let noun = NOUNS[c.noun];
    if !has(Op::DropArticle) {
        let det = match c.det {
            Det::The => "the",
            Det::Indefinite => {
                let vowel = starts_with_vowel(adj.unwrap_or(noun));
                if vowel != has(Op::ArticleSwap) {
                    "an"
                } else {
                    "a"
                }
            }
        };
        out.push(det);
    }
    if let Some(a) = adj {
        out.push(a);
    }
    push(noun, dup(Role::Noun), &mut out);

    let (place, prep) = PLACES[c.place];
    let prep = ops
        .iter()
        .find_map(|op| match op {
            Op::PrepSwap(p) => Some(*p),
            _ => None,
        })
        .unwrap_or(prep);
    out.push(PREPS[prep]);
    out.push("the");
    push(place, dup(Role::Place), &mut out);
    if let Some(t) = c.time {
        out.push(TIMES[t]);
    }
    out.push(".");
    out.into_iter().map(str::to_owned).collect()
}

fn clean_sentence(rng: &mut ChaCha8Rng) -> Clean {
    Clean {
        subj: rng.random_range(0..4),
        plural: rng.random_bool(0.5),
        verb: rng.random_range(0..VERBS.len()),
        det: if rng.random_bool(0.5) { Det::Indefinite } else { Det::The },
        adj: rng.random_bool(0.5).then(|| rng.random_range(0..ADJS.len())),
        noun: rng.random_range(0..NOUNS.len()),
        place: rng.random_range(0..PLACES.len()),
        time: rng.random_bool(0.4).then(|| rng.random_range(0..TIMES.len())),
    }
}

fn other_than(rng: &mut ChaCha8Rng, n: usize, not: usize) -> usize {
    let k = rng.random_range(0..n - 1);
    if k >= not {
        k + 1
    } else {
        k
    }
}

fn pick_errors(c: &Clean, count: usize, rng: &mut ChaCha8Rng) -> Vec<Op> {
    let mut pool = vec![
        Op::Agreement,
        Op::PrepSwap(other_than(rng, PREPS.len(), PLACES[c.place].1)),
        Op::Duplicate(*[Role::Subj, Role::Verb, Role::Noun, Role::Place].choose(rng).expect("non-empty")),
    ];
    match c.det {
        Det::Indefinite => pool.push(Op::ArticleSwap),
        Det::The => pool.push(Op::DropArticle),
    }
    let mut ops = Vec::with_capacity(count);
    for _ in 0..count.min(pool.len()) {
        let i = rng.random_range(0..pool.len());
        ops.push(pool.swap_remove(i));
    }
    ops
}

/// The kinds of deliberately wrong annotation.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Corruption {
    Missed,
    Wrong,
    Spurious,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SynthConfig {
    pub samples: usize,
    /// Share of samples whose source is left error-free.
    pub clean_rate: f64,
    /// Share of samples whose annotation is corrupted.
    pub noise_rate: f64,
    pub max_errors: usize,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            samples: 2000,
            clean_rate: 0.15,
            noise_rate: 0.2,
            max_errors: 2,
            seed: 0,
        }
    }
}

#[derive(Clone, Debug)]
pub struct SynthCorpus {
    pub corpus: Corpus,
    /// Ids of samples with a corrupted annotation, with the kind applied.
    pub corrupted: Vec<(usize, Corruption)>,
}

pub fn generate(cfg: &SynthConfig, name: &str) -> Result<SynthCorpus> {
    for (what, v) in [("clean_rate", cfg.clean_rate), ("noise_rate", cfg.noise_rate)] {
        if !(0.0..=1.0).contains(&v) {
            return Err(Error::InvalidConfig(format!("{what} must lie in [0, 1], got {v}")));
        }
    }
    if cfg.max_errors == 0 {
        return Err(Error::InvalidConfig("max_errors must be >= 1".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut samples = Vec::with_capacity(cfg.samples);
    let mut corrupted = Vec::new();
    for id in 0..cfg.samples {
        let c = clean_sentence(&mut rng);
        let errors = if rng.random_bool(cfg.clean_rate) {
            Vec::new()
        } else {
            let n = rng.random_range(1..=cfg.max_errors);
            pick_errors(&c, n, &mut rng)
        };
        let source = render(&c, &errors);
        let mut target = render(&c, &[]);
        if rng.random_bool(cfg.noise_rate) {
            let kind = match rng.random_range(0..3) {
                0 if !errors.is_empty() => Corruption::Missed,
                1 => Corruption::Wrong,
                _ => Corruption::Spurious,
            };
            let ops = match kind {
                Corruption::Missed => vec![*errors.choose(&mut rng).expect("non-empty")],
                Corruption::Wrong => {
                    if rng.random_bool(0.5) {
                        vec![Op::OtherVerb(other_than(&mut rng, VERBS.len(), c.verb))]
                    } else {
                        vec![Op::PrepSwap(other_than(&mut rng, PREPS.len(), PLACES[c.place].1))]
                    }
                }
                Corruption::Spurious => {
                    if c.adj.is_some() && rng.random_bool(0.5) {
                        vec![Op::DropAdj]
                    } else {
                        vec![Op::InsertAdverb]
                    }
                }
            };
            target = render(&c, &ops);
            corrupted.push((id, kind));
        }
        samples.push(ParallelSample::new(id, source, target));
    }
    Ok(SynthCorpus {
        corpus: Corpus {
            name: name.to_owned(),
            samples,
        },
        corrupted,
    })
}

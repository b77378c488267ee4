//! Source-to-target alignment and the edit-tag representation.
//!
//! Each sample with `m` source tokens is encoded as `m + 1` tags. Slot 0 is a
//! virtual start slot that can only hold `$KEEP` or an `$APPEND` for text
//! inserted before the first token; slot `i` belongs to source token `i`.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::corpus::{Corpus, ParallelSample, Token};
use crate::hash::{self, fnv1a_lines};
use crate::{jsonl, Error, Result};

pub const DEFAULT_A_MAX: usize = 4;

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum EditTag {
    Keep,
    Delete,
    Replace(Token),
    /// Keep the current token, then emit the span after it.
    Append(Vec<Token>),
}

impl EditTag {
    pub fn append(tokens: &[&str]) -> Self {
        EditTag::Append(tokens.iter().map(|t| t.to_string()).collect())
    }

    pub fn replace(token: &str) -> Self {
        EditTag::Replace(token.to_owned())
    }

    pub fn is_token_dependent(&self) -> bool {
        matches!(self, EditTag::Replace(_) | EditTag::Append(_))
    }

    pub fn allowed_at_start(&self) -> bool {
        matches!(self, EditTag::Keep | EditTag::Append(_))
    }

    pub fn render(&self) -> String {
        self.to_string()
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "$KEEP" => Ok(EditTag::Keep),
            "$DELETE" => Ok(EditTag::Delete),
            _ => {
                if let Some(tok) = s.strip_prefix("$REPLACE_") {
                    if !tok.is_empty() && !tok.contains(char::is_whitespace) {
                        return Ok(EditTag::Replace(tok.to_owned()));
                    }
                } else if let Some(span) = s.strip_prefix("$APPEND_") {
                    let toks: Vec<Token> = span.split(' ').map(str::to_owned).collect();
                    if toks.iter().all(|t| !t.is_empty() && !t.contains(char::is_whitespace)) {
                        return Ok(EditTag::Append(toks));
                    }
                }
                Err(Error::UnknownTag(s.to_owned()))
            }
        }
    }
}

impl fmt::Display for EditTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            EditTag::Keep => f.write_str("$KEEP"),
            EditTag::Delete => f.write_str("$DELETE"),
            EditTag::Replace(t) => write!(f, "$REPLACE_{t}"),
            EditTag::Append(span) => write!(f, "$APPEND_{}", span.join(" ")),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TagSequence {
    pub sample_id: usize,
    pub tags: Vec<EditTag>,
}

/// One step of a minimum-cost alignment, with 0-based source/target indices.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum AlignOp {
    Match { src: usize, tgt: usize },
    Substitute { src: usize, tgt: usize },
    Delete { src: usize },
    Insert { tgt: usize },
}

/// Unit-cost Levenshtein alignment in forward order.
///
/// Backtrace ties resolve as match > substitute > delete > insert, scanning
/// from the end. This pushes insertions to the left of substitutions, so a
/// substituted or deleted token is never directly followed by an insertion.
pub fn levenshtein_ops<T: PartialEq>(source: &[T], target: &[T]) -> Vec<AlignOp> {
    let (m, n) = (source.len(), target.len());
    let w = n + 1;
    let mut d = vec![0u32; (m + 1) * w];
    for j in 0..=n {
        d[j] = j as u32;
    }
    for i in 1..=m {
        d[i * w] = i as u32;
        for j in 1..=n {
            let diag = d[(i - 1) * w + j - 1] + u32::from(source[i - 1] != target[j - 1]);
            let up = d[(i - 1) * w + j] + 1;
            let left = d[i * w + j - 1] + 1;
            d[i * w + j] = diag.min(up).min(left);
        }
    }

    let mut ops = Vec::with_capacity(m.max(n));
    let (mut i, mut j) = (m, n);
    while i > 0 || j > 0 {
        let here = d[i * w + j];
        if i > 0 && j > 0 && source[i - 1] == target[j - 1] && here == d[(i - 1) * w + j - 1] {
            ops.push(AlignOp::Match { src: i - 1, tgt: j - 1 });
            i -= 1;
            j -= 1;
        } else if i > 0 && j > 0 && here == d[(i - 1) * w + j - 1] + 1 {
            ops.push(AlignOp::Substitute { src: i - 1, tgt: j - 1 });
            i -= 1;
            j -= 1;
        } else if i > 0 && here == d[(i - 1) * w + j] + 1 {
            ops.push(AlignOp::Delete { src: i - 1 });
            i -= 1;
        } else {
            ops.push(AlignOp::Insert { tgt: j - 1 });
            j -= 1;
        }
    }
    ops.reverse();
    ops
}

/// Converts a sentence pair into one tag per slot.
///
/// The plain Levenshtein backtrace is used whenever its insertion runs fit in
/// `a_max`. Otherwise the alignment is recomputed under the tag constraints
/// (insertions only after a kept token or at the start, runs of at most
/// `a_max`), still at minimum edit cost among such alignments.
pub fn align_to_tags(sample: &ParallelSample, a_max: usize) -> Result<TagSequence> {
    let ops = levenshtein_ops(&sample.source, &sample.target);
    let tags = match ops_to_tags(sample, &ops, a_max) {
        Err(Error::AppendTooLong { .. }) if a_max > 0 => match constrained_ops(&sample.source, &sample.target, a_max) {
            Some(ops) => ops_to_tags(sample, &ops, a_max)?,
            None => ops_to_tags(sample, &ops, a_max)?,
        },
        other => other?,
    };
    Ok(TagSequence {
        sample_id: sample.id,
        tags,
    })
}

fn ops_to_tags(sample: &ParallelSample, ops: &[AlignOp], a_max: usize) -> Result<Vec<EditTag>> {
    let m = sample.source.len();
    let mut tags = vec![EditTag::Keep; m + 1];
    let mut inserted: Vec<Vec<Token>> = vec![Vec::new(); m + 1];
    let mut slot = 0;
    for &op in ops {
        match op {
            AlignOp::Match { src, .. } => slot = src + 1,
            AlignOp::Substitute { src, tgt } => {
                slot = src + 1;
                tags[slot] = EditTag::Replace(sample.target[tgt].clone());
            }
            AlignOp::Delete { src } => {
                slot = src + 1;
                tags[slot] = EditTag::Delete;
            }
            AlignOp::Insert { tgt } => inserted[slot].push(sample.target[tgt].clone()),
        }
    }
    for (slot, run) in inserted.into_iter().enumerate() {
        if run.is_empty() {
            continue;
        }
        if run.len() > a_max {
            return Err(Error::AppendTooLong {
                sample_id: sample.id,
                len: run.len(),
                a_max,
            });
        }
        // Both aligners only insert after a kept token or at the start.
        assert_eq!(tags[slot], EditTag::Keep, "insertion after a non-KEEP slot");
        tags[slot] = EditTag::Append(run);
    }
    Ok(tags)
}

/// Minimum-cost alignment restricted to what the tag set can express.
///
/// State `r` in `0..=a_max` means the last slot was kept (or is the start)
/// and `r` tokens have been inserted after it; state `a_max + 1` means the
/// last slot was replaced or deleted, so nothing may be inserted. Returns
/// `None` when no expressible alignment exists.
fn constrained_ops<T: PartialEq>(source: &[T], target: &[T], a_max: usize) -> Option<Vec<AlignOp>> {
    const INF: u32 = u32::MAX;
    let (m, n) = (source.len(), target.len());
    let states = a_max + 2;
    let closed = a_max + 1;
    let idx = |i: usize, j: usize, s: usize| (i * (n + 1) + j) * states + s;
    // Cost to reach the end from each state.
    let mut cost = vec![INF; (m + 1) * (n + 1) * states];
    let step = |c: u32| if c == INF { INF } else { c + 1 };
    for i in (0..=m).rev() {
        for j in (0..=n).rev() {
            for s in 0..states {
                let mut best = if i == m && j == n { 0 } else { INF };
                if i < m && j < n {
                    if source[i] == target[j] {
                        best = best.min(cost[idx(i + 1, j + 1, 0)]);
                    } else {
                        best = best.min(step(cost[idx(i + 1, j + 1, closed)]));
                    }
                }
                if i < m {
                    best = best.min(step(cost[idx(i + 1, j, closed)]));
                }
                if j < n && s < a_max {
                    best = best.min(step(cost[idx(i, j + 1, s + 1)]));
                }
                cost[idx(i, j, s)] = best;
            }
        }
    }
    if cost[idx(0, 0, 0)] == INF {
        return None;
    }
    let mut ops = Vec::with_capacity(m.max(n));
    let (mut i, mut j, mut s) = (0, 0, 0);
    while i < m || j < n {
        let here = cost[idx(i, j, s)];
        if i < m && j < n && source[i] == target[j] && cost[idx(i + 1, j + 1, 0)] == here {
            ops.push(AlignOp::Match { src: i, tgt: j });
            (i, j, s) = (i + 1, j + 1, 0);
        } else if i < m && j < n && source[i] != target[j] && step(cost[idx(i + 1, j + 1, closed)]) == here {
            ops.push(AlignOp::Substitute { src: i, tgt: j });
            (i, j, s) = (i + 1, j + 1, closed);
        } else if i < m && step(cost[idx(i + 1, j, closed)]) == here {
            ops.push(AlignOp::Delete { src: i });
            (i, s) = (i + 1, closed);
        } else {
            debug_assert!(j < n && s < a_max);
            ops.push(AlignOp::Insert { tgt: j });
            (j, s) = (j + 1, s + 1);
        }
    }
    Some(ops)
}

pub fn apply_tags(source: &[Token], tags: &[EditTag]) -> Result<Vec<Token>> {
    if tags.len() != source.len() + 1 {
        return Err(Error::LengthMismatch {
            what: "tag sequence length (source length + 1)".into(),
            expected: source.len() + 1,
            found: tags.len(),
        });
    }
    let mut out = Vec::with_capacity(source.len() + 2);
    match &tags[0] {
        EditTag::Keep => {}
        EditTag::Append(span) => out.extend(span.iter().cloned()),
        other => return Err(Error::IllegalStartTag(other.render())),
    }
    for (tok, tag) in source.iter().zip(&tags[1..]) {
        match tag {
            EditTag::Keep => out.push(tok.clone()),
            EditTag::Delete => {}
            EditTag::Replace(r) => out.push(r.clone()),
            EditTag::Append(span) => {
                out.push(tok.clone());
                out.extend(span.iter().cloned());
            }
        }
    }
    Ok(out)
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TagVocab {
    tags: Vec<EditTag>,
    index: HashMap<EditTag, usize>,
    /// Occurrence counts of every tag seen while building, keyed by rendering.
    pub counts: BTreeMap<String, usize>,
}

#[derive(Serialize, Deserialize)]
struct VocabFile {
    tags: Vec<String>,
    #[serde(with = "hash::hex_u64")]
    hash: u64,
    #[serde(default)]
    counts: BTreeMap<String, usize>,
}

impl TagVocab {
    /// Builds a vocabulary from an explicit tag list. `$KEEP` must be first and
    /// `$DELETE` present.
    pub fn from_tags(tags: Vec<EditTag>) -> Result<Self> {
        if tags.first() != Some(&EditTag::Keep) {
            return Err(Error::InvalidConfig("tag vocabulary must start with $KEEP".into()));
        }
        if !tags.contains(&EditTag::Delete) {
            return Err(Error::InvalidConfig("tag vocabulary must contain $DELETE".into()));
        }
        let mut index = HashMap::with_capacity(tags.len());
        for (i, t) in tags.iter().enumerate() {
            if index.insert(t.clone(), i).is_some() {
                return Err(Error::InvalidConfig(format!("duplicate tag {t}")));
            }
        }
        Ok(TagVocab {
            tags,
            index,
            counts: BTreeMap::new(),
        })
    }

    pub fn len(&self) -> usize {
        self.tags.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tags.is_empty()
    }

    pub fn tags(&self) -> &[EditTag] {
        &self.tags
    }

    pub fn tag(&self, idx: usize) -> &EditTag {
        &self.tags[idx]
    }

    pub fn index_of(&self, tag: &EditTag) -> Option<usize> {
        self.index.get(tag).copied()
    }

    pub fn rendered(&self) -> Vec<String> {
        self.tags.iter().map(EditTag::render).collect()
    }

    /// FNV-1a over the rendered tags joined by `'\n'`.
    pub fn hash(&self) -> u64 {
        fnv1a_lines(&self.rendered())
    }

    pub fn to_json(&self) -> Result<String> {
        let file = VocabFile {
            tags: self.rendered(),
            hash: self.hash(),
            counts: self.counts.clone(),
        };
        Ok(serde_json::to_string_pretty(&file)? + "\n")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: VocabFile = serde_json::from_str(text)?;
        let tags = file.tags.iter().map(|s| EditTag::parse(s)).collect::<Result<Vec<_>>>()?;
        let mut vocab = TagVocab::from_tags(tags)?;
        if vocab.hash() != file.hash {
            return Err(Error::HashMismatch {
                what: "tag vocabulary",
                expected: file.hash,
                found: vocab.hash(),
            });
        }
        vocab.counts = file.counts;
        Ok(vocab)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.to_json()?).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        TagVocab::from_json(&text)
    }
}

/// Keeps `$KEEP` and `$DELETE`, then fills up to `cap` entries with the most
/// frequent token-dependent tags. Frequency ties go to the lexicographically
/// smaller rendering.
pub fn build_vocab(corpus: &Corpus, cap: usize, a_max: usize) -> Result<TagVocab> {
    if cap < 2 {
        return Err(Error::InvalidConfig(format!("tag vocabulary cap must be >= 2, got {cap}")));
    }
    let mut counts: HashMap<EditTag, usize> = HashMap::new();
    for sample in &corpus.samples {
        for tag in align_to_tags(sample, a_max)?.tags {
            *counts.entry(tag).or_default() += 1;
        }
    }
    let mut ranked: Vec<(String, usize, EditTag)> = counts
        .iter()
        .filter(|(t, _)| t.is_token_dependent())
        .map(|(t, &c)| (t.render(), c, t.clone()))
        .collect();
    ranked.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));

    let mut tags = vec![EditTag::Keep, EditTag::Delete];
    tags.extend(ranked.into_iter().take(cap - 2).map(|(_, _, t)| t));
    let mut vocab = TagVocab::from_tags(tags)?;
    vocab.counts = counts.into_iter().map(|(t, c)| (t.render(), c)).collect();
    Ok(vocab)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OovPolicy {
    DropSample,
    MapKeep,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct EncodedSample {
    pub id: usize,
    pub source: Vec<Token>,
    pub tags: Vec<usize>,
}

impl EncodedSample {
    /// Number of tag slots (`source.len() + 1`).
    pub fn positions(&self) -> usize {
        self.tags.len()
    }
}

/// Tag-converted corpus, bound to the vocabulary it was encoded with.
#[derive(Clone, Debug, PartialEq)]
pub struct EncodedCorpus {
    pub vocab_hash: u64,
    pub vocab_size: usize,
    pub samples: Vec<EncodedSample>,
}

#[derive(Serialize, Deserialize)]
struct EncodedHeader {
    #[serde(with = "hash::hex_u64")]
    vocab_hash: u64,
    vocab_size: usize,
    samples: usize,
}

impl EncodedCorpus {
    pub fn total_positions(&self) -> usize {
        self.samples.iter().map(EncodedSample::positions).sum()
    }

    pub fn check_vocab(&self, vocab: &TagVocab) -> Result<()> {
        if self.vocab_hash != vocab.hash() {
            return Err(Error::HashMismatch {
                what: "tag vocabulary (encoded corpus)",
                expected: vocab.hash(),
                found: self.vocab_hash,
            });
        }
        Ok(())
    }

    pub fn to_jsonl(&self) -> Result<String> {
        jsonl::to_string(&self.header(), &self.samples)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        jsonl::write(path.as_ref(), &self.header(), &self.samples)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let (header, samples): (EncodedHeader, Vec<EncodedSample>) = jsonl::read(path)?;
        if header.samples != samples.len() {
            return Err(Error::LengthMismatch {
                what: format!("{}: sample count", path.display()),
                expected: header.samples,
                found: samples.len(),
            });
        }
        if let Some(s) = samples
            .iter()
            .find(|s| s.tags.len() != s.source.len() + 1 || s.tags.iter().any(|&t| t >= header.vocab_size))
        {
            return Err(Error::InvalidConfig(format!(
                "{}: sample {} has inconsistent tag indices",
                path.display(),
                s.id
            )));
        }
        Ok(EncodedCorpus {
            vocab_hash: header.vocab_hash,
            vocab_size: header.vocab_size,
            samples,
        })
    }

    fn header(&self) -> EncodedHeader {
        EncodedHeader {
            vocab_hash: self.vocab_hash,
            vocab_size: self.vocab_size,
            samples: self.samples.len(),
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize)]
pub struct EncodeReport {
    pub encoded: usize,
    /// Samples removed because they held an out-of-vocabulary tag.
    pub dropped: usize,
    /// Out-of-vocabulary tags rewritten to `$KEEP`.
    pub mapped_to_keep: usize,
    /// Samples removed because an inserted run exceeded the append limit.
    pub unalignable: usize,
}

pub fn encode_corpus(
    corpus: &Corpus,
    vocab: &TagVocab,
    policy: OovPolicy,
    a_max: usize,
) -> (EncodedCorpus, EncodeReport) {
    let mut report = EncodeReport::default();
    let mut samples = Vec::with_capacity(corpus.len());
    'samples: for sample in &corpus.samples {
        let seq = match align_to_tags(sample, a_max) {
            Ok(seq) => seq,
            Err(_) => {
                report.unalignable += 1;
                continue;
            }
        };
        let mut indices = Vec::with_capacity(seq.tags.len());
        let mut mapped = 0;
        for tag in &seq.tags {
            match vocab.index_of(tag) {
                Some(i) => indices.push(i),
                None => match policy {
                    OovPolicy::DropSample => {
                        report.dropped += 1;
                        continue 'samples;
                    }
                    OovPolicy::MapKeep => {
                        mapped += 1;
                        indices.push(0);
                    }
                },
            }
        }
        report.mapped_to_keep += mapped;
        report.encoded += 1;
        samples.push(EncodedSample {
            id: sample.id,
            source: sample.source.clone(),
            tags: indices,
        });
    }
    (
        EncodedCorpus {
            vocab_hash: vocab.hash(),
            vocab_size: vocab.len(),
            samples,
        },
        report,
    )
}

pub fn decode_tags(vocab: &TagVocab, indices: &[usize]) -> Vec<EditTag> {
    indices.iter().map(|&i| vocab.tag(i).clone()).collect()
}

//! Teacher statistics per target position.
//!
//! A teacher is only ever seen through two numbers per position: the
//! probability it assigns to the annotated token or tag, and the entropy of
//! its output distribution normalized by `ln |vocab|`. Full distributions are
//! carried only when distillation needs them.

use std::path::Path;
use std::thread;

use serde::{Deserialize, Serialize};

use crate::align::EncodedCorpus;
use crate::corpus::Corpus;
use crate::hash;
use crate::model::{softmax, Tagger};
use crate::{jsonl, Error, Result};

/// Tolerance for distribution normalization and stored-vs-recomputed checks.
pub const DIST_TOLERANCE: f64 = 1e-6;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PositionStat {
    pub p_gold: f64,
    pub entropy_norm: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TeacherSignal {
    pub sample_id: usize,
    pub vocab_size: usize,
    pub positions: Vec<PositionStat>,
    pub full_dist: Option<Vec<Vec<f64>>>,
}

impl TeacherSignal {
    /// Builds a signal from full distributions and gold indices.
    pub fn from_distributions(sample_id: usize, dists: Vec<Vec<f64>>, gold: &[usize], keep_dist: bool) -> Result<Self> {
        if dists.len() != gold.len() {
            return Err(Error::LengthMismatch {
                what: format!("sample {sample_id}: distributions vs gold positions"),
                expected: gold.len(),
                found: dists.len(),
            });
        }
        let vocab_size = dists.first().map_or(0, Vec::len);
        let positions = dists
            .iter()
            .zip(gold)
            .map(|(d, &g)| {
                Ok(PositionStat {
                    p_gold: d.get(g).copied().ok_or_else(|| {
                        Error::InvalidDistribution(format!("gold index {g} outside vocabulary of {vocab_size}"))
                    })?,
                    entropy_norm: entropy_norm(d, vocab_size)?,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(TeacherSignal {
            sample_id,
            vocab_size,
            positions,
            full_dist: keep_dist.then_some(dists),
        })
    }
}

/// Shannon entropy of `dist` divided by `ln(vocab_size)`, with `0 ln 0 = 0`.
pub fn entropy_norm(dist: &[f64], vocab_size: usize) -> Result<f64> {
    if vocab_size < 2 {
        return Err(Error::InvalidDistribution(format!(
            "vocabulary size must be >= 2 to normalize entropy, got {vocab_size}"
        )));
    }
    if dist.len() != vocab_size {
        return Err(Error::InvalidDistribution(format!(
            "length {} does not match vocabulary size {vocab_size}",
            dist.len()
        )));
    }
    if let Some(p) = dist.iter().find(|p| !p.is_finite() || **p < 0.0) {
        return Err(Error::InvalidDistribution(format!("entry {p} is negative or non-finite")));
    }
    let total: f64 = dist.iter().sum();
    if (total - 1.0).abs() > DIST_TOLERANCE {
        return Err(Error::InvalidDistribution(format!("entries sum to {total}, not 1")));
    }
    let h: f64 = dist.iter().filter(|&&p| p > 0.0).map(|&p| -p * p.ln()).sum();
    // a one-hot distribution sums to -0.0
    Ok(if h > 0.0 { (h / (vocab_size as f64).ln()).min(1.0) } else { 0.0 })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Manner {
    Seq2edit,
    Seq2seq,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SignalHeader {
    pub vocab_size: usize,
    #[serde(with = "hash::hex_u64")]
    pub vocab_hash: u64,
    pub manner: Manner,
    pub has_full_dist: bool,
    /// Seq2Seq only: whether each sample carries an end-of-sequence position
    /// after its `n` target tokens.
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub includes_eos: bool,
}

#[derive(Serialize, Deserialize)]
struct SignalRecord {
    id: usize,
    p_gold: Vec<f64>,
    entropy_norm: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    dist: Option<Vec<Vec<f64>>>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SignalFile {
    pub header: SignalHeader,
    pub signals: Vec<TeacherSignal>,
}

impl SignalFile {
    pub fn to_jsonl(&self) -> Result<String> {
        jsonl::to_string(&self.header, &self.records())
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        jsonl::write(path.as_ref(), &self.header, &self.records())
    }

    pub fn parse(text: &str, context: &str) -> Result<Self> {
        let (header, records): (SignalHeader, Vec<SignalRecord>) = jsonl::parse(text, context)?;
        Self::from_records(header, records)
    }

    /// Reads a signal file. Structural problems (ragged arrays) are errors;
    /// value ranges are left to [`validate_signals`].
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let (header, records): (SignalHeader, Vec<SignalRecord>) = jsonl::read(path.as_ref())?;
        Self::from_records(header, records)
    }

    fn from_records(header: SignalHeader, records: Vec<SignalRecord>) -> Result<Self> {
        let signals = records
            .into_iter()
            .map(|r| {
                if r.p_gold.len() != r.entropy_norm.len() {
                    return Err(Error::LengthMismatch {
                        what: format!("sample {}: entropy_norm entries vs p_gold entries", r.id),
                        expected: r.p_gold.len(),
                        found: r.entropy_norm.len(),
                    });
                }
                let positions = r
                    .p_gold
                    .iter()
                    .zip(&r.entropy_norm)
                    .map(|(&p_gold, &entropy_norm)| PositionStat { p_gold, entropy_norm })
                    .collect();
                Ok(TeacherSignal {
                    sample_id: r.id,
                    vocab_size: header.vocab_size,
                    positions,
                    full_dist: r.dist,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(SignalFile { header, signals })
    }

    fn records(&self) -> Vec<SignalRecord> {
        self.signals
            .iter()
            .map(|s| SignalRecord {
                id: s.sample_id,
                p_gold: s.positions.iter().map(|p| p.p_gold).collect(),
                entropy_norm: s.positions.iter().map(|p| p.entropy_norm).collect(),
                dist: s.full_dist.clone(),
            })
            .collect()
    }
}

pub fn load_signals(path: impl AsRef<Path>) -> Result<SignalFile> {
    SignalFile::load(path)
}

#[derive(Clone, Debug, PartialEq)]
pub struct Violation {
    pub sample_id: Option<usize>,
    pub position: Option<usize>,
    pub message: String,
}

impl std::fmt::Display for Violation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match (self.sample_id, self.position) {
            (Some(s), Some(p)) => write!(f, "sample {s}, position {p}: {}", self.message),
            (Some(s), None) => write!(f, "sample {s}: {}", self.message),
            _ => f.write_str(&self.message),
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct ValidationReport {
    pub samples: usize,
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_ok(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn into_result(self) -> Result<()> {
        match self.violations.first() {
            None => Ok(()),
            Some(v) => Err(Error::Validation {
                count: self.violations.len(),
                first: v.to_string(),
            }),
        }
    }

    fn push(&mut self, sample_id: Option<usize>, position: Option<usize>, message: impl Into<String>) {
        self.violations.push(Violation {
            sample_id,
            position,
            message: message.into(),
        });
    }
}

/// Checks a Seq2Edit signal file against the tag-converted corpus it claims
/// to describe: vocabulary, ids in corpus order, `m + 1` positions per sample,
/// value ranges, and consistency of any full distributions.
pub fn validate_signals(file: &SignalFile, corpus: &EncodedCorpus) -> ValidationReport {
    let mut report = ValidationReport::default();
    if file.header.manner != Manner::Seq2edit {
        report.push(None, None, "expected a seq2edit signal file");
    }
    if file.header.vocab_hash != corpus.vocab_hash {
        report.push(
            None,
            None,
            format!(
                "vocabulary hash {} does not match corpus {}",
                hash::to_hex(file.header.vocab_hash),
                hash::to_hex(corpus.vocab_hash)
            ),
        );
    }
    if file.header.vocab_size != corpus.vocab_size {
        report.push(
            None,
            None,
            format!("vocabulary size {} does not match corpus {}", file.header.vocab_size, corpus.vocab_size),
        );
    }
    let expected: Vec<(usize, usize)> = corpus.samples.iter().map(|s| (s.id, s.positions())).collect();
    check_samples(file, &expected, &mut report);
    report
}

/// Checks a Seq2Seq signal file (produced outside this crate) against the
/// parallel corpus: `n` positions per sample, plus one when the header
/// declares an end-of-sequence position.
pub fn validate_seq2seq_signals(file: &SignalFile, corpus: &Corpus) -> ValidationReport {
    let mut report = ValidationReport::default();
    if file.header.manner != Manner::Seq2seq {
        report.push(None, None, "expected a seq2seq signal file");
    }
    let extra = usize::from(file.header.includes_eos);
    let expected: Vec<(usize, usize)> = corpus.samples.iter().map(|s| (s.id, s.target.len() + extra)).collect();
    check_samples(file, &expected, &mut report);
    report
}

fn check_samples(file: &SignalFile, expected: &[(usize, usize)], report: &mut ValidationReport) {
    let header = &file.header;
    report.samples = file.signals.len();
    if header.vocab_size < 2 {
        report.push(None, None, format!("vocab_size must be >= 2, got {}", header.vocab_size));
    }
    if file.signals.len() != expected.len() {
        report.push(
            None,
            None,
            format!("{} signal records for {} corpus samples", file.signals.len(), expected.len()),
        );
    }
    for (sig, &(id, count)) in file.signals.iter().zip(expected) {
        let sid = Some(sig.sample_id);
        if sig.sample_id != id {
            report.push(sid, None, format!("expected sample id {id} at this record"));
            continue;
        }
        if sig.positions.len() != count {
            report.push(sid, None, format!("expected {count} positions, found {}", sig.positions.len()));
        }
        for (i, p) in sig.positions.iter().enumerate() {
            if !(0.0..=1.0).contains(&p.p_gold) {
                report.push(sid, Some(i), format!("p_gold {} outside [0, 1]", p.p_gold));
            }
            if !(0.0..=1.0).contains(&p.entropy_norm) {
                report.push(sid, Some(i), format!("entropy_norm {} outside [0, 1]", p.entropy_norm));
            }
        }
        match (&sig.full_dist, header.has_full_dist) {
            (None, true) => report.push(sid, None, "header promises full distributions but none present"),
            (Some(_), false) => report.push(sid, None, "unexpected full distribution"),
            (Some(dists), true) => check_dists(sig, dists, header.vocab_size, report),
            (None, false) => {}
        }
    }
}

fn check_dists(sig: &TeacherSignal, dists: &[Vec<f64>], vocab_size: usize, report: &mut ValidationReport) {
    let sid = Some(sig.sample_id);
    if dists.len() != sig.positions.len() {
        report.push(sid, None, format!("{} distributions for {} positions", dists.len(), sig.positions.len()));
        return;
    }
    for (i, (d, p)) in dists.iter().zip(&sig.positions).enumerate() {
        match entropy_norm(d, vocab_size) {
            Err(e) => report.push(sid, Some(i), e.to_string()),
            Ok(h) => {
                if (h - p.entropy_norm).abs() > DIST_TOLERANCE {
                    report.push(sid, Some(i), format!("entropy_norm {} disagrees with distribution ({h})", p.entropy_norm));
                }
                // p_gold must be one of the distribution's entries.
                if !d.iter().any(|&q| (q - p.p_gold).abs() <= DIST_TOLERANCE) {
                    report.push(sid, Some(i), format!("p_gold {} matches no entry of the distribution", p.p_gold));
                }
            }
        }
    }
}

/// Runs `tagger` over every sample of `corpus` and records, per slot, the
/// softmax probability of the gold tag and the normalized entropy. Samples
/// are split into `workers` contiguous chunks; output stays in corpus order.
pub fn generate_signals(tagger: &Tagger, corpus: &EncodedCorpus, keep_dist: bool, workers: usize) -> Result<SignalFile> {
    tagger.check_tag_vocab(corpus.vocab_hash)?;
    if tagger.config.tag_vocab_size != corpus.vocab_size {
        return Err(Error::LengthMismatch {
            what: "tag vocabulary size (model vs corpus)".into(),
            expected: corpus.vocab_size,
            found: tagger.config.tag_vocab_size,
        });
    }
    let one = |s: &crate::align::EncodedSample| {
        let ids = tagger.encode(&s.source);
        let dists = (0..=ids.len()).map(|p| softmax(&tagger.forward(&ids, p).logits)).collect();
        TeacherSignal::from_distributions(s.id, dists, &s.tags, keep_dist)
    };
    let workers = workers.max(1);
    let signals = if workers == 1 || corpus.samples.len() < 2 * workers {
        corpus.samples.iter().map(one).collect::<Result<Vec<_>>>()?
    } else {
        let chunk = corpus.samples.len().div_ceil(workers);
        thread::scope(|scope| {
            let handles: Vec<_> = corpus
                .samples
                .chunks(chunk)
                .map(|c| scope.spawn(move || c.iter().map(one).collect::<Result<Vec<_>>>()))
                .collect();
            let mut out = Vec::with_capacity(corpus.samples.len());
            for h in handles {
                out.extend(h.join().expect("signal worker panicked")?);
            }
            Ok::<_, Error>(out)
        })?
    };
    Ok(SignalFile {
        header: SignalHeader {
            vocab_size: corpus.vocab_size,
            vocab_hash: corpus.vocab_hash,
            manner: Manner::Seq2edit,
            has_full_dist: keep_dist,
            includes_eos: false,
        },
        signals,
    })
}

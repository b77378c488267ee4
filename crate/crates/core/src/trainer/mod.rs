//! Training loops: vanilla, weighted (token, sentence or both) and
//! distillation.
//!
//! Every batch objective is normalized by the number of tag slots in the
//! batch. The weighted loss is
//!
//! ```text
//! L = -(1/N) * sum_samples w_sent * sum_slots w_token * ln p(gold tag)
//! ```
//!
//! and with all weights equal to one it reduces to the vanilla loss.

mod ablation;
mod adam;

use std::fmt;
use std::str::FromStr;
use std::thread;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::align::{EncodedCorpus, EncodedSample};
use crate::model::{log_softmax, softmax, ModelParams, Tagger};
use crate::signal::TeacherSignal;
use crate::weights::{SampleWeights, WeightConfig};
use crate::{Error, Result};

pub use ablation::{evaluate, run_ablation, AblationConfig, AblationData, AblationReport, AblationRow, RunResult};
pub use adam::Adam;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum WeightingMode {
    None,
    Token,
    Sent,
    Mixed,
    Kd,
}

impl WeightingMode {
    pub const ALL: [WeightingMode; 5] = [
        WeightingMode::None,
        WeightingMode::Token,
        WeightingMode::Sent,
        WeightingMode::Mixed,
        WeightingMode::Kd,
    ];

    /// Weight switches for this mode. `None` for modes that train without
    /// per-sample weights.
    pub fn weight_config(self, epsilon: f64) -> Option<WeightConfig> {
        let (use_token, use_sent) = match self {
            WeightingMode::Token => (true, false),
            WeightingMode::Sent => (false, true),
            WeightingMode::Mixed => (true, true),
            WeightingMode::None | WeightingMode::Kd => return None,
        };
        Some(WeightConfig {
            epsilon,
            use_token,
            use_sent,
        })
    }

    pub fn as_str(self) -> &'static str {
        match self {
            WeightingMode::None => "none",
            WeightingMode::Token => "token",
            WeightingMode::Sent => "sent",
            WeightingMode::Mixed => "mixed",
            WeightingMode::Kd => "kd",
        }
    }
}

impl fmt::Display for WeightingMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for WeightingMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        WeightingMode::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| Error::InvalidConfig(format!("unknown weighting mode {s:?}")))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub adam_eps: f64,
    pub seed: u64,
    pub mode: WeightingMode,
    pub kd_alpha: f64,
    pub workers: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 20,
            batch_size: 32,
            lr: 3e-3,
            beta1: 0.9,
            beta2: 0.98,
            adam_eps: 1e-8,
            seed: 0,
            mode: WeightingMode::None,
            kd_alpha: 0.5,
            workers: 1,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 || self.batch_size == 0 {
            return Err(Error::InvalidConfig("epochs and batch size must be >= 1".into()));
        }
        if self.lr.is_nan() || self.lr <= 0.0 {
            return Err(Error::InvalidConfig(format!("learning rate must be positive, got {}", self.lr)));
        }
        if !(0.0..=1.0).contains(&self.kd_alpha) {
            return Err(Error::InvalidConfig(format!("kd_alpha must lie in [0, 1], got {}", self.kd_alpha)));
        }
        Ok(())
    }
}

/// Per-sample training target for one batch objective.
#[derive(Clone, Copy)]
enum Target<'a> {
    Vanilla,
    Weighted(&'a SampleWeights),
    Distill {
        teacher: &'a [Vec<f64>],
        alpha: f64,
    },
}

fn check_weights(sample: &EncodedSample, w: &SampleWeights) -> Result<()> {
    if w.sample_id != sample.id || w.w_token.len() != sample.positions() {
        return Err(Error::LengthMismatch {
            what: format!("weights for sample {} (id {})", sample.id, w.sample_id),
            expected: sample.positions(),
            found: w.w_token.len(),
        });
    }
    Ok(())
}

/// Loss terms of one sample, scaled by `inv_n`, with gradients accumulated
/// into `grads`. Returns the unscaled sum of the sample's terms.
fn sample_terms(tagger: &Tagger, sample: &EncodedSample, target: Target<'_>, inv_n: f64, grads: &mut ModelParams) -> f64 {
    let ids = tagger.encode(&sample.source);
    let mut total = 0.0;
    for (pos, &gold) in sample.tags.iter().enumerate() {
        let cache = tagger.forward(&ids, pos);
        let probs = softmax(&cache.logits);
        let logp = log_softmax(&cache.logits);
        let mut dlogits = probs;
        match target {
            Target::Vanilla => {
                total -= logp[gold];
                dlogits[gold] -= 1.0;
                for d in &mut dlogits {
                    *d *= inv_n;
                }
            }
            Target::Weighted(w) => {
                let f = w.w_sent * w.w_token[pos];
                total -= f * logp[gold];
                dlogits[gold] -= 1.0;
                for d in &mut dlogits {
                    *d = f * *d * inv_n;
                }
            }
            Target::Distill { teacher, alpha } => {
                let q = &teacher[pos];
                let soft: f64 = q.iter().zip(&logp).map(|(qk, lk)| qk * lk).sum();
                total -= alpha * logp[gold] + (1.0 - alpha) * soft;
                // d/dz [alpha * CE(onehot, p) + (1 - alpha) * CE(q, p)] = p - alpha onehot - (1 - alpha) q
                for (d, qk) in dlogits.iter_mut().zip(q) {
                    *d -= (1.0 - alpha) * qk;
                }
                dlogits[gold] -= alpha;
                for d in &mut dlogits {
                    *d *= inv_n;
                }
            }
        }
        tagger.backward(&cache, &dlogits, grads);
    }
    total
}

fn batch_objective(
    tagger: &Tagger,
    batch: &[&EncodedSample],
    targets: &[Target<'_>],
    workers: usize,
    grads: &mut ModelParams,
) -> f64 {
    let n: usize = batch.iter().map(|s| s.positions()).sum();
    if n == 0 {
        return 0.0;
    }
    let inv_n = 1.0 / n as f64;
    let workers = workers.max(1).min(batch.len());
    let total = if workers <= 1 {
        batch
            .iter()
            .zip(targets)
            .map(|(s, &t)| sample_terms(tagger, s, t, inv_n, grads))
            .sum::<f64>()
    } else {
        // Per-worker buffers, merged in chunk order.
        let chunk = batch.len().div_ceil(workers);
        let parts: Vec<(f64, ModelParams)> = thread::scope(|scope| {
            let handles: Vec<_> = batch
                .chunks(chunk)
                .zip(targets.chunks(chunk))
                .map(|(bs, ts)| {
                    scope.spawn(move || {
                        let mut local = ModelParams::zeros(&tagger.config);
                        let sum = bs
                            .iter()
                            .zip(ts)
                            .map(|(s, &t)| sample_terms(tagger, s, t, inv_n, &mut local))
                            .sum::<f64>();
                        (sum, local)
                    })
                })
                .collect();
            handles.into_iter().map(|h| h.join().expect("gradient worker panicked")).collect()
        });
        let mut total = 0.0;
        for (sum, local) in parts {
            total += sum;
            grads.add_assign(&local);
        }
        total
    };
    total * inv_n
}

/// Mean negative log-likelihood of the gold tags; gradients are added to
/// `grads`.
pub fn loss_vanilla(tagger: &Tagger, batch: &[&EncodedSample], grads: &mut ModelParams) -> f64 {
    let targets = vec![Target::Vanilla; batch.len()];
    batch_objective(tagger, batch, &targets, 1, grads)
}

/// Weighted negative log-likelihood, each slot's term scaled by
/// `w_sent * w_token`.
pub fn loss_weighted(
    tagger: &Tagger,
    batch: &[&EncodedSample],
    weights: &[&SampleWeights],
    grads: &mut ModelParams,
) -> Result<f64> {
    let targets = weighted_targets(batch, weights)?;
    Ok(batch_objective(tagger, batch, &targets, 1, grads))
}

/// `alpha * NLL(gold) + (1 - alpha) * CE(teacher, student)` per slot, at
/// temperature 1.
pub fn loss_kd(
    tagger: &Tagger,
    batch: &[&EncodedSample],
    signals: &[&TeacherSignal],
    alpha: f64,
    grads: &mut ModelParams,
) -> Result<f64> {
    let targets = kd_targets(batch, signals, alpha)?;
    Ok(batch_objective(tagger, batch, &targets, 1, grads))
}

fn weighted_targets<'a>(batch: &[&EncodedSample], weights: &[&'a SampleWeights]) -> Result<Vec<Target<'a>>> {
    if weights.len() != batch.len() {
        return Err(Error::LengthMismatch {
            what: "weights per batch".into(),
            expected: batch.len(),
            found: weights.len(),
        });
    }
    batch
        .iter()
        .zip(weights)
        .map(|(s, w)| {
            check_weights(s, w)?;
            Ok(Target::Weighted(w))
        })
        .collect()
}

fn kd_targets<'a>(batch: &[&EncodedSample], signals: &[&'a TeacherSignal], alpha: f64) -> Result<Vec<Target<'a>>> {
    if signals.len() != batch.len() {
        return Err(Error::LengthMismatch {
            what: "teacher signals per batch".into(),
            expected: batch.len(),
            found: signals.len(),
        });
    }
    batch
        .iter()
        .zip(signals)
        .map(|(s, sig)| {
            let dists = sig
                .full_dist
                .as_ref()
                .ok_or(Error::MissingFullDist { sample_id: sig.sample_id })?;
            if sig.sample_id != s.id || dists.len() != s.positions() {
                return Err(Error::LengthMismatch {
                    what: format!("teacher distributions for sample {}", s.id),
                    expected: s.positions(),
                    found: dists.len(),
                });
            }
            Ok(Target::Distill { teacher: dists, alpha })
        })
        .collect()
}

/// Mean gold-tag NLL over a whole corpus, without gradients.
pub fn corpus_loss(tagger: &Tagger, corpus: &EncodedCorpus) -> f64 {
    let mut total = 0.0;
    let mut n = 0usize;
    for s in &corpus.samples {
        let ids = tagger.encode(&s.source);
        for (pos, &gold) in s.tags.iter().enumerate() {
            total -= log_softmax(&tagger.forward(&ids, pos).logits)[gold];
            n += 1;
        }
    }
    if n == 0 {
        0.0
    } else {
        total / n as f64
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub dev_loss: f64,
    pub mode: WeightingMode,
    pub seed: u64,
}

#[derive(Clone, Debug)]
pub struct TrainOutcome {
    /// Parameters from the epoch with the lowest dev loss.
    pub best: Tagger,
    pub best_epoch: usize,
    pub best_dev_loss: f64,
    pub log: Vec<EpochRecord>,
}

/// Training inputs beyond the encoded corpora: per-sample weights for the
/// weighted modes, full teacher distributions for distillation. Both are
/// aligned with `train.samples`.
#[derive(Clone, Copy, Default)]
pub struct Supervision<'a> {
    pub weights: Option<&'a [SampleWeights]>,
    pub signals: Option<&'a [TeacherSignal]>,
}

pub fn train(
    mut tagger: Tagger,
    train_set: &EncodedCorpus,
    dev_set: &EncodedCorpus,
    sup: Supervision<'_>,
    cfg: &TrainConfig,
) -> Result<TrainOutcome> {
    cfg.validate()?;
    train_set.check_vocab_hash(tagger.tag_vocab_hash)?;
    dev_set.check_vocab_hash(tagger.tag_vocab_hash)?;

    let targets: Vec<Target<'_>> = match cfg.mode {
        WeightingMode::None => vec![Target::Vanilla; train_set.samples.len()],
        WeightingMode::Kd => {
            let signals = sup
                .signals
                .ok_or_else(|| Error::InvalidConfig("distillation needs teacher signals".into()))?;
            let batch: Vec<&EncodedSample> = train_set.samples.iter().collect();
            let sigs: Vec<&TeacherSignal> = signals.iter().collect();
            kd_targets(&batch, &sigs, cfg.kd_alpha)?
        }
        _ => {
            let weights = sup
                .weights
                .ok_or_else(|| Error::InvalidConfig(format!("mode {} needs sample weights", cfg.mode)))?;
            let batch: Vec<&EncodedSample> = train_set.samples.iter().collect();
            let ws: Vec<&SampleWeights> = weights.iter().collect();
            weighted_targets(&batch, &ws)?
        }
    };

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut adam = Adam::new(&tagger.config, cfg.lr, cfg.beta1, cfg.beta2, cfg.adam_eps);
    let mut order: Vec<usize> = (0..train_set.samples.len()).collect();
    let mut log = Vec::with_capacity(cfg.epochs);
    let mut best: Option<(usize, f64, ModelParams)> = None;

    for epoch in 1..=cfg.epochs {
        order.shuffle(&mut rng);
        let mut epoch_loss = 0.0;
        let mut epoch_positions = 0usize;
        for (step, chunk) in order.chunks(cfg.batch_size).enumerate() {
            let batch: Vec<&EncodedSample> = chunk.iter().map(|&i| &train_set.samples[i]).collect();
            let batch_targets: Vec<Target<'_>> = chunk.iter().map(|&i| targets[i]).collect();
            tagger.zero_grads();
            let mut grads = std::mem::replace(&mut tagger.grads, ModelParams::zeros(&tagger.config));
            let loss = batch_objective(&tagger, &batch, &batch_targets, cfg.workers, &mut grads);
            tagger.grads = grads;
            if !loss.is_finite() {
                return Err(Error::NonFiniteLoss { epoch, step });
            }
            let n: usize = batch.iter().map(|s| s.positions()).sum();
            epoch_loss += loss * n as f64;
            epoch_positions += n;
            adam.step(&mut tagger.params, &tagger.grads);
        }
        let dev_loss = corpus_loss(&tagger, dev_set);
        if !dev_loss.is_finite() {
            return Err(Error::NonFiniteLoss { epoch, step: usize::MAX });
        }
        log.push(EpochRecord {
            epoch,
            train_loss: epoch_loss / epoch_positions.max(1) as f64,
            dev_loss,
            mode: cfg.mode,
            seed: cfg.seed,
        });
        if best.as_ref().is_none_or(|(_, l, _)| dev_loss < *l) {
            best = Some((epoch, dev_loss, tagger.params.clone()));
        }
    }

    let (best_epoch, best_dev_loss, params) = best.expect("at least one epoch");
    tagger.params = params;
    tagger.zero_grads();
    Ok(TrainOutcome {
        best: tagger,
        best_epoch,
        best_dev_loss,
        log,
    })
}

impl EncodedCorpus {
    pub fn check_vocab_hash(&self, hash: u64) -> Result<()> {
        if self.vocab_hash != hash {
            return Err(Error::HashMismatch {
                what: "tag vocabulary (corpus vs model)",
                expected: hash,
                found: self.vocab_hash,
            });
        }
        Ok(())
    }
}

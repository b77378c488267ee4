use std::fmt::Write as _;
use std::thread;

use serde::{Deserialize, Serialize};

use super::{train, Supervision, TrainConfig, WeightingMode};
use crate::align::{apply_tags, EncodedCorpus, TagVocab};
use crate::corpus::{GoldEditSet, Token};
use crate::eval::{score, ScoreReport, DEFAULT_BETA};
use crate::model::{ModelConfig, Tagger, TokenVocab};
use crate::signal::TeacherSignal;
use crate::weights::{compute_weights, default_epsilon};
use crate::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AblationConfig {
    pub embed_dim: usize,
    pub window: usize,
    pub hidden_dim: usize,
    pub train: TrainConfig,
    pub epsilon: f64,
    pub seeds: Vec<u64>,
    pub modes: Vec<WeightingMode>,
    /// Runs trained concurrently; each run is itself deterministic.
    pub parallel_runs: usize,
}

impl Default for AblationConfig {
    fn default() -> Self {
        AblationConfig {
            embed_dim: 32,
            window: 2,
            hidden_dim: 64,
            train: TrainConfig::default(),
            epsilon: default_epsilon(),
            seeds: vec![0],
            modes: WeightingMode::ALL.to_vec(),
            parallel_runs: 1,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunResult {
    pub mode: WeightingMode,
    pub seed: u64,
    pub best_epoch: usize,
    pub best_dev_loss: f64,
    pub score: ScoreReport,
}

/// Mean and sample standard deviation over seeds (sd is 0 for one seed).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AblationRow {
    pub mode: WeightingMode,
    pub runs: usize,
    pub precision: (f64, f64),
    pub recall: (f64, f64),
    pub f_beta: (f64, f64),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AblationReport {
    pub rows: Vec<AblationRow>,
    pub runs: Vec<RunResult>,
}

fn mean_sd(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

impl AblationReport {
    pub fn row(&self, mode: WeightingMode) -> Option<&AblationRow> {
        self.rows.iter().find(|r| r.mode == mode)
    }

    pub fn run(&self, mode: WeightingMode, seed: u64) -> Option<&RunResult> {
        self.runs.iter().find(|r| r.mode == mode && r.seed == seed)
    }

    pub fn to_tsv(&self) -> String {
        let mut s = String::from("mode\truns\tp_mean\tp_sd\tr_mean\tr_sd\tf05_mean\tf05_sd\n");
        for r in &self.rows {
            let _ = writeln!(
                s,
                "{}\t{}\t{:.4}\t{:.4}\t{:.4}\t{:.4}\t{:.4}\t{:.4}",
                r.mode, r.runs, r.precision.0, r.precision.1, r.recall.0, r.recall.1, r.f_beta.0, r.f_beta.1
            );
        }
        s
    }

    pub fn to_text(&self) -> String {
        let mut s = format!("{:<6} {:>4}  {:>15}  {:>15}  {:>15}\n", "mode", "runs", "P", "R", "F0.5");
        for r in &self.rows {
            let cell = |(m, sd): (f64, f64)| format!("{:.4} ± {:.4}", m, sd);
            let _ = writeln!(
                s,
                "{:<6} {:>4}  {:>15}  {:>15}  {:>15}",
                r.mode.as_str(),
                r.runs,
                cell(r.precision),
                cell(r.recall),
                cell(r.f_beta)
            );
        }
        s
    }
}

/// Corrects each dev sentence with the tagger and scores it against gold.
pub fn evaluate(tagger: &Tagger, vocab: &TagVocab, dev: &EncodedCorpus, gold: &[GoldEditSet]) -> Result<ScoreReport> {
    let sources: Vec<Vec<Token>> = dev.samples.iter().map(|s| s.source.clone()).collect();
    let hyps = dev
        .samples
        .iter()
        .map(|s| {
            let tags = tagger.predict_tags(&s.source, vocab, s.id)?;
            apply_tags(&s.source, &tags.tags)
        })
        .collect::<Result<Vec<_>>>()?;
    score(&sources, &hyps, gold, DEFAULT_BETA)
}

/// Inputs shared by every run of an ablation.
#[derive(Clone, Copy)]
pub struct AblationData<'a> {
    pub vocab: &'a TagVocab,
    pub train: &'a EncodedCorpus,
    pub dev: &'a EncodedCorpus,
    /// Gold edits aligned with `dev.samples`.
    pub dev_gold: &'a [GoldEditSet],
    /// Teacher signals aligned with `train.samples`.
    pub signals: &'a [TeacherSignal],
}

fn run_one(data: AblationData<'_>, cfg: &AblationConfig, mode: WeightingMode, seed: u64) -> Result<RunResult> {
    let tokens = TokenVocab::build(data.train.samples.iter().map(|s| &s.source));
    let model_cfg = ModelConfig {
        embed_dim: cfg.embed_dim,
        window: cfg.window,
        hidden_dim: cfg.hidden_dim,
        token_vocab_size: tokens.len(),
        tag_vocab_size: data.vocab.len(),
        seed,
    };
    let tagger = Tagger::new(model_cfg, tokens, data.vocab.hash())?;
    let weights = match mode.weight_config(cfg.epsilon) {
        Some(wc) => Some(compute_weights(data.signals, &wc)?),
        None => None,
    };
    let sup = Supervision {
        weights: weights.as_deref(),
        signals: Some(data.signals),
    };
    let train_cfg = TrainConfig {
        seed,
        mode,
        ..cfg.train.clone()
    };
    let out = train(tagger, data.train, data.dev, sup, &train_cfg)?;
    let score = evaluate(&out.best, data.vocab, data.dev, data.dev_gold)?;
    Ok(RunResult {
        mode,
        seed,
        best_epoch: out.best_epoch,
        best_dev_loss: out.best_dev_loss,
        score,
    })
}

/// Trains every mode under every seed and summarizes dev scores per mode.
pub fn run_ablation(data: AblationData<'_>, cfg: &AblationConfig) -> Result<AblationReport> {
    if cfg.seeds.is_empty() || cfg.modes.is_empty() {
        return Err(Error::InvalidConfig("ablation needs at least one seed and one mode".into()));
    }
    if data.dev_gold.len() != data.dev.samples.len() {
        return Err(Error::LengthMismatch {
            what: "dev gold edit sets".into(),
            expected: data.dev.samples.len(),
            found: data.dev_gold.len(),
        });
    }
    let jobs: Vec<(WeightingMode, u64)> = cfg
        .modes
        .iter()
        .flat_map(|&m| cfg.seeds.iter().map(move |&s| (m, s)))
        .collect();
    let parallel = cfg.parallel_runs.max(1);
    let mut runs = Vec::with_capacity(jobs.len());
    for group in jobs.chunks(parallel) {
        let results: Vec<Result<RunResult>> = thread::scope(|scope| {
            let handles: Vec<_> = group
                .iter()
                .map(|&(m, s)| scope.spawn(move || run_one(data, cfg, m, s)))
                .collect();
            handles.into_iter().map(|h| h.join().expect("ablation run panicked")).collect()
        });
        for r in results {
            runs.push(r?);
        }
    }
    let rows = cfg
        .modes
        .iter()
        .map(|&mode| {
            let mine: Vec<&RunResult> = runs.iter().filter(|r| r.mode == mode).collect();
            let col = |f: fn(&ScoreReport) -> f64| mean_sd(&mine.iter().map(|r| f(&r.score)).collect::<Vec<_>>());
            AblationRow {
                mode,
                runs: mine.len(),
                precision: col(|s| s.precision),
                recall: col(|s| s.recall),
                f_beta: col(|s| s.f_beta),
            }
        })
        .collect();
    Ok(AblationReport { rows, runs })
}

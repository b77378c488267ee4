mod manifest;

use std::collections::HashMap;
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use gecweight::align::{
    apply_tags, build_vocab, decode_tags, encode_corpus, EncodedCorpus, OovPolicy, TagVocab, DEFAULT_A_MAX,
};
use gecweight::corpus::{load_m2, load_parallel, to_m2, GoldEditSet, Token};
use gecweight::eval::{gold_from_corpus, score, DEFAULT_BETA};
use gecweight::hash::{fnv1a, to_hex};
use gecweight::model::{ModelConfig, Tagger, TokenVocab};
use gecweight::signal::{generate_signals, validate_signals, SignalFile, TeacherSignal};
use gecweight::synth::{generate, SynthConfig};
use gecweight::trainer::{self, AblationConfig, AblationData, Supervision, TrainConfig, WeightingMode};
use gecweight::weights::{compute_weights, default_epsilon, SampleWeights, WeightConfig, WeightsFile, WeightsHeader};
use serde::Serialize;

use manifest::RunManifest;

#[derive(Parser)]
#[command(name = "gecweight", version, about = "Mixed-grained weighted training for edit-tagging GEC")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic parallel corpus with rule-based errors.
    Synth(SynthArgs),
    /// Build the edit-tag vocabulary from a parallel corpus.
    BuildVocab(BuildVocabArgs),
    /// Convert a parallel corpus into tag-index sequences.
    TagConvert(TagConvertArgs),
    /// Train a teacher tagger with the plain likelihood loss.
    TrainTeacher(TrainArgs),
    /// Record teacher statistics for every slot of an encoded corpus.
    GenSignals(GenSignalsArgs),
    /// Check a signal file against an encoded corpus.
    ValidateSignals(ValidateSignalsArgs),
    /// Turn teacher signals into token and sentence weights.
    ComputeWeights(ComputeWeightsArgs),
    /// Train a tagger, optionally weighted or distilled.
    Train(TrainArgs),
    /// Correct sentences with a trained tagger.
    Predict(PredictArgs),
    /// Edit-level precision, recall and F-beta against gold edits.
    Score(ScoreArgs),
    /// Train every weighting mode under several seeds and tabulate scores.
    Ablate(AblateArgs),
    /// Show one sample's tags and weights.
    Inspect(InspectArgs),
}

#[derive(Args, Serialize)]
struct SynthArgs {
    #[arg(long)]
    out: PathBuf,
    /// Also write the gold edits in M2 format.
    #[arg(long)]
    m2: Option<PathBuf>,
    #[arg(long, default_value_t = 2000)]
    samples: usize,
    /// Share of samples with a corrupted annotation.
    #[arg(long, default_value_t = 0.2)]
    noise: f64,
    /// Share of samples with an error-free source.
    #[arg(long, default_value_t = 0.15)]
    clean_rate: f64,
    #[arg(long, default_value_t = 2)]
    max_errors: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args, Serialize)]
struct BuildVocabArgs {
    #[arg(long)]
    train: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Maximum vocabulary size, KEEP and DELETE included.
    #[arg(long, default_value_t = 5000)]
    cap: usize,
    /// Longest insertion run expressible by one APPEND tag.
    #[arg(long, default_value_t = DEFAULT_A_MAX)]
    a_max: usize,
}

#[derive(Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
enum Oov {
    Drop,
    Keep,
}

impl From<Oov> for OovPolicy {
    fn from(o: Oov) -> Self {
        match o {
            Oov::Drop => OovPolicy::DropSample,
            Oov::Keep => OovPolicy::MapKeep,
        }
    }
}

#[derive(Args, Serialize)]
struct TagConvertArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    vocab: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// What to do with samples holding a tag outside the vocabulary.
    #[arg(long, value_enum, default_value_t = Oov::Drop)]
    oov: Oov,
    #[arg(long, default_value_t = DEFAULT_A_MAX)]
    a_max: usize,
}

#[derive(Args, Serialize, Clone)]
struct ModelArgs {
    #[arg(long, default_value_t = 32)]
    embed_dim: usize,
    #[arg(long, default_value_t = 64)]
    hidden_dim: usize,
    /// Context tokens on each side of a slot.
    #[arg(long, default_value_t = 2)]
    window: usize,
}

#[derive(Args, Serialize, Clone)]
struct OptimArgs {
    #[arg(long, default_value_t = 20)]
    epochs: usize,
    #[arg(long, default_value_t = 3e-3)]
    lr: f64,
    #[arg(long, default_value_t = 32)]
    batch: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 1)]
    workers: usize,
    /// Weight of the gold-tag term in the distillation loss.
    #[arg(long, default_value_t = 0.5)]
    kd_alpha: f64,
}

impl OptimArgs {
    fn config(&self, mode: WeightingMode) -> TrainConfig {
        TrainConfig {
            epochs: self.epochs,
            batch_size: self.batch,
            lr: self.lr,
            seed: self.seed,
            mode,
            kd_alpha: self.kd_alpha,
            workers: self.workers,
            ..TrainConfig::default()
        }
    }
}

#[derive(Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
enum Weighting {
    None,
    Token,
    Sent,
    Mixed,
    Kd,
}

impl From<Weighting> for WeightingMode {
    fn from(w: Weighting) -> Self {
        match w {
            Weighting::None => WeightingMode::None,
            Weighting::Token => WeightingMode::Token,
            Weighting::Sent => WeightingMode::Sent,
            Weighting::Mixed => WeightingMode::Mixed,
            Weighting::Kd => WeightingMode::Kd,
        }
    }
}

#[derive(Args, Serialize)]
struct TrainArgs {
    #[arg(long)]
    train: PathBuf,
    #[arg(long)]
    dev: PathBuf,
    #[arg(long)]
    vocab: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Per-epoch log; defaults to `<out>.log.jsonl`.
    #[arg(long)]
    log: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Weighting::None)]
    weighting: Weighting,
    /// Weights file for the token, sent and mixed modes.
    #[arg(long)]
    weights: Option<PathBuf>,
    /// Signal file with full distributions for the kd mode.
    #[arg(long)]
    signals: Option<PathBuf>,
    #[command(flatten)]
    model: ModelArgs,
    #[command(flatten)]
    optim: OptimArgs,
}

#[derive(Args, Serialize)]
struct GenSignalsArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    corpus: PathBuf,
    #[arg(long)]
    vocab: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Keep full distributions (needed for distillation).
    #[arg(long)]
    full_dist: bool,
    #[arg(long, default_value_t = 1)]
    workers: usize,
}

#[derive(Args, Serialize)]
struct ValidateSignalsArgs {
    #[arg(long)]
    signals: PathBuf,
    #[arg(long)]
    corpus: PathBuf,
}

#[derive(Args, Serialize)]
struct ComputeWeightsArgs {
    #[arg(long)]
    signals: PathBuf,
    #[arg(long)]
    vocab: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Encoded corpus to validate the signals against.
    #[arg(long)]
    corpus: Option<PathBuf>,
    #[arg(long, default_value_t = default_epsilon())]
    epsilon: f64,
    /// Set every token weight to 1.
    #[arg(long)]
    no_token: bool,
    /// Set every sentence weight to 1.
    #[arg(long)]
    no_sent: bool,
}

#[derive(Args, Serialize)]
struct PredictArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    vocab: PathBuf,
    /// One sentence per line; for tab-separated lines the first column is used.
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Serialize)]
struct ScoreArgs {
    /// Gold edits: an M2 file, or a parallel TSV whose edits are extracted.
    #[arg(long)]
    gold: PathBuf,
    /// One corrected sentence per line, aligned with the gold sentences.
    #[arg(long)]
    hyp: PathBuf,
    #[arg(long, default_value_t = DEFAULT_BETA)]
    beta: f64,
    /// Write the report as TSV here (a manifest goes next to it).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Serialize)]
struct AblateArgs {
    #[arg(long)]
    train: PathBuf,
    #[arg(long)]
    dev: PathBuf,
    /// Gold edits for the dev sentences (M2 or parallel TSV), indexed by sample id.
    #[arg(long)]
    gold: PathBuf,
    #[arg(long)]
    vocab: PathBuf,
    /// Teacher signals for the training corpus, with full distributions.
    #[arg(long)]
    signals: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, value_delimiter = ',', default_value = "0,1,2,3,4")]
    seeds: Vec<u64>,
    #[arg(long, value_enum, value_delimiter = ',', default_value = "none,token,sent,mixed,kd")]
    modes: Vec<Weighting>,
    #[arg(long, default_value_t = default_epsilon())]
    epsilon: f64,
    #[command(flatten)]
    model: ModelArgs,
    #[command(flatten)]
    optim: OptimArgs,
}

#[derive(Args, Serialize)]
struct InspectArgs {
    #[arg(long)]
    corpus: PathBuf,
    #[arg(long)]
    vocab: PathBuf,
    #[arg(long)]
    weights: PathBuf,
    /// Sample id to show.
    #[arg(long)]
    sample: usize,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn run(cmd: Command) -> Result<()> {
    match cmd {
        Command::Synth(a) => synth(a),
        Command::BuildVocab(a) => build_vocab_cmd(a),
        Command::TagConvert(a) => tag_convert(a),
        Command::TrainTeacher(a) => train_cmd("train-teacher", a, true),
        Command::GenSignals(a) => gen_signals(a),
        Command::ValidateSignals(a) => validate_signals_cmd(a),
        Command::ComputeWeights(a) => compute_weights_cmd(a),
        Command::Train(a) => train_cmd("train", a, false),
        Command::Predict(a) => predict(a),
        Command::Score(a) => score_cmd(a),
        Command::Ablate(a) => ablate(a),
        Command::Inspect(a) => inspect(a),
    }
}

fn load_vocab(path: &Path) -> Result<TagVocab> {
    TagVocab::load(path).with_context(|| format!("loading tag vocabulary {}", path.display()))
}

fn load_encoded(path: &Path, vocab: &TagVocab) -> Result<EncodedCorpus> {
    let corpus = EncodedCorpus::load(path).with_context(|| format!("loading encoded corpus {}", path.display()))?;
    corpus.check_vocab(vocab).with_context(|| {
        format!(
            "{} was encoded with a different tag vocabulary; rerun tag-convert with this vocabulary",
            path.display()
        )
    })?;
    Ok(corpus)
}

fn load_signals(path: &Path, vocab: &TagVocab) -> Result<SignalFile> {
    let file = SignalFile::load(path).with_context(|| format!("loading signals {}", path.display()))?;
    if file.header.vocab_hash != vocab.hash() || file.header.vocab_size != vocab.len() {
        bail!(
            "{} was produced for tag vocabulary {} ({} tags), expected {} ({} tags)",
            path.display(),
            to_hex(file.header.vocab_hash),
            file.header.vocab_size,
            to_hex(vocab.hash()),
            vocab.len()
        );
    }
    Ok(file)
}

fn load_gold(path: &Path) -> Result<Vec<GoldEditSet>> {
    if path.extension().is_some_and(|e| e == "m2") {
        Ok(load_m2(path)?)
    } else {
        Ok(gold_from_corpus(&load_parallel(path)?))
    }
}

fn read_lines(path: &Path) -> Result<Vec<Vec<Token>>> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    Ok(text
        .lines()
        .map(|l| {
            let first = l.split('\t').next().unwrap_or("");
            first.split_whitespace().map(str::to_owned).collect()
        })
        .collect())
}

/// Reorders `items` to follow `corpus.samples` by sample id.
fn align_by_id<T: Clone>(corpus: &EncodedCorpus, items: &[T], id: impl Fn(&T) -> usize, what: &str) -> Result<Vec<T>> {
    let by_id: HashMap<usize, &T> = items.iter().map(|x| (id(x), x)).collect();
    corpus
        .samples
        .iter()
        .map(|s| {
            by_id
                .get(&s.id)
                .map(|x| (*x).clone())
                .with_context(|| format!("{what} has no entry for sample {}", s.id))
        })
        .collect()
}

fn synth(a: SynthArgs) -> Result<()> {
    let cfg = SynthConfig {
        samples: a.samples,
        clean_rate: a.clean_rate,
        noise_rate: a.noise,
        max_errors: a.max_errors,
        seed: a.seed,
    };
    let name = a.out.file_stem().map_or("synth".into(), |s| s.to_string_lossy().into_owned());
    let s = generate(&cfg, &name)?;
    s.corpus.write_tsv(&a.out)?;
    let mut m = RunManifest::new("synth", &a, Some(a.seed))?;
    m.output(&a.out);
    if let Some(p) = &a.m2 {
        fs::write(p, to_m2(&gold_from_corpus(&s.corpus))).with_context(|| format!("writing {}", p.display()))?;
        m.output(p);
    }
    m.write_next_to(&a.out)?;
    println!(
        "wrote {} samples ({} with corrupted annotations) to {}",
        s.corpus.len(),
        s.corrupted.len(),
        a.out.display()
    );
    Ok(())
}

fn build_vocab_cmd(a: BuildVocabArgs) -> Result<()> {
    let corpus = load_parallel(&a.train)?;
    let vocab = build_vocab(&corpus, a.cap, a.a_max)?;
    vocab.save(&a.out)?;
    let mut m = RunManifest::new("build-vocab", &a, None)?;
    m.input(&a.train)?;
    m.output(&a.out);
    m.write_next_to(&a.out)?;
    println!("{} tags, hash {}", vocab.len(), to_hex(vocab.hash()));
    Ok(())
}

fn tag_convert(a: TagConvertArgs) -> Result<()> {
    let vocab = load_vocab(&a.vocab)?;
    let corpus = load_parallel(&a.input)?;
    let (enc, report) = encode_corpus(&corpus, &vocab, a.oov.into(), a.a_max);
    enc.save(&a.out)?;
    let mut m = RunManifest::new("tag-convert", &a, None)?;
    m.inputs([&a.input, &a.vocab])?;
    m.output(&a.out);
    m.config["report"] = serde_json::to_value(&report)?;
    m.write_next_to(&a.out)?;
    println!(
        "encoded {}, dropped {} (out-of-vocabulary), {} tags mapped to $KEEP, {} unalignable",
        report.encoded, report.dropped, report.mapped_to_keep, report.unalignable
    );
    Ok(())
}

fn new_tagger(train: &EncodedCorpus, vocab: &TagVocab, model: &ModelArgs, seed: u64) -> Result<Tagger> {
    let tokens = TokenVocab::build(train.samples.iter().map(|s| &s.source));
    let cfg = ModelConfig {
        embed_dim: model.embed_dim,
        window: model.window,
        hidden_dim: model.hidden_dim,
        token_vocab_size: tokens.len(),
        tag_vocab_size: vocab.len(),
        seed,
    };
    Ok(Tagger::new(cfg, tokens, vocab.hash())?)
}

fn weights_match_mode(header: &WeightsHeader, mode: WeightingMode) -> bool {
    match mode.weight_config(header.epsilon) {
        Some(c) => c.use_token == header.use_token && c.use_sent == header.use_sent,
        None => true,
    }
}

fn train_cmd(name: &str, a: TrainArgs, teacher: bool) -> Result<()> {
    let mode: WeightingMode = if teacher { WeightingMode::None } else { a.weighting.into() };
    let vocab = load_vocab(&a.vocab)?;
    let train_set = load_encoded(&a.train, &vocab)?;
    let dev_set = load_encoded(&a.dev, &vocab)?;
    let mut m = RunManifest::new(name, &a, Some(a.optim.seed))?;
    m.inputs([&a.train, &a.dev, &a.vocab])?;

    let weights = match (mode.weight_config(0.5), &a.weights) {
        (Some(_), Some(path)) => {
            let wf = WeightsFile::load(path)?;
            if wf.header.vocab_hash != vocab.hash() {
                bail!("{} was computed for a different tag vocabulary", path.display());
            }
            if !weights_match_mode(&wf.header, mode) {
                bail!(
                    "{} has use_token={} use_sent={}, which does not match --weighting {mode}; rerun compute-weights with matching --no-token/--no-sent",
                    path.display(),
                    wf.header.use_token,
                    wf.header.use_sent
                );
            }
            m.input(path)?;
            Some(align_by_id(&train_set, &wf.weights, |w: &SampleWeights| w.sample_id, "weights file")?)
        }
        (Some(_), None) => bail!("--weighting {mode} needs --weights"),
        (None, _) => None,
    };
    let signals = match (mode, &a.signals) {
        (WeightingMode::Kd, Some(path)) => {
            let sf = load_signals(path, &vocab)?;
            if !sf.header.has_full_dist {
                bail!("{} has no full distributions; rerun gen-signals with --full-dist", path.display());
            }
            m.input(path)?;
            Some(align_by_id(&train_set, &sf.signals, |s: &TeacherSignal| s.sample_id, "signal file")?)
        }
        (WeightingMode::Kd, None) => bail!("--weighting kd needs --signals"),
        _ => None,
    };

    let tagger = new_tagger(&train_set, &vocab, &a.model, a.optim.seed)?;
    let cfg = a.optim.config(mode);
    let sup = Supervision {
        weights: weights.as_deref(),
        signals: signals.as_deref(),
    };
    let out = trainer::train(tagger, &train_set, &dev_set, sup, &cfg)?;
    out.best.save(&a.out)?;
    let log_path = a.log.clone().unwrap_or_else(|| suffixed(&a.out, ".log.jsonl"));
    let mut log = String::new();
    for r in &out.log {
        log.push_str(&serde_json::to_string(r)?);
        log.push('\n');
        eprintln!(
            "epoch {:>3}  train {:.5}  dev {:.5}",
            r.epoch, r.train_loss, r.dev_loss
        );
    }
    fs::write(&log_path, log).with_context(|| format!("writing {}", log_path.display()))?;
    m.output(&a.out);
    m.output(&log_path);
    m.write_next_to(&a.out)?;
    println!(
        "best epoch {} (dev loss {:.5}), saved {}",
        out.best_epoch,
        out.best_dev_loss,
        a.out.display()
    );
    Ok(())
}

fn suffixed(path: &Path, suffix: &str) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

fn load_model(path: &Path, vocab: &TagVocab) -> Result<Tagger> {
    let t = Tagger::load(path).with_context(|| format!("loading checkpoint {}", path.display()))?;
    t.check_tag_vocab(vocab.hash())
        .with_context(|| format!("{} was trained with a different tag vocabulary", path.display()))?;
    Ok(t)
}

fn gen_signals(a: GenSignalsArgs) -> Result<()> {
    let vocab = load_vocab(&a.vocab)?;
    let corpus = load_encoded(&a.corpus, &vocab)?;
    let tagger = load_model(&a.model, &vocab)?;
    let file = generate_signals(&tagger, &corpus, a.full_dist, a.workers)?;
    validate_signals(&file, &corpus).into_result()?;
    file.save(&a.out)?;
    let mut m = RunManifest::new("gen-signals", &a, None)?;
    m.inputs([&a.model, &a.corpus, &a.vocab])?;
    m.output(&a.out);
    m.write_next_to(&a.out)?;
    println!("{} samples, {} positions", file.signals.len(), corpus.total_positions());
    Ok(())
}

fn validate_signals_cmd(a: ValidateSignalsArgs) -> Result<()> {
    let file = SignalFile::load(&a.signals)?;
    let corpus = EncodedCorpus::load(&a.corpus)?;
    let report = validate_signals(&file, &corpus);
    for v in report.violations.iter().take(20) {
        println!("{v}");
    }
    if report.is_ok() {
        println!("ok: {} samples", report.samples);
        Ok(())
    } else {
        bail!("{} violations", report.violations.len())
    }
}

fn compute_weights_cmd(a: ComputeWeightsArgs) -> Result<()> {
    let vocab = load_vocab(&a.vocab)?;
    let file = load_signals(&a.signals, &vocab)?;
    let mut m = RunManifest::new("compute-weights", &a, None)?;
    m.inputs([&a.signals, &a.vocab])?;
    if let Some(c) = &a.corpus {
        let corpus = load_encoded(c, &vocab)?;
        validate_signals(&file, &corpus).into_result()?;
        m.input(c)?;
    }
    let cfg = WeightConfig {
        epsilon: a.epsilon,
        use_token: !a.no_token,
        use_sent: !a.no_sent,
    };
    let weights = compute_weights(&file.signals, &cfg)?;
    let bytes = fs::read(&a.signals)?;
    let out = WeightsFile {
        header: WeightsHeader {
            epsilon: cfg.epsilon,
            use_token: cfg.use_token,
            use_sent: cfg.use_sent,
            signal_file_hash: fnv1a(&bytes),
            vocab_hash: vocab.hash(),
        },
        weights,
    };
    out.save(&a.out)?;
    m.output(&a.out);
    m.write_next_to(&a.out)?;
    let mean = out.weights.iter().map(|w| w.w_sent).sum::<f64>() / out.weights.len().max(1) as f64;
    println!("{} samples, mean w_sent {:.4}", out.weights.len(), mean);
    Ok(())
}

fn predict(a: PredictArgs) -> Result<()> {
    let vocab = load_vocab(&a.vocab)?;
    let tagger = load_model(&a.model, &vocab)?;
    let mut out = String::new();
    for (i, src) in read_lines(&a.input)?.iter().enumerate() {
        let tags = tagger.predict_tags(src, &vocab, i)?;
        out.push_str(&apply_tags(src, &tags.tags)?.join(" "));
        out.push('\n');
    }
    fs::write(&a.out, out).with_context(|| format!("writing {}", a.out.display()))?;
    let mut m = RunManifest::new("predict", &a, None)?;
    m.inputs([&a.model, &a.vocab, &a.input])?;
    m.output(&a.out);
    m.write_next_to(&a.out)?;
    Ok(())
}

fn score_cmd(a: ScoreArgs) -> Result<()> {
    let gold = load_gold(&a.gold)?;
    let hyps = read_lines(&a.hyp)?;
    if hyps.len() != gold.len() {
        bail!("{} has {} lines but the gold file has {} sentences", a.hyp.display(), hyps.len(), gold.len());
    }
    let sources: Vec<Vec<Token>> = gold.iter().map(|g| g.source.clone()).collect();
    let report = score(&sources, &hyps, &gold, a.beta)?;
    print!("{}", report.to_text());
    if let Some(p) = &a.out {
        fs::write(p, report.to_tsv()).with_context(|| format!("writing {}", p.display()))?;
        let mut m = RunManifest::new("score", &a, None)?;
        m.inputs([&a.gold, &a.hyp])?;
        m.output(p);
        m.write_next_to(p)?;
    }
    Ok(())
}

fn ablate(a: AblateArgs) -> Result<()> {
    let vocab = load_vocab(&a.vocab)?;
    let train_set = load_encoded(&a.train, &vocab)?;
    let dev_set = load_encoded(&a.dev, &vocab)?;
    let gold_all = load_gold(&a.gold)?;
    let dev_gold = dev_set
        .samples
        .iter()
        .map(|s| {
            gold_all
                .get(s.id)
                .cloned()
                .with_context(|| format!("gold file has no sentence {}", s.id))
        })
        .collect::<Result<Vec<_>>>()?;
    let sf = load_signals(&a.signals, &vocab)?;
    let signals = align_by_id(&train_set, &sf.signals, |s: &TeacherSignal| s.sample_id, "signal file")?;
    let modes: Vec<WeightingMode> = a.modes.iter().map(|&w| w.into()).collect();
    if modes.contains(&WeightingMode::Kd) && !sf.header.has_full_dist {
        bail!("the kd mode needs signals generated with --full-dist");
    }
    let cfg = AblationConfig {
        embed_dim: a.model.embed_dim,
        window: a.model.window,
        hidden_dim: a.model.hidden_dim,
        train: a.optim.config(WeightingMode::None),
        epsilon: a.epsilon,
        seeds: a.seeds.clone(),
        modes,
        parallel_runs: a.optim.workers,
    };
    let data = AblationData {
        vocab: &vocab,
        train: &train_set,
        dev: &dev_set,
        dev_gold: &dev_gold,
        signals: &signals,
    };
    let report = trainer::run_ablation(data, &cfg)?;
    fs::write(&a.out, report.to_tsv()).with_context(|| format!("writing {}", a.out.display()))?;
    let runs_path = suffixed(&a.out, ".runs.jsonl");
    let mut runs = String::new();
    for r in &report.runs {
        runs.push_str(&serde_json::to_string(r)?);
        runs.push('\n');
    }
    fs::write(&runs_path, runs)?;
    let mut m = RunManifest::new("ablate", &a, None)?;
    m.inputs([&a.train, &a.dev, &a.gold, &a.vocab, &a.signals])?;
    m.output(&a.out);
    m.output(&runs_path);
    m.write_next_to(&a.out)?;
    print!("{}", report.to_text());
    Ok(())
}

fn inspect(a: InspectArgs) -> Result<()> {
    let vocab = load_vocab(&a.vocab)?;
    let corpus = load_encoded(&a.corpus, &vocab)?;
    let wf = WeightsFile::load(&a.weights)?;
    if wf.header.vocab_hash != vocab.hash() {
        bail!("{} was computed for a different tag vocabulary", a.weights.display());
    }
    let sample = corpus
        .samples
        .iter()
        .find(|s| s.id == a.sample)
        .with_context(|| format!("sample {} is not in {}", a.sample, a.corpus.display()))?;
    let w = wf
        .weights
        .iter()
        .find(|w| w.sample_id == a.sample)
        .with_context(|| format!("sample {} has no weights in {}", a.sample, a.weights.display()))?;
    if w.w_token.len() != sample.positions() {
        bail!("weights for sample {} cover {} slots, expected {}", a.sample, w.w_token.len(), sample.positions());
    }
    let tags = decode_tags(&vocab, &sample.tags);
    let target = apply_tags(&sample.source, &tags)?;
    let mut out = std::io::stdout().lock();
    writeln!(out, "sample  {}", sample.id)?;
    writeln!(out, "source  {}", sample.source.join(" "))?;
    writeln!(out, "target  {}", target.join(" "))?;
    writeln!(out, "w_sent  {:.6}", w.w_sent)?;
    writeln!(out)?;
    let rendered: Vec<String> = tags.iter().map(|t| t.render()).collect();
    let tok_w = sample.source.iter().map(String::len).max().unwrap_or(0).max(5);
    let tag_w = rendered.iter().map(String::len).max().unwrap_or(0).max(3);
    writeln!(out, "{:>4}  {:<tok_w$}  {:<tag_w$}  {:>8}", "slot", "token", "tag", "w_token")?;
    for (i, (tag, wt)) in rendered.iter().zip(&w.w_token).enumerate() {
        let tok = if i == 0 { "<s>" } else { sample.source[i - 1].as_str() };
        writeln!(out, "{:>4}  {:<tok_w$}  {:<tag_w$}  {:>8.4}", i, tok, tag, wt)?;
    }
    Ok(())
}

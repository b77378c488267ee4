//! Window-MLP sequence tagger.
//!
//! Slot `p` is represented by concatenating the embeddings of the `2w + 1`
//! tokens centred on it (the centre of slot 0 is the `START` token, positions
//! outside the sentence use `PAD`), followed by one `tanh` hidden layer and a
//! linear output over the tag vocabulary.

use std::collections::HashMap;
use std::fs;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::align::{EditTag, TagSequence, TagVocab};
use crate::corpus::Token;
use crate::hash::fnv1a_lines;
use crate::{Error, Result};

pub const PAD: &str = "<pad>";
pub const UNK: &str = "<unk>";
pub const START: &str = "<s>";

pub const PAD_ID: usize = 0;
pub const UNK_ID: usize = 1;
pub const START_ID: usize = 2;

const INIT_RANGE: f64 = 0.1;

/// Input vocabulary: the three specials followed by the sorted distinct
/// source tokens of the training corpus.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TokenVocab {
    tokens: Vec<String>,
    index: HashMap<String, usize>,
}

impl TokenVocab {
    pub fn build<'a, I, S>(sources: I) -> Self
    where
        I: IntoIterator<Item = &'a S>,
        S: AsRef<[Token]> + 'a + ?Sized,
    {
        let mut words: Vec<String> = sources
            .into_iter()
            .flat_map(|s| s.as_ref().iter().cloned())
            .collect();
        words.sort();
        words.dedup();
        let tokens = [PAD, UNK, START]
            .into_iter()
            .map(str::to_owned)
            .chain(words.into_iter().filter(|w| w != PAD && w != UNK && w != START))
            .collect();
        TokenVocab::from_tokens(tokens)
    }

    fn from_tokens(tokens: Vec<String>) -> Self {
        let index = tokens.iter().enumerate().map(|(i, t)| (t.clone(), i)).collect();
        TokenVocab { tokens, index }
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn id(&self, token: &str) -> usize {
        self.index.get(token).copied().unwrap_or(UNK_ID)
    }

    pub fn encode(&self, tokens: &[Token]) -> Vec<usize> {
        tokens.iter().map(|t| self.id(t)).collect()
    }

    pub fn hash(&self) -> u64 {
        fnv1a_lines(&self.tokens)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub embed_dim: usize,
    pub window: usize,
    pub hidden_dim: usize,
    pub token_vocab_size: usize,
    pub tag_vocab_size: usize,
    pub seed: u64,
}

impl ModelConfig {
    pub fn new(token_vocab_size: usize, tag_vocab_size: usize) -> Self {
        ModelConfig {
            embed_dim: 32,
            window: 2,
            hidden_dim: 64,
            token_vocab_size,
            tag_vocab_size,
            seed: 0,
        }
    }

    pub fn context_len(&self) -> usize {
        2 * self.window + 1
    }

    pub fn input_dim(&self) -> usize {
        self.context_len() * self.embed_dim
    }

    pub fn validate(&self) -> Result<()> {
        if self.embed_dim == 0 || self.hidden_dim == 0 || self.token_vocab_size < 3 {
            return Err(Error::InvalidConfig("model dimensions must be positive".into()));
        }
        if self.tag_vocab_size < 2 {
            return Err(Error::InvalidConfig("tag vocabulary must have at least 2 entries".into()));
        }
        Ok(())
    }
}

/// Row-major matrix (a vector when `cols == 1`).
#[derive(Clone, Debug, PartialEq)]
pub struct Tensor {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

impl Tensor {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Tensor {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    #[inline]
    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    #[inline]
    pub fn row_mut(&mut self, r: usize) -> &mut [f64] {
        &mut self.data[r * self.cols..(r + 1) * self.cols]
    }
}

/// All learnable parameters. The same layout doubles as a gradient buffer.
#[derive(Clone, Debug, PartialEq)]
pub struct ModelParams {
    pub embed: Tensor,
    pub hidden_w: Tensor,
    pub hidden_b: Tensor,
    pub out_w: Tensor,
    pub out_b: Tensor,
}

impl ModelParams {
    pub fn zeros(cfg: &ModelConfig) -> Self {
        ModelParams {
            embed: Tensor::zeros(cfg.token_vocab_size, cfg.embed_dim),
            hidden_w: Tensor::zeros(cfg.hidden_dim, cfg.input_dim()),
            hidden_b: Tensor::zeros(cfg.hidden_dim, 1),
            out_w: Tensor::zeros(cfg.tag_vocab_size, cfg.hidden_dim),
            out_b: Tensor::zeros(cfg.tag_vocab_size, 1),
        }
    }

    /// Uniform in `[-0.1, 0.1]`, drawn tensor by tensor in declaration order.
    pub fn init(cfg: &ModelConfig) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        let mut p = ModelParams::zeros(cfg);
        for t in p.tensors_mut() {
            for x in &mut t.data {
                *x = rng.random_range(-INIT_RANGE..=INIT_RANGE);
            }
        }
        p
    }

    pub fn tensors(&self) -> [&Tensor; 5] {
        [&self.embed, &self.hidden_w, &self.hidden_b, &self.out_w, &self.out_b]
    }

    pub fn tensors_mut(&mut self) -> [&mut Tensor; 5] {
        [
            &mut self.embed,
            &mut self.hidden_w,
            &mut self.hidden_b,
            &mut self.out_w,
            &mut self.out_b,
        ]
    }

    pub fn num_params(&self) -> usize {
        self.tensors().iter().map(|t| t.data.len()).sum()
    }

    pub fn fill(&mut self, value: f64) {
        for t in self.tensors_mut() {
            t.data.fill(value);
        }
    }

    /// Adds `other` element-wise.
    pub fn add_assign(&mut self, other: &ModelParams) {
        for (a, b) in self.tensors_mut().into_iter().zip(other.tensors()) {
            for (x, y) in a.data.iter_mut().zip(&b.data) {
                *x += y;
            }
        }
    }

    pub fn is_finite(&self) -> bool {
        self.tensors().iter().all(|t| t.data.iter().all(|x| x.is_finite()))
    }

    pub fn max_abs_diff(&self, other: &ModelParams) -> f64 {
        self.tensors()
            .iter()
            .zip(other.tensors())
            .flat_map(|(a, b)| a.data.iter().zip(&b.data).map(|(x, y)| (x - y).abs()))
            .fold(0.0, f64::max)
    }
}

/// Activations of one forward pass, kept for the backward pass.
#[derive(Clone, Debug)]
pub struct ForwardCache {
    pub context: Vec<usize>,
    pub input: Vec<f64>,
    pub hidden: Vec<f64>,
    pub logits: Vec<f64>,
}

pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|&z| (z - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / sum).collect()
}

pub fn log_softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lse = max + logits.iter().map(|&z| (z - max).exp()).sum::<f64>().ln();
    logits.iter().map(|&z| z - lse).collect()
}

/// Index of the largest value; ties go to the lowest index.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    best
}

/// A tagger bound to its input vocabulary and the tag vocabulary it predicts.
#[derive(Clone, Debug, PartialEq)]
pub struct Tagger {
    pub config: ModelConfig,
    pub tokens: TokenVocab,
    pub tag_vocab_hash: u64,
    pub params: ModelParams,
    pub grads: ModelParams,
}

impl Tagger {
    pub fn new(config: ModelConfig, tokens: TokenVocab, tag_vocab_hash: u64) -> Result<Self> {
        Self::with_params(config, tokens, tag_vocab_hash, ModelParams::init(&config))
    }

    pub fn zeros(config: ModelConfig, tokens: TokenVocab, tag_vocab_hash: u64) -> Result<Self> {
        Self::with_params(config, tokens, tag_vocab_hash, ModelParams::zeros(&config))
    }

    fn with_params(config: ModelConfig, tokens: TokenVocab, tag_vocab_hash: u64, params: ModelParams) -> Result<Self> {
        config.validate()?;
        if tokens.len() != config.token_vocab_size {
            return Err(Error::LengthMismatch {
                what: "token vocabulary size".into(),
                expected: config.token_vocab_size,
                found: tokens.len(),
            });
        }
        let grads = ModelParams::zeros(&config);
        Ok(Tagger {
            config,
            tokens,
            tag_vocab_hash,
            params,
            grads,
        })
    }

    pub fn check_tag_vocab(&self, hash: u64) -> Result<()> {
        if self.tag_vocab_hash != hash {
            return Err(Error::HashMismatch {
                what: "tag vocabulary (model)",
                expected: hash,
                found: self.tag_vocab_hash,
            });
        }
        Ok(())
    }

    pub fn encode(&self, source: &[Token]) -> Vec<usize> {
        self.tokens.encode(source)
    }

    /// Token ids in the window around slot `position` of a sentence given as
    /// token ids.
    pub fn context(&self, ids: &[usize], position: usize) -> Vec<usize> {
        let w = self.config.window as isize;
        let m = ids.len() as isize;
        let p = position as isize;
        (-w..=w)
            .map(|d| {
                let k = p + d;
                if d == 0 && position == 0 {
                    START_ID
                } else if k >= 1 && k <= m {
                    ids[(k - 1) as usize]
                } else {
                    PAD_ID
                }
            })
            .collect()
    }

    pub fn forward(&self, ids: &[usize], position: usize) -> ForwardCache {
        debug_assert!(position <= ids.len());
        let cfg = &self.config;
        let p = &self.params;
        let context = self.context(ids, position);
        let mut input = Vec::with_capacity(cfg.input_dim());
        for &id in &context {
            input.extend_from_slice(p.embed.row(id));
        }
        let hidden: Vec<f64> = (0..cfg.hidden_dim)
            .map(|k| {
                let z = p.hidden_b.data[k] + dot(p.hidden_w.row(k), &input);
                z.tanh()
            })
            .collect();
        let logits = (0..cfg.tag_vocab_size)
            .map(|t| p.out_b.data[t] + dot(p.out_w.row(t), &hidden))
            .collect();
        ForwardCache {
            context,
            input,
            hidden,
            logits,
        }
    }

    /// Accumulates into `grads` the parameter gradient of a loss term whose
    /// gradient with respect to the logits is `dlogits`.
    pub fn backward(&self, cache: &ForwardCache, dlogits: &[f64], grads: &mut ModelParams) {
        let cfg = &self.config;
        let p = &self.params;
        debug_assert_eq!(dlogits.len(), cfg.tag_vocab_size);

        let mut dhidden = vec![0.0; cfg.hidden_dim];
        for (t, &g) in dlogits.iter().enumerate() {
            grads.out_b.data[t] += g;
            let w_row = p.out_w.row(t);
            for ((gw, &h), (dh, &w)) in grads
                .out_w
                .row_mut(t)
                .iter_mut()
                .zip(&cache.hidden)
                .zip(dhidden.iter_mut().zip(w_row))
            {
                *gw += g * h;
                *dh += g * w;
            }
        }

        let mut dinput = vec![0.0; cfg.input_dim()];
        for k in 0..cfg.hidden_dim {
            let h = cache.hidden[k];
            let dz = dhidden[k] * (1.0 - h * h);
            grads.hidden_b.data[k] += dz;
            let w_row = p.hidden_w.row(k);
            for ((gw, &x), (di, &w)) in grads
                .hidden_w
                .row_mut(k)
                .iter_mut()
                .zip(&cache.input)
                .zip(dinput.iter_mut().zip(w_row))
            {
                *gw += dz * x;
                *di += dz * w;
            }
        }

        let e = cfg.embed_dim;
        for (slot, &id) in cache.context.iter().enumerate() {
            for (g, &d) in grads.embed.row_mut(id).iter_mut().zip(&dinput[slot * e..(slot + 1) * e]) {
                *g += d;
            }
        }
    }

    /// Softmax distribution over tags at every slot `0..=m`.
    pub fn distributions(&self, source: &[Token]) -> Vec<Vec<f64>> {
        let ids = self.encode(source);
        (0..=ids.len()).map(|p| softmax(&self.forward(&ids, p).logits)).collect()
    }

    /// Arg-max tag per slot. Slot 0 only considers tags legal at the start.
    pub fn predict_indices(&self, source: &[Token], vocab: &TagVocab) -> Result<Vec<usize>> {
        self.check_tag_vocab(vocab.hash())?;
        let ids = self.encode(source);
        Ok((0..=ids.len())
            .map(|p| {
                let mut logits = self.forward(&ids, p).logits;
                if p == 0 {
                    for (i, tag) in vocab.tags().iter().enumerate() {
                        if !tag.allowed_at_start() {
                            logits[i] = f64::NEG_INFINITY;
                        }
                    }
                }
                argmax(&logits)
            })
            .collect())
    }

    pub fn predict_tags(&self, source: &[Token], vocab: &TagVocab, sample_id: usize) -> Result<TagSequence> {
        let tags: Vec<EditTag> = self
            .predict_indices(source, vocab)?
            .into_iter()
            .map(|i| vocab.tag(i).clone())
            .collect();
        Ok(TagSequence { sample_id, tags })
    }

    pub fn zero_grads(&mut self) {
        self.grads.fill(0.0);
    }
}

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

const MAGIC: &[u8; 8] = b"GECWTAG\0";
const VERSION: u32 = 1;

impl Tagger {
    /// Binary checkpoint: magic, version, config, token and tag vocabulary
    /// hashes, the token table, then every tensor as little-endian `f64`.
    pub fn to_bytes(&self) -> Vec<u8> {
        let c = &self.config;
        let mut out = Vec::with_capacity(64 + self.params.num_params() * 8);
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&VERSION.to_le_bytes());
        for d in [c.embed_dim, c.window, c.hidden_dim, c.token_vocab_size, c.tag_vocab_size] {
            out.extend_from_slice(&(d as u32).to_le_bytes());
        }
        out.extend_from_slice(&c.seed.to_le_bytes());
        out.extend_from_slice(&self.tokens.hash().to_le_bytes());
        out.extend_from_slice(&self.tag_vocab_hash.to_le_bytes());
        out.extend_from_slice(&(self.tokens.len() as u32).to_le_bytes());
        for t in &self.tokens.tokens {
            out.extend_from_slice(&(t.len() as u32).to_le_bytes());
            out.extend_from_slice(t.as_bytes());
        }
        for t in self.params.tensors() {
            for x in &t.data {
                out.extend_from_slice(&x.to_le_bytes());
            }
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader { bytes, pos: 0 };
        if r.take(8)? != MAGIC {
            return Err(Error::Checkpoint("bad magic".into()));
        }
        let version = r.u32()?;
        if version != VERSION {
            return Err(Error::Checkpoint(format!("unsupported version {version}")));
        }
        let mut dims = [0usize; 5];
        for d in &mut dims {
            *d = r.u32()? as usize;
        }
        let config = ModelConfig {
            embed_dim: dims[0],
            window: dims[1],
            hidden_dim: dims[2],
            token_vocab_size: dims[3],
            tag_vocab_size: dims[4],
            seed: r.u64()?,
        };
        config.validate()?;
        let token_hash = r.u64()?;
        let tag_vocab_hash = r.u64()?;
        let n = r.u32()? as usize;
        let mut tokens = Vec::with_capacity(n);
        for _ in 0..n {
            let len = r.u32()? as usize;
            let s = std::str::from_utf8(r.take(len)?)
                .map_err(|_| Error::Checkpoint("token table is not UTF-8".into()))?;
            tokens.push(s.to_owned());
        }
        let tokens = TokenVocab::from_tokens(tokens);
        if tokens.hash() != token_hash {
            return Err(Error::HashMismatch {
                what: "token vocabulary (checkpoint)",
                expected: token_hash,
                found: tokens.hash(),
            });
        }
        let mut params = ModelParams::zeros(&config);
        for t in params.tensors_mut() {
            for x in &mut t.data {
                *x = f64::from_le_bytes(r.take(8)?.try_into().expect("8 bytes"));
            }
        }
        if r.pos != bytes.len() {
            return Err(Error::Checkpoint(format!("{} trailing bytes", bytes.len() - r.pos)));
        }
        Tagger::with_params(config, tokens, tag_vocab_hash, params)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.to_bytes()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
        Tagger::from_bytes(&bytes)
    }
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len());
        let end = end.ok_or_else(|| Error::Checkpoint("truncated file".into()))?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }
}

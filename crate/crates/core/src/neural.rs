//! One-dimensional convolutional text classifier in double precision.
//!
//! Architecture: embedding lookup, one valid convolution per kernel size,
//! ReLU, global max-pool, concatenation, inverted dropout, a single dense
//! unit and a sigmoid. Trained with Adam on weighted cross-entropy or on a
//! pairwise squared-hinge AUC surrogate over the logits.
//!
//! All parameters live in one flat vector; [`Layout`] gives the offsets.
//! Token id 0 is padding and its embedding row stays zero, so it is not a
//! trainable parameter.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::Rng as _;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::arabic_text::TokenSequence;
use crate::classifiers::{ClassWeightMode, ClassWeights};
use crate::embeddings::EmbeddingTable;
use crate::error::{Error, Result};
use crate::eval::roc_auc;
use crate::rng;

pub const PAD: u32 = 0;
pub const UNK: u32 = 1;
pub const CHECKPOINT_MAGIC: &[u8; 8] = b"MICNN001";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EmbedInit {
    Random,
    Cbow,
    Fasttext,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CnnLoss {
    CrossEntropy,
    AucSurrogate,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CnnConfig {
    pub embed_dim: usize,
    pub kernel_sizes: Vec<usize>,
    pub filters_per_kernel: usize,
    pub dropout: f64,
    pub max_sequence_length: usize,
    /// Upper bound on the vocabulary including the padding and unknown ids;
    /// `None` keeps every training word.
    pub max_vocab: Option<usize>,
    pub embed_init: EmbedInit,
    pub trainable_embeddings: bool,
    pub loss: CnnLoss,
    pub class_weight: ClassWeightMode,
    pub epochs: usize,
    pub batch: usize,
    pub lr: f64,
    pub seed: u64,
    /// Stop once validation AUC reaches this value.
    pub target_auc: Option<f64>,
}

impl Default for CnnConfig {
    fn default() -> Self {
        Self {
            embed_dim: 200,
            kernel_sizes: vec![4, 5],
            filters_per_kernel: 100,
            dropout: 0.5,
            max_sequence_length: 50,
            max_vocab: None,
            embed_init: EmbedInit::Random,
            trainable_embeddings: true,
            loss: CnnLoss::CrossEntropy,
            class_weight: ClassWeightMode::None,
            epochs: 500,
            batch: 32,
            lr: 1e-3,
            seed: 1,
            target_auc: None,
        }
    }
}

impl CnnConfig {
    pub fn validate(&self) -> Result<()> {
        if self.embed_dim == 0 || self.filters_per_kernel == 0 || self.kernel_sizes.is_empty() || self.batch == 0 {
            return Err(Error::config("cnn dimensions, kernels and batch must be positive"));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(Error::config("cnn dropout must lie in [0, 1)"));
        }
        if self.kernel_sizes.iter().any(|&k| k == 0 || k > self.max_sequence_length) {
            return Err(Error::config("cnn kernel sizes must lie in [1, max_sequence_length]"));
        }
        if !(self.lr >= 0.0) {
            return Err(Error::config("cnn lr must be non-negative"));
        }
        if matches!(self.max_vocab, Some(v) if v < 2) {
            return Err(Error::config("cnn max_vocab must leave room for padding and unknown ids"));
        }
        Ok(())
    }
}

/// Token ids: 0 padding, 1 unknown, then words by descending training
/// frequency (ties lexical).
#[derive(Debug, Clone, PartialEq)]
pub struct CnnVocab {
    words: Vec<String>,
    index: HashMap<String, u32>,
}

impl CnnVocab {
    pub fn new(words: Vec<String>) -> Self {
        let index = words.iter().enumerate().map(|(i, w)| (w.clone(), i as u32 + 2)).collect();
        Self { words, index }
    }

    pub fn build(corpus: &[TokenSequence], max_vocab: Option<usize>) -> Self {
        let mut counts: HashMap<&str, usize> = HashMap::new();
        for s in corpus {
            for t in &s.tokens {
                *counts.entry(t.as_str()).or_default() += 1;
            }
        }
        let mut words: Vec<(&str, usize)> = counts.into_iter().collect();
        words.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(b.0)));
        if let Some(m) = max_vocab {
            words.truncate(m - 2);
        }
        Self::new(words.into_iter().map(|w| w.0.to_owned()).collect())
    }

    /// Vocabulary size including the padding and unknown ids.
    pub fn size(&self) -> usize {
        self.words.len() + 2
    }

    pub fn words(&self) -> &[String] {
        &self.words
    }

    pub fn id(&self, word: &str) -> u32 {
        self.index.get(word).copied().unwrap_or(UNK)
    }

    /// Ids padded or truncated on the right to `len`.
    pub fn encode(&self, seq: &TokenSequence, len: usize) -> Vec<u32> {
        let mut ids: Vec<u32> = seq.tokens.iter().take(len).map(|t| self.id(t)).collect();
        ids.resize(len, PAD);
        ids
    }
}

/// Offsets of each parameter block in the flat vector.
#[derive(Debug, Clone, PartialEq)]
pub struct Layout {
    pub vocab: usize,
    pub dim: usize,
    pub filters: usize,
    pub kernels: Vec<usize>,
    /// `(weights, biases)` offset per kernel size; weights are
    /// `filters x k x dim`.
    pub conv: Vec<(usize, usize)>,
    pub dense_w: usize,
    pub dense_b: usize,
    pub total: usize,
}

impl Layout {
    pub fn new(vocab: usize, cfg: &CnnConfig) -> Self {
        let (dim, filters) = (cfg.embed_dim, cfg.filters_per_kernel);
        let mut off = vocab * dim;
        let conv = cfg
            .kernel_sizes
            .iter()
            .map(|&k| {
                let w = off;
                off += filters * k * dim;
                let b = off;
                off += filters;
                (w, b)
            })
            .collect();
        let dense_w = off;
        off += filters * cfg.kernel_sizes.len();
        Self {
            vocab,
            dim,
            filters,
            kernels: cfg.kernel_sizes.clone(),
            conv,
            dense_w,
            dense_b: off,
            total: off + 1,
        }
    }

    pub fn features(&self) -> usize {
        self.filters * self.kernels.len()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CnnModel {
    pub config: CnnConfig,
    pub vocab: CnnVocab,
    pub params: Vec<f64>,
    layout: Layout,
}

/// Per-example activations kept for the backward pass.
#[derive(Debug, Clone)]
pub struct ForwardCache {
    x: Vec<f64>,
    /// Pre-activation max per feature.
    best: Vec<f64>,
    /// Window start of the max per feature.
    arg: Vec<usize>,
    hidden: Vec<f64>,
    mask: Option<Vec<f64>>,
    pub logit: f64,
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Builds a model with fresh weights. Pretrained `table` rows initialize the
/// embeddings of words the table covers; other rows are uniform in
/// `[-0.05, 0.05]`.
pub fn build_cnn(cfg: &CnnConfig, vocab: CnnVocab, table: Option<&EmbeddingTable>) -> Result<CnnModel> {
    cfg.validate()?;
    if let Some(t) = table {
        if t.dim() != cfg.embed_dim {
            return Err(Error::DimensionMismatch {
                expected: cfg.embed_dim,
                actual: t.dim(),
            });
        }
    } else if cfg.embed_init != EmbedInit::Random {
        return Err(Error::config("pretrained embedding init needs an embedding table"));
    }
    let layout = Layout::new(vocab.size(), cfg);
    let mut r = rng::seeded(cfg.seed);
    let mut params = vec![0.0; layout.total];
    let d = cfg.embed_dim;
    for id in 1..layout.vocab {
        let row = &mut params[id * d..(id + 1) * d];
        row.iter_mut().for_each(|v| *v = r.gen_range(-0.05..=0.05));
        if id >= 2 {
            if let Some(vec) = table.and_then(|t| t.word_vector(&vocab.words[id - 2])) {
                row.iter_mut().zip(vec).for_each(|(v, x)| *v = f64::from(x));
            }
        }
    }
    for (ki, &k) in cfg.kernel_sizes.iter().enumerate() {
        let bound = 1.0 / ((k * d) as f64).sqrt();
        let (w, b) = layout.conv[ki];
        let end = b + cfg.filters_per_kernel;
        params[w..end].iter_mut().for_each(|v| *v = r.gen_range(-bound..=bound));
    }
    let bound = 1.0 / (layout.features() as f64).sqrt();
    params[layout.dense_w..].iter_mut().for_each(|v| *v = r.gen_range(-bound..=bound));
    Ok(CnnModel {
        config: cfg.clone(),
        vocab,
        params,
        layout,
    })
}

impl CnnModel {
    pub fn layout(&self) -> &Layout {
        &self.layout
    }

    pub fn parameter_count(&self) -> usize {
        self.layout.total
    }

    pub fn embedding_row(&self, id: u32) -> &[f64] {
        let d = self.layout.dim;
        &self.params[id as usize * d..(id as usize + 1) * d]
    }

    pub fn encode(&self, seq: &TokenSequence) -> Vec<u32> {
        self.vocab.encode(seq, self.config.max_sequence_length)
    }

    /// Forward pass for one id sequence; `mask` is the inverted-dropout
    /// multiplier per pooled feature.
    pub fn forward(&self, ids: &[u32], mask: Option<Vec<f64>>) -> ForwardCache {
        let l = &self.layout;
        let (d, len) = (l.dim, ids.len());
        let mut x = vec![0.0; len * d];
        for (t, &id) in ids.iter().enumerate() {
            if id != PAD {
                x[t * d..(t + 1) * d].copy_from_slice(self.embedding_row(id));
            }
        }
        let real = ids.iter().position(|&i| i == PAD).unwrap_or(len);
        let nf = l.features();
        let mut best = vec![0.0; nf];
        let mut arg = vec![0; nf];
        for (ki, &k) in l.kernels.iter().enumerate() {
            let (w_off, b_off) = l.conv[ki];
            let windows = len + 1 - k;
            let live = real.min(windows);
            for f in 0..l.filters {
                let w = &self.params[w_off + f * k * d..w_off + (f + 1) * k * d];
                let b = self.params[b_off + f];
                let (mut m, mut a) = (f64::NEG_INFINITY, 0);
                for t in 0..live {
                    let z = b + dot(w, &x[t * d..(t + k) * d]);
                    if z > m {
                        m = z;
                        a = t;
                    }
                }
                // windows lying wholly in the padding see a zero input
                if live < windows && b > m {
                    m = b;
                    a = live;
                }
                best[ki * l.filters + f] = m;
                arg[ki * l.filters + f] = a;
            }
        }
        let mut hidden: Vec<f64> = best.iter().map(|&z| z.max(0.0)).collect();
        if let Some(m) = &mask {
            hidden.iter_mut().zip(m).for_each(|(h, m)| *h *= m);
        }
        let logit = self.params[l.dense_b] + dot(&self.params[l.dense_w..l.dense_w + nf], &hidden);
        ForwardCache {
            x,
            best,
            arg,
            hidden,
            mask,
            logit,
        }
    }

    /// Eval-mode probability for one id sequence.
    pub fn predict_ids(&self, ids: &[u32]) -> f64 {
        sigmoid(self.forward(ids, None).logit)
    }

    pub fn predict(&self, seqs: &[TokenSequence]) -> Vec<f64> {
        let ids: Vec<Vec<u32>> = seqs.iter().map(|s| self.encode(s)).collect();
        ids.par_iter().map(|i| self.predict_ids(i)).collect()
    }

    /// Adds `dlogit * d(logit)/d(params)` for one example into `grad`.
    fn backward(&self, ids: &[u32], c: &ForwardCache, dlogit: f64, grad: &mut [f64]) {
        if dlogit == 0.0 {
            return;
        }
        let l = &self.layout;
        let d = l.dim;
        let nf = l.features();
        grad[l.dense_b] += dlogit;
        for i in 0..nf {
            grad[l.dense_w + i] += dlogit * c.hidden[i];
        }
        let trainable = self.config.trainable_embeddings;
        for (ki, &k) in l.kernels.iter().enumerate() {
            let (w_off, b_off) = l.conv[ki];
            for f in 0..l.filters {
                let i = ki * l.filters + f;
                if c.best[i] <= 0.0 {
                    continue;
                }
                let m = c.mask.as_ref().map_or(1.0, |m| m[i]);
                let dz = dlogit * self.params[l.dense_w + i] * m;
                if dz == 0.0 {
                    continue;
                }
                grad[b_off + f] += dz;
                let t = c.arg[i];
                if t + k > ids.len() {
                    continue;
                }
                let w = w_off + f * k * d;
                for u in 0..k {
                    let pos = t + u;
                    let id = ids[pos];
                    if id == PAD {
                        continue;
                    }
                    let xr = &c.x[pos * d..(pos + 1) * d];
                    let gw = &mut grad[w + u * d..w + (u + 1) * d];
                    gw.iter_mut().zip(xr).for_each(|(g, x)| *g += dz * x);
                    if trainable {
                        let e = id as usize * d;
                        for j in 0..d {
                            grad[e + j] += dz * self.params[w + u * d + j];
                        }
                    }
                }
            }
        }
    }

    /// Batch loss and its gradient. `masks` enables dropout.
    pub fn loss_and_grad(
        &self,
        batch: &[(&[u32], u8)],
        weights: ClassWeights,
        masks: Option<Vec<Vec<f64>>>,
    ) -> (f64, Vec<f64>) {
        let caches: Vec<ForwardCache> = match masks {
            Some(ms) => batch.par_iter().zip(ms).map(|((ids, _), m)| self.forward(ids, Some(m))).collect(),
            None => batch.par_iter().map(|(ids, _)| self.forward(ids, None)).collect(),
        };
        let logits: Vec<f64> = caches.iter().map(|c| c.logit).collect();
        let labels: Vec<u8> = batch.iter().map(|b| b.1).collect();
        let (loss, dlogits) = match self.config.loss {
            CnnLoss::CrossEntropy => cross_entropy_grad(&logits, &labels, weights),
            CnnLoss::AucSurrogate => auc_surrogate_grad(&logits, &labels),
        };
        let mut grad = vec![0.0; self.layout.total];
        for ((ids, _), (c, g)) in batch.iter().zip(caches.iter().zip(&dlogits)) {
            self.backward(ids, c, *g, &mut grad);
        }
        (loss, grad)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let header = serde_json::json!({
            "config": self.config,
            "vocab": self.vocab.words,
            "parameters": self.layout.total,
        });
        let header = serde_json::to_vec(&header)?;
        let mut out = Vec::with_capacity(16 + header.len() + 4 * self.params.len());
        out.extend_from_slice(CHECKPOINT_MAGIC);
        out.extend_from_slice(&(header.len() as u64).to_le_bytes());
        out.extend_from_slice(&header);
        for &p in &self.params {
            out.extend_from_slice(&(p as f32).to_le_bytes());
        }
        std::fs::write(path, out).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let buf = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        let bad = |m: &str| Error::Parse {
            line: 0,
            message: format!("cnn checkpoint: {m}"),
        };
        if buf.len() < 16 || &buf[..8] != CHECKPOINT_MAGIC {
            return Err(bad("bad magic"));
        }
        let hlen = u64::from_le_bytes(buf[8..16].try_into().unwrap()) as usize;
        let body = buf.get(16..16 + hlen).ok_or_else(|| bad("truncated header"))?;
        #[derive(Deserialize)]
        struct Header {
            config: CnnConfig,
            vocab: Vec<String>,
            parameters: usize,
        }
        let h: Header = serde_json::from_slice(body)?;
        h.config.validate()?;
        let vocab = CnnVocab::new(h.vocab);
        let layout = Layout::new(vocab.size(), &h.config);
        if layout.total != h.parameters {
            return Err(bad("parameter count disagrees with config"));
        }
        let blob = &buf[16 + hlen..];
        if blob.len() != 4 * layout.total {
            return Err(bad("parameter blob has the wrong length"));
        }
        let params = blob
            .chunks_exact(4)
            .map(|c| f64::from(f32::from_le_bytes(c.try_into().unwrap())))
            .collect();
        Ok(Self {
            config: h.config,
            vocab,
            params,
            layout,
        })
    }
}

const CLAMP: f64 = 1e-7;

/// Weighted mean binary cross-entropy of probabilities, clamped to
/// `[1e-7, 1 - 1e-7]`.
pub fn loss_cross_entropy(scores: &[f64], labels: &[u8], weights: ClassWeights) -> f64 {
    let (mut num, mut den) = (0.0, 0.0);
    for (&s, &y) in scores.iter().zip(labels) {
        let s = s.clamp(CLAMP, 1.0 - CLAMP);
        let w = weights.of(y);
        num += w * if y == 1 { -s.ln() } else { -(1.0 - s).ln() };
        den += w;
    }
    if den > 0.0 {
        num / den
    } else {
        0.0
    }
}

fn cross_entropy_grad(logits: &[f64], labels: &[u8], weights: ClassWeights) -> (f64, Vec<f64>) {
    let scores: Vec<f64> = logits.iter().map(|&z| sigmoid(z)).collect();
    let loss = loss_cross_entropy(&scores, labels, weights);
    let den: f64 = labels.iter().map(|&y| weights.of(y)).sum();
    let grad = scores
        .iter()
        .zip(labels)
        .map(|(&s, &y)| {
            if s < CLAMP || s > 1.0 - CLAMP {
                0.0
            } else {
                weights.of(y) * (s - f64::from(y)) / den
            }
        })
        .collect();
    (loss, grad)
}

/// Mean over (positive, negative) pairs of `max(0, 1 - (s_p - s_n))^2`;
/// 0 when either class is absent.
pub fn loss_auc_surrogate(scores: &[f64], labels: &[u8]) -> f64 {
    auc_surrogate_grad(scores, labels).0
}

fn auc_surrogate_grad(scores: &[f64], labels: &[u8]) -> (f64, Vec<f64>) {
    let pos: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == 1).collect();
    let neg: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] != 1).collect();
    let mut grad = vec![0.0; scores.len()];
    if pos.is_empty() || neg.is_empty() {
        return (0.0, grad);
    }
    let pairs = (pos.len() * neg.len()) as f64;
    let mut loss = 0.0;
    for &p in &pos {
        for &n in &neg {
            let h = 1.0 - (scores[p] - scores[n]);
            if h > 0.0 {
                loss += h * h;
                grad[p] -= 2.0 * h / pairs;
                grad[n] += 2.0 * h / pairs;
            }
        }
    }
    (loss / pairs, grad)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_auc: Option<f64>,
}

pub fn history_csv(history: &[EpochRecord]) -> String {
    let mut out = String::from("epoch,train_loss,val_auc\n");
    for h in history {
        let auc = h.val_auc.map(|a| a.to_string()).unwrap_or_default();
        let _ = writeln!(out, "{},{},{}", h.epoch, h.train_loss, auc);
    }
    out
}

pub struct TrainedCnn {
    pub model: CnnModel,
    pub history: Vec<EpochRecord>,
    pub best_epoch: Option<usize>,
}

struct Adam {
    m: Vec<f64>,
    v: Vec<f64>,
    t: i32,
}

impl Adam {
    const B1: f64 = 0.9;
    const B2: f64 = 0.999;
    const EPS: f64 = 1e-8;

    fn step(&mut self, params: &mut [f64], grad: &[f64], lr: f64, from: usize) {
        self.t += 1;
        let c1 = 1.0 - Self::B1.powi(self.t);
        let c2 = 1.0 - Self::B2.powi(self.t);
        for i in from..params.len() {
            let g = grad[i];
            self.m[i] = Self::B1 * self.m[i] + (1.0 - Self::B1) * g;
            self.v[i] = Self::B2 * self.v[i] + (1.0 - Self::B2) * g * g;
            let step = lr * (self.m[i] / c1) / ((self.v[i] / c2).sqrt() + Self::EPS);
            if step != 0.0 {
                params[i] -= step;
            }
        }
    }
}

fn validation_auc(model: &CnnModel, val: &[(Vec<u32>, u8)]) -> Option<f64> {
    let scores: Vec<f64> = val.par_iter().map(|(ids, _)| model.forward(ids, None).logit).collect();
    let labels: Vec<u8> = val.iter().map(|v| v.1).collect();
    roc_auc(&labels, &scores).ok().map(|r| r.1)
}

/// Trains with Adam, shuffling every epoch, and keeps the parameters of the
/// epoch with the best validation AUC (the final ones when no validation
/// AUC is defined).
pub fn train_cnn(mut model: CnnModel, train: &[(Vec<u32>, u8)], val: &[(Vec<u32>, u8)]) -> Result<TrainedCnn> {
    let cfg = model.config.clone();
    cfg.validate()?;
    if train.is_empty() {
        return Err(Error::validation("cnn needs training examples"));
    }
    let labels: Vec<u8> = train.iter().map(|t| t.1).collect();
    let weights = cfg.class_weight.weights(&labels)?;
    let n = model.params.len();
    let mut adam = Adam {
        m: vec![0.0; n],
        v: vec![0.0; n],
        t: 0,
    };
    // the padding row is never touched; frozen embeddings skip the block
    let from = if cfg.trainable_embeddings {
        model.layout.dim
    } else {
        model.layout.vocab * model.layout.dim
    };
    let mut r = rng::seeded(cfg.seed ^ 0x434e_4e00);
    let mut order: Vec<usize> = (0..train.len()).collect();
    let keep = 1.0 - cfg.dropout;
    let nf = model.layout.features();
    let mut history = Vec::with_capacity(cfg.epochs);
    let mut best: Option<(f64, usize, Vec<f64>)> = None;

    for epoch in 1..=cfg.epochs {
        order.shuffle(&mut r);
        let (mut total, mut batches) = (0.0, 0usize);
        for chunk in order.chunks(cfg.batch) {
            let batch: Vec<(&[u32], u8)> = chunk.iter().map(|&i| (train[i].0.as_slice(), train[i].1)).collect();
            let masks = (cfg.dropout > 0.0).then(|| {
                chunk
                    .iter()
                    .map(|_| {
                        (0..nf)
                            .map(|_| if r.gen::<f64>() < keep { 1.0 / keep } else { 0.0 })
                            .collect()
                    })
                    .collect()
            });
            let (loss, grad) = model.loss_and_grad(&batch, weights, masks);
            if !loss.is_finite() {
                return Err(Error::Numerical(format!("non-finite cnn loss at epoch {epoch}, batch {batches}")));
            }
            adam.step(&mut model.params, &grad, cfg.lr, from);
            total += loss;
            batches += 1;
        }
        let val_auc = validation_auc(&model, val);
        history.push(EpochRecord {
            epoch,
            train_loss: total / batches as f64,
            val_auc,
        });
        if let Some(a) = val_auc {
            if best.as_ref().map_or(true, |b| a > b.0) {
                best = Some((a, epoch, model.params.clone()));
            }
            if cfg.target_auc.is_some_and(|t| a >= t) {
                break;
            }
        }
    }
    let best_epoch = best.map(|(_, e, p)| {
        model.params = p;
        e
    });
    Ok(TrainedCnn {
        model,
        history,
        best_epoch,
    })
}

/// Largest relative difference between the analytic gradient and central
/// finite differences (step `h`) over every trainable parameter, with
/// dropout off. The denominator is floored at `1e-6`.
pub fn gradient_check(model: &CnnModel, batch: &[(&[u32], u8)], weights: ClassWeights, h: f64) -> f64 {
    let (_, grad) = model.loss_and_grad(batch, weights, None);
    let from = if model.config.trainable_embeddings {
        model.layout.dim
    } else {
        model.layout.vocab * model.layout.dim
    };
    let mut probe = model.clone();
    let mut worst = 0.0f64;
    for i in from..model.params.len() {
        let orig = probe.params[i];
        probe.params[i] = orig + h;
        let up = probe.loss_and_grad(batch, weights, None).0;
        probe.params[i] = orig - h;
        let down = probe.loss_and_grad(batch, weights, None).0;
        probe.params[i] = orig;
        let fd = (up - down) / (2.0 * h);
        let rel = (fd - grad[i]).abs() / fd.abs().max(grad[i].abs()).max(1e-6);
        worst = worst.max(rel);
    }
    worst
}

//! CBOW training with negative sampling.
//!
//! Both modes share one trainer: a word is a list of input rows (its own row,
//! plus one row per hashed character n-gram in subword mode). Updates for
//! `batch` consecutive target words are computed against fixed parameters
//! and then applied together.
//!
//! Parameters live in relaxed atomics so that [`Trainer::run_epoch_parallel`]
//! can run unsynchronized workers over corpus shards. Such runs are not
//! reproducible; [`Trainer::run_epoch`] is single-worker and bit-exact for a
//! given seed.

use std::collections::{BTreeMap, HashMap};
use std::sync::atomic::{AtomicU32, AtomicU64, Ordering};

use super::{build_embed_vocab, init_row, EmbedMode, EmbedTrainConfig, EmbedVocab, EmbeddingTable, NoiseDistribution, SubwordTable};
use crate::arabic_text::TokenSequence;
use crate::error::{Error, Result};
use crate::rng::{self, Rng};

#[derive(Default)]
struct AtomicF32(AtomicU32);

impl AtomicF32 {
    fn new(v: f32) -> Self {
        Self(AtomicU32::new(v.to_bits()))
    }

    #[inline]
    fn get(&self) -> f32 {
        f32::from_bits(self.0.load(Ordering::Relaxed))
    }

    /// Read-modify-write without a CAS loop: concurrent writers race and the
    /// last store wins.
    #[inline]
    fn add(&self, d: f32) {
        self.0.store((self.get() + d).to_bits(), Ordering::Relaxed);
    }
}

fn log_sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        -(-x).exp().ln_1p()
    } else {
        x - x.exp().ln_1p()
    }
}

fn sigmoid(x: f32) -> f32 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

struct Target {
    word: u32,
    context: Vec<u32>,
}

pub struct Trainer {
    cfg: EmbedTrainConfig,
    vocab: EmbedVocab,
    noise: NoiseDistribution,
    sentences: Vec<Vec<u32>>,
    word_rows: Vec<Vec<u32>>,
    slot_buckets: Vec<u32>,
    input: Vec<AtomicF32>,
    output: Vec<AtomicF32>,
    targets_per_epoch: u64,
    processed: AtomicU64,
    epochs_done: usize,
    history: Vec<f64>,
}

impl Trainer {
    pub fn new(corpus: &[TokenSequence], cfg: &EmbedTrainConfig) -> Result<Self> {
        cfg.validate()?;
        let (vocab, noise) = build_embed_vocab(corpus, cfg)?;
        let dim = cfg.dim;
        let sentences: Vec<Vec<u32>> = corpus
            .iter()
            .map(|s| {
                s.tokens
                    .iter()
                    .filter_map(|t| vocab.get(t).map(|i| i as u32))
                    .collect::<Vec<u32>>()
            })
            .filter(|s: &Vec<u32>| !s.is_empty())
            .collect();
        let n_tokens: usize = sentences.iter().map(Vec::len).sum();
        if n_tokens < 2 {
            return Err(Error::validation("embedding corpus needs at least 2 in-vocabulary tokens"));
        }
        let targets_per_epoch = sentences.iter().filter(|s| s.len() > 1).map(|s| s.len() as u64).sum();

        let v = vocab.len();
        let mut word_rows: Vec<Vec<u32>> = (0..v as u32).map(|w| vec![w]).collect();
        let mut slot_buckets = Vec::new();
        if cfg.mode == EmbedMode::Fasttext {
            let spec = cfg.subword_spec();
            let mut slot_of: HashMap<u32, u32> = HashMap::new();
            for (w, word) in vocab.words.iter().enumerate() {
                for b in spec.buckets_of(word) {
                    let slot = *slot_of.entry(b).or_insert_with(|| {
                        slot_buckets.push(b);
                        (slot_buckets.len() - 1) as u32
                    });
                    word_rows[w].push(v as u32 + slot);
                }
            }
        }

        let mut init = rng::derive(cfg.seed, 0);
        let mut input = Vec::with_capacity((v + slot_buckets.len()) * dim);
        for _ in 0..v {
            input.extend(init_row(&mut init, dim).into_iter().map(AtomicF32::new));
        }
        for &b in &slot_buckets {
            input.extend(
                SubwordTable::initial_bucket(cfg.seed, b, dim)
                    .into_iter()
                    .map(AtomicF32::new),
            );
        }
        let output = (0..v * dim).map(|_| AtomicF32::default()).collect();

        Ok(Self {
            cfg: cfg.clone(),
            vocab,
            noise,
            sentences,
            word_rows,
            slot_buckets,
            input,
            output,
            targets_per_epoch,
            processed: AtomicU64::new(0),
            epochs_done: 0,
            history: Vec::new(),
        })
    }

    pub fn vocab(&self) -> &EmbedVocab {
        &self.vocab
    }

    /// Mean training loss of each completed epoch.
    pub fn history(&self) -> &[f64] {
        &self.history
    }

    fn learning_rate(&self) -> f32 {
        let total = (self.targets_per_epoch * self.cfg.epochs.max(1) as u64).max(1);
        let progress = (self.processed.load(Ordering::Relaxed) as f64 / total as f64).min(1.0) as f32;
        let lr0 = self.cfg.learning_rate;
        let floor = self.cfg.min_learning_rate.min(lr0);
        lr0 - (lr0 - floor) * progress
    }

    fn compose(&self, word: u32) -> Vec<f32> {
        let dim = self.cfg.dim;
        let mut v = vec![0.0f32; dim];
        for &r in &self.word_rows[word as usize] {
            let row = &self.input[r as usize * dim..(r as usize + 1) * dim];
            for (x, p) in v.iter_mut().zip(row) {
                *x += p.get();
            }
        }
        v
    }

    fn output_row(&self, word: u32) -> Vec<f32> {
        let dim = self.cfg.dim;
        self.output[word as usize * dim..(word as usize + 1) * dim]
            .iter()
            .map(AtomicF32::get)
            .collect()
    }

    fn targets_of(&self, sentence: &[u32]) -> Vec<Target> {
        let w = self.cfg.window;
        if sentence.len() < 2 {
            return Vec::new();
        }
        (0..sentence.len())
            .map(|pos| {
                let lo = pos.saturating_sub(w);
                let hi = (pos + w).min(sentence.len() - 1);
                Target {
                    word: sentence[pos],
                    context: (lo..=hi).filter(|&j| j != pos).map(|j| sentence[j]).collect(),
                }
            })
            .collect()
    }

    fn hidden(context: &[u32], composed: &mut BTreeMap<u32, Vec<f32>>, trainer: &Trainer) -> Vec<f32> {
        let dim = trainer.cfg.dim;
        let mut h = vec![0.0f32; dim];
        for &c in context {
            let v = composed.entry(c).or_insert_with(|| trainer.compose(c));
            for (a, b) in h.iter_mut().zip(v.iter()) {
                *a += *b;
            }
        }
        let inv = 1.0 / context.len() as f32;
        h.iter_mut().for_each(|x| *x *= inv);
        h
    }

    /// Computes and applies the updates of one batch; returns the summed loss.
    fn process_batch(&self, batch: &[Target], rng: &mut Rng) -> f64 {
        let dim = self.cfg.dim;
        let lr = self.learning_rate();
        let mut composed: BTreeMap<u32, Vec<f32>> = BTreeMap::new();
        let mut outputs: BTreeMap<u32, Vec<f32>> = BTreeMap::new();
        let mut delta_in: BTreeMap<u32, Vec<f32>> = BTreeMap::new();
        let mut delta_out: BTreeMap<u32, Vec<f32>> = BTreeMap::new();
        let mut loss = 0.0f64;

        for t in batch {
            let h = Self::hidden(&t.context, &mut composed, self);
            let mut grad_h = vec![0.0f32; dim];
            let mut pairs = Vec::with_capacity(self.cfg.negatives + 1);
            pairs.push((t.word, 1.0f32));
            for _ in 0..self.cfg.negatives {
                let n = self.noise.sample(rng) as u32;
                if n != t.word {
                    pairs.push((n, 0.0));
                }
            }
            for (w, label) in pairs {
                let u = outputs.entry(w).or_insert_with(|| self.output_row(w));
                let f: f32 = u.iter().zip(&h).map(|(a, b)| a * b).sum();
                loss -= if label > 0.5 {
                    log_sigmoid(f64::from(f))
                } else {
                    log_sigmoid(-f64::from(f))
                };
                let g = lr * (label - sigmoid(f));
                for (gh, ui) in grad_h.iter_mut().zip(u.iter()) {
                    *gh += g * ui;
                }
                let d = delta_out.entry(w).or_insert_with(|| vec![0.0; dim]);
                for (di, hi) in d.iter_mut().zip(&h) {
                    *di += g * hi;
                }
            }
            for &c in &t.context {
                let d = delta_in.entry(c).or_insert_with(|| vec![0.0; dim]);
                for (di, gi) in d.iter_mut().zip(&grad_h) {
                    *di += gi;
                }
            }
        }

        for (w, d) in delta_out {
            let row = &self.output[w as usize * dim..(w as usize + 1) * dim];
            for (p, x) in row.iter().zip(d) {
                p.add(x);
            }
        }
        for (c, d) in delta_in {
            // the composed vector of `c` moves by `d`, shared across its rows
            let rows = &self.word_rows[c as usize];
            let share = 1.0 / rows.len() as f32;
            for &r in rows {
                let row = &self.input[r as usize * dim..(r as usize + 1) * dim];
                for (p, x) in row.iter().zip(&d) {
                    p.add(x * share);
                }
            }
        }
        self.processed.fetch_add(batch.len() as u64, Ordering::Relaxed);
        loss
    }

    fn run_shard(&self, sentences: &[Vec<u32>], rng: &mut Rng) -> (f64, u64) {
        let mut batch = Vec::with_capacity(self.cfg.batch);
        let (mut loss, mut count) = (0.0, 0u64);
        for s in sentences {
            for t in self.targets_of(s) {
                batch.push(t);
                if batch.len() == self.cfg.batch {
                    loss += self.process_batch(&batch, rng);
                    count += batch.len() as u64;
                    batch.clear();
                }
            }
        }
        if !batch.is_empty() {
            loss += self.process_batch(&batch, rng);
            count += batch.len() as u64;
        }
        (loss, count)
    }

    fn check_finite(&self) -> Result<()> {
        if self.input.iter().chain(&self.output).any(|p| !p.get().is_finite()) {
            return Err(Error::Numerical(format!(
                "non-finite embedding parameter after epoch {}",
                self.epochs_done
            )));
        }
        Ok(())
    }

    /// One deterministic single-worker pass; returns the mean target loss.
    pub fn run_epoch(&mut self) -> Result<f64> {
        let mut rng = rng::derive(self.cfg.seed, 1 + self.epochs_done as u64);
        let (loss, count) = self.run_shard(&self.sentences, &mut rng);
        self.finish_epoch(loss, count)
    }

    /// One pass with `workers` unsynchronized threads over contiguous shards.
    pub fn run_epoch_parallel(&mut self, workers: usize) -> Result<f64> {
        let workers = workers.max(1);
        let chunk = self.sentences.len().div_ceil(workers).max(1);
        let epoch = self.epochs_done as u64;
        let this = &*self;
        let results: Vec<(f64, u64)> = std::thread::scope(|scope| {
            let handles: Vec<_> = this
                .sentences
                .chunks(chunk)
                .enumerate()
                .map(|(i, shard)| {
                    scope.spawn(move || {
                        let mut rng = rng::derive(this.cfg.seed, (1 + epoch) * 1_000_003 + i as u64);
                        this.run_shard(shard, &mut rng)
                    })
                })
                .collect();
            handles.into_iter().map(|h| h.join().expect("worker panicked")).collect()
        });
        let (loss, count) = results
            .into_iter()
            .fold((0.0, 0), |acc, r| (acc.0 + r.0, acc.1 + r.1));
        self.finish_epoch(loss, count)
    }

    fn finish_epoch(&mut self, loss: f64, count: u64) -> Result<f64> {
        self.epochs_done += 1;
        self.check_finite()?;
        let mean = if count == 0 { 0.0 } else { loss / count as f64 };
        self.history.push(mean);
        Ok(mean)
    }

    /// Mean negative-sampling loss over the targets of `corpus`, without
    /// updating parameters. Negatives are drawn from a stream fixed by `seed`.
    pub fn loss_on(&self, corpus: &[TokenSequence], seed: u64) -> f64 {
        let mut rng = rng::seeded(seed);
        let mut composed = BTreeMap::new();
        let (mut loss, mut count) = (0.0, 0u64);
        for seq in corpus {
            let ids: Vec<u32> = seq
                .tokens
                .iter()
                .filter_map(|t| self.vocab.get(t).map(|i| i as u32))
                .collect();
            for t in self.targets_of(&ids) {
                let h = Self::hidden(&t.context, &mut composed, self);
                let score = |w: u32| -> f64 {
                    self.output_row(w)
                        .iter()
                        .zip(&h)
                        .map(|(a, b)| f64::from(*a) * f64::from(*b))
                        .sum()
                };
                loss -= log_sigmoid(score(t.word));
                for _ in 0..self.cfg.negatives {
                    let n = self.noise.sample(&mut rng) as u32;
                    if n != t.word {
                        loss -= log_sigmoid(-score(n));
                    }
                }
                count += 1;
            }
        }
        if count == 0 {
            0.0
        } else {
            loss / count as f64
        }
    }

    pub fn finish(self) -> Result<TrainedEmbeddings> {
        let dim = self.cfg.dim;
        let v = self.vocab.len();
        let values: Vec<f32> = self.input.iter().map(AtomicF32::get).collect();
        let subword = (self.cfg.mode == EmbedMode::Fasttext).then(|| SubwordTable {
            spec: self.cfg.subword_spec(),
            seed: self.cfg.seed,
            rows: values[v * dim..].to_vec(),
            slots: self
                .slot_buckets
                .iter()
                .enumerate()
                .map(|(slot, &b)| (b, slot))
                .collect(),
        });
        let table = EmbeddingTable::new(self.vocab.words.clone(), dim, values[..v * dim].to_vec(), subword)?;
        Ok(TrainedEmbeddings {
            table,
            output: self.output.iter().map(AtomicF32::get).collect(),
            counts: self.vocab.counts,
            epoch_losses: self.history,
        })
    }
}

pub struct TrainedEmbeddings {
    pub table: EmbeddingTable,
    /// Output (context-prediction) vectors, `|V| x D`.
    pub output: Vec<f32>,
    pub counts: Vec<u64>,
    pub epoch_losses: Vec<f64>,
}

pub fn train(corpus: &[TokenSequence], cfg: &EmbedTrainConfig) -> Result<TrainedEmbeddings> {
    let mut trainer = Trainer::new(corpus, cfg)?;
    for _ in 0..cfg.epochs {
        trainer.run_epoch()?;
    }
    trainer.finish()
}

pub fn train_cbow(corpus: &[TokenSequence], cfg: &EmbedTrainConfig) -> Result<TrainedEmbeddings> {
    if cfg.mode != EmbedMode::Cbow {
        return Err(Error::config("train_cbow requires mode = cbow"));
    }
    train(corpus, cfg)
}

pub fn train_fasttext(corpus: &[TokenSequence], cfg: &EmbedTrainConfig) -> Result<TrainedEmbeddings> {
    if cfg.mode != EmbedMode::Fasttext {
        return Err(Error::config("train_fasttext requires mode = fasttext"));
    }
    train(corpus, cfg)
}

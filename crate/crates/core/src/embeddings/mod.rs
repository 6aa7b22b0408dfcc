//! Word embeddings trained with CBOW and negative sampling, optionally
//! enriched with hashed character n-grams (FastText-style subwords).

mod io;
pub mod subword;
mod train;

use std::collections::HashMap;

use rand::distributions::{Distribution, WeightedIndex};
use serde::{Deserialize, Serialize};

use crate::arabic_text::TokenSequence;
use crate::error::{Error, Result};
use crate::rng;

pub use io::{load_table, save_table, SUBWORD_MAGIC};
pub use subword::SubwordSpec;
pub use train::{train, train_cbow, train_fasttext, Trainer, TrainedEmbeddings};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EmbedMode {
    Cbow,
    Fasttext,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EmbedTrainConfig {
    pub dim: usize,
    pub window: usize,
    pub negatives: usize,
    pub min_count: usize,
    pub epochs: usize,
    /// Target words whose updates are accumulated before being applied.
    pub batch: usize,
    pub mode: EmbedMode,
    pub subword_min: usize,
    pub subword_max: usize,
    pub buckets: u32,
    pub learning_rate: f32,
    pub min_learning_rate: f32,
    pub seed: u64,
}

impl Default for EmbedTrainConfig {
    fn default() -> Self {
        Self {
            dim: 200,
            window: 3,
            negatives: 10,
            min_count: 5,
            epochs: 5,
            batch: 50,
            mode: EmbedMode::Cbow,
            subword_min: 3,
            subword_max: 6,
            buckets: 2_000_000,
            learning_rate: 0.025,
            min_learning_rate: 1e-4,
            seed: 1,
        }
    }
}

impl EmbedTrainConfig {
    pub fn fasttext() -> Self {
        Self {
            mode: EmbedMode::Fasttext,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let check = |ok: bool, msg: &str| if ok { Ok(()) } else { Err(Error::config(msg)) };
        check(self.dim >= 1, "dim must be >= 1")?;
        check(self.window >= 1, "window must be >= 1")?;
        check(self.negatives >= 1, "negatives must be >= 1")?;
        check(self.batch >= 1, "batch must be >= 1")?;
        check(self.min_count >= 1, "min_count must be >= 1")?;
        check(self.subword_min >= 1, "subword_min must be >= 1")?;
        check(self.subword_min <= self.subword_max, "subword_min must not exceed subword_max")?;
        check(self.buckets >= 1, "buckets must be >= 1")?;
        check(
            self.learning_rate >= 0.0 && self.learning_rate.is_finite(),
            "learning_rate must be finite and non-negative",
        )
    }

    pub fn subword_spec(&self) -> SubwordSpec {
        SubwordSpec {
            min_n: self.subword_min,
            max_n: self.subword_max,
            buckets: self.buckets,
        }
    }
}

/// Words kept for training, ordered by descending frequency then lexically.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EmbedVocab {
    pub words: Vec<String>,
    pub counts: Vec<u64>,
    pub index: HashMap<String, usize>,
}

impl EmbedVocab {
    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    pub fn get(&self, word: &str) -> Option<usize> {
        self.index.get(word).copied()
    }
}

/// Unigram noise distribution raised to the 3/4 power.
#[derive(Debug, Clone)]
pub struct NoiseDistribution {
    probs: Vec<f64>,
    sampler: WeightedIndex<f64>,
}

impl NoiseDistribution {
    pub const POWER: f64 = 0.75;

    pub fn new(counts: &[u64]) -> Result<Self> {
        let weights: Vec<f64> = counts.iter().map(|&c| (c as f64).powf(Self::POWER)).collect();
        let total: f64 = weights.iter().sum();
        let sampler = WeightedIndex::new(&weights)
            .map_err(|e| Error::validation(format!("noise distribution: {e}")))?;
        Ok(Self {
            probs: weights.iter().map(|w| w / total).collect(),
            sampler,
        })
    }

    pub fn probabilities(&self) -> &[f64] {
        &self.probs
    }

    pub fn sample<R: rand::Rng + ?Sized>(&self, rng: &mut R) -> usize {
        self.sampler.sample(rng)
    }
}

pub fn build_embed_vocab(corpus: &[TokenSequence], cfg: &EmbedTrainConfig) -> Result<(EmbedVocab, NoiseDistribution)> {
    if corpus.is_empty() {
        return Err(Error::validation("embedding corpus is empty"));
    }
    let mut freq: HashMap<&str, u64> = HashMap::new();
    for seq in corpus {
        for t in &seq.tokens {
            *freq.entry(t.as_str()).or_default() += 1;
        }
    }
    let mut kept: Vec<(&str, u64)> = freq
        .into_iter()
        .filter(|&(_, c)| c >= cfg.min_count as u64)
        .collect();
    if kept.is_empty() {
        return Err(Error::validation(format!(
            "no word reaches min_count = {}",
            cfg.min_count
        )));
    }
    kept.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(b.0)));
    let words: Vec<String> = kept.iter().map(|(w, _)| (*w).to_owned()).collect();
    let counts: Vec<u64> = kept.iter().map(|(_, c)| *c).collect();
    let index = words.iter().enumerate().map(|(i, w)| (w.clone(), i)).collect();
    let noise = NoiseDistribution::new(&counts)?;
    Ok((EmbedVocab { words, counts, index }, noise))
}

/// Input-side initialization: uniform in `[-0.5/D, 0.5/D]`.
pub(crate) fn init_row<R: rand::Rng>(rng: &mut R, dim: usize) -> Vec<f32> {
    let scale = 0.5 / dim as f32;
    (0..dim).map(|_| rng.gen_range(-scale..=scale)).collect()
}

/// Subword rows of a trained table. Only buckets reached by some training
/// word are stored; any other bucket holds its deterministic initial value,
/// derived from the table seed and the bucket id.
#[derive(Debug, Clone, PartialEq)]
pub struct SubwordTable {
    pub spec: SubwordSpec,
    pub seed: u64,
    pub(crate) rows: Vec<f32>,
    pub(crate) slots: HashMap<u32, usize>,
}

impl SubwordTable {
    pub(crate) fn initial_bucket(seed: u64, bucket: u32, dim: usize) -> Vec<f32> {
        let mut r = rng::derive(seed ^ 0x5355_4257, u64::from(bucket));
        init_row(&mut r, dim)
    }

    pub fn materialized(&self) -> usize {
        self.slots.len()
    }

    /// Stored buckets in ascending id order.
    pub fn stored_buckets(&self) -> Vec<u32> {
        let mut b: Vec<u32> = self.slots.keys().copied().collect();
        b.sort_unstable();
        b
    }

    pub fn bucket_vector(&self, bucket: u32, dim: usize) -> Vec<f32> {
        match self.slots.get(&bucket) {
            Some(&slot) => self.rows[slot * dim..(slot + 1) * dim].to_vec(),
            None => Self::initial_bucket(self.seed, bucket, dim),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingTable {
    words: Vec<String>,
    index: HashMap<String, usize>,
    dim: usize,
    input: Vec<f32>,
    subword: Option<SubwordTable>,
}

impl EmbeddingTable {
    pub fn new(words: Vec<String>, dim: usize, input: Vec<f32>, subword: Option<SubwordTable>) -> Result<Self> {
        if input.len() != words.len() * dim {
            return Err(Error::DimensionMismatch {
                expected: words.len() * dim,
                actual: input.len(),
            });
        }
        if input.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numerical("embedding table contains non-finite values".into()));
        }
        let index = words.iter().enumerate().map(|(i, w)| (w.clone(), i)).collect();
        Ok(Self {
            words,
            index,
            dim,
            input,
            subword,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    pub fn words(&self) -> &[String] {
        &self.words
    }

    pub fn contains(&self, word: &str) -> bool {
        self.index.contains_key(word)
    }

    pub fn row_id(&self, word: &str) -> Option<usize> {
        self.index.get(word).copied()
    }

    /// The stored word row, without subword composition.
    pub fn word_row(&self, id: usize) -> &[f32] {
        &self.input[id * self.dim..(id + 1) * self.dim]
    }

    pub fn subword(&self) -> Option<&SubwordTable> {
        self.subword.as_ref()
    }

    pub fn is_fasttext(&self) -> bool {
        self.subword.is_some()
    }

    /// Vector for `word`. Subword tables compose the word row (if any) with
    /// the rows of its hashed character n-grams; plain tables only know
    /// in-vocabulary words.
    pub fn word_vector(&self, word: &str) -> Option<Vec<f32>> {
        let own = self.row_id(word).map(|id| self.word_row(id).to_vec());
        let Some(sub) = &self.subword else {
            return own;
        };
        let buckets = sub.spec.buckets_of(word);
        if own.is_none() && buckets.is_empty() {
            return None;
        }
        let mut v = own.unwrap_or_else(|| vec![0.0; self.dim]);
        for b in buckets {
            for (x, y) in v.iter_mut().zip(sub.bucket_vector(b, self.dim)) {
                *x += y;
            }
        }
        Some(v)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TweetVector {
    pub values: Vec<f64>,
    pub n_words: usize,
}

/// Mean of the vectors of the tokens that have one; zero when none do.
pub fn tweet_vector(table: &EmbeddingTable, seq: &TokenSequence) -> TweetVector {
    let mut values = vec![0.0f64; table.dim()];
    let mut n_words = 0;
    for t in &seq.tokens {
        if let Some(v) = table.word_vector(t) {
            for (acc, x) in values.iter_mut().zip(v) {
                *acc += f64::from(x);
            }
            n_words += 1;
        }
    }
    if n_words > 0 {
        for x in &mut values {
            *x /= n_words as f64;
        }
    }
    TweetVector { values, n_words }
}

pub fn cosine(a: &[f32], b: &[f32]) -> f64 {
    let (mut dot, mut na, mut nb) = (0.0f64, 0.0f64, 0.0f64);
    for (&x, &y) in a.iter().zip(b) {
        let (x, y) = (f64::from(x), f64::from(y));
        dot += x * y;
        na += x * x;
        nb += y * y;
    }
    if na == 0.0 || nb == 0.0 {
        0.0
    } else {
        dot / (na.sqrt() * nb.sqrt())
    }
}

/// The `k` vocabulary words closest to `word` by cosine, excluding the query
/// itself; ties are broken lexicographically.
pub fn nearest_neighbors(table: &EmbeddingTable, word: &str, k: usize) -> Result<Vec<(String, f64)>> {
    let query = table
        .word_vector(word)
        .ok_or_else(|| Error::validation(format!("no vector for {word:?}")))?;
    let mut scored: Vec<(String, f64)> = table
        .words()
        .iter()
        .filter(|w| w.as_str() != word)
        .map(|w| {
            let v = table.word_vector(w).expect("vocabulary words always resolve");
            (w.clone(), cosine(&query, &v))
        })
        .collect();
    scored.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    scored.truncate(k);
    Ok(scored)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn seqs(docs: &[&[&str]]) -> Vec<TokenSequence> {
        docs.iter()
            .map(|d| TokenSequence::new(d.iter().map(|s| s.to_string()).collect()))
            .collect()
    }

    fn plain_table(words: &[&str], rows: &[&[f32]]) -> EmbeddingTable {
        let dim = rows[0].len();
        EmbeddingTable::new(
            words.iter().map(|s| s.to_string()).collect(),
            dim,
            rows.iter().flat_map(|r| r.iter().copied()).collect(),
            None,
        )
        .unwrap()
    }

    #[test]
    fn min_count_filters() {
        let corpus = seqs(&[&["a", "a", "a", "a", "b"], &["a", "b", "b", "b", "b"]]);
        let cfg = EmbedTrainConfig::default();
        let (vocab, _) = build_embed_vocab(&corpus, &cfg).unwrap();
        // a: 5, b: 5
        assert_eq!(vocab.words, vec!["a", "b"]);
        let corpus = seqs(&[&["a", "a", "a", "a", "c"]]);
        assert!(build_embed_vocab(&corpus, &cfg).is_err());

        let cfg = EmbedTrainConfig {
            min_count: 1,
            ..cfg
        };
        let (vocab, _) = build_embed_vocab(&corpus, &cfg).unwrap();
        assert_eq!(vocab.len(), 2);
    }

    #[test]
    fn noise_is_three_quarter_power() {
        let noise = NoiseDistribution::new(&[8, 1]).unwrap();
        let p = noise.probabilities();
        let a = 8f64.powf(0.75);
        assert!((p[0] - a / (a + 1.0)).abs() < 1e-12);
        assert!((p[0] - 0.826).abs() < 1e-3);
        assert!((p[1] - 0.174).abs() < 1e-3);
    }

    #[test]
    fn tweet_vector_average() {
        let t = plain_table(&["a", "b"], &[&[1.0, 2.0], &[-1.0, -2.0]]);
        let one = tweet_vector(&t, &seqs(&[&["a"]])[0]);
        assert_eq!(one.values, vec![1.0, 2.0]);
        let zero = tweet_vector(&t, &seqs(&[&["a", "b", "oov"]])[0]);
        assert_eq!(zero.values, vec![0.0, 0.0]);
        assert_eq!(zero.n_words, 2);
        let none = tweet_vector(&t, &seqs(&[&["x"]])[0]);
        assert_eq!((none.values, none.n_words), (vec![0.0, 0.0], 0));
    }

    #[test]
    fn cbow_table_has_closed_vocabulary() {
        let t = plain_table(&["a"], &[&[1.0]]);
        assert!(t.word_vector("a").is_some());
        assert!(t.word_vector("b").is_none());
    }

    #[test]
    fn neighbors_simple() {
        let t = plain_table(&["a", "b"], &[&[1.0, 0.0], &[0.0, 1.0]]);
        let nn = nearest_neighbors(&t, "a", 1).unwrap();
        assert_eq!(nn[0].0, "b");
        let t = plain_table(&["a", "b", "c"], &[&[1.0, 0.0], &[0.0, 1.0], &[2.0, 0.0]]);
        let nn = nearest_neighbors(&t, "a", 2).unwrap();
        assert_eq!(nn[0].0, "c");
        assert!((nn[0].1 - 1.0).abs() < 1e-12);
        assert!(nearest_neighbors(&t, "zz", 1).is_err());
    }

    #[test]
    fn config_validation() {
        assert!(EmbedTrainConfig::default().validate().is_ok());
        let bad = EmbedTrainConfig {
            subword_min: 7,
            ..EmbedTrainConfig::default()
        };
        assert!(bad.validate().is_err());
    }
}

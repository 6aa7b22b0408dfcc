#![allow(dead_code)]

use misinfo_core::TokenSequence;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const LETTERS: &[char] = &[
    'ا', 'ب', 'ت', 'ث', 'ج', 'ح', 'خ', 'د', 'ذ', 'ر', 'ز', 'س', 'ش', 'ص', 'ض', 'ط', 'ظ', 'ع', 'غ', 'ف', 'ق', 'ك', 'ل',
    'م', 'ن', 'ه', 'و', 'ي',
];

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// `n` distinct pseudo-words of 4 to 7 Arabic letters.
pub fn word_list(r: &mut impl Rng, n: usize) -> Vec<String> {
    let mut out: Vec<String> = Vec::with_capacity(n);
    let mut seen = std::collections::HashSet::new();
    while out.len() < n {
        let len = r.gen_range(4..=7);
        let w: String = (0..len).map(|_| LETTERS[r.gen_range(0..LETTERS.len())]).collect();
        if seen.insert(w.clone()) {
            out.push(w);
        }
    }
    out
}

pub fn seq(tokens: Vec<String>) -> TokenSequence {
    TokenSequence::new(tokens)
}

/// Token corpus with disjoint class vocabularies: `round(n * pos_frac)`
/// positives drawing from 100 words, negatives from 400 words, 6 to 12
/// tokens per document, in shuffled order.
pub fn separable_corpus(n: usize, pos_frac: f64, seed: u64) -> (Vec<TokenSequence>, Vec<u8>) {
    let mut r = rng(seed);
    let words = word_list(&mut r, 500);
    let (pos_words, neg_words) = words.split_at(100);
    let n_pos = (n as f64 * pos_frac).round() as usize;
    let mut labels: Vec<u8> = (0..n).map(|i| u8::from(i < n_pos)).collect();
    labels.shuffle(&mut r);
    let docs = labels
        .iter()
        .map(|&l| {
            let vocab = if l == 1 { pos_words } else { neg_words };
            let len = r.gen_range(6..=12);
            seq((0..len).map(|_| vocab[r.gen_range(0..vocab.len())].clone()).collect())
        })
        .collect();
    (docs, labels)
}

/// Roughly `n_tokens` tokens in 10-token sentences. The 1,000-word
/// background vocabulary is split into 20 topics of 50 words; each sentence
/// draws from one topic with Zipf-like frequencies. Each sentence carries one
/// of `n_pairs` planted word pairs side by side with probability 0.3.
pub fn planted_corpus(n_tokens: usize, n_pairs: usize, seed: u64) -> (Vec<TokenSequence>, Vec<(String, String)>, Vec<String>) {
    let mut r = rng(seed);
    let words = word_list(&mut r, 1000 + 2 * n_pairs);
    let (background, planted) = words.split_at(1000);
    let pairs: Vec<(String, String)> = planted.chunks(2).map(|c| (c[0].clone(), c[1].clone())).collect();
    let topics: Vec<&[String]> = background.chunks(50).collect();
    let weights: Vec<f64> = (1..=50).map(|k| 1.0 / (k as f64).powf(0.8)).collect();
    let dist = rand::distributions::WeightedIndex::new(&weights).unwrap();
    let mut docs = Vec::new();
    let mut total = 0;
    while total < n_tokens {
        let topic = topics[r.gen_range(0..topics.len())];
        let mut toks: Vec<String> = (0..10).map(|_| topic[r.sample(&dist)].clone()).collect();
        if r.gen_bool(0.3) {
            let (a, b) = &pairs[r.gen_range(0..pairs.len())];
            let at = r.gen_range(0..9);
            toks[at] = a.clone();
            toks[at + 1] = b.clone();
        }
        total += toks.len();
        docs.push(seq(toks));
    }
    (docs, pairs, background.to_vec())
}

//! Synthetic fixtures shared by the benchmarks.

use misinfo_core::arabic_text::{preprocess, PreprocessConfig};
use misinfo_core::features::{fit_vocabulary, transform_corpus};
use misinfo_core::{FeatureMatrix, TfidfConfig, TokenSequence};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const LETTERS: &[char] = &[
    'ا', 'ب', 'ت', 'ث', 'ج', 'ح', 'خ', 'د', 'ر', 'س', 'ش', 'ص', 'ط', 'ع', 'غ', 'ف', 'ق', 'ك', 'ل', 'م', 'ن', 'ه', 'و', 'ي',
];

fn word(rng: &mut ChaCha8Rng) -> String {
    (0..rng.gen_range(3..8)).map(|_| LETTERS[rng.gen_range(0..LETTERS.len())]).collect()
}

/// Raw tweets with hashtags, mentions, URLs and diacritics, about a third
/// of them positive. Positives lean on a small marker vocabulary.
pub fn tweets(n: usize, seed: u64) -> Vec<(String, u8)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let vocab: Vec<String> = (0..3000).map(|_| word(&mut rng)).collect();
    let markers = &vocab[..60];
    (0..n)
        .map(|_| {
            let label = u8::from(rng.gen_bool(0.33));
            let mut parts: Vec<String> = (0..rng.gen_range(8..25))
                .map(|_| {
                    if label == 1 && rng.gen_bool(0.3) {
                        markers[rng.gen_range(0..markers.len())].clone()
                    } else {
                        vocab[rng.gen_range(0..vocab.len())].clone()
                    }
                })
                .collect();
            parts.push(format!("#{}", word(&mut rng)));
            parts.push(format!("@user{}", rng.gen_range(0..100)));
            parts.push("https://t.co/abc".into());
            parts[0].push('\u{064E}');
            (parts.join(" "), label)
        })
        .collect()
}

pub fn token_docs(n: usize, seed: u64) -> (Vec<TokenSequence>, Vec<u8>) {
    let cfg = PreprocessConfig::default();
    tweets(n, seed).into_iter().map(|(t, l)| (preprocess(&t, &cfg), l)).unzip()
}

/// Unigram TF-IDF rows for `n` synthetic tweets.
pub fn tfidf_matrix(n: usize, seed: u64) -> FeatureMatrix {
    let (docs, labels) = token_docs(n, seed);
    let vocab = fit_vocabulary(&docs, &TfidfConfig::default()).expect("non-empty corpus");
    FeatureMatrix::sparse(transform_corpus(&docs, &vocab), labels, vocab.len()).expect("consistent rows")
}

/// Labels and noisy scores with many ties.
pub fn scored(n: usize, seed: u64) -> (Vec<u8>, Vec<f64>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| {
            let l = u8::from(rng.gen_bool(0.3));
            let s = (f64::from(l) * 0.5 + rng.gen_range(0.0..1.0) * 100.0).round() / 100.0;
            (l, s)
        })
        .unzip()
}

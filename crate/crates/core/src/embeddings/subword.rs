//! Character n-gram enumeration and bucket hashing for subword embeddings.

use serde::{Deserialize, Serialize};

pub const BOW: char = '<';
pub const EOW: char = '>';

/// 32-bit FNV-1a over the UTF-8 bytes of `s`.
pub fn fnv1a(s: &str) -> u32 {
    let mut h: u32 = 0x811c_9dc5;
    for &b in s.as_bytes() {
        h ^= u32::from(b);
        h = h.wrapping_mul(0x0100_0193);
    }
    h
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SubwordSpec {
    pub min_n: usize,
    pub max_n: usize,
    pub buckets: u32,
}

impl SubwordSpec {
    /// Distinct character n-grams of `<word>` with lengths in `[min_n, max_n]`,
    /// ordered by start position then length.
    pub fn ngrams(&self, word: &str) -> Vec<String> {
        let chars: Vec<char> = std::iter::once(BOW)
            .chain(word.chars())
            .chain(std::iter::once(EOW))
            .collect();
        let mut out: Vec<String> = Vec::new();
        for start in 0..chars.len() {
            for n in self.min_n..=self.max_n {
                if start + n > chars.len() {
                    break;
                }
                let g: String = chars[start..start + n].iter().collect();
                if !out.contains(&g) {
                    out.push(g);
                }
            }
        }
        out
    }

    pub fn bucket(&self, ngram: &str) -> u32 {
        fnv1a(ngram) % self.buckets
    }

    pub fn buckets_of(&self, word: &str) -> Vec<u32> {
        self.ngrams(word).iter().map(|g| self.bucket(g)).collect()
    }
}

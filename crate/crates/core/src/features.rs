//! N-gram vocabularies and TF-IDF sparse vectors.
//!
//! Weights are `tf * log(N / df)` with no smoothing, so a term that occurs in
//! every fitted document always weighs zero.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::io::Write;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::arabic_text::TokenSequence;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NgramMode {
    Unigram,
    /// Contiguous bigrams and trigrams, no unigrams.
    BiTri,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LogBase {
    Natural,
    Base10,
}

impl LogBase {
    fn log(self, x: f64) -> f64 {
        match self {
            LogBase::Natural => x.ln(),
            LogBase::Base10 => x.log10(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TfidfConfig {
    pub ngram_mode: NgramMode,
    pub max_features: usize,
    pub log_base: LogBase,
    pub l2_normalize: bool,
}

impl Default for TfidfConfig {
    fn default() -> Self {
        Self {
            ngram_mode: NgramMode::Unigram,
            max_features: 5000,
            log_base: LogBase::Natural,
            l2_normalize: false,
        }
    }
}

impl TfidfConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_features == 0 {
            return Err(Error::config("max_features must be at least 1"));
        }
        Ok(())
    }
}

pub fn extract_ngrams(tokens: &[String], mode: NgramMode) -> Vec<String> {
    match mode {
        NgramMode::Unigram => tokens.to_vec(),
        NgramMode::BiTri => {
            let mut out = Vec::new();
            for n in 2..=3 {
                out.extend(tokens.windows(n).map(|w| w.join(" ")));
            }
            out
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Vocabulary {
    terms: Vec<String>,
    index: HashMap<String, usize>,
    df: Vec<usize>,
    n_docs: usize,
    config: TfidfConfig,
}

impl Vocabulary {
    pub fn terms(&self) -> &[String] {
        &self.terms
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn n_docs(&self) -> usize {
        self.n_docs
    }

    pub fn config(&self) -> &TfidfConfig {
        &self.config
    }

    pub fn column(&self, term: &str) -> Option<usize> {
        self.index.get(term).copied()
    }

    pub fn df(&self, column: usize) -> usize {
        self.df[column]
    }

    pub fn idf(&self, column: usize) -> f64 {
        self.config
            .log_base
            .log(self.n_docs as f64 / self.df[column] as f64)
    }

    fn from_parts(terms: Vec<String>, df: Vec<usize>, n_docs: usize, config: TfidfConfig) -> Self {
        let index = terms.iter().enumerate().map(|(i, t)| (t.clone(), i)).collect();
        Self {
            terms,
            index,
            df,
            n_docs,
            config,
        }
    }

    /// Writes `term<TAB>column<TAB>df` lines after a `#` header carrying
    /// `n_docs` and the configuration.
    pub fn save(&self, path: &Path) -> Result<()> {
        let mut out = format!(
            "# n_docs={}\tngram_mode={}\tmax_features={}\tlog_base={}\tl2_normalize={}\n",
            self.n_docs,
            serde_plain(&self.config.ngram_mode),
            self.config.max_features,
            serde_plain(&self.config.log_base),
            self.config.l2_normalize
        );
        for (i, t) in self.terms.iter().enumerate() {
            out.push_str(&format!("{t}\t{i}\t{}\n", self.df[i]));
        }
        std::fs::write(path, out).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        text.parse()
    }
}

fn serde_plain<T: Serialize>(v: &T) -> String {
    serde_json::to_value(v)
        .ok()
        .and_then(|v| v.as_str().map(str::to_owned))
        .unwrap_or_default()
}

impl FromStr for Vocabulary {
    type Err = Error;

    fn from_str(text: &str) -> Result<Self> {
        let mut lines = text.lines().enumerate();
        let header = match lines.next() {
            Some((_, h)) if h.starts_with('#') => h.trim_start_matches('#').trim(),
            _ => {
                return Err(Error::Parse {
                    line: 1,
                    message: "missing vocabulary header".into(),
                })
            }
        };
        let mut fields = BTreeMap::new();
        for kv in header.split('\t') {
            if let Some((k, v)) = kv.split_once('=') {
                fields.insert(k.trim(), v.trim());
            }
        }
        let field = |k: &str| {
            fields.get(k).copied().ok_or_else(|| Error::Parse {
                line: 1,
                message: format!("header lacks {k}"),
            })
        };
        let bad = |k: &str| Error::Parse {
            line: 1,
            message: format!("bad value for {k}"),
        };
        let n_docs: usize = field("n_docs")?.parse().map_err(|_| bad("n_docs"))?;
        let config = TfidfConfig {
            ngram_mode: serde_json::from_value(field("ngram_mode")?.into()).map_err(|_| bad("ngram_mode"))?,
            max_features: field("max_features")?.parse().map_err(|_| bad("max_features"))?,
            log_base: serde_json::from_value(field("log_base")?.into()).map_err(|_| bad("log_base"))?,
            l2_normalize: field("l2_normalize")?.parse().map_err(|_| bad("l2_normalize"))?,
        };

        let mut terms = Vec::new();
        let mut df = Vec::new();
        for (i, line) in lines {
            if line.is_empty() {
                continue;
            }
            let parse_err = |m: &str| Error::Parse {
                line: i + 1,
                message: m.to_owned(),
            };
            let mut parts = line.split('\t');
            let (Some(term), Some(col), Some(d)) = (parts.next(), parts.next(), parts.next()) else {
                return Err(parse_err("expected term<TAB>column<TAB>df"));
            };
            let col: usize = col.parse().map_err(|_| parse_err("bad column"))?;
            let d: usize = d.parse().map_err(|_| parse_err("bad df"))?;
            if col != terms.len() {
                return Err(parse_err("columns must be contiguous from 0"));
            }
            if d == 0 || d > n_docs {
                return Err(parse_err("df outside [1, n_docs]"));
            }
            terms.push(term.to_owned());
            df.push(d);
        }
        Ok(Self::from_parts(terms, df, n_docs, config))
    }
}

/// Fits a vocabulary keeping the `max_features` terms with the highest
/// corpus-wide frequency (ties by lexicographic order). Columns are assigned
/// in lexicographic term order.
pub fn fit_vocabulary(corpus: &[TokenSequence], cfg: &TfidfConfig) -> Result<Vocabulary> {
    cfg.validate()?;
    if corpus.is_empty() {
        return Err(Error::validation("cannot fit a vocabulary on an empty corpus"));
    }
    let mut tf: HashMap<String, usize> = HashMap::new();
    let mut df: HashMap<String, usize> = HashMap::new();
    for doc in corpus {
        let terms = extract_ngrams(&doc.tokens, cfg.ngram_mode);
        let mut seen = std::collections::HashSet::new();
        for t in terms {
            *tf.entry(t.clone()).or_default() += 1;
            if seen.insert(t.clone()) {
                *df.entry(t).or_default() += 1;
            }
        }
    }
    let mut ranked: Vec<(String, usize)> = tf.into_iter().collect();
    ranked.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    ranked.truncate(cfg.max_features);
    let mut terms: Vec<String> = ranked.into_iter().map(|(t, _)| t).collect();
    terms.sort();
    let dfs = terms.iter().map(|t| df[t]).collect();
    Ok(Vocabulary::from_parts(terms, dfs, corpus.len(), cfg.clone()))
}

/// A sparse row: strictly increasing column ids with positive weights.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SparseVector {
    pub entries: Vec<(usize, f64)>,
    pub dim: usize,
}

impl SparseVector {
    pub fn new(dim: usize) -> Self {
        Self {
            entries: Vec::new(),
            dim,
        }
    }

    /// Builds a vector from arbitrary (column, value) pairs, summing
    /// duplicates and dropping zeros.
    pub fn from_pairs(dim: usize, mut pairs: Vec<(usize, f64)>) -> Self {
        pairs.sort_by_key(|p| p.0);
        let mut entries: Vec<(usize, f64)> = Vec::with_capacity(pairs.len());
        for (c, v) in pairs {
            match entries.last_mut() {
                Some(last) if last.0 == c => last.1 += v,
                _ => entries.push((c, v)),
            }
        }
        entries.retain(|e| e.1 != 0.0);
        Self { entries, dim }
    }

    pub fn nnz(&self) -> usize {
        self.entries.len()
    }

    pub fn get(&self, col: usize) -> f64 {
        match self.entries.binary_search_by_key(&col, |e| e.0) {
            Ok(i) => self.entries[i].1,
            Err(_) => 0.0,
        }
    }

    pub fn squared_norm(&self) -> f64 {
        self.entries.iter().map(|e| e.1 * e.1).sum()
    }

    pub fn dot_dense(&self, w: &[f64]) -> f64 {
        self.entries.iter().map(|&(c, v)| v * w[c]).sum()
    }

    pub fn dot(&self, other: &SparseVector) -> f64 {
        let (mut i, mut j, mut acc) = (0, 0, 0.0);
        let (a, b) = (&self.entries, &other.entries);
        while i < a.len() && j < b.len() {
            match a[i].0.cmp(&b[j].0) {
                std::cmp::Ordering::Less => i += 1,
                std::cmp::Ordering::Greater => j += 1,
                std::cmp::Ordering::Equal => {
                    acc += a[i].1 * b[j].1;
                    i += 1;
                    j += 1;
                }
            }
        }
        acc
    }

    pub fn to_dense(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.dim];
        for &(c, v) in &self.entries {
            out[c] = v;
        }
        out
    }
}

pub fn tfidf_vector(seq: &TokenSequence, vocab: &Vocabulary) -> SparseVector {
    let mut counts: BTreeMap<usize, usize> = BTreeMap::new();
    for term in extract_ngrams(&seq.tokens, vocab.config.ngram_mode) {
        if let Some(col) = vocab.column(&term) {
            *counts.entry(col).or_default() += 1;
        }
    }
    let mut entries: Vec<(usize, f64)> = counts
        .into_iter()
        .map(|(col, tf)| (col, tf as f64 * vocab.idf(col)))
        .filter(|e| e.1 > 0.0)
        .collect();
    if vocab.config.l2_normalize {
        let norm = entries.iter().map(|e| e.1 * e.1).sum::<f64>().sqrt();
        if norm > 0.0 {
            for e in &mut entries {
                e.1 /= norm;
            }
        }
    }
    SparseVector {
        entries,
        dim: vocab.len(),
    }
}

pub fn transform_corpus(corpus: &[TokenSequence], vocab: &Vocabulary) -> Vec<SparseVector> {
    corpus.iter().map(|doc| tfidf_vector(doc, vocab)).collect()
}

/// Writes rows as `id label col:weight ...`, one per line.
pub fn write_libsvm<W: Write>(
    out: &mut W,
    rows: &[(String, Option<u8>, SparseVector)],
) -> std::io::Result<()> {
    for (id, label, v) in rows {
        write!(out, "{id} {}", label.map(|l| l.to_string()).unwrap_or_else(|| "?".into()))?;
        for &(c, w) in &v.entries {
            write!(out, " {c}:{w}")?;
        }
        writeln!(out)?;
    }
    Ok(())
}

/// A parsed libsvm-style row.
pub type LibsvmRow = (String, Option<u8>, Vec<(usize, f64)>);

pub fn parse_libsvm(text: &str) -> Result<Vec<LibsvmRow>> {
    let mut rows = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let err = |m: String| Error::Parse { line: i + 1, message: m };
        let mut parts = line.split_whitespace();
        let id = parts.next().ok_or_else(|| err("missing id".into()))?.to_owned();
        let label = match parts.next() {
            Some("?") => None,
            Some("0") => Some(0),
            Some("1") => Some(1),
            other => return Err(err(format!("bad label {other:?}"))),
        };
        let mut entries = Vec::new();
        for p in parts {
            let (c, w) = p.split_once(':').ok_or_else(|| err(format!("bad pair {p:?}")))?;
            let c: usize = c.parse().map_err(|_| err(format!("bad column {c:?}")))?;
            let w: f64 = w.parse().map_err(|_| err(format!("bad weight {w:?}")))?;
            entries.push((c, w));
        }
        rows.push((id, label, entries));
    }
    Ok(rows)
}

impl fmt::Display for NgramMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&serde_plain(self))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn doc(words: &[&str]) -> TokenSequence {
        TokenSequence::new(words.iter().map(|s| s.to_string()).collect())
    }

    fn s(words: &[&str]) -> Vec<String> {
        words.iter().map(|w| w.to_string()).collect()
    }

    #[test]
    fn ngram_extraction() {
        assert_eq!(
            extract_ngrams(&s(&["a", "b", "c"]), NgramMode::BiTri),
            s(&["a b", "b c", "a b c"])
        );
        assert!(extract_ngrams(&s(&["a"]), NgramMode::BiTri).is_empty());
        assert_eq!(extract_ngrams(&s(&["a", "b"]), NgramMode::Unigram), s(&["a", "b"]));
    }

    #[test]
    fn vocabulary_keeps_most_frequent() {
        // tf: a=4, b=3, c=1, d=1
        let corpus = vec![doc(&["a", "a", "b"]), doc(&["a", "b", "c"]), doc(&["a", "b", "d"])];
        let cfg = TfidfConfig {
            max_features: 2,
            ..Default::default()
        };
        let v = fit_vocabulary(&corpus, &cfg).unwrap();
        assert_eq!(v.terms(), &s(&["a", "b"]));
        assert_eq!(v.df(0), 3);
        assert_eq!(v.n_docs(), 3);

        let v = fit_vocabulary(&corpus, &TfidfConfig::default()).unwrap();
        assert_eq!(v.len(), 4);
    }

    #[test]
    fn vocabulary_tie_break_lexicographic() {
        let corpus = vec![doc(&["z", "y", "x"])];
        let cfg = TfidfConfig {
            max_features: 2,
            ..Default::default()
        };
        assert_eq!(fit_vocabulary(&corpus, &cfg).unwrap().terms(), &s(&["x", "y"]));
    }

    #[test]
    fn empty_corpus_errors() {
        assert!(fit_vocabulary(&[], &TfidfConfig::default()).is_err());
        let cfg = TfidfConfig {
            max_features: 0,
            ..Default::default()
        };
        assert!(fit_vocabulary(&[doc(&["a"])], &cfg).is_err());
    }

    #[test]
    fn weight_matches_hand_value() {
        // N = 4, df(t) = 2, tf(t) = 3 in doc 0
        let corpus = vec![
            doc(&["t", "t", "t", "u"]),
            doc(&["t", "u"]),
            doc(&["u", "v"]),
            doc(&["u", "w"]),
        ];
        let v = fit_vocabulary(&corpus, &TfidfConfig::default()).unwrap();
        let row = tfidf_vector(&corpus[0], &v);
        let t = v.column("t").unwrap();
        assert!((row.get(t) - 3.0 * 2f64.ln()).abs() < 1e-12);
        assert!((row.get(t) - 2.0794).abs() < 1e-4);
        // u appears in every document
        assert_eq!(row.get(v.column("u").unwrap()), 0.0);
        assert_eq!(row.nnz(), 1);
    }

    #[test]
    fn base10_scales_by_constant() {
        let corpus = vec![doc(&["a", "b"]), doc(&["b"]), doc(&["c"])];
        let nat = fit_vocabulary(&corpus, &TfidfConfig::default()).unwrap();
        let ten = fit_vocabulary(
            &corpus,
            &TfidfConfig {
                log_base: LogBase::Base10,
                ..Default::default()
            },
        )
        .unwrap();
        let (a, b) = (tfidf_vector(&corpus[0], &nat), tfidf_vector(&corpus[0], &ten));
        for (x, y) in a.entries.iter().zip(&b.entries) {
            assert!((x.1 / y.1 - 10f64.ln()).abs() < 1e-12);
        }
    }

    #[test]
    fn oov_only_gives_empty_vector() {
        let v = fit_vocabulary(&[doc(&["a"]), doc(&["b"])], &TfidfConfig::default()).unwrap();
        assert_eq!(tfidf_vector(&doc(&["zzz"]), &v).nnz(), 0);
    }

    #[test]
    fn l2_normalization() {
        let corpus = vec![doc(&["a", "a", "b"]), doc(&["c"]), doc(&["b", "c"])];
        let cfg = TfidfConfig {
            l2_normalize: true,
            ..Default::default()
        };
        let v = fit_vocabulary(&corpus, &cfg).unwrap();
        for row in transform_corpus(&corpus, &v) {
            assert!((row.squared_norm().sqrt() - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn vocabulary_tsv_round_trip() {
        let corpus = vec![doc(&["a", "b", "c"]), doc(&["b", "c", "d"])];
        let cfg = TfidfConfig {
            ngram_mode: NgramMode::BiTri,
            ..Default::default()
        };
        let v = fit_vocabulary(&corpus, &cfg).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("vocab.tsv");
        v.save(&path).unwrap();
        assert_eq!(Vocabulary::load(&path).unwrap(), v);
    }

    #[test]
    fn libsvm_round_trip() {
        let rows = vec![
            ("a".to_string(), Some(1u8), SparseVector::from_pairs(5, vec![(3, 0.5), (1, 2.0)])),
            ("b".to_string(), None, SparseVector::new(5)),
        ];
        let mut buf = Vec::new();
        write_libsvm(&mut buf, &rows).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().next().unwrap(), "a 1 1:2 3:0.5");
        let parsed = parse_libsvm(&text).unwrap();
        assert_eq!(parsed[0].2, rows[0].2.entries);
        assert_eq!(parsed[1].1, None);
    }
}

//! Shared plumbing: config resolution, token loading, featurizers and
//! artifact writing.

use std::collections::HashMap;
use std::fs;
use std::io::{BufRead, BufReader};
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use misinfo_core::corpus::{load_dataset, split, CorpusFormat};
use misinfo_core::embeddings::{load_table, train as train_embeddings, tweet_vector};
use misinfo_core::features::{fit_vocabulary, transform_corpus};
use misinfo_core::{
    arabic_text, EmbedTrainConfig, EmbeddingTable, Error, FeatureKind, FeatureMatrix, LabeledDataset, PreprocessConfig,
    RunConfig, SplitSpec, TokenSequence, Vocabulary,
};
use serde::{Deserialize, Serialize};

use crate::CliError;

/// One line of a tokens file.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TokenRecord {
    pub id: String,
    pub tokens: Vec<String>,
}

/// Reads a tokens file, keeping file order.
pub fn read_tokens(path: &Path) -> Result<Vec<TokenRecord>> {
    let file = fs::File::open(path).map_err(|e| Error::Io {
        path: path.into(),
        source: e,
    })?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::Io {
            path: path.into(),
            source: e,
        })?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: TokenRecord = serde_json::from_str(&line).map_err(|e| Error::Parse {
            line: i + 1,
            message: e.to_string(),
        })?;
        out.push(rec);
    }
    Ok(out)
}

/// Labeled records with their token sequences, in corpus order.
pub struct Corpus {
    pub dataset: LabeledDataset,
    pub docs: Vec<TokenSequence>,
}

impl Corpus {
    /// Loads the corpus and either preprocesses it or takes tokens from a
    /// file produced by `preprocess`.
    pub fn load(cfg: &RunConfig, tokens: Option<&Path>) -> Result<Self> {
        let path = corpus_path(cfg)?;
        let dataset = load_dataset(path, CorpusFormat::from_path(path))?;
        let docs = match tokens {
            Some(t) => {
                let mut map: HashMap<String, Vec<String>> = read_tokens(t)?.into_iter().map(|r| (r.id, r.tokens)).collect();
                dataset
                    .records()
                    .iter()
                    .map(|r| {
                        map.remove(&r.id)
                            .map(|toks| TokenSequence::new(toks).with_id(r.id.clone()))
                            .ok_or_else(|| Error::Validation(format!("record {} has no entry in {}", r.id, t.display())))
                    })
                    .collect::<Result<Vec<_>, _>>()?
            }
            None => {
                let pre = cfg.preprocess_config()?;
                dataset.records().iter().map(|r| preprocess_record(&r.text, &r.id, &pre)).collect()
            }
        };
        Ok(Self { dataset, docs })
    }

    pub fn labels(&self) -> Vec<u8> {
        self.dataset.labels()
    }

    /// Index sets of the configured split, in part order.
    pub fn split_indices(&self, cfg: &RunConfig) -> Result<Vec<Vec<usize>>> {
        let spec = SplitSpec::new(cfg.split.fractions.clone(), cfg.seed, cfg.split.stratified)?;
        let pos: HashMap<&str, usize> = self
            .dataset
            .records()
            .iter()
            .enumerate()
            .map(|(i, r)| (r.id.as_str(), i))
            .collect();
        Ok(split(&self.dataset, &spec)?
            .iter()
            .map(|part| part.records().iter().map(|r| pos[r.id.as_str()]).collect())
            .collect())
    }

    pub fn docs_at(&self, idx: &[usize]) -> Vec<TokenSequence> {
        idx.iter().map(|&i| self.docs[i].clone()).collect()
    }

    pub fn labels_at(&self, idx: &[usize]) -> Vec<u8> {
        let labels = self.labels();
        idx.iter().map(|&i| labels[i]).collect()
    }
}

pub fn preprocess_record(text: &str, id: &str, cfg: &PreprocessConfig) -> TokenSequence {
    arabic_text::preprocess(text, cfg).with_id(id)
}

pub fn corpus_path(cfg: &RunConfig) -> Result<&Path> {
    cfg.paths
        .corpus
        .as_deref()
        .ok_or_else(|| CliError::Usage("no corpus given (use --corpus or paths.corpus)".into()).into())
}

/// A fitted mapping from token sequences to feature rows.
pub enum Featurizer {
    Tfidf(Vocabulary),
    Embedding(EmbeddingTable),
}

impl Featurizer {
    /// Fits on the training documents. Embedding features use the table at
    /// `paths.embeddings` when set and otherwise train one.
    pub fn fit(kind: FeatureKind, cfg: &RunConfig, train_docs: &[TokenSequence]) -> Result<Self> {
        if kind.is_tfidf() {
            let mut tcfg = cfg.tfidf.clone();
            tcfg.ngram_mode = kind.ngram_mode();
            return Ok(Featurizer::Tfidf(fit_vocabulary(train_docs, &tcfg)?));
        }
        let mode = kind.embed_mode().expect("non-tfidf kinds are embeddings");
        if let Some(p) = &cfg.paths.embeddings {
            let table = load_table(p)?;
            return Ok(Featurizer::Embedding(table));
        }
        let ecfg = EmbedTrainConfig {
            mode,
            seed: cfg.seed,
            ..cfg.embed.clone()
        };
        Ok(Featurizer::Embedding(train_embeddings(train_docs, &ecfg)?.table))
    }

    pub fn matrix(&self, docs: &[TokenSequence], labels: Vec<u8>) -> Result<FeatureMatrix> {
        Ok(match self {
            Featurizer::Tfidf(v) => FeatureMatrix::sparse(transform_corpus(docs, v), labels, v.len())?,
            Featurizer::Embedding(t) => FeatureMatrix::dense(docs.iter().map(|d| tweet_vector(t, d).values).collect(), labels)?,
        })
    }

    /// Writes the fitted state into `dir`; returns the file name used.
    pub fn save(&self, dir: &Path) -> Result<&'static str> {
        Ok(match self {
            Featurizer::Tfidf(v) => {
                v.save(&dir.join(VOCAB_FILE))?;
                VOCAB_FILE
            }
            Featurizer::Embedding(t) => {
                misinfo_core::embeddings::save_table(t, &dir.join(VECTORS_FILE))?;
                VECTORS_FILE
            }
        })
    }

    pub fn load(kind: FeatureKind, dir: &Path) -> Result<Self> {
        Ok(if kind.is_tfidf() {
            Featurizer::Tfidf(Vocabulary::load(&dir.join(VOCAB_FILE))?)
        } else {
            Featurizer::Embedding(load_table(&dir.join(VECTORS_FILE))?)
        })
    }
}

pub const VOCAB_FILE: &str = "vocab.tsv";
pub const VECTORS_FILE: &str = "vectors.vec";
pub const RUN_FILE: &str = "run.toml";
pub const METRICS_FILE: &str = "metrics.json";

pub fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))
}

pub fn write(path: &Path, contents: impl AsRef<[u8]>) -> Result<()> {
    fs::write(path, contents).map_err(|e| {
        Error::Io {
            path: path.into(),
            source: e,
        }
        .into()
    })
}

/// Pretty JSON with a trailing newline.
pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    write(path, text)
}

/// Sidecar recording the resolved configuration next to artifacts whose own
/// format has no room for it.
pub fn meta_path(path: &Path) -> PathBuf {
    let mut p = path.as_os_str().to_owned();
    p.push(".meta.json");
    PathBuf::from(p)
}

#[derive(Serialize)]
pub struct Meta<'a, T: Serialize> {
    pub command: &'a str,
    pub seed: u64,
    pub config: &'a RunConfig,
    #[serde(flatten)]
    pub extra: T,
}

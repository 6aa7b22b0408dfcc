//! Labeled tweet corpora: loading, validation, summaries, splits and k-fold.
//!
//! The canonical on-disk format is JSONL with one `{"id","text","label"}`
//! object per line. A TSV variant (`id<TAB>label<TAB>text`) is also accepted.

use std::collections::HashSet;
use std::fmt;
use std::io::{BufRead, BufReader};
use std::path::Path;
use std::str::FromStr;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::arabic_text::{preprocess, PreprocessConfig};
use crate::error::{Error, Result};
use crate::rng;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TweetRecord {
    pub id: String,
    pub text: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<u8>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub timestamp: Option<String>,
}

impl TweetRecord {
    pub fn new(id: impl Into<String>, text: impl Into<String>, label: Option<u8>) -> Self {
        Self {
            id: id.into(),
            text: text.into(),
            label,
            timestamp: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.text.trim().is_empty() {
            return Err(Error::validation(format!("record {} has empty text", self.id)));
        }
        if let Some(l) = self.label {
            if l > 1 {
                return Err(Error::validation(format!(
                    "record {} has label {l}, expected 0 or 1",
                    self.id
                )));
            }
        }
        Ok(())
    }
}

/// A corpus in which every record carries a binary label.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabeledDataset {
    records: Vec<TweetRecord>,
    positive_count: usize,
    negative_count: usize,
}

impl LabeledDataset {
    pub fn new(records: Vec<TweetRecord>) -> Result<Self> {
        let mut positive_count = 0;
        for r in &records {
            r.validate()?;
            match r.label {
                Some(1) => positive_count += 1,
                Some(_) => {}
                None => {
                    return Err(Error::validation(format!("record {} has no label", r.id)));
                }
            }
        }
        let negative_count = records.len() - positive_count;
        Ok(Self {
            records,
            positive_count,
            negative_count,
        })
    }

    pub fn records(&self) -> &[TweetRecord] {
        &self.records
    }

    pub fn into_records(self) -> Vec<TweetRecord> {
        self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn positive_count(&self) -> usize {
        self.positive_count
    }

    pub fn negative_count(&self) -> usize {
        self.negative_count
    }

    pub fn labels(&self) -> Vec<u8> {
        self.records.iter().map(|r| r.label.unwrap_or(0)).collect()
    }

    pub fn texts(&self) -> impl Iterator<Item = &str> {
        self.records.iter().map(|r| r.text.as_str())
    }

    fn subset(&self, indices: &[usize]) -> Self {
        let records: Vec<TweetRecord> = indices.iter().map(|&i| self.records[i].clone()).collect();
        let positive_count = records.iter().filter(|r| r.label == Some(1)).count();
        Self {
            negative_count: records.len() - positive_count,
            positive_count,
            records,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CorpusFormat {
    Jsonl,
    Tsv,
}

impl CorpusFormat {
    /// Guesses the format from a file extension, defaulting to JSONL.
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some("tsv") | Some("txt") => CorpusFormat::Tsv,
            _ => CorpusFormat::Jsonl,
        }
    }
}

impl FromStr for CorpusFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "jsonl" => Ok(Self::Jsonl),
            "tsv" => Ok(Self::Tsv),
            other => Err(Error::config(format!("unknown corpus format {other:?}"))),
        }
    }
}

impl fmt::Display for CorpusFormat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Jsonl => "jsonl",
            Self::Tsv => "tsv",
        })
    }
}

fn parse_label(raw: &str, line: usize) -> Result<u8> {
    match raw.trim() {
        "0" => Ok(0),
        "1" => Ok(1),
        other => Err(Error::Parse {
            line,
            message: format!("label {other:?} is not 0 or 1"),
        }),
    }
}

#[derive(Deserialize)]
struct RawJsonRecord {
    id: serde_json::Value,
    text: String,
    #[serde(default)]
    label: Option<serde_json::Value>,
    #[serde(default)]
    timestamp: Option<String>,
}

/// Parses one corpus line. Returns `None` for blank lines.
pub fn parse_record(line: &str, format: CorpusFormat, line_no: usize) -> Result<Option<TweetRecord>> {
    if line.trim().is_empty() {
        return Ok(None);
    }
    let record = match format {
        CorpusFormat::Jsonl => {
            let raw: RawJsonRecord = serde_json::from_str(line).map_err(|e| Error::Parse {
                line: line_no,
                message: e.to_string(),
            })?;
            let id = match raw.id {
                serde_json::Value::String(s) => s,
                serde_json::Value::Number(n) => n.to_string(),
                other => {
                    return Err(Error::Parse {
                        line: line_no,
                        message: format!("id must be a string or number, got {other}"),
                    })
                }
            };
            let label = match raw.label {
                None | Some(serde_json::Value::Null) => None,
                Some(serde_json::Value::Number(n)) => Some(parse_label(&n.to_string(), line_no)?),
                Some(serde_json::Value::String(s)) => Some(parse_label(&s, line_no)?),
                Some(other) => {
                    return Err(Error::Parse {
                        line: line_no,
                        message: format!("label {other} is not 0 or 1"),
                    })
                }
            };
            TweetRecord {
                id,
                text: raw.text,
                label,
                timestamp: raw.timestamp,
            }
        }
        CorpusFormat::Tsv => {
            let mut parts = line.splitn(3, '\t');
            let (Some(id), Some(label), Some(text)) = (parts.next(), parts.next(), parts.next()) else {
                return Err(Error::Parse {
                    line: line_no,
                    message: "expected id<TAB>label<TAB>text".into(),
                });
            };
            let label = if label.trim().is_empty() {
                None
            } else {
                Some(parse_label(label, line_no)?)
            };
            TweetRecord::new(id, text, label)
        }
    };
    if record.text.trim().is_empty() {
        return Err(Error::Parse {
            line: line_no,
            message: format!("record {} has empty text", record.id),
        });
    }
    Ok(Some(record))
}

/// Reads every record of a corpus file, labeled or not.
pub fn read_records(path: &Path, format: CorpusFormat) -> Result<Vec<TweetRecord>> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut records = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if let Some(r) = parse_record(&line, format, i + 1)? {
            records.push(r);
        }
    }
    Ok(records)
}

pub fn load_dataset(path: &Path, format: CorpusFormat) -> Result<LabeledDataset> {
    let records = read_records(path, format)?;
    if records.is_empty() {
        return Err(Error::validation("no records"));
    }
    LabeledDataset::new(records)
}

pub fn write_jsonl(path: &Path, records: &[TweetRecord]) -> Result<()> {
    let mut out = String::new();
    for r in records {
        out.push_str(&serde_json::to_string(r)?);
        out.push('\n');
    }
    std::fs::write(path, out).map_err(|e| Error::io(path, e))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetStats {
    pub n_records: usize,
    pub positive_count: usize,
    pub negative_count: usize,
    /// positives / total
    pub positive_ratio: f64,
    pub unique_tokens: usize,
    pub total_tokens: usize,
}

pub fn dataset_stats(ds: &LabeledDataset, config: &PreprocessConfig) -> DatasetStats {
    let mut unique = HashSet::new();
    let mut total_tokens = 0;
    for text in ds.texts() {
        let seq = preprocess(text, config);
        total_tokens += seq.len();
        unique.extend(seq.tokens);
    }
    DatasetStats {
        n_records: ds.len(),
        positive_count: ds.positive_count(),
        negative_count: ds.negative_count(),
        positive_ratio: if ds.is_empty() {
            0.0
        } else {
            ds.positive_count() as f64 / ds.len() as f64
        },
        unique_tokens: unique.len(),
        total_tokens,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub fractions: Vec<f64>,
    pub seed: u64,
    pub stratified: bool,
}

impl SplitSpec {
    pub fn new(fractions: Vec<f64>, seed: u64, stratified: bool) -> Result<Self> {
        let spec = Self {
            fractions,
            seed,
            stratified,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.fractions.is_empty() {
            return Err(Error::config("split needs at least one fraction"));
        }
        for &f in &self.fractions {
            if !(f > 0.0 && f <= 1.0) {
                return Err(Error::config(format!("split fraction {f} outside (0,1]")));
            }
        }
        let sum: f64 = self.fractions.iter().sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(Error::config(format!("split fractions sum to {sum}, expected 1")));
        }
        Ok(())
    }
}

/// Part sizes `floor(n * f)` with the remainder added to the first part.
pub fn part_sizes(n: usize, fractions: &[f64]) -> Vec<usize> {
    let mut sizes: Vec<usize> = fractions.iter().map(|f| (n as f64 * f).floor() as usize).collect();
    let assigned: usize = sizes.iter().sum();
    sizes[0] += n - assigned.min(n);
    sizes
}

/// Splits a dataset into disjoint parts. Within each part, records keep
/// their original relative order.
pub fn split(ds: &LabeledDataset, spec: &SplitSpec) -> Result<Vec<LabeledDataset>> {
    spec.validate()?;
    if ds.is_empty() {
        return Err(Error::validation("cannot split an empty dataset"));
    }
    let k = spec.fractions.len();
    let mut parts: Vec<Vec<usize>> = vec![Vec::new(); k];
    let mut rng = rng::seeded(spec.seed);

    let groups: Vec<Vec<usize>> = if spec.stratified {
        let (pos, neg): (Vec<usize>, Vec<usize>) =
            (0..ds.len()).partition(|&i| ds.records[i].label == Some(1));
        vec![pos, neg]
    } else {
        vec![(0..ds.len()).collect()]
    };

    for mut group in groups {
        group.shuffle(&mut rng);
        let sizes = part_sizes(group.len(), &spec.fractions);
        if spec.stratified && k > 1 && sizes.iter().any(|&s| s == 0) {
            return Err(Error::validation(format!(
                "dataset too small for stratified split: a class with {} records cannot fill {k} parts",
                group.len()
            )));
        }
        let mut offset = 0;
        for (part, size) in parts.iter_mut().zip(sizes) {
            part.extend_from_slice(&group[offset..offset + size]);
            offset += size;
        }
    }

    Ok(parts
        .into_iter()
        .map(|mut idx| {
            idx.sort_unstable();
            ds.subset(&idx)
        })
        .collect())
}

/// Returns index pairs `(train, validation)` for k-fold cross validation.
///
/// Records are shuffled (per class when stratified) and dealt round-robin,
/// so validation fold sizes differ by at most one.
pub fn kfold_indices(labels: &[u8], k: usize, seed: u64, stratified: bool) -> Result<Vec<(Vec<usize>, Vec<usize>)>> {
    let n = labels.len();
    if k < 2 {
        return Err(Error::config("k-fold needs k >= 2"));
    }
    if k > n {
        return Err(Error::validation(format!("k = {k} exceeds the {n} records")));
    }
    let mut rng = rng::seeded(seed);
    let order: Vec<usize> = if stratified {
        let (mut pos, mut neg): (Vec<usize>, Vec<usize>) = (0..n).partition(|&i| labels[i] == 1);
        for (name, class) in [("positive", &pos), ("negative", &neg)] {
            if class.len() < k {
                return Err(Error::validation(format!(
                    "stratified {k}-fold needs at least {k} {name} records, found {}",
                    class.len()
                )));
            }
        }
        pos.shuffle(&mut rng);
        neg.shuffle(&mut rng);
        pos.into_iter().chain(neg).collect()
    } else {
        let mut all: Vec<usize> = (0..n).collect();
        all.shuffle(&mut rng);
        all
    };

    let mut fold_of = vec![0usize; n];
    for (pos, &i) in order.iter().enumerate() {
        fold_of[i] = pos % k;
    }
    Ok((0..k)
        .map(|f| {
            let (val, train): (Vec<usize>, Vec<usize>) = (0..n).partition(|&i| fold_of[i] == f);
            (train, val)
        })
        .collect())
}

pub fn kfold(
    ds: &LabeledDataset,
    k: usize,
    seed: u64,
    stratified: bool,
) -> Result<Vec<(LabeledDataset, LabeledDataset)>> {
    let folds = kfold_indices(&ds.labels(), k, seed, stratified)?;
    Ok(folds
        .into_iter()
        .map(|(train, val)| (ds.subset(&train), ds.subset(&val)))
        .collect())
}

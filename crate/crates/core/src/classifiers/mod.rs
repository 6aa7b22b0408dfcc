//! Classical binary classifiers over sparse TF-IDF rows or dense tweet
//! vectors.
//!
//! Every trainer consumes a [`FeatureMatrix`] and a [`ModelSpec`] and yields a
//! [`TrainedModel`], which serializes to self-describing JSON.

pub mod gbt;
pub mod nb;
pub mod rf;
pub mod sgd;
pub mod svm;
pub mod tree;

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::SparseVector;

pub use gbt::GbtParams;
pub use nb::NbParams;
pub use rf::RfParams;
pub use sgd::SgdParams;
pub use svm::SvmParams;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Features {
    Sparse(Vec<SparseVector>),
    Dense(Vec<Vec<f64>>),
}

/// A borrowed feature row.
#[derive(Debug, Clone, Copy)]
pub enum RowRef<'a> {
    Sparse(&'a SparseVector),
    Dense(&'a [f64]),
}

impl RowRef<'_> {
    pub fn dim(&self) -> usize {
        match self {
            RowRef::Sparse(s) => s.dim,
            RowRef::Dense(d) => d.len(),
        }
    }

    pub fn get(&self, j: usize) -> f64 {
        match self {
            RowRef::Sparse(s) => s.get(j),
            RowRef::Dense(d) => d[j],
        }
    }

    pub fn dot_dense(&self, w: &[f64]) -> f64 {
        match self {
            RowRef::Sparse(s) => s.dot_dense(w),
            RowRef::Dense(d) => d.iter().zip(w).map(|(a, b)| a * b).sum(),
        }
    }

    pub fn dot(&self, other: &RowRef<'_>) -> f64 {
        match (self, other) {
            (RowRef::Sparse(a), RowRef::Sparse(b)) => a.dot(b),
            (RowRef::Dense(a), RowRef::Dense(b)) => a.iter().zip(*b).map(|(x, y)| x * y).sum(),
            (RowRef::Sparse(a), RowRef::Dense(b)) | (RowRef::Dense(b), RowRef::Sparse(a)) => a.dot_dense(b),
        }
    }

    pub fn squared_norm(&self) -> f64 {
        match self {
            RowRef::Sparse(s) => s.squared_norm(),
            RowRef::Dense(d) => d.iter().map(|x| x * x).sum(),
        }
    }

    /// Calls `f(column, value)` for every stored entry.
    pub fn for_each_nonzero(&self, mut f: impl FnMut(usize, f64)) {
        match self {
            RowRef::Sparse(s) => s.entries.iter().for_each(|&(c, v)| f(c, v)),
            RowRef::Dense(d) => d.iter().enumerate().filter(|e| *e.1 != 0.0).for_each(|(c, &v)| f(c, v)),
        }
    }

    pub fn to_owned_row(&self) -> Row {
        match self {
            RowRef::Sparse(s) => Row::Sparse((*s).clone()),
            RowRef::Dense(d) => Row::Dense(d.to_vec()),
        }
    }
}

/// An owned feature row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Row {
    Sparse(SparseVector),
    Dense(Vec<f64>),
}

impl Row {
    pub fn as_ref(&self) -> RowRef<'_> {
        match self {
            Row::Sparse(s) => RowRef::Sparse(s),
            Row::Dense(d) => RowRef::Dense(d),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureMatrix {
    features: Features,
    labels: Vec<u8>,
    dim: usize,
}

impl FeatureMatrix {
    pub fn sparse(rows: Vec<SparseVector>, labels: Vec<u8>, dim: usize) -> Result<Self> {
        for r in &rows {
            if r.dim != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    actual: r.dim,
                });
            }
            if r.entries.iter().any(|e| e.0 >= dim) {
                return Err(Error::validation("sparse column id out of range"));
            }
        }
        Self::checked(Features::Sparse(rows), labels, dim)
    }

    pub fn dense(rows: Vec<Vec<f64>>, labels: Vec<u8>) -> Result<Self> {
        let dim = rows.first().map_or(0, Vec::len);
        for r in &rows {
            if r.len() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    actual: r.len(),
                });
            }
        }
        Self::checked(Features::Dense(rows), labels, dim)
    }

    fn checked(features: Features, labels: Vec<u8>, dim: usize) -> Result<Self> {
        let n = match &features {
            Features::Sparse(r) => r.len(),
            Features::Dense(r) => r.len(),
        };
        if n != labels.len() {
            return Err(Error::validation(format!("{n} rows but {} labels", labels.len())));
        }
        if labels.iter().any(|&l| l > 1) {
            return Err(Error::validation("labels must be 0 or 1"));
        }
        let m = Self { features, labels, dim };
        if m.rows().any(|r| {
            let mut bad = false;
            r.for_each_nonzero(|_, v| bad |= !v.is_finite());
            bad
        }) {
            return Err(Error::validation("feature values must be finite"));
        }
        Ok(m)
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn labels(&self) -> &[u8] {
        &self.labels
    }

    pub fn features(&self) -> &Features {
        &self.features
    }

    pub fn is_sparse(&self) -> bool {
        matches!(self.features, Features::Sparse(_))
    }

    pub fn row(&self, i: usize) -> RowRef<'_> {
        match &self.features {
            Features::Sparse(r) => RowRef::Sparse(&r[i]),
            Features::Dense(r) => RowRef::Dense(&r[i]),
        }
    }

    pub fn rows(&self) -> impl Iterator<Item = RowRef<'_>> {
        (0..self.len()).map(|i| self.row(i))
    }

    pub fn subset(&self, indices: &[usize]) -> FeatureMatrix {
        let features = match &self.features {
            Features::Sparse(r) => Features::Sparse(indices.iter().map(|&i| r[i].clone()).collect()),
            Features::Dense(r) => Features::Dense(indices.iter().map(|&i| r[i].clone()).collect()),
        };
        FeatureMatrix {
            features,
            labels: indices.iter().map(|&i| self.labels[i]).collect(),
            dim: self.dim,
        }
    }

    pub fn with_labels(&self, labels: Vec<u8>) -> Result<FeatureMatrix> {
        Self::checked(self.features.clone(), labels, self.dim)
    }

    pub fn class_counts(&self) -> (usize, usize) {
        let pos = self.labels.iter().filter(|&&l| l == 1).count();
        (self.len() - pos, pos)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassWeights {
    pub w0: f64,
    pub w1: f64,
}

impl ClassWeights {
    pub const UNIFORM: ClassWeights = ClassWeights { w0: 1.0, w1: 1.0 };

    pub fn of(&self, label: u8) -> f64 {
        if label == 1 {
            self.w1
        } else {
            self.w0
        }
    }
}

/// `w_c = N / (2 * N_c)`.
pub fn balanced_weights(labels: &[u8]) -> Result<ClassWeights> {
    let n = labels.len();
    let pos = labels.iter().filter(|&&l| l == 1).count();
    let neg = n - pos;
    if pos == 0 || neg == 0 {
        return Err(Error::validation("balanced weights need both classes"));
    }
    Ok(ClassWeights {
        w0: n as f64 / (2.0 * neg as f64),
        w1: n as f64 / (2.0 * pos as f64),
    })
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ClassWeightMode {
    Balanced,
    #[default]
    None,
}

impl ClassWeightMode {
    pub fn weights(self, labels: &[u8]) -> Result<ClassWeights> {
        match self {
            ClassWeightMode::Balanced => balanced_weights(labels),
            ClassWeightMode::None => Ok(ClassWeights::UNIFORM),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    Nb,
    Sgd,
    Svm,
    Rf,
    Gbt,
}

impl ModelKind {
    pub const ALL: [ModelKind; 5] = [ModelKind::Nb, ModelKind::Sgd, ModelKind::Svm, ModelKind::Rf, ModelKind::Gbt];

    pub fn name(self) -> &'static str {
        match self {
            ModelKind::Nb => "nb",
            ModelKind::Sgd => "sgd",
            ModelKind::Svm => "svm",
            ModelKind::Rf => "rf",
            ModelKind::Gbt => "gbt",
        }
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ModelKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::config(format!("unknown model kind {s:?}")))
    }
}

/// Kind-specific hyperparameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum ModelParams {
    Nb(NbParams),
    Sgd(SgdParams),
    Svm(SvmParams),
    Rf(RfParams),
    Gbt(GbtParams),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    #[serde(flatten)]
    pub params: ModelParams,
    #[serde(default)]
    pub seed: u64,
}

impl ModelSpec {
    /// The hyperparameters from the reference settings table for `kind`.
    pub fn reference(kind: ModelKind) -> Self {
        let params = match kind {
            ModelKind::Nb => ModelParams::Nb(NbParams::default()),
            ModelKind::Sgd => ModelParams::Sgd(SgdParams::default()),
            ModelKind::Svm => ModelParams::Svm(SvmParams::default()),
            ModelKind::Rf => ModelParams::Rf(RfParams::default()),
            ModelKind::Gbt => ModelParams::Gbt(GbtParams::default()),
        };
        Self { params, seed: 0 }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn kind(&self) -> ModelKind {
        match self.params {
            ModelParams::Nb(_) => ModelKind::Nb,
            ModelParams::Sgd(_) => ModelKind::Sgd,
            ModelParams::Svm(_) => ModelKind::Svm,
            ModelParams::Rf(_) => ModelKind::Rf,
            ModelParams::Gbt(_) => ModelKind::Gbt,
        }
    }

    /// The hyperparameters as a flat JSON object (without `kind`).
    pub fn hyperparameters(&self) -> serde_json::Map<String, serde_json::Value> {
        let mut v = match serde_json::to_value(&self.params) {
            Ok(serde_json::Value::Object(m)) => m,
            _ => unreachable!("model params serialize to an object"),
        };
        v.remove("kind");
        v
    }

    /// Returns a copy with some hyperparameters replaced; unknown names and
    /// ill-typed values are rejected.
    pub fn with_overrides(&self, overrides: &BTreeMap<String, serde_json::Value>) -> Result<Self> {
        let mut obj = self.hyperparameters();
        for (k, v) in overrides {
            if k == "seed" {
                continue;
            }
            if !obj.contains_key(k) {
                return Err(Error::config(format!("{} has no hyperparameter {k:?}", self.kind())));
            }
            obj.insert(k.clone(), v.clone());
        }
        obj.insert("kind".into(), self.kind().name().into());
        let params: ModelParams = serde_json::from_value(serde_json::Value::Object(obj))
            .map_err(|e| Error::config(format!("invalid hyperparameters: {e}")))?;
        let seed = match overrides.get("seed") {
            Some(s) => s
                .as_u64()
                .ok_or_else(|| Error::config("seed must be a non-negative integer"))?,
            None => self.seed,
        };
        let spec = Self { params, seed };
        spec.validate()?;
        Ok(spec)
    }

    /// Parses a JSON object of hyperparameters for `kind`, filling the rest
    /// from the reference settings.
    pub fn from_json(kind: ModelKind, json: &serde_json::Value) -> Result<Self> {
        let obj = json
            .as_object()
            .ok_or_else(|| Error::config("hyperparameters must be a JSON object"))?;
        let overrides: BTreeMap<String, serde_json::Value> =
            obj.iter().filter(|(k, _)| k.as_str() != "kind").map(|(k, v)| (k.clone(), v.clone())).collect();
        Self::reference(kind).with_overrides(&overrides)
    }

    pub fn validate(&self) -> Result<()> {
        match &self.params {
            ModelParams::Nb(p) => p.validate(),
            ModelParams::Sgd(p) => p.validate(),
            ModelParams::Svm(p) => p.validate(),
            ModelParams::Rf(p) => p.validate(),
            ModelParams::Gbt(p) => p.validate(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Learned {
    Nb(nb::NbModel),
    Sgd(sgd::LinearModel),
    Svm(svm::SvmModel),
    Rf(rf::Forest),
    Gbt(gbt::Booster),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainedModel {
    pub spec: ModelSpec,
    pub dim: usize,
    pub n_train: usize,
    pub parameters: Learned,
}

impl TrainedModel {
    pub fn kind(&self) -> ModelKind {
        self.spec.kind()
    }

    fn check_dim(&self, x: &RowRef<'_>) -> Result<()> {
        if x.dim() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                actual: x.dim(),
            });
        }
        Ok(())
    }

    /// Probability-like score in `[0, 1]`, except for SVM where it is the raw
    /// decision value.
    pub fn predict_score(&self, x: RowRef<'_>) -> Result<f64> {
        self.check_dim(&x)?;
        Ok(match &self.parameters {
            Learned::Nb(m) => m.score(x),
            Learned::Sgd(m) => m.score(x),
            Learned::Svm(m) => m.decision(x),
            Learned::Rf(m) => m.score(x),
            Learned::Gbt(m) => m.score(x),
        })
    }

    pub fn predict_scores(&self, x: &FeatureMatrix) -> Result<Vec<f64>> {
        x.rows().map(|r| self.predict_score(r)).collect()
    }

    /// Calibrated probability when the model provides one (SVM with Platt
    /// scaling); otherwise the score.
    pub fn predict_proba(&self, x: RowRef<'_>) -> Result<f64> {
        match &self.parameters {
            Learned::Svm(m) if m.platt.is_some() => {
                self.check_dim(&x)?;
                Ok(m.probability(x).expect("platt present"))
            }
            _ => self.predict_score(x),
        }
    }

    /// 0 for SVM decision values, 0.5 for probability scores.
    pub fn default_threshold(&self) -> f64 {
        match self.parameters {
            Learned::Svm(_) => 0.0,
            _ => 0.5,
        }
    }

    pub fn predict_label(&self, x: RowRef<'_>, threshold: f64) -> Result<u8> {
        Ok(u8::from(self.predict_score(x)? >= threshold))
    }

    pub fn save_json(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string(self)?;
        std::fs::write(path, text).map_err(|e| Error::io(path, e))
    }

    pub fn load_json(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(serde_json::from_str(&text)?)
    }
}

pub fn train(x: &FeatureMatrix, spec: &ModelSpec) -> Result<TrainedModel> {
    spec.validate()?;
    if x.is_empty() {
        return Err(Error::validation("cannot train on an empty feature matrix"));
    }
    let parameters = match &spec.params {
        ModelParams::Nb(p) => Learned::Nb(nb::train_nb(x, p)?),
        ModelParams::Sgd(p) => Learned::Sgd(sgd::train_sgd(x, p, spec.seed)?),
        ModelParams::Svm(p) => Learned::Svm(svm::train_svm(x, p, spec.seed)?),
        ModelParams::Rf(p) => Learned::Rf(rf::train_rf(x, p, spec.seed)?),
        ModelParams::Gbt(p) => Learned::Gbt(gbt::train_gbt(x, p, spec.seed)?),
    };
    Ok(TrainedModel {
        spec: spec.clone(),
        dim: x.dim(),
        n_train: x.len(),
        parameters,
    })
}

pub(crate) fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

//! Run configuration stored as TOML.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::arabic_text::{PreprocessConfig, StemmerKind, StopList};
use crate::classifiers::{ModelKind, ModelSpec};
use crate::embeddings::{EmbedMode, EmbedTrainConfig};
use crate::error::{Error, Result};
use crate::features::{NgramMode, TfidfConfig};
use crate::neural::CnnConfig;

/// Which representation feeds the classifier.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FeatureKind {
    TfidfUni,
    TfidfNgram,
    Cbow,
    Fasttext,
}

impl FeatureKind {
    pub const ALL: [FeatureKind; 4] = [FeatureKind::TfidfUni, FeatureKind::TfidfNgram, FeatureKind::Cbow, FeatureKind::Fasttext];

    pub fn name(self) -> &'static str {
        match self {
            FeatureKind::TfidfUni => "tfidf-uni",
            FeatureKind::TfidfNgram => "tfidf-ngram",
            FeatureKind::Cbow => "cbow",
            FeatureKind::Fasttext => "fasttext",
        }
    }

    pub fn is_tfidf(self) -> bool {
        matches!(self, FeatureKind::TfidfUni | FeatureKind::TfidfNgram)
    }

    pub fn ngram_mode(self) -> NgramMode {
        match self {
            FeatureKind::TfidfNgram => NgramMode::BiTri,
            _ => NgramMode::Unigram,
        }
    }

    pub fn embed_mode(self) -> Option<EmbedMode> {
        match self {
            FeatureKind::Cbow => Some(EmbedMode::Cbow),
            FeatureKind::Fasttext => Some(EmbedMode::Fasttext),
            _ => None,
        }
    }
}

impl fmt::Display for FeatureKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for FeatureKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::config(format!("unknown feature kind {s:?}")))
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PathsConfig {
    pub corpus: Option<PathBuf>,
    pub stoplist: Option<PathBuf>,
    pub embeddings: Option<PathBuf>,
    pub models: Option<PathBuf>,
    pub reports: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PreprocessSettings {
    pub stemmer: StemmerKind,
}

impl Default for PreprocessSettings {
    fn default() -> Self {
        Self {
            stemmer: StemmerKind::Light,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SplitSettings {
    pub fractions: Vec<f64>,
    pub stratified: bool,
}

impl Default for SplitSettings {
    fn default() -> Self {
        Self {
            fractions: vec![0.8, 0.2],
            stratified: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ModelSettings {
    pub kind: ModelKind,
    pub features: FeatureKind,
    /// Overrides on top of the reference hyperparameters for `kind`.
    pub params: BTreeMap<String, serde_json::Value>,
}

impl Default for ModelSettings {
    fn default() -> Self {
        Self {
            kind: ModelKind::Gbt,
            features: FeatureKind::Fasttext,
            params: BTreeMap::new(),
        }
    }
}

impl ModelSettings {
    pub fn spec(&self, seed: u64) -> Result<ModelSpec> {
        ModelSpec::reference(self.kind).with_seed(seed).with_overrides(&self.params)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RunConfig {
    pub seed: u64,
    pub paths: PathsConfig,
    pub preprocess: PreprocessSettings,
    pub tfidf: TfidfConfig,
    pub embed: EmbedTrainConfig,
    pub split: SplitSettings,
    pub model: ModelSettings,
    pub cnn: CnnConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: 42,
            paths: PathsConfig::default(),
            preprocess: PreprocessSettings::default(),
            tfidf: TfidfConfig::default(),
            embed: EmbedTrainConfig::default(),
            split: SplitSettings::default(),
            model: ModelSettings::default(),
            cnn: CnnConfig::default(),
        }
    }
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::config(e.to_string()))
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_toml()?).map_err(|e| Error::io(path, e))
    }

    /// Checks every section and that input paths exist.
    pub fn validate(&self) -> Result<()> {
        for (name, p) in [
            ("corpus", &self.paths.corpus),
            ("stoplist", &self.paths.stoplist),
            ("embeddings", &self.paths.embeddings),
        ] {
            if let Some(p) = p {
                if !p.exists() {
                    return Err(Error::config(format!("{name} path {} does not exist", p.display())));
                }
            }
        }
        self.tfidf.validate()?;
        self.embed.validate()?;
        self.cnn.validate()?;
        self.model.spec(self.seed)?;
        crate::corpus::SplitSpec::new(self.split.fractions.clone(), self.seed, self.split.stratified)?;
        Ok(())
    }

    pub fn preprocess_config(&self) -> Result<PreprocessConfig> {
        let mut cfg = PreprocessConfig::default().with_stemmer(self.preprocess.stemmer);
        if let Some(p) = &self.paths.stoplist {
            let stops = StopList::load(p, &cfg.rules)?;
            cfg = cfg.with_stops(stops);
        }
        Ok(cfg)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn toml_round_trip() {
        let mut cfg = RunConfig::default();
        cfg.seed = 7;
        cfg.paths.corpus = Some("data/tweets.jsonl".into());
        cfg.model.kind = ModelKind::Rf;
        cfg.model.params.insert("max_depth".into(), serde_json::json!(4));
        cfg.split.fractions = vec![0.6, 0.2, 0.2];
        let text = cfg.to_toml().unwrap();
        let back = RunConfig::from_toml(&text).unwrap();
        assert_eq!(back, cfg);
    }

    #[test]
    fn partial_file_uses_defaults() {
        let cfg = RunConfig::from_toml("seed = 3\n[model]\nkind = \"nb\"\n").unwrap();
        assert_eq!(cfg.seed, 3);
        assert_eq!(cfg.model.kind, ModelKind::Nb);
        assert_eq!(cfg.embed.dim, 200);
    }

    #[test]
    fn missing_input_path_fails_validation() {
        let mut cfg = RunConfig::default();
        cfg.paths.corpus = Some("/nonexistent/corpus.jsonl".into());
        assert!(cfg.validate().is_err());
        assert!(RunConfig::default().validate().is_ok());
    }

    #[test]
    fn feature_kind_names() {
        for k in FeatureKind::ALL {
            assert_eq!(k.name().parse::<FeatureKind>().unwrap(), k);
        }
    }
}

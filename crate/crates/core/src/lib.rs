//! Misinformation detection for short Arabic social-media texts.
//!
//! The crate is organized as a pipeline:
//!
//! - [`corpus`]: labeled tweet datasets, on-disk formats, splits and k-fold.
//! - [`arabic_text`]: cleaning, orthographic normalization, tokenization,
//!   stop-word removal and light stemming.
//! - [`features`]: n-gram vocabularies and TF-IDF sparse vectors.
//! - [`embeddings`]: CBOW and subword (FastText-style) word embeddings with
//!   negative sampling, plus tweet-vector averaging.
//! - [`classifiers`]: naive Bayes, SGD (modified Huber), kernel SVM,
//!   random forest and second-order gradient-boosted trees.
//! - [`neural`]: a multi-scale 1-D convolutional text classifier trained with
//!   cross-entropy or a pairwise AUC surrogate.
//! - [`eval`]: confusion counts, ROC/AUC, metric reports and grid search.
//! - [`config`]: the run configuration file consumed by the CLI.

pub mod arabic_text;
pub mod classifiers;
pub mod config;
pub mod corpus;
pub mod embeddings;
pub mod error;
pub mod eval;
pub mod features;
pub mod neural;
pub(crate) mod rng;

pub use arabic_text::{PreprocessConfig, StopList, TokenSequence};
pub use classifiers::{ClassWeights, FeatureMatrix, ModelKind, ModelSpec, TrainedModel};
pub use config::{FeatureKind, RunConfig};
pub use corpus::{LabeledDataset, SplitSpec, TweetRecord};
pub use embeddings::{EmbedTrainConfig, EmbeddingTable, TweetVector};
pub use error::{Error, Result};
pub use eval::{ConfusionCounts, MetricsReport, RocCurve};
pub use features::{SparseVector, TfidfConfig, Vocabulary};
pub use neural::{CnnConfig, CnnModel};

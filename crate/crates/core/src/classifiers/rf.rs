//! Random forest of entropy trees on bootstrap samples.

use rand::seq::index::sample;
use rand::Rng as _;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::tree::{grow, ColumnStore, Entropy, Stats, Tree};
use super::{ClassWeightMode, FeatureMatrix, RowRef};
use crate::error::{Error, Result};
use crate::rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SplitQuality {
    Entropy,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MaxFeatures {
    Log2,
    Sqrt,
    All,
}

impl MaxFeatures {
    pub fn count(self, d: usize) -> usize {
        let k = match self {
            MaxFeatures::Log2 => (d as f64).log2().ceil() as usize,
            MaxFeatures::Sqrt => (d as f64).sqrt().ceil() as usize,
            MaxFeatures::All => d,
        };
        k.clamp(1, d.max(1))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RfParams {
    pub criterion: SplitQuality,
    pub max_depth: usize,
    pub max_features: MaxFeatures,
    pub n_estimators: usize,
    pub class_weight: ClassWeightMode,
    pub bootstrap: bool,
}

impl Default for RfParams {
    fn default() -> Self {
        Self {
            criterion: SplitQuality::Entropy,
            max_depth: 8,
            max_features: MaxFeatures::Log2,
            n_estimators: 500,
            class_weight: ClassWeightMode::Balanced,
            bootstrap: true,
        }
    }
}

impl RfParams {
    pub fn validate(&self) -> Result<()> {
        if self.n_estimators == 0 {
            return Err(Error::config("rf n_estimators must be positive"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Forest {
    pub trees: Vec<Tree>,
}

impl Forest {
    /// Mean class-1 leaf probability over the trees.
    pub fn score(&self, x: RowRef<'_>) -> f64 {
        self.trees.iter().map(|t| t.predict(x)).sum::<f64>() / self.trees.len() as f64
    }
}

pub fn train_rf(x: &FeatureMatrix, p: &RfParams, seed: u64) -> Result<Forest> {
    p.validate()?;
    let w = p.class_weight.weights(x.labels())?;
    let cols = ColumnStore::new(x);
    let n = x.len();
    let d = x.dim();
    let k = p.max_features.count(d);
    let trees = (0..p.n_estimators)
        .into_par_iter()
        .map(|t| {
            let mut r = rng::derive(seed, t as u64);
            let mut counts = vec![0u32; n];
            if p.bootstrap {
                for _ in 0..n {
                    counts[r.gen_range(0..n)] += 1;
                }
            } else {
                counts.fill(1);
            }
            let stats: Vec<Stats> = x
                .labels()
                .iter()
                .zip(&counts)
                .map(|(&l, &c)| {
                    let v = f64::from(c) * w.of(l);
                    if l == 1 {
                        [0.0, v]
                    } else {
                        [v, 0.0]
                    }
                })
                .collect();
            let active: Vec<bool> = counts.iter().map(|&c| c > 0).collect();
            grow(x, &cols, &stats, &active, p.max_depth, &Entropy, || sample(&mut r, d, k).into_vec())
        })
        .collect();
    Ok(Forest { trees })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn log2_feature_count() {
        assert_eq!(MaxFeatures::Log2.count(5000), 13);
        assert_eq!(MaxFeatures::Log2.count(200), 8);
        assert_eq!(MaxFeatures::Log2.count(1), 1);
    }

    #[test]
    fn forest_is_deterministic_and_separates() {
        let rows: Vec<Vec<f64>> = (0..60).map(|i| vec![(i % 5) as f64, if i % 3 == 0 { 1.0 } else { -1.0 }]).collect();
        let labels: Vec<u8> = (0..60).map(|i| u8::from(i % 3 == 0)).collect();
        let x = FeatureMatrix::dense(rows, labels).unwrap();
        let p = RfParams {
            n_estimators: 20,
            ..Default::default()
        };
        let a = train_rf(&x, &p, 3).unwrap();
        let b = train_rf(&x, &p, 3).unwrap();
        assert_eq!(a, b);
        for (i, r) in x.rows().enumerate() {
            let s = a.score(r);
            assert!(if x.labels()[i] == 1 { s > 0.5 } else { s < 0.5 });
        }
    }
}

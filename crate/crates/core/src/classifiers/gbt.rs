//! Second-order gradient boosting of regression trees on logistic loss.

use rand::seq::index::sample;
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use super::tree::{grow, ColumnStore, SecondOrder, Stats, Tree};
use super::{sigmoid, ClassWeightMode, FeatureMatrix, RowRef};
use crate::error::{Error, Result};
use crate::rng;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GbtParams {
    pub colsample_bytree: f64,
    pub gamma: f64,
    pub max_depth: usize,
    pub min_child_weight: f64,
    pub subsample: f64,
    pub n_rounds: usize,
    pub learning_rate: f64,
    pub lambda: f64,
    /// Initial margin (log-odds) before the first round.
    pub base_score: f64,
    pub class_weight: ClassWeightMode,
}

impl Default for GbtParams {
    fn default() -> Self {
        Self {
            colsample_bytree: 0.8,
            gamma: 2.0,
            max_depth: 5,
            min_child_weight: 1.0,
            subsample: 1.0,
            n_rounds: 100,
            learning_rate: 0.3,
            lambda: 1.0,
            base_score: 0.0,
            class_weight: ClassWeightMode::None,
        }
    }
}

impl GbtParams {
    pub fn validate(&self) -> Result<()> {
        let frac = |v: f64| v > 0.0 && v <= 1.0;
        if !frac(self.colsample_bytree) || !frac(self.subsample) {
            return Err(Error::config("gbt colsample_bytree and subsample must lie in (0, 1]"));
        }
        if self.gamma < 0.0 || self.lambda < 0.0 || self.min_child_weight < 0.0 || self.learning_rate < 0.0 {
            return Err(Error::config("gbt gamma, lambda, min_child_weight, learning_rate must be non-negative"));
        }
        if !self.base_score.is_finite() {
            return Err(Error::config("gbt base_score must be finite"));
        }
        Ok(())
    }

    pub fn criterion(&self) -> SecondOrder {
        SecondOrder {
            lambda: self.lambda,
            gamma: self.gamma,
            min_child_weight: self.min_child_weight,
            learning_rate: self.learning_rate,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Booster {
    pub base_score: f64,
    pub trees: Vec<Tree>,
}

impl Booster {
    pub fn margin(&self, x: RowRef<'_>) -> f64 {
        self.base_score + self.trees.iter().map(|t| t.predict(x)).sum::<f64>()
    }

    pub fn score(&self, x: RowRef<'_>) -> f64 {
        sigmoid(self.margin(x))
    }
}

/// Per-row `[g, h]` for logistic loss at margins `f`.
pub fn gradients(labels: &[u8], margins: &[f64], weights: &[f64]) -> Vec<Stats> {
    labels
        .iter()
        .zip(margins)
        .zip(weights)
        .map(|((&y, &f), &w)| {
            let p = sigmoid(f);
            [w * (p - f64::from(y)), w * p * (1.0 - p)]
        })
        .collect()
}

pub fn train_gbt(x: &FeatureMatrix, p: &GbtParams, seed: u64) -> Result<Booster> {
    p.validate()?;
    let cw = p.class_weight.weights(x.labels())?;
    let weights: Vec<f64> = x.labels().iter().map(|&l| cw.of(l)).collect();
    let cols = ColumnStore::new(x);
    let crit = p.criterion();
    let (n, d) = (x.len(), x.dim());
    let n_cols = ((p.colsample_bytree * d as f64) as usize).clamp(1, d.max(1));
    let mut margins = vec![p.base_score; n];
    let mut trees = Vec::with_capacity(p.n_rounds);
    let mut r = rng::seeded(seed);
    for _ in 0..p.n_rounds {
        let stats = gradients(x.labels(), &margins, &weights);
        let active: Vec<bool> = if p.subsample < 1.0 {
            (0..n).map(|_| r.gen::<f64>() < p.subsample).collect()
        } else {
            vec![true; n]
        };
        let features = if n_cols < d {
            sample(&mut r, d, n_cols).into_vec()
        } else {
            (0..d).collect()
        };
        let tree = grow(x, &cols, &stats, &active, p.max_depth, &crit, || features.clone());
        for (m, row) in margins.iter_mut().zip(x.rows()) {
            *m += tree.predict(row);
        }
        trees.push(tree);
    }
    Ok(Booster {
        base_score: p.base_score,
        trees,
    })
}

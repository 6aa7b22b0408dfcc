//! Multinomial naive Bayes with additive smoothing.

use serde::{Deserialize, Serialize};

use super::{FeatureMatrix, RowRef};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct NbParams {
    pub alpha: f64,
    pub fit_prior: bool,
    /// Min-max scale dense inputs to `[0, 1]` per feature, since the
    /// multinomial likelihood needs non-negative counts.
    pub shift_dense: bool,
}

impl Default for NbParams {
    fn default() -> Self {
        Self {
            alpha: 0.5,
            fit_prior: true,
            shift_dense: true,
        }
    }
}

impl NbParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0) {
            return Err(Error::config("nb alpha must be positive"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MinMax {
    pub min: Vec<f64>,
    pub range: Vec<f64>,
}

impl MinMax {
    fn apply(&self, j: usize, v: f64) -> f64 {
        if self.range[j] > 0.0 {
            ((v - self.min[j]) / self.range[j]).max(0.0)
        } else {
            0.0
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NbModel {
    pub class_log_prior: [f64; 2],
    /// `feature_log_prob[c][j] = ln P(j | c)`.
    pub feature_log_prob: [Vec<f64>; 2],
    pub scaling: Option<MinMax>,
}

impl NbModel {
    pub fn joint_log_likelihood(&self, x: RowRef<'_>) -> [f64; 2] {
        let mut jll = self.class_log_prior;
        let mut acc = |j: usize, v: f64| {
            let v = match &self.scaling {
                Some(s) => s.apply(j, v),
                None => v,
            };
            jll[0] += v * self.feature_log_prob[0][j];
            jll[1] += v * self.feature_log_prob[1][j];
        };
        match (&self.scaling, x) {
            // zeros map to non-zero values after scaling
            (Some(_), _) => (0..x.dim()).for_each(|j| acc(j, x.get(j))),
            (None, _) => x.for_each_nonzero(acc),
        }
        jll
    }

    /// Posterior probability of class 1.
    pub fn score(&self, x: RowRef<'_>) -> f64 {
        let [a, b] = self.joint_log_likelihood(x);
        1.0 / (1.0 + (a - b).exp())
    }
}

pub fn train_nb(x: &FeatureMatrix, p: &NbParams) -> Result<NbModel> {
    p.validate()?;
    let d = x.dim();
    let scaling = if !x.is_sparse() && p.shift_dense {
        let mut min = vec![f64::INFINITY; d];
        let mut max = vec![f64::NEG_INFINITY; d];
        for r in x.rows() {
            for j in 0..d {
                let v = r.get(j);
                min[j] = min[j].min(v);
                max[j] = max[j].max(v);
            }
        }
        let range = min.iter().zip(&max).map(|(a, b)| b - a).collect();
        Some(MinMax { min, range })
    } else {
        None
    };

    let mut counts = [vec![0.0; d], vec![0.0; d]];
    let mut n_class = [0usize; 2];
    for (r, &y) in x.rows().zip(x.labels()) {
        n_class[y as usize] += 1;
        let c = &mut counts[y as usize];
        let mut bad = false;
        match &scaling {
            Some(s) => (0..d).for_each(|j| c[j] += s.apply(j, r.get(j))),
            None => r.for_each_nonzero(|j, v| {
                bad |= v < 0.0;
                c[j] += v;
            }),
        }
        if bad {
            return Err(Error::validation("naive Bayes needs non-negative features"));
        }
    }

    let n = x.len() as f64;
    let class_log_prior = if p.fit_prior {
        if n_class.contains(&0) {
            return Err(Error::validation("naive Bayes prior needs both classes"));
        }
        [(n_class[0] as f64 / n).ln(), (n_class[1] as f64 / n).ln()]
    } else {
        [0.5f64.ln(); 2]
    };
    let feature_log_prob = counts.map(|c| {
        let denom = (c.iter().sum::<f64>() + p.alpha * d as f64).ln();
        c.iter().map(|v| (v + p.alpha).ln() - denom).collect()
    });
    Ok(NbModel {
        class_log_prior,
        feature_log_prob,
        scaling,
    })
}

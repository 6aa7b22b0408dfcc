//! Linear model trained by plain SGD on the modified-Huber loss with an L2
//! penalty and the "optimal" learning-rate schedule `1 / (alpha (t0 + t))`.

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::{ClassWeightMode, FeatureMatrix, RowRef};
use crate::error::{Error, Result};
use crate::rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SgdLoss {
    ModifiedHuber,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Penalty {
    L2,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SgdParams {
    pub alpha: f64,
    /// Accepted for schema compatibility; has no effect under an L2 penalty.
    pub l1_ratio: f64,
    pub loss: SgdLoss,
    pub penalty: Penalty,
    pub max_iter: usize,
    pub tol: f64,
    pub n_iter_no_change: usize,
    pub class_weight: ClassWeightMode,
}

impl Default for SgdParams {
    fn default() -> Self {
        Self {
            alpha: 0.0056,
            l1_ratio: 0.13,
            loss: SgdLoss::ModifiedHuber,
            penalty: Penalty::L2,
            max_iter: 6000,
            tol: 1e-4,
            n_iter_no_change: 5,
            class_weight: ClassWeightMode::Balanced,
        }
    }
}

impl SgdParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0) || !self.alpha.is_finite() {
            return Err(Error::config("sgd alpha must be positive"));
        }
        if !(0.0..=1.0).contains(&self.l1_ratio) {
            return Err(Error::config("sgd l1_ratio must lie in [0, 1]"));
        }
        if self.max_iter == 0 || self.n_iter_no_change == 0 {
            return Err(Error::config("sgd max_iter and n_iter_no_change must be positive"));
        }
        Ok(())
    }
}

/// Modified-Huber loss of margin `z = y f`.
pub fn modified_huber(z: f64) -> f64 {
    if z >= 1.0 {
        0.0
    } else if z >= -1.0 {
        (1.0 - z) * (1.0 - z)
    } else {
        -4.0 * z
    }
}

/// Derivative of the loss with respect to `f` for label `y` in {-1, +1}.
pub fn modified_huber_dloss(f: f64, y: f64) -> f64 {
    let z = f * y;
    if z >= 1.0 {
        0.0
    } else if z >= -1.0 {
        -2.0 * (1.0 - z) * y
    } else {
        -4.0 * y
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearModel {
    pub weights: Vec<f64>,
    pub intercept: f64,
    pub epochs: usize,
}

impl LinearModel {
    pub fn decision(&self, x: RowRef<'_>) -> f64 {
        x.dot_dense(&self.weights) + self.intercept
    }

    /// `clip((1 + f) / 2, 0, 1)`.
    pub fn score(&self, x: RowRef<'_>) -> f64 {
        ((1.0 + self.decision(x)) / 2.0).clamp(0.0, 1.0)
    }
}

pub fn train_sgd(x: &FeatureMatrix, p: &SgdParams, seed: u64) -> Result<LinearModel> {
    p.validate()?;
    let cw = p.class_weight.weights(x.labels())?;
    let n = x.len();
    let mut w = vec![0.0; x.dim()];
    let mut wscale = 1.0f64;
    let mut b = 0.0;
    let intercept_decay = if x.is_sparse() { 0.01 } else { 1.0 };

    // heuristic initial step from the loss slope at a typical weight size
    let typw = (1.0 / p.alpha.sqrt()).sqrt();
    let eta0 = typw / modified_huber_dloss(-typw, 1.0).abs().max(1.0);
    let t0 = 1.0 / (eta0 * p.alpha);

    let mut order: Vec<usize> = (0..n).collect();
    let mut r = rng::seeded(seed);
    let mut t = 1.0f64;
    let mut best_loss = f64::INFINITY;
    let mut no_improve = 0;
    let mut epochs = 0;
    for _ in 0..p.max_iter {
        epochs += 1;
        order.shuffle(&mut r);
        let mut sum_loss = 0.0;
        for &i in &order {
            let row = x.row(i);
            let y = if x.labels()[i] == 1 { 1.0 } else { -1.0 };
            let f = row.dot_dense(&w) * wscale + b;
            let sw = cw.of(x.labels()[i]);
            sum_loss += sw * modified_huber(y * f);
            let eta = 1.0 / (p.alpha * (t0 + t - 1.0));
            let update = (-eta * modified_huber_dloss(f, y) * sw).clamp(-1e12, 1e12);

            wscale *= (1.0 - eta * p.alpha).max(0.0);
            if wscale < 1e-9 {
                w.iter_mut().for_each(|v| *v *= wscale);
                wscale = 1.0;
            }
            if update != 0.0 {
                let step = update / wscale;
                row.for_each_nonzero(|j, v| w[j] += step * v);
                b += update * intercept_decay;
            }
            t += 1.0;
        }
        let mean = sum_loss / n as f64;
        if !mean.is_finite() {
            return Err(Error::Numerical("sgd loss diverged".into()));
        }
        if mean > best_loss - p.tol {
            no_improve += 1;
        } else {
            no_improve = 0;
        }
        best_loss = best_loss.min(mean);
        if no_improve >= p.n_iter_no_change {
            break;
        }
    }
    w.iter_mut().for_each(|v| *v *= wscale);
    Ok(LinearModel {
        weights: w,
        intercept: b,
        epochs,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn loss_pieces_meet() {
        assert_eq!(modified_huber(1.0), 0.0);
        assert_eq!(modified_huber(-1.0), 4.0);
        assert_eq!(modified_huber(-1.0 - 1e-15), 4.0 + 4e-15);
        assert_eq!(modified_huber(0.0), 1.0);
        // derivative by central difference in each region
        for f in [-3.0, -0.4, 0.3, 2.0] {
            for y in [-1.0, 1.0] {
                let h = 1e-6;
                let fd = (modified_huber(y * (f + h)) - modified_huber(y * (f - h))) / (2.0 * h);
                assert!((fd - modified_huber_dloss(f, y)).abs() < 1e-6);
            }
        }
    }

    #[test]
    fn separable_toy_set() {
        let rows: Vec<Vec<f64>> = (0..40)
            .map(|i| {
                let s = if i % 2 == 0 { 1.0 } else { -1.0 };
                vec![s * (1.0 + (i % 5) as f64 * 0.3), (i % 7) as f64 * 0.1 - 0.3]
            })
            .collect();
        let labels: Vec<u8> = (0..40).map(|i| u8::from(i % 2 == 0)).collect();
        let x = FeatureMatrix::dense(rows, labels).unwrap();
        let p = SgdParams {
            alpha: 1e-4,
            ..Default::default()
        };
        let m = train_sgd(&x, &p, 1).unwrap();
        let mut hinge = 0.0;
        for (r, &l) in x.rows().zip(x.labels()) {
            let y = if l == 1 { 1.0 } else { -1.0 };
            assert_eq!(u8::from(m.score(r) >= 0.5), l);
            hinge += modified_huber(y * m.decision(r));
        }
        assert!(hinge / 40.0 < 0.05, "{hinge}");
    }

    #[test]
    fn huge_alpha_shrinks_to_half() {
        let x = FeatureMatrix::dense(vec![vec![1.0], vec![-1.0], vec![2.0], vec![-2.0]], vec![1, 0, 1, 0]).unwrap();
        let p = SgdParams {
            alpha: 1e6,
            ..Default::default()
        };
        let m = train_sgd(&x, &p, 0).unwrap();
        assert!(m.weights[0].abs() < 1e-3);
        for r in x.rows() {
            assert!((m.score(r) - 0.5).abs() < 0.05);
        }
    }
}

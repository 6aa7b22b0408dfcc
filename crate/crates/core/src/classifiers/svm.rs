//! Soft-margin kernel SVM solved on the dual with second-order working-set
//! selection (SMO), plus optional sigmoid calibration of decision values.

use std::collections::VecDeque;
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{ClassWeightMode, ClassWeights, FeatureMatrix, Row, RowRef};
use crate::corpus::kfold_indices;
use crate::error::{Error, Result};

pub const MAX_ROWS: usize = 50_000;
const TAU: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Kernel {
    Rbf,
    Linear,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SvmParams {
    #[serde(rename = "C")]
    pub c: f64,
    pub gamma: f64,
    pub kernel: Kernel,
    pub probability: bool,
    pub class_weight: ClassWeightMode,
    pub tol: f64,
    pub max_iter: usize,
    pub cache_mb: usize,
}

impl Default for SvmParams {
    fn default() -> Self {
        Self {
            c: 1.0,
            gamma: 1.0,
            kernel: Kernel::Rbf,
            probability: true,
            class_weight: ClassWeightMode::Balanced,
            tol: 1e-3,
            max_iter: 10_000_000,
            cache_mb: 256,
        }
    }
}

impl SvmParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.c > 0.0) || !(self.gamma > 0.0) || !(self.tol > 0.0) {
            return Err(Error::config("svm C, gamma and tol must be positive"));
        }
        Ok(())
    }
}

fn kernel_value(kind: Kernel, gamma: f64, a: RowRef<'_>, b: RowRef<'_>, na: f64, nb: f64) -> f64 {
    match kind {
        Kernel::Linear => a.dot(&b),
        Kernel::Rbf => (-gamma * (na + nb - 2.0 * a.dot(&b)).max(0.0)).exp(),
    }
}

/// Sigmoid `P(y=1 | f) = 1 / (1 + exp(a f + b))`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Platt {
    pub a: f64,
    pub b: f64,
}

impl Platt {
    pub fn probability(&self, f: f64) -> f64 {
        let z = f * self.a + self.b;
        if z >= 0.0 {
            (-z).exp() / (1.0 + (-z).exp())
        } else {
            1.0 / (1.0 + z.exp())
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SvmModel {
    pub kernel: Kernel,
    pub gamma: f64,
    pub support: Vec<Row>,
    /// `alpha_i * y_i` per support vector.
    pub coef: Vec<f64>,
    pub rho: f64,
    pub iterations: usize,
    pub platt: Option<Platt>,
}

impl SvmModel {
    pub fn decision(&self, x: RowRef<'_>) -> f64 {
        let nx = x.squared_norm();
        let s: f64 = self
            .support
            .iter()
            .zip(&self.coef)
            .map(|(sv, c)| {
                let sv = sv.as_ref();
                c * kernel_value(self.kernel, self.gamma, sv, x, sv.squared_norm(), nx)
            })
            .sum();
        s - self.rho
    }

    pub fn probability(&self, x: RowRef<'_>) -> Option<f64> {
        self.platt.map(|p| p.probability(self.decision(x)))
    }
}

struct QMatrix<'a> {
    x: &'a FeatureMatrix,
    y: Vec<f64>,
    norms: Vec<f64>,
    kind: Kernel,
    gamma: f64,
    rows: Vec<Option<Arc<Vec<f64>>>>,
    fifo: VecDeque<usize>,
    capacity: usize,
}

impl<'a> QMatrix<'a> {
    fn new(x: &'a FeatureMatrix, y: Vec<f64>, p: &SvmParams) -> Self {
        let n = x.len();
        let capacity = ((p.cache_mb << 20) / (8 * n.max(1))).max(2);
        Self {
            norms: x.rows().map(|r| r.squared_norm()).collect(),
            x,
            y,
            kind: p.kernel,
            gamma: p.gamma,
            rows: vec![None; n],
            fifo: VecDeque::new(),
            capacity,
        }
    }

    fn diag(&self, i: usize) -> f64 {
        match self.kind {
            Kernel::Rbf => 1.0,
            Kernel::Linear => self.norms[i],
        }
    }

    /// Row `i` of `Q_ij = y_i y_j K(x_i, x_j)`.
    fn row(&mut self, i: usize) -> Result<Arc<Vec<f64>>> {
        if let Some(r) = &self.rows[i] {
            return Ok(Arc::clone(r));
        }
        let xi = self.x.row(i);
        let (yi, ni) = (self.y[i], self.norms[i]);
        let compute = |j: usize| yi * self.y[j] * kernel_value(self.kind, self.gamma, xi, self.x.row(j), ni, self.norms[j]);
        let n = self.x.len();
        let row: Vec<f64> = if n >= 256 {
            (0..n).into_par_iter().map(compute).collect()
        } else {
            (0..n).map(compute).collect()
        };
        if let Some(j) = row.iter().position(|v| !v.is_finite()) {
            return Err(Error::Numerical(format!("non-finite kernel value K({i}, {j})")));
        }
        let row = Arc::new(row);
        if self.fifo.len() >= self.capacity {
            if let Some(old) = self.fifo.pop_front() {
                self.rows[old] = None;
            }
        }
        self.fifo.push_back(i);
        self.rows[i] = Some(Arc::clone(&row));
        Ok(row)
    }
}

struct Solution {
    alpha: Vec<f64>,
    rho: f64,
    iterations: usize,
}

fn solve(q: &mut QMatrix<'_>, cw: ClassWeights, p: &SvmParams) -> Result<Solution> {
    let n = q.y.len();
    let y = q.y.clone();
    let cap: Vec<f64> = y.iter().map(|&v| p.c * if v > 0.0 { cw.w1 } else { cw.w0 }).collect();
    let qd: Vec<f64> = (0..n).map(|i| q.diag(i)).collect();
    let mut alpha = vec![0.0; n];
    let mut g = vec![-1.0; n];
    let upper = |a: &[f64], t: usize| a[t] >= cap[t];
    let lower = |a: &[f64], t: usize| a[t] <= 0.0;

    let mut iter = 0;
    loop {
        // i maximizes -y_t G_t over the up set
        let mut gmax = f64::NEG_INFINITY;
        let mut gmax_idx = None;
        for t in 0..n {
            if y[t] > 0.0 {
                if !upper(&alpha, t) && -g[t] >= gmax {
                    gmax = -g[t];
                    gmax_idx = Some(t);
                }
            } else if !lower(&alpha, t) && g[t] >= gmax {
                gmax = g[t];
                gmax_idx = Some(t);
            }
        }
        let Some(i) = gmax_idx else { break };
        let qi = q.row(i)?;
        let mut gmax2 = f64::NEG_INFINITY;
        let mut gmin_idx = None;
        let mut obj_min = f64::INFINITY;
        for t in 0..n {
            if y[t] > 0.0 {
                if !lower(&alpha, t) {
                    let diff = gmax + g[t];
                    gmax2 = gmax2.max(g[t]);
                    if diff > 0.0 {
                        let quad = (qd[i] + qd[t] - 2.0 * y[i] * qi[t]).max(TAU);
                        let obj = -diff * diff / quad;
                        if obj <= obj_min {
                            obj_min = obj;
                            gmin_idx = Some(t);
                        }
                    }
                }
            } else if !upper(&alpha, t) {
                let diff = gmax - g[t];
                gmax2 = gmax2.max(-g[t]);
                if diff > 0.0 {
                    let quad = (qd[i] + qd[t] + 2.0 * y[i] * qi[t]).max(TAU);
                    let obj = -diff * diff / quad;
                    if obj <= obj_min {
                        obj_min = obj;
                        gmin_idx = Some(t);
                    }
                }
            }
        }
        let Some(j) = gmin_idx else { break };
        if gmax + gmax2 < p.tol {
            break;
        }
        if iter >= p.max_iter {
            return Err(Error::NotConverged(format!(
                "svm solver hit {} iterations with KKT gap {:.3e} (tol {:.1e}), {} rows",
                p.max_iter,
                gmax + gmax2,
                p.tol,
                n
            )));
        }
        iter += 1;

        let qj = q.row(j)?;
        let (ci, cj) = (cap[i], cap[j]);
        let (old_i, old_j) = (alpha[i], alpha[j]);
        if y[i] != y[j] {
            let quad = {
                let v = qd[i] + qd[j] + 2.0 * qi[j];
                if v <= 0.0 {
                    TAU
                } else {
                    v
                }
            };
            let delta = (-g[i] - g[j]) / quad;
            let diff = alpha[i] - alpha[j];
            alpha[i] += delta;
            alpha[j] += delta;
            if diff > 0.0 {
                if alpha[j] < 0.0 {
                    alpha[j] = 0.0;
                    alpha[i] = diff;
                }
            } else if alpha[i] < 0.0 {
                alpha[i] = 0.0;
                alpha[j] = -diff;
            }
            if diff > ci - cj {
                if alpha[i] > ci {
                    alpha[i] = ci;
                    alpha[j] = ci - diff;
                }
            } else if alpha[j] > cj {
                alpha[j] = cj;
                alpha[i] = cj + diff;
            }
        } else {
            let quad = {
                let v = qd[i] + qd[j] - 2.0 * qi[j];
                if v <= 0.0 {
                    TAU
                } else {
                    v
                }
            };
            let delta = (g[i] - g[j]) / quad;
            let sum = alpha[i] + alpha[j];
            alpha[i] -= delta;
            alpha[j] += delta;
            if sum > ci {
                if alpha[i] > ci {
                    alpha[i] = ci;
                    alpha[j] = sum - ci;
                }
            } else if alpha[j] < 0.0 {
                alpha[j] = 0.0;
                alpha[i] = sum;
            }
            if sum > cj {
                if alpha[j] > cj {
                    alpha[j] = cj;
                    alpha[i] = sum - cj;
                }
            } else if alpha[i] < 0.0 {
                alpha[i] = 0.0;
                alpha[j] = sum;
            }
        }
        let (di, dj) = (alpha[i] - old_i, alpha[j] - old_j);
        for k in 0..n {
            g[k] += qi[k] * di + qj[k] * dj;
        }
    }

    let (mut ub, mut lb) = (f64::INFINITY, f64::NEG_INFINITY);
    let (mut n_free, mut sum_free) = (0usize, 0.0);
    for t in 0..n {
        let yg = y[t] * g[t];
        if upper(&alpha, t) {
            if y[t] < 0.0 {
                ub = ub.min(yg);
            } else {
                lb = lb.max(yg);
            }
        } else if lower(&alpha, t) {
            if y[t] > 0.0 {
                ub = ub.min(yg);
            } else {
                lb = lb.max(yg);
            }
        } else {
            n_free += 1;
            sum_free += yg;
        }
    }
    let rho = if n_free > 0 {
        sum_free / n_free as f64
    } else {
        (ub + lb) / 2.0
    };
    Ok(Solution {
        alpha,
        rho,
        iterations: iter,
    })
}

fn fit_svm(x: &FeatureMatrix, p: &SvmParams) -> Result<SvmModel> {
    let cw = p.class_weight.weights(x.labels())?;
    let y: Vec<f64> = x.labels().iter().map(|&l| if l == 1 { 1.0 } else { -1.0 }).collect();
    let mut q = QMatrix::new(x, y.clone(), p);
    let sol = solve(&mut q, cw, p)?;
    let mut support = Vec::new();
    let mut coef = Vec::new();
    for (i, &a) in sol.alpha.iter().enumerate() {
        if a > 0.0 {
            support.push(x.row(i).to_owned_row());
            coef.push(a * y[i]);
        }
    }
    Ok(SvmModel {
        kernel: p.kernel,
        gamma: p.gamma,
        support,
        coef,
        rho: sol.rho,
        iterations: sol.iterations,
        platt: None,
    })
}

/// Fits the sigmoid by Newton's method with backtracking on the regularized
/// targets of Platt's method.
pub fn fit_platt(decisions: &[f64], labels: &[u8]) -> Platt {
    let prior1 = labels.iter().filter(|&&l| l == 1).count() as f64;
    let prior0 = labels.len() as f64 - prior1;
    let hi = (prior1 + 1.0) / (prior1 + 2.0);
    let lo = 1.0 / (prior0 + 2.0);
    let t: Vec<f64> = labels.iter().map(|&l| if l == 1 { hi } else { lo }).collect();
    let objective = |a: f64, b: f64| -> f64 {
        decisions
            .iter()
            .zip(&t)
            .map(|(&f, &ti)| {
                let z = f * a + b;
                if z >= 0.0 {
                    ti * z + (-z).exp().ln_1p()
                } else {
                    (ti - 1.0) * z + z.exp().ln_1p()
                }
            })
            .sum()
    };
    let (mut a, mut b) = (0.0, ((prior0 + 1.0) / (prior1 + 1.0)).ln());
    let mut fval = objective(a, b);
    for _ in 0..100 {
        let (mut h11, mut h22, mut h21, mut g1, mut g2) = (1e-12, 1e-12, 0.0, 0.0, 0.0);
        for (&f, &ti) in decisions.iter().zip(&t) {
            let z = f * a + b;
            let (pp, qq) = if z >= 0.0 {
                let e = (-z).exp();
                (e / (1.0 + e), 1.0 / (1.0 + e))
            } else {
                let e = z.exp();
                (1.0 / (1.0 + e), e / (1.0 + e))
            };
            let d2 = pp * qq;
            h11 += f * f * d2;
            h22 += d2;
            h21 += f * d2;
            let d1 = ti - pp;
            g1 += f * d1;
            g2 += d1;
        }
        if g1.abs() < 1e-5 && g2.abs() < 1e-5 {
            break;
        }
        let det = h11 * h22 - h21 * h21;
        let da = -(h22 * g1 - h21 * g2) / det;
        let db = -(-h21 * g1 + h11 * g2) / det;
        let gd = g1 * da + g2 * db;
        let mut step = 1.0;
        while step >= 1e-10 {
            let (na, nb) = (a + step * da, b + step * db);
            let nf = objective(na, nb);
            if nf < fval + 1e-4 * step * gd {
                a = na;
                b = nb;
                fval = nf;
                break;
            }
            step /= 2.0;
        }
        if step < 1e-10 {
            break;
        }
    }
    Platt { a, b }
}

pub fn train_svm(x: &FeatureMatrix, p: &SvmParams, seed: u64) -> Result<SvmModel> {
    p.validate()?;
    if x.len() > MAX_ROWS {
        return Err(Error::validation(format!("svm limited to {MAX_ROWS} rows, got {}", x.len())));
    }
    let mut model = fit_svm(x, p)?;
    if p.probability {
        let plain = SvmParams {
            probability: false,
            ..p.clone()
        };
        // out-of-fold decision values; fall back to in-sample ones when a
        // class is too small for three folds
        let mut dec = vec![0.0; x.len()];
        match kfold_indices(x.labels(), 3, seed, true) {
            Ok(folds) => {
                for (tr, va) in folds {
                    let m = fit_svm(&x.subset(&tr), &plain)?;
                    for i in va {
                        dec[i] = m.decision(x.row(i));
                    }
                }
            }
            Err(_) => {
                for (i, d) in dec.iter_mut().enumerate() {
                    *d = model.decision(x.row(i));
                }
            }
        }
        model.platt = Some(fit_platt(&dec, x.labels()));
    }
    Ok(model)
}

//! Metrics, ROC construction and cross-validated grid search.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::classifiers::{train, FeatureMatrix, ModelSpec, TrainedModel};
use crate::corpus::kfold_indices;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionCounts {
    pub tp: usize,
    pub fp: usize,
    pub tn: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
}

impl ConfusionCounts {
    pub fn total(&self) -> usize {
        self.tp + self.fp + self.tn + self.fn_
    }

    pub fn precision(&self) -> f64 {
        ratio(self.tp, self.tp + self.fp)
    }

    pub fn recall(&self) -> f64 {
        ratio(self.tp, self.tp + self.fn_)
    }

    pub fn accuracy(&self) -> f64 {
        ratio(self.tp + self.tn, self.total())
    }

    pub fn f1(&self) -> f64 {
        f1_score(self.precision(), self.recall())
    }
}

fn ratio(a: usize, b: usize) -> f64 {
    if b == 0 {
        0.0
    } else {
        a as f64 / b as f64
    }
}

/// Harmonic mean of precision and recall; 0 when both are 0.
pub fn f1_score(precision: f64, recall: f64) -> f64 {
    if precision + recall > 0.0 {
        2.0 * precision * recall / (precision + recall)
    } else {
        0.0
    }
}

pub fn confusion(labels: &[u8], predicted: &[u8]) -> Result<ConfusionCounts> {
    if labels.len() != predicted.len() {
        return Err(Error::DimensionMismatch {
            expected: labels.len(),
            actual: predicted.len(),
        });
    }
    let mut c = ConfusionCounts::default();
    for (&y, &p) in labels.iter().zip(predicted) {
        match (y, p) {
            (1, 1) => c.tp += 1,
            (0, 1) => c.fp += 1,
            (0, 0) => c.tn += 1,
            (1, 0) => c.fn_ += 1,
            _ => return Err(Error::validation("labels must be 0 or 1")),
        }
    }
    Ok(c)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RocCurve {
    /// `(fpr, tpr)` from `(0, 0)` to `(1, 1)`.
    pub points: Vec<(f64, f64)>,
    /// Score cut per point, descending; the first is `+inf`.
    pub thresholds: Vec<f64>,
}

impl RocCurve {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("threshold,fpr,tpr\n");
        for (t, (f, p)) in self.thresholds.iter().zip(&self.points) {
            let _ = writeln!(out, "{t},{f},{p}");
        }
        out
    }
}

fn class_counts(labels: &[u8], scores: &[f64]) -> Result<(usize, usize)> {
    if labels.len() != scores.len() {
        return Err(Error::DimensionMismatch {
            expected: labels.len(),
            actual: scores.len(),
        });
    }
    if scores.iter().any(|s| !s.is_finite()) {
        return Err(Error::validation("scores must be finite"));
    }
    let pos = labels.iter().filter(|&&l| l == 1).count();
    let neg = labels.len() - pos;
    if pos == 0 || neg == 0 {
        return Err(Error::AucUndefined);
    }
    Ok((pos, neg))
}

/// ROC curve with tied scores collapsed into one step, and the trapezoidal
/// area under it.
pub fn roc_auc(labels: &[u8], scores: &[f64]) -> Result<(RocCurve, f64)> {
    let (p, n) = class_counts(labels, scores)?;
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));

    let mut points = vec![(0.0, 0.0)];
    let mut thresholds = vec![f64::INFINITY];
    let (mut tp, mut fp) = (0u64, 0u64);
    // twice the area in units of one (positive, negative) pair
    let mut area2: u128 = 0;
    let mut i = 0;
    while i < order.len() {
        let s = scores[order[i]];
        let (mut dp, mut dn) = (0u64, 0u64);
        while i < order.len() && scores[order[i]] == s {
            if labels[order[i]] == 1 {
                dp += 1;
            } else {
                dn += 1;
            }
            i += 1;
        }
        area2 += u128::from(dn) * u128::from(2 * tp + dp);
        tp += dp;
        fp += dn;
        points.push((fp as f64 / n as f64, tp as f64 / p as f64));
        thresholds.push(s);
    }
    let auc = area2 as f64 / (2.0 * p as f64 * n as f64);
    Ok((RocCurve { points, thresholds }, auc))
}

/// Fraction of (positive, negative) pairs ranked correctly, ties counting
/// one half, by direct enumeration.
pub fn auc_pair_oracle(labels: &[u8], scores: &[f64]) -> Result<f64> {
    let (p, n) = class_counts(labels, scores)?;
    let mut wins = 0.0;
    for (i, &li) in labels.iter().enumerate() {
        if li != 1 {
            continue;
        }
        for (j, &lj) in labels.iter().enumerate() {
            if lj != 0 {
                continue;
            }
            if scores[i] > scores[j] {
                wins += 1.0;
            } else if scores[i] == scores[j] {
                wins += 0.5;
            }
        }
    }
    Ok(wins / (p as f64 * n as f64))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub accuracy: f64,
    pub auc: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub threshold: f64,
    pub confusion: ConfusionCounts,
}

pub fn compute_metrics(labels: &[u8], scores: &[f64], threshold: f64) -> Result<MetricsReport> {
    if labels.is_empty() {
        return Err(Error::validation("no examples to evaluate"));
    }
    let (_, auc) = roc_auc(labels, scores)?;
    let predicted: Vec<u8> = scores.iter().map(|&s| u8::from(s >= threshold)).collect();
    let c = confusion(labels, &predicted)?;
    Ok(MetricsReport {
        accuracy: c.accuracy(),
        auc,
        precision: c.precision(),
        recall: c.recall(),
        f1: c.f1(),
        threshold,
        confusion: c,
    })
}

pub type ParamGrid = BTreeMap<String, Vec<Value>>;

/// Cartesian product in enumeration order: names sorted, the last name
/// varying fastest.
pub fn expand_grid(grid: &ParamGrid) -> Result<Vec<BTreeMap<String, Value>>> {
    if grid.is_empty() || grid.values().any(Vec::is_empty) {
        return Err(Error::config("parameter grid must name at least one value per parameter"));
    }
    let mut out = vec![BTreeMap::new()];
    for (name, values) in grid {
        out = out
            .into_iter()
            .flat_map(|base| {
                values.iter().map(move |v| {
                    let mut m = base.clone();
                    m.insert(name.clone(), v.clone());
                    m
                })
            })
            .collect();
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridRow {
    pub params: BTreeMap<String, Value>,
    pub fold_aucs: Vec<f64>,
    pub mean_auc: f64,
    pub std_auc: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridResult {
    pub best_index: usize,
    pub best_spec: ModelSpec,
    pub rows: Vec<GridRow>,
    pub model: TrainedModel,
}

impl GridResult {
    pub fn to_csv(&self) -> String {
        let names: Vec<&String> = self.rows.first().map(|r| r.params.keys().collect()).unwrap_or_default();
        let mut out = String::new();
        for n in &names {
            let _ = write!(out, "{n},");
        }
        out.push_str("mean_auc,std_auc\n");
        for r in &self.rows {
            for v in r.params.values() {
                let cell = match v {
                    Value::String(s) => s.clone(),
                    other => other.to_string(),
                };
                let _ = write!(out, "{cell},");
            }
            let _ = writeln!(out, "{},{}", r.mean_auc, r.std_auc);
        }
        out
    }
}

/// Picks the configuration with the highest mean stratified k-fold AUC
/// (first in enumeration order on ties) and refits it on all of `x`.
pub fn grid_search(x: &FeatureMatrix, base: &ModelSpec, grid: &ParamGrid, k: usize, seed: u64) -> Result<GridResult> {
    let configs = expand_grid(grid)?;
    let specs: Vec<ModelSpec> = configs.iter().map(|c| base.with_overrides(c)).collect::<Result<_>>()?;
    let folds = kfold_indices(x.labels(), k, seed, true)?;
    let subsets: Vec<(FeatureMatrix, FeatureMatrix)> = folds.iter().map(|(tr, va)| (x.subset(tr), x.subset(va))).collect();
    for (tr, _) in &subsets {
        let (neg, pos) = tr.class_counts();
        if neg == 0 || pos == 0 {
            return Err(Error::validation("a training fold holds a single class"));
        }
    }

    let rows: Vec<GridRow> = specs
        .par_iter()
        .zip(configs)
        .map(|(spec, params)| {
            let fold_aucs: Vec<f64> = subsets
                .iter()
                .map(|(tr, va)| {
                    let m = train(tr, spec)?;
                    let s = m.predict_scores(va)?;
                    Ok(roc_auc(va.labels(), &s)?.1)
                })
                .collect::<Result<_>>()?;
            let mean = fold_aucs.iter().sum::<f64>() / fold_aucs.len() as f64;
            let var = fold_aucs.iter().map(|a| (a - mean).powi(2)).sum::<f64>() / fold_aucs.len() as f64;
            Ok(GridRow {
                params,
                fold_aucs,
                mean_auc: mean,
                std_auc: var.sqrt(),
            })
        })
        .collect::<Result<_>>()?;

    let mut best_index = 0;
    for (i, r) in rows.iter().enumerate() {
        if r.mean_auc > rows[best_index].mean_auc {
            best_index = i;
        }
    }
    let best_spec = specs[best_index].clone();
    let model = train(x, &best_spec)?;
    Ok(GridResult {
        best_index,
        best_spec,
        rows,
        model,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn confusion_enumeration() {
        let c = confusion(&[1, 0, 1, 0], &[1, 0, 0, 1]).unwrap();
        assert_eq!((c.tp, c.tn, c.fn_, c.fp), (1, 1, 1, 1));
        assert!(confusion(&[1], &[1, 0]).is_err());
    }

    #[test]
    fn reported_f1_arithmetic() {
        assert!((f1_score(0.72, 0.27) - 0.392727).abs() < 1e-6);
        assert_eq!(f1_score(0.0, 0.0), 0.0);
    }

    #[test]
    fn simple_auc_cases() {
        assert_eq!(auc_pair_oracle(&[1, 0], &[0.9, 0.1]).unwrap(), 1.0);
        assert_eq!(auc_pair_oracle(&[1, 0], &[0.1, 0.9]).unwrap(), 0.0);
        assert_eq!(roc_auc(&[1, 0, 1, 0], &[3.0; 4]).unwrap().1, 0.5);
        let (curve, auc) = roc_auc(&[0, 0, 1, 1], &[-5.0, 1.0, 7.0, 100.0]).unwrap();
        assert_eq!(auc, 1.0);
        assert_eq!(curve.points.first(), Some(&(0.0, 0.0)));
        assert_eq!(curve.points.last(), Some(&(1.0, 1.0)));
        assert!(matches!(roc_auc(&[1, 1], &[0.1, 0.2]), Err(Error::AucUndefined)));
    }

    #[test]
    fn metrics_on_perfect_scores() {
        let m = compute_metrics(&[1, 0, 1], &[0.9, 0.2, 0.6], 0.5).unwrap();
        assert_eq!((m.accuracy, m.auc, m.precision, m.recall, m.f1), (1.0, 1.0, 1.0, 1.0, 1.0));
    }

    #[test]
    fn grid_enumeration_order() {
        let mut g = ParamGrid::new();
        g.insert("b".into(), vec![1.into(), 2.into()]);
        g.insert("a".into(), vec!["x".into(), "y".into()]);
        let e = expand_grid(&g).unwrap();
        let flat: Vec<(String, i64)> = e
            .iter()
            .map(|m| (m["a"].as_str().unwrap().to_owned(), m["b"].as_i64().unwrap()))
            .collect();
        assert_eq!(
            flat,
            vec![("x".into(), 1), ("x".into(), 2), ("y".into(), 1), ("y".into(), 2)]
        );
    }
}

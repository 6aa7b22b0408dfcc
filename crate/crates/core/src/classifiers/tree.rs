//! Level-wise exact split search shared by the forest and boosting trainers.
//!
//! Every row carries a two-component statistic (class weights for the
//! entropy criterion, gradient/hessian sums for boosting). Columns are stored
//! as sorted nonzero entries; the zeros of a node form one implicit group
//! whose statistics are the node total minus the nonzero sums.

use serde::{Deserialize, Serialize};

use super::{FeatureMatrix, RowRef};

pub type Stats = [f64; 2];

const TIE_EPS: f64 = 1e-12;
const INACTIVE: u32 = u32::MAX;

fn add(a: Stats, b: Stats) -> Stats {
    [a[0] + b[0], a[1] + b[1]]
}

fn sub(a: Stats, b: Stats) -> Stats {
    [a[0] - b[0], a[1] - b[1]]
}

pub trait SplitCriterion: Sync {
    /// Whether a node with these totals may be split at all.
    fn splittable(&self, total: Stats) -> bool;
    /// Gain of a candidate split, or `None` when the split is not allowed.
    fn gain(&self, total: Stats, left: Stats, right: Stats) -> Option<f64>;
    fn leaf_value(&self, total: Stats) -> f64;
}

fn entropy(s: Stats) -> f64 {
    let w = s[0] + s[1];
    if w <= 0.0 {
        return 0.0;
    }
    s.iter()
        .filter(|&&c| c > 0.0)
        .map(|&c| {
            let p = c / w;
            -p * p.log2()
        })
        .sum()
}

/// Information gain over weighted class counts `[w0, w1]`.
#[derive(Debug, Clone, Copy, Default)]
pub struct Entropy;

impl SplitCriterion for Entropy {
    fn splittable(&self, total: Stats) -> bool {
        total[0] > 0.0 && total[1] > 0.0
    }

    fn gain(&self, total: Stats, left: Stats, right: Stats) -> Option<f64> {
        let w = total[0] + total[1];
        let (wl, wr) = (left[0] + left[1], right[0] + right[1]);
        if wl <= 0.0 || wr <= 0.0 {
            return None;
        }
        Some(entropy(total) - wl / w * entropy(left) - wr / w * entropy(right))
    }

    /// Weighted fraction of class 1.
    fn leaf_value(&self, total: Stats) -> f64 {
        let w = total[0] + total[1];
        if w > 0.0 {
            total[1] / w
        } else {
            0.5
        }
    }
}

/// Second-order boosting gain over `[G, H]` sums.
#[derive(Debug, Clone, Copy)]
pub struct SecondOrder {
    pub lambda: f64,
    pub gamma: f64,
    pub min_child_weight: f64,
    pub learning_rate: f64,
}

impl SecondOrder {
    fn score(&self, s: Stats) -> f64 {
        s[0] * s[0] / (s[1] + self.lambda)
    }
}

impl SplitCriterion for SecondOrder {
    fn splittable(&self, total: Stats) -> bool {
        total[1] >= 2.0 * self.min_child_weight
    }

    fn gain(&self, total: Stats, left: Stats, right: Stats) -> Option<f64> {
        if left[1] < self.min_child_weight || right[1] < self.min_child_weight {
            return None;
        }
        let g = 0.5 * (self.score(left) + self.score(right) - self.score(total)) - self.gamma;
        (g > 0.0).then_some(g)
    }

    fn leaf_value(&self, total: Stats) -> f64 {
        -total[0] / (total[1] + self.lambda) * self.learning_rate
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Split {
    pub feature: usize,
    pub threshold: f64,
    pub gain: f64,
}

/// Threshold strictly above `lo` and at most `hi`; rows with `x < threshold`
/// go left.
pub fn split_threshold(lo: f64, hi: f64) -> f64 {
    let mid = lo + (hi - lo) / 2.0;
    if mid > lo {
        mid
    } else {
        hi
    }
}

/// Sorted nonzero entries per feature.
#[derive(Debug, Clone)]
pub struct ColumnStore {
    columns: Vec<Vec<(f64, u32)>>,
}

impl ColumnStore {
    pub fn new(x: &FeatureMatrix) -> Self {
        let mut columns = vec![Vec::new(); x.dim()];
        for (i, row) in x.rows().enumerate() {
            row.for_each_nonzero(|c, v| columns[c].push((v, i as u32)));
        }
        for col in &mut columns {
            col.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        }
        Self { columns }
    }

    pub fn dim(&self) -> usize {
        self.columns.len()
    }
}

struct Candidate {
    total: Stats,
    count: usize,
    features: Vec<usize>,
}

/// Finds the best split for every candidate node in one pass over the
/// columns. `node_of[row]` is a candidate index or `INACTIVE`.
fn find_splits<C: SplitCriterion>(
    cols: &ColumnStore,
    stats: &[Stats],
    node_of: &[u32],
    cands: &[Candidate],
    crit: &C,
) -> Vec<Option<Split>> {
    let k = cands.len();
    let mut by_feature: Vec<Vec<u32>> = vec![Vec::new(); cols.dim()];
    for (slot, c) in cands.iter().enumerate() {
        for &f in &c.features {
            by_feature[f].push(slot as u32);
        }
    }
    let mut best: Vec<Option<Split>> = vec![None; k];
    let mut involved = vec![false; k];
    let mut nz = vec![[0.0; 2]; k];
    let mut nz_count = vec![0usize; k];
    let mut left = vec![[0.0; 2]; k];
    let mut last: Vec<Option<f64>> = vec![None; k];

    for (f, slots) in by_feature.iter().enumerate() {
        if slots.is_empty() {
            continue;
        }
        for &s in slots {
            let s = s as usize;
            involved[s] = true;
            nz[s] = [0.0; 2];
            nz_count[s] = 0;
            left[s] = [0.0; 2];
            last[s] = None;
        }
        let col = &cols.columns[f];
        for &(_, r) in col {
            let s = node_of[r as usize];
            if s != INACTIVE && involved[s as usize] {
                nz[s as usize] = add(nz[s as usize], stats[r as usize]);
                nz_count[s as usize] += 1;
            }
        }

        let mut visit = |s: usize, v: f64, st: Stats| {
            if let Some(a) = last[s] {
                if a < v {
                    let total = cands[s].total;
                    let l = left[s];
                    if let Some(g) = crit.gain(total, l, sub(total, l)) {
                        let better = match &best[s] {
                            None => true,
                            Some(b) => g > b.gain + TIE_EPS,
                        };
                        if better {
                            best[s] = Some(Split {
                                feature: f,
                                threshold: split_threshold(a, v),
                                gain: g,
                            });
                        }
                    }
                }
            }
            left[s] = add(left[s], st);
            last[s] = Some(v);
        };

        let mut zeros_done = false;
        for &(v, r) in col {
            if !zeros_done && v > 0.0 {
                for &s in slots {
                    let s = s as usize;
                    if cands[s].count > nz_count[s] {
                        visit(s, 0.0, sub(cands[s].total, nz[s]));
                    }
                }
                zeros_done = true;
            }
            let s = node_of[r as usize];
            if s != INACTIVE && involved[s as usize] {
                visit(s as usize, v, stats[r as usize]);
            }
        }
        if !zeros_done {
            for &s in slots {
                let s = s as usize;
                if cands[s].count > nz_count[s] {
                    visit(s, 0.0, sub(cands[s].total, nz[s]));
                }
            }
        }
        for &s in slots {
            involved[s as usize] = false;
        }
    }
    best
}

/// Best split of the node formed by `rows` over `features`, using the same
/// search as tree growth. `stats` is indexed by row of `x`.
pub fn best_split<C: SplitCriterion>(
    x: &FeatureMatrix,
    stats: &[Stats],
    rows: &[usize],
    features: &[usize],
    crit: &C,
) -> Option<Split> {
    let cols = ColumnStore::new(x);
    let mut node_of = vec![INACTIVE; x.len()];
    let mut total = [0.0; 2];
    for &r in rows {
        node_of[r] = 0;
        total = add(total, stats[r]);
    }
    let mut features = features.to_vec();
    features.sort_unstable();
    features.dedup();
    let cand = Candidate {
        total,
        count: rows.len(),
        features,
    };
    find_splits(&cols, stats, &node_of, &[cand], crit).pop().flatten()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum Node {
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
    Leaf {
        value: f64,
    },
}

/// A binary tree as a flat node array; node 0 is the root.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tree {
    pub nodes: Vec<Node>,
}

impl Tree {
    pub fn predict(&self, x: RowRef<'_>) -> f64 {
        let mut i = 0;
        loop {
            match self.nodes[i] {
                Node::Leaf { value } => return value,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => i = if x.get(feature) < threshold { left } else { right },
            }
        }
    }

    pub fn depth(&self) -> usize {
        fn go(t: &Tree, i: usize) -> usize {
            match t.nodes[i] {
                Node::Leaf { .. } => 0,
                Node::Split { left, right, .. } => 1 + go(t, left).max(go(t, right)),
            }
        }
        go(self, 0)
    }

    pub fn n_leaves(&self) -> usize {
        self.nodes.iter().filter(|n| matches!(n, Node::Leaf { .. })).count()
    }
}

/// Grows one tree level by level. Rows with `active[row] == false` take no
/// part. `features_for` is called once per splittable node and returns the
/// candidate feature ids.
pub fn grow<C: SplitCriterion>(
    x: &FeatureMatrix,
    cols: &ColumnStore,
    stats: &[Stats],
    active: &[bool],
    max_depth: usize,
    crit: &C,
    mut features_for: impl FnMut() -> Vec<usize>,
) -> Tree {
    let mut nodes = vec![Node::Leaf { value: 0.0 }];
    let mut node_of: Vec<u32> = active.iter().map(|&a| if a { 0 } else { INACTIVE }).collect();
    // (tree node id, totals, row count) per open node of the current level
    let mut level: Vec<(usize, Stats, usize)> = {
        let mut total = [0.0; 2];
        let mut count = 0;
        for (r, &a) in active.iter().enumerate() {
            if a {
                total = add(total, stats[r]);
                count += 1;
            }
        }
        vec![(0, total, count)]
    };

    for depth in 0..=max_depth {
        let cands: Vec<Candidate> = level
            .iter()
            .map(|&(_, total, count)| {
                let features = if depth < max_depth && count >= 2 && crit.splittable(total) {
                    let mut f = features_for();
                    f.sort_unstable();
                    f.dedup();
                    f
                } else {
                    Vec::new()
                };
                Candidate { total, count, features }
            })
            .collect();
        let splits = if cands.iter().any(|c| !c.features.is_empty()) {
            find_splits(cols, stats, &node_of, &cands, crit)
        } else {
            vec![None; cands.len()]
        };

        // child slot ids for the next level
        let mut child_slot: Vec<Option<(u32, u32)>> = vec![None; level.len()];
        let mut next: Vec<(usize, Stats, usize)> = Vec::new();
        for (slot, split) in splits.iter().enumerate() {
            let (id, total, _) = level[slot];
            match split {
                Some(s) => {
                    let (l, r) = (nodes.len(), nodes.len() + 1);
                    nodes.push(Node::Leaf { value: 0.0 });
                    nodes.push(Node::Leaf { value: 0.0 });
                    nodes[id] = Node::Split {
                        feature: s.feature,
                        threshold: s.threshold,
                        left: l,
                        right: r,
                    };
                    child_slot[slot] = Some((next.len() as u32, next.len() as u32 + 1));
                    next.push((l, [0.0; 2], 0));
                    next.push((r, [0.0; 2], 0));
                }
                None => nodes[id] = Node::Leaf { value: crit.leaf_value(total) },
            }
        }
        if next.is_empty() {
            break;
        }
        for r in 0..node_of.len() {
            let s = node_of[r];
            if s == INACTIVE {
                continue;
            }
            node_of[r] = match (child_slot[s as usize], &splits[s as usize]) {
                (Some((l, rt)), Some(sp)) => {
                    let c = if x.row(r).get(sp.feature) < sp.threshold { l } else { rt };
                    next[c as usize].1 = add(next[c as usize].1, stats[r]);
                    next[c as usize].2 += 1;
                    c
                }
                _ => INACTIVE,
            };
        }
        level = next;
    }
    Tree { nodes }
}

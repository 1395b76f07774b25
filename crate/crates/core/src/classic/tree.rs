//! CART trees grown level by level over presorted feature orders, plus the
//! bagged forest and the one-vs-rest boosting ensemble built from them.

use rand::seq::index::sample;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::knn::check_dim;
use super::ClassicError;
use crate::{seed, Matrix};

const LEAF: i64 = -1;
const INACTIVE: u32 = u32::MAX;

/// Flat node arrays; `feature[i] == -1` marks a leaf. Rows with
/// `x[feature] <= threshold` go left.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tree {
    pub feature: Vec<i64>,
    pub threshold: Vec<f64>,
    pub left: Vec<u32>,
    pub right: Vec<u32>,
    /// Class index for classification trees, mean target for regression trees.
    pub value: Vec<f64>,
}

impl Tree {
    pub fn predict_value(&self, row: &[f64]) -> f64 {
        let mut i = 0usize;
        while self.feature[i] != LEAF {
            i = if row[self.feature[i] as usize] <= self.threshold[i] {
                self.left[i] as usize
            } else {
                self.right[i] as usize
            };
        }
        self.value[i]
    }

    pub fn n_nodes(&self) -> usize {
        self.feature.len()
    }

    pub fn depth(&self) -> usize {
        fn walk(t: &Tree, i: usize) -> usize {
            if t.feature[i] == LEAF {
                0
            } else {
                1 + walk(t, t.left[i] as usize).max(walk(t, t.right[i] as usize))
            }
        }
        walk(self, 0)
    }

    fn push_node(&mut self) -> usize {
        self.feature.push(LEAF);
        self.threshold.push(0.0);
        self.left.push(0);
        self.right.push(0);
        self.value.push(0.0);
        self.feature.len() - 1
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TreeParams {
    pub max_depth: Option<usize>,
    /// Minimum (weighted) sample count for a node to be split.
    pub min_samples_split: usize,
    /// Features drawn per node; `None` means all.
    pub max_features: Option<usize>,
}

impl Default for TreeParams {
    fn default() -> Self {
        Self { max_depth: None, min_samples_split: 2, max_features: None }
    }
}

/// Row indices sorted by each feature, computed once per fit.
pub(crate) struct Presorted {
    order: Vec<Vec<u32>>,
}

impl Presorted {
    pub(crate) fn new(x: &Matrix) -> Self {
        let n = x.nrows();
        let order = (0..x.ncols())
            .map(|j| {
                let mut idx: Vec<u32> = (0..n as u32).collect();
                idx.sort_by(|&a, &b| x.get(a as usize, j).total_cmp(&x.get(b as usize, j)).then(a.cmp(&b)));
                idx
            })
            .collect();
        Self { order }
    }
}

pub(crate) enum Target<'a> {
    Classes { y: &'a [usize], k: usize },
    Values(&'a [f64]),
}

impl Target<'_> {
    fn width(&self) -> usize {
        match self {
            Target::Classes { k, .. } => *k,
            Target::Values(_) => 3,
        }
    }

    fn add(&self, stats: &mut [f64], row: usize, w: f64) {
        match self {
            Target::Classes { y, .. } => stats[y[row]] += w,
            Target::Values(v) => {
                stats[0] += w;
                stats[1] += w * v[row];
                stats[2] += w * v[row] * v[row];
            }
        }
    }

    fn weight(&self, stats: &[f64]) -> f64 {
        match self {
            Target::Classes { .. } => stats.iter().sum(),
            Target::Values(_) => stats[0],
        }
    }

    /// Node impurity times node weight: Gini for classes, SSE for values.
    fn weighted_impurity(&self, stats: &[f64]) -> f64 {
        match self {
            Target::Classes { .. } => {
                let w: f64 = stats.iter().sum();
                if w <= 0.0 {
                    return 0.0;
                }
                w - stats.iter().map(|c| c * c).sum::<f64>() / w
            }
            Target::Values(_) => {
                if stats[0] <= 0.0 {
                    return 0.0;
                }
                (stats[2] - stats[1] * stats[1] / stats[0]).max(0.0)
            }
        }
    }

    fn is_pure(&self, stats: &[f64]) -> bool {
        match self {
            Target::Classes { .. } => {
                let w: f64 = stats.iter().sum();
                stats.iter().any(|&c| c == w)
            }
            Target::Values(_) => self.weighted_impurity(stats) <= 1e-15 * stats[2].max(f64::MIN_POSITIVE),
        }
    }

    fn leaf_value(&self, stats: &[f64]) -> f64 {
        match self {
            Target::Classes { .. } => super::argmax(stats) as f64,
            Target::Values(_) => stats[1] / stats[0],
        }
    }
}

struct Candidate {
    score: f64,
    feature: usize,
    threshold: f64,
}

pub(crate) fn build_tree(
    x: &Matrix,
    pre: &Presorted,
    weights: &[f64],
    target: &Target,
    params: &TreeParams,
    mut rng: Option<&mut ChaCha8Rng>,
) -> Tree {
    let (n, d) = (x.nrows(), x.ncols());
    let s = target.width();
    let mut tree = Tree { feature: vec![], threshold: vec![], left: vec![], right: vec![], value: vec![] };
    let root = tree.push_node();
    let mut node_of: Vec<u32> = (0..n).map(|r| if weights[r] > 0.0 { root as u32 } else { INACTIVE }).collect();
    let mut root_stats = vec![0.0; s];
    for r in 0..n {
        if weights[r] > 0.0 {
            target.add(&mut root_stats, r, weights[r]);
        }
    }
    // frontier entries: (node id, stats)
    let mut frontier: Vec<(usize, Vec<f64>)> = vec![(root, root_stats)];
    let mut slot_of: Vec<u32> = vec![0];
    let mut depth = 0usize;
    let max_features = params.max_features.map(|m| m.clamp(1, d.max(1)));

    while !frontier.is_empty() {
        let m = frontier.len();
        let splittable: Vec<bool> = frontier
            .iter()
            .map(|(_, st)| {
                params.max_depth.is_none_or(|md| depth < md)
                    && target.weight(st) >= params.min_samples_split as f64
                    && !target.is_pure(st)
            })
            .collect();
        let allowed: Option<Vec<Vec<bool>>> = match (max_features, rng.as_deref_mut()) {
            (Some(mf), Some(r)) if mf < d => Some(
                (0..m)
                    .map(|slot| {
                        let mut mask = vec![false; d];
                        if splittable[slot] {
                            for f in sample(r, d, mf).into_iter() {
                                mask[f] = true;
                            }
                        }
                        mask
                    })
                    .collect(),
            ),
            _ => None,
        };
        let mut best: Vec<Option<Candidate>> = (0..m).map(|_| None).collect();
        if splittable.iter().any(|&b| b) {
            let mut left = vec![0.0; m * s];
            let mut last = vec![f64::NAN; m];
            let mut right = vec![0.0; s];
            for f in 0..d {
                left.iter_mut().for_each(|v| *v = 0.0);
                last.iter_mut().for_each(|v| *v = f64::NAN);
                for &r in &pre.order[f] {
                    let r = r as usize;
                    let node = node_of[r];
                    if node == INACTIVE {
                        continue;
                    }
                    let slot = slot_of[node as usize] as usize;
                    if !splittable[slot] || allowed.as_ref().is_some_and(|a| !a[slot][f]) {
                        continue;
                    }
                    let v = x.get(r, f);
                    let ls = &mut left[slot * s..(slot + 1) * s];
                    if v > last[slot] {
                        let total = &frontier[slot].1;
                        for ((rv, t), l) in right.iter_mut().zip(total).zip(ls.iter()) {
                            *rv = t - l;
                        }
                        let score = target.weighted_impurity(ls) + target.weighted_impurity(&right);
                        if best[slot].as_ref().is_none_or(|b| score < b.score) {
                            let prev = last[slot];
                            let mut t = prev + (v - prev) / 2.0;
                            if t >= v {
                                t = prev;
                            }
                            best[slot] = Some(Candidate { score, feature: f, threshold: t });
                        }
                    }
                    target.add(ls, r, weights[r]);
                    last[slot] = v;
                }
            }
        }

        let mut next: Vec<(usize, Vec<f64>)> = Vec::new();
        let mut child_of: Vec<Option<(usize, usize)>> = vec![None; m];
        for slot in 0..m {
            let (node, ref stats) = frontier[slot];
            match &best[slot] {
                Some(c) if splittable[slot] => {
                    let l = tree.push_node();
                    let r = tree.push_node();
                    tree.feature[node] = c.feature as i64;
                    tree.threshold[node] = c.threshold;
                    tree.left[node] = l as u32;
                    tree.right[node] = r as u32;
                    child_of[slot] = Some((next.len(), next.len() + 1));
                    next.push((l, vec![0.0; s]));
                    next.push((r, vec![0.0; s]));
                }
                _ => {
                    tree.value[node] = target.leaf_value(stats);
                }
            }
        }
        for r in 0..n {
            let node = node_of[r];
            if node == INACTIVE {
                continue;
            }
            let node = node as usize;
            match child_of[slot_of[node] as usize] {
                Some((li, ri)) => {
                    let f = tree.feature[node] as usize;
                    let ci = if x.get(r, f) <= tree.threshold[node] { li } else { ri };
                    node_of[r] = next[ci].0 as u32;
                    target.add(&mut next[ci].1, r, weights[r]);
                }
                None => node_of[r] = INACTIVE,
            }
        }
        slot_of.resize(tree.n_nodes(), 0);
        for (i, (node, _)) in next.iter().enumerate() {
            slot_of[*node] = i as u32;
        }
        frontier = next;
        depth += 1;
    }
    tree
}

/// Single CART classifier over class indices.
pub(crate) fn fit_decision_tree(x: &Matrix, y: &[usize], k: usize, params: &TreeParams) -> Tree {
    let pre = Presorted::new(x);
    build_tree(x, &pre, &vec![1.0; x.nrows()], &Target::Classes { y, k }, params, None)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForestModel {
    pub trees: Vec<Tree>,
    pub n_classes: usize,
    pub d: usize,
}

/// Bootstrap-bagged CART trees with `ceil(sqrt(d))` candidate features per split.
pub(crate) fn fit_forest(
    x: &Matrix,
    y: &[usize],
    k: usize,
    n_trees: usize,
    max_depth: Option<usize>,
    min_samples_split: usize,
    seed_value: u64,
) -> ForestModel {
    let (n, d) = (x.nrows(), x.ncols());
    let pre = Presorted::new(x);
    let params = TreeParams {
        max_depth,
        min_samples_split,
        max_features: Some((d as f64).sqrt().ceil() as usize),
    };
    let target = Target::Classes { y, k };
    let trees = (0..n_trees)
        .map(|t| {
            let mut rng = seed::task_rng(seed_value, &[t as u64]);
            let mut w = vec![0.0; n];
            for _ in 0..n {
                w[rng.random_range(0..n)] += 1.0;
            }
            build_tree(x, &pre, &w, &target, &params, Some(&mut rng))
        })
        .collect();
    ForestModel { trees, n_classes: k, d }
}

impl ForestModel {
    pub fn predict(&self, x: &Matrix) -> Result<Vec<usize>, ClassicError> {
        check_dim(self.d, x)?;
        Ok(x.rows_iter()
            .map(|row| {
                let mut votes = vec![0.0; self.n_classes];
                for t in &self.trees {
                    votes[t.predict_value(row) as usize] += 1.0;
                }
                super::argmax(&votes)
            })
            .collect())
    }
}

/// One-vs-rest first-order boosting: each round fits a regression tree per
/// class to the logistic-loss residual `y - sigmoid(F)` and adds
/// `learning_rate` times its leaf means.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoostModel {
    pub init: Vec<f64>,
    /// `rounds x n_classes` trees, round-major.
    pub trees: Vec<Tree>,
    pub learning_rate: f64,
    pub n_classes: usize,
    pub d: usize,
    /// Mean logistic loss summed over classes, before round 1 and after each round.
    pub training_loss: Vec<f64>,
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

fn logistic_loss(y: f64, f: f64) -> f64 {
    // log(1 + exp(-s f)) with s = +-1, computed stably
    let m = if y > 0.5 { f } else { -f };
    if m > 0.0 {
        (-m).exp().ln_1p()
    } else {
        -m + m.exp().ln_1p()
    }
}

pub(crate) fn fit_boosting(
    x: &Matrix,
    y: &[usize],
    k: usize,
    n_rounds: usize,
    learning_rate: f64,
    max_depth: usize,
) -> BoostModel {
    let (n, d) = (x.nrows(), x.ncols());
    let pre = Presorted::new(x);
    let params = TreeParams { max_depth: Some(max_depth), min_samples_split: 2, max_features: None };
    let ones = vec![1.0; n];
    let targets: Vec<Vec<f64>> =
        (0..k).map(|c| y.iter().map(|&v| if v == c { 1.0 } else { 0.0 }).collect()).collect();
    let init: Vec<f64> = targets
        .iter()
        .map(|t| {
            let p = (t.iter().sum::<f64>() / n as f64).clamp(1e-12, 1.0 - 1e-12);
            (p / (1.0 - p)).ln()
        })
        .collect();
    let mut f: Vec<Vec<f64>> = init.iter().map(|&v| vec![v; n]).collect();
    let loss = |f: &Vec<Vec<f64>>| -> f64 {
        (0..k).map(|c| (0..n).map(|i| logistic_loss(targets[c][i], f[c][i])).sum::<f64>() / n as f64).sum()
    };
    let mut training_loss = vec![loss(&f)];
    let mut trees = Vec::with_capacity(n_rounds * k);
    let mut resid = vec![0.0; n];
    for _ in 0..n_rounds {
        for c in 0..k {
            for i in 0..n {
                resid[i] = targets[c][i] - sigmoid(f[c][i]);
            }
            let tree = build_tree(x, &pre, &ones, &Target::Values(&resid), &params, None);
            for (i, row) in x.rows_iter().enumerate() {
                f[c][i] += learning_rate * tree.predict_value(row);
            }
            trees.push(tree);
        }
        training_loss.push(loss(&f));
    }
    BoostModel { init, trees, learning_rate, n_classes: k, d, training_loss }
}

impl BoostModel {
    pub fn scores(&self, row: &[f64]) -> Vec<f64> {
        let mut s = self.init.clone();
        for (i, t) in self.trees.iter().enumerate() {
            s[i % self.n_classes] += self.learning_rate * t.predict_value(row);
        }
        s
    }

    pub fn predict(&self, x: &Matrix) -> Result<Vec<usize>, ClassicError> {
        check_dim(self.d, x)?;
        Ok(x.rows_iter().map(|r| super::argmax(&self.scores(r))).collect())
    }
}

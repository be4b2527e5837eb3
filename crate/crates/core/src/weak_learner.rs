//! Cost-sensitive classification trees.
//!
//! A tree is grown greedily to minimize the weighted modified cost
//! `sum_n w(n) · A(l_n, G(x_n))`, where `A` is a [`ModifiedCost`] matrix. Each
//! leaf predicts the label with the smallest weighted modified cost of the
//! samples reaching it, and a split is accepted only when the children's
//! summed leaf costs beat the parent's by more than `split_gain_epsilon`.
//!
//! Split candidates are midpoints between consecutive distinct values of a
//! feature. Gain ties go to the lowest feature index, then the lowest
//! threshold. Samples with `x[feature] <= threshold` go left.

use rand::seq::index::sample;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cost_model::ModifiedCost;
use crate::data_io::rng;
use crate::data_io::Dataset;
use crate::label::Label;
use crate::{Error, Result};

pub const DEFAULT_MIN_NODE_WEIGHT: f64 = 1e-6;
pub const DEFAULT_SPLIT_GAIN_EPSILON: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq)]
pub struct TreeParams {
    pub depth_limit: usize,
    /// Fraction of features considered by the whole tree, in `(0, 1]`.
    pub feature_fraction: f64,
    /// Nodes lighter than this fraction of the total weight become leaves.
    pub min_node_weight: f64,
    pub split_gain_epsilon: f64,
    /// Seed of the feature sample; unused when `feature_fraction == 1`.
    pub seed: u64,
}

impl Default for TreeParams {
    fn default() -> Self {
        Self {
            depth_limit: 4,
            feature_fraction: 1.0,
            min_node_weight: DEFAULT_MIN_NODE_WEIGHT,
            split_gain_epsilon: DEFAULT_SPLIT_GAIN_EPSILON,
            seed: 0,
        }
    }
}

impl TreeParams {
    pub fn validate(&self) -> Result<()> {
        if self.depth_limit == 0 {
            return Err(Error::InvalidArgument("tree depth must be at least 1".into()));
        }
        if !(self.feature_fraction > 0.0 && self.feature_fraction <= 1.0) {
            return Err(Error::InvalidArgument(format!(
                "feature fraction must be in (0, 1], got {}",
                self.feature_fraction
            )));
        }
        if !(self.min_node_weight >= 0.0) || !(self.split_gain_epsilon >= 0.0) {
            return Err(Error::InvalidArgument(
                "min_node_weight and split_gain_epsilon must be nonnegative".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Node {
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
    Leaf {
        label: Label,
    },
}

/// A fitted classification tree. The root is `nodes()[0]`.
#[derive(Clone, Debug, PartialEq)]
pub struct CostTree {
    nodes: Vec<Node>,
    n_features: usize,
    depth_limit: usize,
}

impl CostTree {
    pub fn predict(&self, x: &[f64]) -> Label {
        let mut at = 0;
        loop {
            match &self.nodes[at] {
                Node::Leaf { label } => return *label,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => {
                    at = if x[*feature] <= *threshold { *left } else { *right };
                }
            }
        }
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn n_features(&self) -> usize {
        self.n_features
    }

    pub fn depth_limit(&self) -> usize {
        self.depth_limit
    }

    /// Longest root-to-leaf path, in edges.
    pub fn depth(&self) -> usize {
        fn walk(nodes: &[Node], at: usize) -> usize {
            match &nodes[at] {
                Node::Leaf { .. } => 0,
                Node::Split { left, right, .. } => 1 + walk(nodes, *left).max(walk(nodes, *right)),
            }
        }
        walk(&self.nodes, 0)
    }

    pub fn leaf_labels(&self) -> impl Iterator<Item = Label> + '_ {
        self.nodes.iter().filter_map(|n| match n {
            Node::Leaf { label } => Some(*label),
            Node::Split { .. } => None,
        })
    }

    /// Zero-based leaf slot of each sample, for per-leaf checks.
    pub fn leaf_index(&self, x: &[f64]) -> usize {
        let mut at = 0;
        while let Node::Split {
            feature,
            threshold,
            left,
            right,
        } = &self.nodes[at]
        {
            at = if x[*feature] <= *threshold { *left } else { *right };
        }
        at
    }

    pub fn to_record(&self) -> TreeRecord {
        fn build(nodes: &[Node], at: usize) -> TreeRecord {
            match &nodes[at] {
                Node::Leaf { label } => TreeRecord::Leaf { leaf: *label },
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => TreeRecord::Split {
                    feature: *feature,
                    threshold: *threshold,
                    left: Box::new(build(nodes, *left)),
                    right: Box::new(build(nodes, *right)),
                },
            }
        }
        build(&self.nodes, 0)
    }

    /// Rebuilds a tree, checking feature indices, labels and depth.
    pub fn from_record(
        record: &TreeRecord,
        n_features: usize,
        k: usize,
        depth_limit: usize,
    ) -> Result<Self> {
        fn push(
            record: &TreeRecord,
            nodes: &mut Vec<Node>,
            depth: usize,
            n_features: usize,
            k: usize,
            depth_limit: usize,
        ) -> Result<usize> {
            let id = nodes.len();
            match record {
                TreeRecord::Leaf { leaf } => {
                    leaf.check(k)?;
                    nodes.push(Node::Leaf { label: *leaf });
                }
                TreeRecord::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => {
                    if *feature >= n_features {
                        return Err(Error::Model(format!(
                            "split on feature {feature} but the model has {n_features} features"
                        )));
                    }
                    if !threshold.is_finite() {
                        return Err(Error::Model("non-finite split threshold".into()));
                    }
                    if depth >= depth_limit {
                        return Err(Error::Model(format!(
                            "tree deeper than its depth limit {depth_limit}"
                        )));
                    }
                    nodes.push(Node::Leaf {
                        label: Label::from_index(0),
                    });
                    let l = push(left, nodes, depth + 1, n_features, k, depth_limit)?;
                    let r = push(right, nodes, depth + 1, n_features, k, depth_limit)?;
                    nodes[id] = Node::Split {
                        feature: *feature,
                        threshold: *threshold,
                        left: l,
                        right: r,
                    };
                }
            }
            Ok(id)
        }
        let mut nodes = Vec::new();
        push(record, &mut nodes, 0, n_features, k, depth_limit)?;
        Ok(Self {
            nodes,
            n_features,
            depth_limit,
        })
    }
}

/// Serialized form of a tree: nested split records ending in leaves.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum TreeRecord {
    Split {
        feature: usize,
        threshold: f64,
        left: Box<TreeRecord>,
        right: Box<TreeRecord>,
    },
    Leaf {
        leaf: Label,
    },
}

/// Label minimizing `sum_j mass(j) · A(j, k)` over `k`, lowest label on ties.
pub fn leaf_label(class_mass: &[f64], cost: &ModifiedCost) -> Result<Label> {
    if class_mass.len() != cost.k() {
        return Err(Error::DimensionMismatch {
            expected: cost.k(),
            found: class_mass.len(),
        });
    }
    if class_mass.iter().any(|m| !m.is_finite() || *m < 0.0) {
        return Err(Error::InvalidArgument(
            "class masses must be finite and nonnegative".into(),
        ));
    }
    if class_mass.iter().all(|m| *m == 0.0) {
        return Err(Error::ZeroWeights);
    }
    Ok(Label::from_index(cost.best_label(class_mass).0))
}

fn check_weights(weights: &[f64], n: usize) -> Result<()> {
    if weights.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: weights.len(),
        });
    }
    if weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
        return Err(Error::InvalidArgument(
            "weights must be finite and nonnegative".into(),
        ));
    }
    if weights.iter().all(|w| *w == 0.0) {
        return Err(Error::ZeroWeights);
    }
    Ok(())
}

/// Grows a tree minimizing the weighted modified cost of its predictions.
pub fn fit_cost_tree(
    data: &Dataset,
    weights: &[f64],
    cost: &ModifiedCost,
    params: &TreeParams,
) -> Result<CostTree> {
    params.validate()?;
    check_weights(weights, data.n())?;
    if cost.k() != data.k() {
        return Err(Error::DimensionMismatch {
            expected: data.k(),
            found: cost.k(),
        });
    }

    let d = data.d();
    let features: Vec<usize> = if params.feature_fraction >= 1.0 {
        (0..d).collect()
    } else {
        let count = ((params.feature_fraction * d as f64).ceil() as usize).clamp(1, d);
        let mut rng = rng::stream(params.seed, rng::FEATURES);
        let mut chosen = sample(&mut rng, d, count).into_vec();
        chosen.sort_unstable();
        chosen
    };

    let total: f64 = weights.iter().sum();
    let mut builder = Builder {
        data,
        weights,
        cost,
        features,
        depth_limit: params.depth_limit,
        min_weight: params.min_node_weight * total,
        epsilon: params.split_gain_epsilon,
        nodes: Vec::new(),
    };
    let mut idx: Vec<usize> = (0..data.n()).collect();
    builder.grow(&mut idx, 0, 0);
    Ok(CostTree {
        nodes: builder.nodes,
        n_features: d,
        depth_limit: params.depth_limit,
    })
}

struct Builder<'a> {
    data: &'a Dataset,
    weights: &'a [f64],
    cost: &'a ModifiedCost,
    features: Vec<usize>,
    depth_limit: usize,
    min_weight: f64,
    epsilon: f64,
    nodes: Vec<Node>,
}

#[derive(Clone, Copy)]
struct Candidate {
    gain: f64,
    feature: usize,
    threshold: f64,
}

impl Builder<'_> {
    fn class_mass(&self, idx: &[usize]) -> Vec<f64> {
        let mut mass = vec![0.0; self.data.k()];
        for &i in idx {
            mass[self.data.label(i).index()] += self.weights[i];
        }
        mass
    }

    fn grow(&mut self, idx: &mut [usize], depth: usize, fallback: usize) -> usize {
        let mass = self.class_mass(idx);
        let node_weight: f64 = mass.iter().sum();
        // A weightless node keeps its parent's label.
        let (label, node_cost) = if node_weight > 0.0 {
            self.cost.best_label(&mass)
        } else {
            (fallback, 0.0)
        };
        let id = self.nodes.len();
        self.nodes.push(Node::Leaf {
            label: Label::from_index(label),
        });
        if depth >= self.depth_limit || idx.len() < 2 || node_weight < self.min_weight {
            return id;
        }
        let Some(split) = self.best_split(idx, &mass, node_cost) else {
            return id;
        };

        let x = self.data.features();
        idx.sort_by(|&a, &b| {
            let (va, vb) = (x.get(a, split.feature), x.get(b, split.feature));
            (va > split.threshold).cmp(&(vb > split.threshold)).then(a.cmp(&b))
        });
        let cut = idx.partition_point(|&i| x.get(i, split.feature) <= split.threshold);
        let (left_idx, right_idx) = idx.split_at_mut(cut);
        let left = self.grow(left_idx, depth + 1, label);
        let right = self.grow(right_idx, depth + 1, label);
        self.nodes[id] = Node::Split {
            feature: split.feature,
            threshold: split.threshold,
            left,
            right,
        };
        id
    }

    fn best_split(&self, idx: &[usize], mass: &[f64], node_cost: f64) -> Option<Candidate> {
        // Per-feature searches are independent; the reduction below runs in
        // feature order so the result matches a sequential scan bit for bit.
        let per_feature: Vec<Option<Candidate>> = self
            .features
            .par_iter()
            .map(|&f| self.best_split_on(f, idx, mass, node_cost))
            .collect();
        let mut best: Option<Candidate> = None;
        for c in per_feature.into_iter().flatten() {
            if best.is_none_or(|b| c.gain > b.gain) {
                best = Some(c);
            }
        }
        best.filter(|c| c.gain > self.epsilon)
    }

    fn best_split_on(
        &self,
        feature: usize,
        idx: &[usize],
        mass: &[f64],
        node_cost: f64,
    ) -> Option<Candidate> {
        let x = self.data.features();
        let mut order: Vec<usize> = idx.to_vec();
        order.sort_by(|&a, &b| x.get(a, feature).total_cmp(&x.get(b, feature)).then(a.cmp(&b)));

        let k = self.data.k();
        let mut left = vec![0.0; k];
        let mut right = vec![0.0; k];
        let mut best: Option<Candidate> = None;
        for pos in 0..order.len() - 1 {
            let i = order[pos];
            left[self.data.label(i).index()] += self.weights[i];
            let (lo, hi) = (x.get(i, feature), x.get(order[pos + 1], feature));
            if lo == hi {
                continue;
            }
            for j in 0..k {
                right[j] = (mass[j] - left[j]).max(0.0);
            }
            let split_cost = self.cost.best_label(&left).1 + self.cost.best_label(&right).1;
            let gain = node_cost - split_cost;
            if best.is_none_or(|b| gain > b.gain) {
                let mut threshold = lo + (hi - lo) / 2.0;
                if threshold >= hi {
                    threshold = lo;
                }
                best = Some(Candidate {
                    gain,
                    feature,
                    threshold,
                });
            }
        }
        best
    }
}

/// Weighted successes `S_j` and errors `E_{j,k}` of a classifier.
#[derive(Clone, Debug, PartialEq)]
pub struct WeakFitStats {
    k: usize,
    success: Vec<f64>,
    error: Vec<f64>,
}

impl WeakFitStats {
    /// `success[j]` is `S_j`; `error` is row-major K×K with a zero diagonal.
    pub fn new(k: usize, success: Vec<f64>, error: Vec<f64>) -> Result<Self> {
        if success.len() != k || error.len() != k * k {
            return Err(Error::DimensionMismatch {
                expected: k,
                found: success.len(),
            });
        }
        if success.iter().chain(&error).any(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::InvalidArgument(
                "weighted masses must be finite and nonnegative".into(),
            ));
        }
        if (0..k).any(|j| error[j * k + j] != 0.0) {
            return Err(Error::InvalidArgument(
                "error masses must have a zero diagonal".into(),
            ));
        }
        Ok(Self { k, success, error })
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn success(&self, j: usize) -> f64 {
        self.success[j]
    }

    pub fn error(&self, j: usize, k: usize) -> f64 {
        self.error[j * self.k + k]
    }

    pub fn total_success(&self) -> f64 {
        self.success.iter().sum()
    }

    pub fn total_error(&self) -> f64 {
        self.error.iter().sum()
    }
}

/// Tallies weighted successes and errors of `tree` on `data`.
pub fn evaluate_stats(tree: &CostTree, data: &Dataset, weights: &[f64]) -> Result<WeakFitStats> {
    check_weights(weights, data.n())?;
    let k = data.k();
    let mut success = vec![0.0; k];
    let mut error = vec![0.0; k * k];
    for i in 0..data.n() {
        let truth = data.label(i).index();
        let predicted = tree.predict(data.row(i)).index();
        if predicted == truth {
            success[truth] += weights[i];
        } else {
            error[truth * k + predicted] += weights[i];
        }
    }
    WeakFitStats::new(k, success, error)
}

/// `sum_n w(n) · A(l_n, G(x_n))` for a fitted tree.
pub fn weighted_objective(
    tree: &CostTree,
    data: &Dataset,
    weights: &[f64],
    cost: &ModifiedCost,
) -> f64 {
    (0..data.n())
        .map(|i| weights[i] * cost.get(data.label(i).index(), tree.predict(data.row(i)).index()))
        .sum()
}

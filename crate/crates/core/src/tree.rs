//! CART decision-tree classifier with Gini impurity and deterministic
//! tie-breaking: best gain, then lowest feature index, then lowest threshold.
//! Used as the downstream evaluator, the tree trainer's importance source
//! and the RFE engine.

use crate::dataset::Dataset;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy)]
pub struct TreeConfig {
    pub max_depth: Option<usize>,
    pub min_samples_split: usize,
    pub min_samples_leaf: usize,
}

impl Default for TreeConfig {
    fn default() -> Self {
        TreeConfig { max_depth: None, min_samples_split: 2, min_samples_leaf: 1 }
    }
}

#[derive(Debug, Clone)]
pub enum Node {
    Internal { feature: usize, threshold: f64, left: usize, right: usize },
    Leaf { class_counts: Vec<usize> },
}

#[derive(Debug, Clone)]
pub struct TreeModel {
    pub nodes: Vec<Node>,
    pub root: usize,
    /// Normalized Gini importances over all dataset features; zero for
    /// features the tree was not trained on or never split.
    pub importances: Vec<f64>,
    pub trained_feature_indices: Vec<usize>,
    pub num_classes: usize,
}

fn gini(counts: &[usize], n: usize) -> f64 {
    let nf = n as f64;
    let mut sum_sq = 0.0;
    for &c in counts {
        let p = c as f64 / nf;
        sum_sq += p * p;
    }
    1.0 - sum_sq
}

struct Builder<'a> {
    data: &'a Dataset,
    features: &'a [usize],
    cfg: TreeConfig,
    nodes: Vec<Node>,
    raw_importance: Vec<f64>,
    n_total: usize,
}

#[derive(Clone, Copy)]
struct Split {
    gain: f64,
    feature: usize,
    threshold: f64,
}

impl<'a> Builder<'a> {
    fn class_counts(&self, samples: &[usize]) -> Vec<usize> {
        let mut counts = vec![0usize; self.data.num_classes];
        for &i in samples {
            counts[self.data.labels[i]] += 1;
        }
        counts
    }

    fn best_split(&self, samples: &[usize], parent_gini: f64) -> Option<Split> {
        let n = samples.len();
        let mut best: Option<Split> = None;
        for &f in self.features {
            let mut vals: Vec<(f64, usize)> =
                samples.iter().map(|&i| (self.data.columns[f][i], self.data.labels[i])).collect();
            vals.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
            let mut left = vec![0usize; self.data.num_classes];
            let mut right = self.class_counts(samples);
            for cut in 1..n {
                left[vals[cut - 1].1] += 1;
                right[vals[cut - 1].1] -= 1;
                if vals[cut].0 == vals[cut - 1].0 {
                    continue;
                }
                if cut < self.cfg.min_samples_leaf || n - cut < self.cfg.min_samples_leaf {
                    continue;
                }
                let gl = gini(&left, cut);
                let gr = gini(&right, n - cut);
                let gain = parent_gini
                    - (cut as f64 / n as f64) * gl
                    - ((n - cut) as f64 / n as f64) * gr;
                // zero-gain splits are allowed: gini gain is never negative
                // and data like XOR needs a zero-gain first cut
                let threshold = (vals[cut - 1].0 + vals[cut].0) / 2.0;
                // ascending feature/threshold iteration order makes "first
                // strictly better" implement the full tie rule
                let better = match best {
                    None => true,
                    Some(b) => gain > b.gain,
                };
                if better {
                    best = Some(Split { gain, feature: f, threshold });
                }
            }
        }
        best
    }

    fn build(&mut self, samples: &[usize], depth: usize) -> usize {
        let counts = self.class_counts(samples);
        let n = samples.len();
        let parent_gini = gini(&counts, n);
        let depth_ok = self.cfg.max_depth.map_or(true, |d| depth < d);
        let pure = counts.iter().filter(|&&c| c > 0).count() <= 1;
        if !pure && depth_ok && n >= self.cfg.min_samples_split {
            if let Some(split) = self.best_split(samples, parent_gini) {
                let (ls, rs): (Vec<usize>, Vec<usize>) = samples
                    .iter()
                    .partition(|&&i| self.data.columns[split.feature][i] <= split.threshold);
                self.raw_importance[split.feature] +=
                    (n as f64 / self.n_total as f64) * split.gain;
                let left = self.build(&ls, depth + 1);
                let right = self.build(&rs, depth + 1);
                self.nodes.push(Node::Internal {
                    feature: split.feature,
                    threshold: split.threshold,
                    left,
                    right,
                });
                return self.nodes.len() - 1;
            }
        }
        self.nodes.push(Node::Leaf { class_counts: counts });
        self.nodes.len() - 1
    }
}

pub fn fit(train: &Dataset, feature_indices: &[usize], cfg: &TreeConfig) -> Result<TreeModel> {
    if feature_indices.is_empty() {
        return Err(Error::EmptyFeatureSet);
    }
    for &f in feature_indices {
        if f >= train.n_features() {
            return Err(Error::IndexOutOfRange { index: f, len: train.n_features() });
        }
    }
    if train.num_samples() < 2 {
        return Err(Error::InsufficientSamples { have: train.num_samples(), need: 2 });
    }
    let mut features = feature_indices.to_vec();
    features.sort_unstable();
    features.dedup();
    let mut b = Builder {
        data: train,
        features: &features,
        cfg: *cfg,
        nodes: Vec::new(),
        raw_importance: vec![0.0; train.n_features()],
        n_total: train.num_samples(),
    };
    let samples: Vec<usize> = (0..train.num_samples()).collect();
    let root = b.build(&samples, 0);
    let total: f64 = b.raw_importance.iter().sum();
    let importances = if total > 0.0 {
        b.raw_importance.iter().map(|v| v / total).collect()
    } else {
        b.raw_importance.clone()
    };
    Ok(TreeModel {
        nodes: b.nodes,
        root,
        importances,
        trained_feature_indices: features,
        num_classes: train.num_classes,
    })
}

impl TreeModel {
    fn leaf_class(counts: &[usize]) -> usize {
        let mut best = 0;
        for (c, &v) in counts.iter().enumerate() {
            if v > counts[best] {
                best = c;
            }
        }
        best
    }

    pub fn predict_row(&self, row: &[f64]) -> Result<usize> {
        let mut node = self.root;
        loop {
            match &self.nodes[node] {
                Node::Leaf { class_counts } => return Ok(Self::leaf_class(class_counts)),
                Node::Internal { feature, threshold, left, right } => {
                    let v = *row.get(*feature).ok_or_else(|| {
                        Error::ShapeMismatch(format!(
                            "row width {} lacks feature {}",
                            row.len(),
                            feature
                        ))
                    })?;
                    node = if v <= *threshold { *left } else { *right };
                }
            }
        }
    }

    pub fn predict(&self, rows: &[Vec<f64>]) -> Result<Vec<usize>> {
        rows.iter().map(|r| self.predict_row(r)).collect()
    }

    pub fn depth(&self) -> usize {
        fn d(nodes: &[Node], i: usize) -> usize {
            match &nodes[i] {
                Node::Leaf { .. } => 0,
                Node::Internal { left, right, .. } => 1 + d(nodes, *left).max(d(nodes, *right)),
            }
        }
        d(&self.nodes, self.root)
    }

    pub fn n_splits(&self) -> usize {
        self.nodes.iter().filter(|n| matches!(n, Node::Internal { .. })).count()
    }

    /// Debug dump, one node per line: depth, feature/threshold or counts.
    pub fn dump(&self) -> String {
        fn rec(nodes: &[Node], i: usize, depth: usize, out: &mut String) {
            match &nodes[i] {
                Node::Leaf { class_counts } => {
                    out.push_str(&format!("{} leaf {:?}\n", depth, class_counts));
                }
                Node::Internal { feature, threshold, left, right } => {
                    out.push_str(&format!("{} split f{} <= {}\n", depth, feature, threshold));
                    rec(nodes, *left, depth + 1, out);
                    rec(nodes, *right, depth + 1, out);
                }
            }
        }
        let mut s = String::new();
        rec(&self.nodes, self.root, 0, &mut s);
        s
    }
}

/// Fit on the train split restricted to `feature_indices`, return the
/// fraction of correct test predictions.
pub fn evaluate_accuracy(
    train: &Dataset,
    test: &Dataset,
    feature_indices: &[usize],
    cfg: &TreeConfig,
) -> Result<f64> {
    let model = fit(train, feature_indices, cfg)?;
    let preds = model.predict(&test.rows())?;
    let correct = preds.iter().zip(test.labels.iter()).filter(|(p, l)| p == l).count();
    Ok(correct as f64 / test.num_samples() as f64)
}

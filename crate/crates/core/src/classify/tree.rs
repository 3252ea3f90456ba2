use ndarray::{Array2, ArrayView2, Axis};
use serde::{Deserialize, Serialize};

use super::linear::logistic_fit;
use super::{class_counts, ProbClassifier};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TreeKind {
    /// One feature compared against a threshold per node.
    Axis,
    /// A linear combination of features compared against a threshold per node.
    Oblique,
}

/// Samples with `value ≤ threshold` go left.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SplitTest {
    Axis { feature: usize, threshold: f64 },
    Oblique { weights: Vec<f64>, threshold: f64 },
}

impl SplitTest {
    pub fn goes_left(&self, x: &[f64]) -> bool {
        match self {
            SplitTest::Axis { feature, threshold } => x[*feature] <= *threshold,
            SplitTest::Oblique { weights, threshold } => {
                weights.iter().zip(x).map(|(w, v)| w * v).sum::<f64>() <= *threshold
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "node", rename_all = "snake_case")]
pub enum Node {
    Split { test: SplitTest, left: usize, right: usize },
    Leaf { probs: Vec<f64> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TreeModel {
    /// `nodes[0]` is the root; children always have larger indices.
    pub nodes: Vec<Node>,
    pub n_classes: usize,
    pub n_features: usize,
    pub kind: TreeKind,
    pub max_depth: usize,
    pub min_leaf: usize,
}

impl TreeModel {
    pub fn leaf_for(&self, x: &[f64]) -> usize {
        let mut i = 0;
        loop {
            match &self.nodes[i] {
                Node::Leaf { .. } => return i,
                Node::Split { test, left, right } => {
                    i = if test.goes_left(x) { *left } else { *right };
                }
            }
        }
    }

    pub fn depth(&self) -> usize {
        fn walk(nodes: &[Node], i: usize) -> usize {
            match &nodes[i] {
                Node::Leaf { .. } => 0,
                Node::Split { left, right, .. } => 1 + walk(nodes, *left).max(walk(nodes, *right)),
            }
        }
        walk(&self.nodes, 0)
    }

    pub(crate) fn parameter_count(&self) -> usize {
        self.nodes
            .iter()
            .map(|n| match n {
                Node::Leaf { probs } => probs.len(),
                Node::Split { test: SplitTest::Axis { .. }, .. } => 2,
                Node::Split { test: SplitTest::Oblique { weights, .. }, .. } => weights.len() + 1,
            })
            .sum()
    }
}

impl ProbClassifier for TreeModel {
    fn n_classes(&self) -> usize {
        self.n_classes
    }

    fn n_features(&self) -> usize {
        self.n_features
    }

    fn proba_row(&self, x: &[f64], out: &mut [f64]) {
        match &self.nodes[self.leaf_for(x)] {
            Node::Leaf { probs } => out.copy_from_slice(probs),
            Node::Split { .. } => unreachable!("leaf_for returns leaves"),
        }
    }
}

/// Sum over children of `Σ_c n_c² / n`; larger means lower weighted Gini.
fn purity(left: &[usize], right: &[usize]) -> f64 {
    let side = |c: &[usize]| {
        let n: usize = c.iter().sum();
        if n == 0 {
            0.0
        } else {
            c.iter().map(|&k| (k * k) as f64).sum::<f64>() / n as f64
        }
    };
    side(left) + side(right)
}

struct Builder<'a> {
    x: ArrayView2<'a, f64>,
    labels: &'a [usize],
    n_classes: usize,
    kind: TreeKind,
    max_depth: usize,
    min_leaf: usize,
    nodes: Vec<Node>,
}

impl Builder<'_> {
    fn counts(&self, idx: &[usize]) -> Vec<usize> {
        let mut c = vec![0usize; self.n_classes];
        for &i in idx {
            c[self.labels[i]] += 1;
        }
        c
    }

    fn leaf(&self, counts: &[usize]) -> Node {
        let n: usize = counts.iter().sum();
        Node::Leaf {
            probs: counts.iter().map(|&c| c as f64 / n as f64).collect(),
        }
    }

    fn build(&mut self, idx: Vec<usize>, depth: usize) -> usize {
        let counts = self.counts(&idx);
        let slot = self.nodes.len();
        self.nodes.push(self.leaf(&counts));
        let pure = counts.iter().filter(|&&c| c > 0).count() <= 1;
        if depth >= self.max_depth || pure || idx.len() < 2 * self.min_leaf {
            return slot;
        }
        let parent = counts.iter().map(|&k| (k * k) as f64).sum::<f64>() / idx.len() as f64;
        let best = match self.kind {
            TreeKind::Axis => self.best_axis(&idx),
            TreeKind::Oblique => self.best_oblique(&idx, &counts),
        };
        let Some((score, test)) = best else { return slot };
        if score <= parent + 1e-12 {
            return slot;
        }
        let (l, r): (Vec<usize>, Vec<usize>) = idx.iter().partition(|&&i| {
            test.goes_left(self.x.row(i).as_slice().expect("standard layout"))
        });
        let left = self.build(l, depth + 1);
        let right = self.build(r, depth + 1);
        self.nodes[slot] = Node::Split { test, left, right };
        slot
    }

    /// Exhaustive search over features and midpoints of sorted unique values.
    fn best_axis(&self, idx: &[usize]) -> Option<(f64, SplitTest)> {
        let n = idx.len();
        let total = self.counts(idx);
        let mut best: Option<(f64, SplitTest)> = None;
        for j in 0..self.x.ncols() {
            let mut order = idx.to_vec();
            order.sort_by(|&a, &b| self.x[[a, j]].total_cmp(&self.x[[b, j]]));
            let mut left = vec![0usize; self.n_classes];
            let mut right = total.clone();
            let (mut sl, mut sr) = (0.0f64, total.iter().map(|&k| (k * k) as f64).sum::<f64>());
            for pos in 1..n {
                let c = self.labels[order[pos - 1]];
                sl += (2 * left[c] + 1) as f64;
                sr -= (2 * right[c] - 1) as f64;
                left[c] += 1;
                right[c] -= 1;
                let (a, b) = (self.x[[order[pos - 1], j]], self.x[[order[pos], j]]);
                if a == b || pos < self.min_leaf || n - pos < self.min_leaf {
                    continue;
                }
                let score = sl / pos as f64 + sr / (n - pos) as f64;
                if best.as_ref().is_none_or(|(s, _)| score > *s + 1e-12) {
                    best = Some((score, SplitTest::Axis { feature: j, threshold: 0.5 * (a + b) }));
                }
            }
        }
        best
    }

    /// Class-vs-rest logistic separators, thresholded at zero score; keeps the
    /// class whose partition has the lowest Gini impurity.
    fn best_oblique(&self, idx: &[usize], counts: &[usize]) -> Option<(f64, SplitTest)> {
        let xs = self.x.select(Axis(0), idx);
        let mut best: Option<(f64, SplitTest)> = None;
        for c in (0..self.n_classes).filter(|&c| counts[c] > 0) {
            let binary: Vec<usize> = idx.iter().map(|&i| usize::from(self.labels[i] == c)).collect();
            let Ok(m) = logistic_fit(xs.view(), &binary, 2, 1.0) else { continue };
            let weights: Vec<f64> = (0..xs.ncols()).map(|j| m.weights[[1, j]] - m.weights[[0, j]]).collect();
            // score = w·x + (b1 − b0) ≤ 0  ⇔  w·x ≤ b0 − b1
            let test = SplitTest::Oblique { weights, threshold: m.biases[0] - m.biases[1] };
            let mut left = vec![0usize; self.n_classes];
            let mut right = vec![0usize; self.n_classes];
            for (r, &i) in idx.iter().enumerate() {
                if test.goes_left(xs.row(r).as_slice().expect("standard layout")) {
                    left[self.labels[i]] += 1;
                } else {
                    right[self.labels[i]] += 1;
                }
            }
            let (nl, nr): (usize, usize) = (left.iter().sum(), right.iter().sum());
            if nl < self.min_leaf || nr < self.min_leaf {
                continue;
            }
            let score = purity(&left, &right);
            if best.as_ref().is_none_or(|(s, _)| score > *s + 1e-12) {
                best = Some((score, test));
            }
        }
        best
    }
}

/// Greedy top-down induction. Leaves store class frequencies.
pub fn tree_fit(
    x: ArrayView2<f64>,
    labels: &[usize],
    n_classes: usize,
    kind: TreeKind,
    max_depth: usize,
    min_leaf: usize,
) -> Result<TreeModel> {
    if max_depth < 1 || min_leaf < 1 {
        return Err(Error::Config(format!(
            "max_depth and min_leaf must be >= 1, got {max_depth} and {min_leaf}"
        )));
    }
    class_counts(labels, n_classes, x.nrows())?;
    if x.nrows() == 0 {
        return Err(Error::Fit("cannot grow a tree on zero rows".into()));
    }
    let xs: Array2<f64> = x.as_standard_layout().to_owned();
    let mut b = Builder {
        x: xs.view(),
        labels,
        n_classes,
        kind,
        max_depth,
        min_leaf,
        nodes: Vec::new(),
    };
    b.build((0..x.nrows()).collect(), 0);
    Ok(TreeModel {
        nodes: b.nodes,
        n_classes,
        n_features: x.ncols(),
        kind,
        max_depth,
        min_leaf,
    })
}

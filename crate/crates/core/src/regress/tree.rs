//! CART regression trees with variance-reduction splits.
//!
//! Each feature is sorted once per fit; nodes carry their own per-feature
//! orderings and split them by stable partition, so growing a tree costs
//! O(n·k) per level instead of re-sorting at every node.

use ndarray::{ArrayView1, ArrayView2};
use serde::{Deserialize, Serialize};

/// Flat array form: node `i` is a leaf when `feature[i] < 0`; otherwise
/// samples with `x[feature] <= threshold` go to `left[i]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tree {
    pub feature: Vec<i32>,
    pub threshold: Vec<f64>,
    pub left: Vec<u32>,
    pub right: Vec<u32>,
    pub value: Vec<f64>,
    pub n_samples: Vec<u32>,
}

impl Tree {
    fn push_leaf(&mut self, value: f64, n: usize) -> usize {
        self.feature.push(-1);
        self.threshold.push(0.0);
        self.left.push(0);
        self.right.push(0);
        self.value.push(value);
        self.n_samples.push(n as u32);
        self.feature.len() - 1
    }

    pub fn n_nodes(&self) -> usize {
        self.feature.len()
    }

    pub fn n_leaves(&self) -> usize {
        self.feature.iter().filter(|&&f| f < 0).count()
    }

    pub fn predict_row(&self, x: ArrayView1<f64>) -> f64 {
        let mut i = 0;
        while self.feature[i] >= 0 {
            let f = self.feature[i] as usize;
            i = if x[f] <= self.threshold[i] { self.left[i] } else { self.right[i] } as usize;
        }
        self.value[i]
    }

    pub(crate) fn is_consistent(&self, n_features: usize) -> bool {
        let n = self.feature.len();
        n > 0
            && [self.threshold.len(), self.left.len(), self.right.len(), self.value.len(), self.n_samples.len()]
                .iter()
                .all(|&l| l == n)
            && (0..n).all(|i| {
                self.feature[i] < 0
                    || ((self.feature[i] as usize) < n_features
                        && (self.left[i] as usize) < n
                        && (self.right[i] as usize) < n
                        && self.left[i] as usize > i
                        && self.right[i] as usize > i)
            })
    }
}

#[derive(Debug, Clone, Copy)]
pub struct TreeParams {
    pub max_depth: usize,
    pub min_leaf: usize,
}

/// Per-feature sample orderings plus a column-major copy of the design,
/// computed once per design matrix.
pub struct Presorted {
    order: Vec<Vec<u32>>,
    cols: Vec<Vec<f64>>,
}

impl Presorted {
    pub fn new(x: ArrayView2<f64>) -> Self {
        let cols: Vec<Vec<f64>> = x.columns().into_iter().map(|c| c.to_vec()).collect();
        let order = cols
            .iter()
            .map(|col| {
                let mut idx: Vec<u32> = (0..x.nrows() as u32).collect();
                idx.sort_by(|&a, &b| col[a as usize].total_cmp(&col[b as usize]).then(a.cmp(&b)));
                idx
            })
            .collect();
        Self { order, cols }
    }
}

struct Builder<'a> {
    cols: &'a [Vec<f64>],
    y: &'a [f64],
    params: TreeParams,
    goes_left: Vec<bool>,
    tree: Tree,
}

struct Split {
    feature: usize,
    threshold: f64,
    score: f64,
}

/// Grows a tree on `(x, y)`; `x` needs at least one column and one row.
///
/// Splits maximize SSE reduction; ties go to the earlier feature, then
/// the lower threshold. Nodes become leaves at
/// `max_depth`, when they cannot give both children `min_leaf` samples,
/// when pure, or when no split reduces the SSE.
pub fn grow(y: ArrayView1<f64>, presorted: &Presorted, params: TreeParams) -> Tree {
    let y = y.to_vec();
    let mut b = Builder {
        cols: &presorted.cols,
        y: &y,
        params,
        goes_left: vec![false; y.len()],
        tree: Tree {
            feature: Vec::new(),
            threshold: Vec::new(),
            left: Vec::new(),
            right: Vec::new(),
            value: Vec::new(),
            n_samples: Vec::new(),
        },
    };
    b.build(presorted.order.clone(), 0);
    b.tree
}

impl Builder<'_> {
    fn build(&mut self, sorted: Vec<Vec<u32>>, depth: usize) -> usize {
        let members = &sorted[0];
        let n = members.len();
        let mean = members.iter().map(|&i| self.y[i as usize]).sum::<f64>() / n as f64;
        let pure = members.iter().all(|&i| self.y[i as usize] == self.y[members[0] as usize]);
        if depth >= self.params.max_depth || n < 2 * self.params.min_leaf.max(1) || pure {
            return self.tree.push_leaf(mean, n);
        }
        let Some(split) = self.best_split(&sorted, mean) else {
            return self.tree.push_leaf(mean, n);
        };

        for &i in members {
            self.goes_left[i as usize] = self.cols[split.feature][i as usize] <= split.threshold;
        }
        let mut left_sorted = Vec::with_capacity(sorted.len());
        let mut right_sorted = Vec::with_capacity(sorted.len());
        for s in &sorted {
            let (l, r): (Vec<u32>, Vec<u32>) = s.iter().partition(|&&i| self.goes_left[i as usize]);
            left_sorted.push(l);
            right_sorted.push(r);
        }
        drop(sorted);

        let id = self.tree.push_leaf(mean, n);
        self.tree.feature[id] = split.feature as i32;
        self.tree.threshold[id] = split.threshold;
        let l = self.build(left_sorted, depth + 1);
        let r = self.build(right_sorted, depth + 1);
        self.tree.left[id] = l as u32;
        self.tree.right[id] = r as u32;
        id
    }

    fn best_split(&self, sorted: &[Vec<u32>], mean: f64) -> Option<Split> {
        let min_leaf = self.params.min_leaf.max(1);
        let n = sorted[0].len();
        // Centered targets; maximizing sl²/nl + sr²/nr maximizes SSE reduction.
        let total: f64 = sorted[0].iter().map(|&i| self.y[i as usize] - mean).sum();
        let sse: f64 = sorted[0].iter().map(|&i| (self.y[i as usize] - mean).powi(2)).sum();
        let base = total * total / n as f64;
        let mut best: Option<Split> = None;
        for (f, order) in sorted.iter().enumerate() {
            let col = &self.cols[f];
            let mut sl = 0.0;
            for pos in 0..(n - 1) {
                let i = order[pos] as usize;
                sl += self.y[i] - mean;
                let nl = pos + 1;
                let nr = n - nl;
                if nl < min_leaf || nr < min_leaf {
                    continue;
                }
                let a = col[i];
                let b = col[order[pos + 1] as usize];
                if !(a < b) {
                    continue;
                }
                let sr = total - sl;
                let score = sl * sl / nl as f64 + sr * sr / nr as f64 - base;
                if best.as_ref().is_none_or(|s| score > s.score) {
                    let mid = a + (b - a) / 2.0;
                    let threshold = if mid < b { mid } else { a };
                    best = Some(Split { feature: f, threshold, score });
                }
            }
        }
        best.filter(|s| s.score > 1e-12 * sse.max(f64::MIN_POSITIVE))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::{array, Array2};

    fn fit(x: &Array2<f64>, y: &[f64], depth: usize, leaf: usize) -> Tree {
        let y = ndarray::Array1::from(y.to_vec());
        grow(y.view(), &Presorted::new(x.view()), TreeParams { max_depth: depth, min_leaf: leaf })
    }

    #[test]
    fn constant_target_is_single_leaf() {
        let x = array![[1.0], [2.0], [3.0], [4.0], [5.0], [6.0]];
        let t = fit(&x, &[7.0; 6], 3, 1);
        assert_eq!(t.n_nodes(), 1);
        assert_eq!(t.predict_row(array![100.0].view()), 7.0);
    }

    #[test]
    fn stump_splits_at_midpoint() {
        let x = array![[0.0], [1.0], [2.0], [3.0]];
        let t = fit(&x, &[0.0, 0.0, 1.0, 1.0], 1, 1);
        assert_eq!(t.feature[0], 0);
        assert_eq!(t.threshold[0], 1.5);
        assert_eq!(t.n_leaves(), 2);
        assert!(t.is_consistent(1));
    }

    #[test]
    fn min_leaf_blocks_split() {
        let x = array![[0.0], [1.0], [2.0], [3.0]];
        let t = fit(&x, &[0.0, 0.0, 1.0, 1.0], 3, 5);
        assert_eq!(t.n_nodes(), 1);
        assert_eq!(t.value[0], 0.5);
    }

    #[test]
    fn tie_prefers_earlier_feature_and_lower_threshold() {
        // both features separate identically
        let x = array![[0.0, 0.0], [1.0, 1.0], [2.0, 2.0], [3.0, 3.0]];
        let t = fit(&x, &[0.0, 0.0, 1.0, 1.0], 1, 1);
        assert_eq!(t.feature[0], 0);
        // symmetric target: splits at 0.5 and 2.5 score equally
        let x = array![[0.0], [1.0], [2.0], [3.0]];
        let t = fit(&x, &[1.0, 0.0, 0.0, 1.0], 1, 1);
        assert_eq!(t.threshold[0], 0.5);
    }
}

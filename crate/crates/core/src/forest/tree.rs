//! CART classification trees over binary labels.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::criterion::SplitCriterion;
use crate::cohort::Label;

/// Smallest impurity decrease treated as an improvement; also the tolerance
/// under which two candidate splits count as tied.
pub const MIN_DECREASE: f64 = 1e-12;
/// Depth used when `max_depth` is unlimited.
pub const DEPTH_CAP: u32 = 16;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "node", rename_all = "lowercase")]
pub enum TreeNode {
    Split {
        feature: usize,
        threshold: f64,
        left: Box<TreeNode>,
        right: Box<TreeNode>,
    },
    Leaf {
        class: Label,
        /// Training counts `[low, high]` that reached this leaf.
        counts: [u32; 2],
    },
}

impl TreeNode {
    /// Values `<= threshold` go left.
    pub fn predict(&self, x: &[f64]) -> Label {
        let mut node = self;
        loop {
            match node {
                TreeNode::Split { feature, threshold, left, right } => {
                    node = if x[*feature] <= *threshold { left } else { right };
                }
                TreeNode::Leaf { class, .. } => return *class,
            }
        }
    }

    pub fn depth(&self) -> u32 {
        match self {
            TreeNode::Split { left, right, .. } => 1 + left.depth().max(right.depth()),
            TreeNode::Leaf { .. } => 0,
        }
    }

    pub fn leaves(&self) -> usize {
        match self {
            TreeNode::Split { left, right, .. } => left.leaves() + right.leaves(),
            TreeNode::Leaf { .. } => 1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Split {
    pub feature: usize,
    pub threshold: f64,
    pub decrease: f64,
}

pub(crate) fn class_counts(labels: &[Label], idx: &[usize]) -> [usize; 2] {
    let mut c = [0, 0];
    for &i in idx {
        c[labels[i].index()] += 1;
    }
    c
}

/// Majority class; ties go to Low.
pub fn majority(counts: [usize; 2]) -> Label {
    if counts[1] > counts[0] {
        Label::High
    } else {
        Label::Low
    }
}

fn midpoint(a: f64, b: f64) -> f64 {
    let m = a + (b - a) / 2.0;
    // adjacent floats can round the midpoint onto the upper value
    if m >= b {
        a
    } else {
        m
    }
}

/// Exhaustive best split of the points `idx` over `features`, scanning the
/// midpoints of consecutive distinct values. Ties keep the lower feature
/// index, then the lower threshold. `None` when nothing reduces impurity.
pub fn best_split(
    rows: &[Vec<f64>],
    labels: &[Label],
    idx: &[usize],
    features: &[usize],
    criterion: &dyn SplitCriterion,
) -> Option<Split> {
    if idx.len() < 2 {
        return None;
    }
    let total = class_counts(labels, idx);
    if total[0] == 0 || total[1] == 0 {
        return None;
    }
    let n = idx.len() as f64;
    let parent = criterion.impurity(total);
    let mut features = features.to_vec();
    features.sort_unstable();
    features.dedup();

    let mut best: Option<Split> = None;
    let mut column: Vec<(f64, Label)> = Vec::with_capacity(idx.len());
    for &f in &features {
        column.clear();
        column.extend(idx.iter().map(|&i| (rows[i][f], labels[i])));
        column.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut left = [0usize, 0];
        for i in 0..column.len() - 1 {
            left[column[i].1.index()] += 1;
            let (v, next) = (column[i].0, column[i + 1].0);
            if v == next {
                continue;
            }
            let right = [total[0] - left[0], total[1] - left[1]];
            let nl = (left[0] + left[1]) as f64;
            let decrease = parent - (nl / n) * criterion.impurity(left) - ((n - nl) / n) * criterion.impurity(right);
            if decrease > MIN_DECREASE && best.is_none_or(|b| decrease > b.decrease + MIN_DECREASE) {
                best = Some(Split { feature: f, threshold: midpoint(v, next), decrease });
            }
        }
    }
    best
}

/// Sample `k` distinct feature indices out of `d` (partial Fisher-Yates), sorted.
pub(crate) fn draw_features<R: Rng>(d: usize, k: usize, rng: &mut R) -> Vec<usize> {
    let mut pool: Vec<usize> = (0..d).collect();
    let k = k.min(d);
    for i in 0..k {
        let j = rng.random_range(i..d);
        pool.swap(i, j);
    }
    let mut picked = pool[..k].to_vec();
    picked.sort_unstable();
    picked
}

pub(crate) struct TreeParams<'a> {
    pub max_depth: u32,
    pub features_per_split: usize,
    pub criterion: &'a dyn SplitCriterion,
}

/// Grow a tree on the (possibly repeated) row indices `idx`.
pub(crate) fn fit_tree<R: Rng>(
    rows: &[Vec<f64>],
    labels: &[Label],
    idx: &[usize],
    params: &TreeParams<'_>,
    rng: &mut R,
) -> TreeNode {
    grow(rows, labels, idx, params, rng, 0)
}

fn leaf(counts: [usize; 2]) -> TreeNode {
    TreeNode::Leaf { class: majority(counts), counts: [counts[0] as u32, counts[1] as u32] }
}

fn grow<R: Rng>(
    rows: &[Vec<f64>],
    labels: &[Label],
    idx: &[usize],
    params: &TreeParams<'_>,
    rng: &mut R,
    depth: u32,
) -> TreeNode {
    let counts = class_counts(labels, idx);
    if depth >= params.max_depth || counts[0] == 0 || counts[1] == 0 {
        return leaf(counts);
    }
    let d = rows.first().map_or(0, Vec::len);
    let features = draw_features(d, params.features_per_split, rng);
    let Some(split) = best_split(rows, labels, idx, &features, params.criterion) else {
        return leaf(counts);
    };
    let (l, r): (Vec<usize>, Vec<usize>) = idx.iter().partition(|&&i| rows[i][split.feature] <= split.threshold);
    let left = grow(rows, labels, &l, params, rng, depth + 1);
    let right = grow(rows, labels, &r, params, rng, depth + 1);
    TreeNode::Split { feature: split.feature, threshold: split.threshold, left: Box::new(left), right: Box::new(right) }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::forest::criterion::{Entropy, Gini};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use Label::{High, Low};

    fn params(max_depth: u32, fps: usize) -> TreeParams<'static> {
        TreeParams { max_depth, features_per_split: fps, criterion: &Gini }
    }

    #[test]
    fn two_point_split() {
        // parent gini 0.5, both children pure
        let rows = vec![vec![0.0], vec![1.0]];
        let s = best_split(&rows, &[Low, High], &[0, 1], &[0], &Gini).unwrap();
        assert_eq!((s.feature, s.threshold), (0, 0.5));
        assert!((s.decrease - 0.5).abs() < 1e-15);
        let s = best_split(&rows, &[Low, High], &[0, 1], &[0], &Entropy).unwrap();
        assert!((s.decrease - 1.0).abs() < 1e-15);
    }

    #[test]
    fn pure_subset_has_no_split() {
        let rows = vec![vec![0.0], vec![1.0], vec![2.0]];
        assert!(best_split(&rows, &[High, High, High], &[0, 1, 2], &[0], &Gini).is_none());
        assert!(best_split(&rows, &[High, Low, High], &[0], &[0], &Gini).is_none());
    }

    #[test]
    fn duplicated_columns_prefer_lower_index() {
        let rows = vec![vec![0.1, 0.1], vec![0.2, 0.2], vec![0.8, 0.8], vec![0.9, 0.9]];
        let labels = [Low, Low, High, High];
        let s = best_split(&rows, &labels, &[0, 1, 2, 3], &[1, 0], &Gini).unwrap();
        assert_eq!(s.feature, 0);
        assert!((s.threshold - 0.5).abs() < 1e-15);
    }

    #[test]
    fn ties_prefer_lower_threshold() {
        // symmetric XOR-free layout: splitting at 0.5 or 2.5 yields equal decrease
        let rows = vec![vec![0.0], vec![1.0], vec![2.0], vec![3.0]];
        let labels = [Low, High, High, Low];
        let s = best_split(&rows, &labels, &[0, 1, 2, 3], &[0], &Gini).unwrap();
        assert_eq!(s.threshold, 0.5);
    }

    #[test]
    fn separable_stump() {
        let rows: Vec<Vec<f64>> = (0..10).map(|i| vec![f64::from(i)]).collect();
        let labels: Vec<Label> = (0..10).map(|i| if i < 6 { Low } else { High }).collect();
        let idx: Vec<usize> = (0..10).collect();
        let t = fit_tree(&rows, &labels, &idx, &params(1, 1), &mut ChaCha8Rng::seed_from_u64(1));
        assert_eq!(t.depth(), 1);
        for (x, y) in rows.iter().zip(&labels) {
            assert_eq!(t.predict(x), *y);
        }
    }

    #[test]
    fn single_class_is_leaf() {
        let rows = vec![vec![0.0], vec![1.0]];
        let t = fit_tree(&rows, &[High, High], &[0, 1], &params(4, 1), &mut ChaCha8Rng::seed_from_u64(1));
        assert_eq!(t, TreeNode::Leaf { class: High, counts: [0, 2] });
    }

    #[test]
    fn leaf_ties_go_low() {
        assert_eq!(majority([2, 2]), Low);
        let rows = vec![vec![0.0], vec![0.0]];
        let t = fit_tree(&rows, &[High, Low], &[0, 1], &params(4, 1), &mut ChaCha8Rng::seed_from_u64(1));
        assert_eq!(t.predict(&[0.0]), Low);
    }

    #[test]
    fn feature_draw_is_distinct_and_sorted() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for k in 1..=4 {
            let f = draw_features(4, k, &mut rng);
            assert_eq!(f.len(), k);
            assert!(f.windows(2).all(|w| w[0] < w[1]));
        }
    }

    #[test]
    fn serde_shape() {
        let t = TreeNode::Split {
            feature: 1,
            threshold: 0.25,
            left: Box::new(TreeNode::Leaf { class: Low, counts: [3, 0] }),
            right: Box::new(TreeNode::Leaf { class: High, counts: [0, 2] }),
        };
        let j = serde_json::to_string(&t).unwrap();
        assert!(j.starts_with(r#"{"node":"split","feature":1"#));
        assert_eq!(serde_json::from_str::<TreeNode>(&j).unwrap(), t);
    }
}

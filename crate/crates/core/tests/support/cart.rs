//! Brute-force CART used as a reference for the forest's tree builder.
//! Every candidate split is evaluated by re-partitioning the rows.

use geobehave::cohort::Label;

pub enum Node {
    Split { feature: usize, threshold: f64, left: Box<Node>, right: Box<Node> },
    Leaf(Label),
}

impl Node {
    pub fn predict(&self, x: &[f64]) -> Label {
        match self {
            Node::Split { feature, threshold, left, right } => {
                if x[*feature] <= *threshold {
                    left.predict(x)
                } else {
                    right.predict(x)
                }
            }
            Node::Leaf(l) => *l,
        }
    }
}

#[derive(Clone, Copy)]
pub enum Impurity {
    Gini,
    Entropy,
}

fn impurity(kind: Impurity, labels: &[Label]) -> f64 {
    if labels.is_empty() {
        return 0.0;
    }
    let p = labels.iter().filter(|l| **l == Label::High).count() as f64 / labels.len() as f64;
    match kind {
        Impurity::Gini => 2.0 * p * (1.0 - p),
        Impurity::Entropy => [p, 1.0 - p].iter().filter(|q| **q > 0.0).map(|q| -q * q.log2()).sum(),
    }
}

fn majority(labels: &[Label]) -> Label {
    let high = labels.iter().filter(|l| **l == Label::High).count();
    if 2 * high > labels.len() {
        Label::High
    } else {
        Label::Low
    }
}

pub fn build(rows: &[Vec<f64>], labels: &[Label], kind: Impurity, max_depth: u32) -> Node {
    let data: Vec<(&[f64], Label)> = rows.iter().map(Vec::as_slice).zip(labels.iter().copied()).collect();
    grow(&data, kind, max_depth)
}

fn grow(data: &[(&[f64], Label)], kind: Impurity, depth_left: u32) -> Node {
    let labels: Vec<Label> = data.iter().map(|d| d.1).collect();
    let parent = impurity(kind, &labels);
    if depth_left == 0 || parent == 0.0 {
        return Node::Leaf(majority(&labels));
    }
    let d = data[0].0.len();
    let mut best: Option<(f64, usize, f64)> = None;
    for f in 0..d {
        let mut values: Vec<f64> = data.iter().map(|r| r.0[f]).collect();
        values.sort_by(f64::total_cmp);
        values.dedup();
        for w in values.windows(2) {
            let t = (w[0] + w[1]) / 2.0;
            let left: Vec<Label> = data.iter().filter(|r| r.0[f] <= t).map(|r| r.1).collect();
            let right: Vec<Label> = data.iter().filter(|r| r.0[f] > t).map(|r| r.1).collect();
            let n = data.len() as f64;
            let gain = parent
                - left.len() as f64 / n * impurity(kind, &left)
                - right.len() as f64 / n * impurity(kind, &right);
            let better = match best {
                None => gain > 1e-12,
                Some((g, _, _)) => gain > g + 1e-12,
            };
            if better {
                best = Some((gain, f, t));
            }
        }
    }
    match best {
        None => Node::Leaf(majority(&labels)),
        Some((_, feature, threshold)) => {
            let (l, r): (Vec<_>, Vec<_>) = data.iter().partition(|r| r.0[feature] <= threshold);
            Node::Split {
                feature,
                threshold,
                left: Box::new(grow(&l, kind, depth_left - 1)),
                right: Box::new(grow(&r, kind, depth_left - 1)),
            }
        }
    }
}

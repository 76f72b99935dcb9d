//! Confusion matrices, classification metrics, stratified k-fold model
//! selection and leave-one-out evaluation.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::ensemble::{Ensemble, ForestHyperparams};
use crate::cohort::{Dataset, Label};
use crate::error::{Error, Result};
use crate::geocode::GeohashId;
use crate::rng::derive_seed;

const FOLD_STREAM: u64 = 0x666f_6c64;
const CV_STREAM: u64 = 0x6376;
const LOO_STREAM: u64 = 0x006c_6f6f;
/// Mean accuracies closer than this are treated as tied during selection.
const SCORE_TIE: f64 = 1e-12;

/// Rows are actual classes, columns predicted classes.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub tll: u32,
    pub tlh: u32,
    pub thl: u32,
    pub thh: u32,
}

impl ConfusionMatrix {
    pub fn new(tll: u32, tlh: u32, thl: u32, thh: u32) -> Self {
        ConfusionMatrix { tll, tlh, thl, thh }
    }

    pub fn record(&mut self, actual: Label, predicted: Label) {
        match (actual, predicted) {
            (Label::Low, Label::Low) => self.tll += 1,
            (Label::Low, Label::High) => self.tlh += 1,
            (Label::High, Label::Low) => self.thl += 1,
            (Label::High, Label::High) => self.thh += 1,
        }
    }

    pub fn total(&self) -> u32 {
        self.tll + self.tlh + self.thl + self.thh
    }

    pub fn correct(&self) -> u32 {
        self.tll + self.thh
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassMetrics {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    /// Actual members of the class.
    pub support: u32,
    /// Set when any ratio had a zero denominator and was reported as 0.
    pub degenerate: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub accuracy: f64,
    pub low: ClassMetrics,
    pub high: ClassMetrics,
    pub total: u32,
}

fn ratio(num: u32, den: u32, degenerate: &mut bool) -> f64 {
    if den == 0 {
        *degenerate = true;
        0.0
    } else {
        f64::from(num) / f64::from(den)
    }
}

fn class_metrics(tp: u32, predicted: u32, actual: u32) -> ClassMetrics {
    let mut degenerate = false;
    let precision = ratio(tp, predicted, &mut degenerate);
    let recall = ratio(tp, actual, &mut degenerate);
    let f1 = if precision + recall == 0.0 {
        degenerate = true;
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    };
    ClassMetrics { precision, recall, f1, support: actual, degenerate }
}

pub fn metrics(cm: &ConfusionMatrix) -> Result<MetricsReport> {
    let total = cm.total();
    if total == 0 {
        return Err(Error::NoData);
    }
    Ok(MetricsReport {
        accuracy: f64::from(cm.correct()) / f64::from(total),
        low: class_metrics(cm.tll, cm.tll + cm.thl, cm.tll + cm.tlh),
        high: class_metrics(cm.thh, cm.thh + cm.tlh, cm.thl + cm.thh),
        total,
    })
}

fn subset(rows: &[Vec<f64>], labels: &[Label], keep: impl Fn(usize) -> bool) -> (Vec<Vec<f64>>, Vec<Label>) {
    (0..rows.len()).filter(|&i| keep(i)).map(|i| (rows[i].clone(), labels[i])).unzip()
}

/// Fold assignment for every point: each class is shuffled with the seeded
/// stream and dealt round-robin, Low first, so folds stay stratified.
pub fn stratified_folds(labels: &[Label], k: usize, seed: u64) -> Result<Vec<usize>> {
    if k < 2 || labels.len() < k {
        return Err(Error::InvalidFolds { points: labels.len(), folds: k });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, FOLD_STREAM, 0));
    let mut fold = vec![0; labels.len()];
    let mut next = 0;
    for class in [Label::Low, Label::High] {
        let mut members: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == class).collect();
        members.shuffle(&mut rng);
        for i in members {
            fold[i] = next % k;
            next += 1;
        }
    }
    Ok(fold)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvScore {
    pub hyperparams: ForestHyperparams,
    pub mean_accuracy: f64,
    pub fold_accuracies: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvReport {
    pub folds: usize,
    pub seed: u64,
    pub best: ForestHyperparams,
    pub best_accuracy: f64,
    pub scores: Vec<CvScore>,
}

/// Pick the configuration with the highest mean fold accuracy. Ties go to
/// fewer trees, then smaller depth, then gini before entropy; exact
/// duplicates keep their first occurrence.
fn select(scores: &[CvScore]) -> Option<&CvScore> {
    let mut best: Option<&CvScore> = None;
    for s in scores {
        let replace = match best {
            None => true,
            Some(b) if s.mean_accuracy > b.mean_accuracy + SCORE_TIE => true,
            Some(b) if (s.mean_accuracy - b.mean_accuracy).abs() <= SCORE_TIE => {
                s.hyperparams.simplicity_key() < b.hyperparams.simplicity_key()
            }
            Some(_) => false,
        };
        if replace {
            best = Some(s);
        }
    }
    best
}

/// k-fold model selection over `grid` on raw rows.
pub fn cross_validate_rows(
    rows: &[Vec<f64>],
    labels: &[Label],
    grid: &[ForestHyperparams],
    k: usize,
    seed: u64,
) -> Result<CvReport> {
    if grid.is_empty() {
        return Err(Error::InvalidInput("empty hyperparameter grid".into()));
    }
    let d = rows.first().map_or(0, Vec::len);
    for hp in grid {
        hp.validate(d)?;
    }
    let folds = stratified_folds(labels, k, seed)?;
    let jobs: Vec<(usize, usize)> = (0..grid.len()).flat_map(|c| (0..k).map(move |f| (c, f))).collect();
    let accuracies: Vec<f64> = jobs
        .par_iter()
        .map(|&(c, f)| {
            let (train_x, train_y) = subset(rows, labels, |i| folds[i] != f);
            let hp = grid[c].with_seed(derive_seed(grid[c].seed, CV_STREAM, f as u64));
            let model = Ensemble::fit(&train_x, &train_y, &hp)?;
            let test: Vec<usize> = (0..rows.len()).filter(|&i| folds[i] == f).collect();
            let correct = test.iter().filter(|&&i| model.vote(&rows[i]).class == labels[i]).count();
            Ok(correct as f64 / test.len() as f64)
        })
        .collect::<Result<_>>()?;
    let scores: Vec<CvScore> = grid
        .iter()
        .enumerate()
        .map(|(c, hp)| {
            let fold_accuracies = accuracies[c * k..(c + 1) * k].to_vec();
            CvScore {
                hyperparams: hp.clone(),
                mean_accuracy: fold_accuracies.iter().sum::<f64>() / k as f64,
                fold_accuracies,
            }
        })
        .collect();
    let best = select(&scores).expect("nonempty grid");
    Ok(CvReport { folds: k, seed, best: best.hyperparams.clone(), best_accuracy: best.mean_accuracy, scores })
}

pub fn cross_validate(ds: &Dataset, grid: &[ForestHyperparams], k: usize, seed: u64) -> Result<CvReport> {
    cross_validate_rows(&ds.features(), &ds.labels(), grid, k, seed)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LooPrediction {
    pub geohash: Option<GeohashId>,
    pub actual: Label,
    pub predicted: Label,
    pub vote_fraction: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LooReport {
    pub confusion: ConfusionMatrix,
    pub predictions: Vec<LooPrediction>,
}

/// Leave-one-out over raw rows: a fresh forest per held-out point, seeded
/// from `(hp.seed, index)`.
pub fn loo_rows(rows: &[Vec<f64>], labels: &[Label], hp: &ForestHyperparams) -> Result<LooReport> {
    if rows.len() < 2 || rows.len() != labels.len() {
        return Err(Error::NoData);
    }
    if !labels.contains(&Label::Low) || !labels.contains(&Label::High) {
        return Err(Error::DegenerateLabels("leave-one-out needs both classes".into()));
    }
    let predictions: Vec<LooPrediction> = (0..rows.len())
        .into_par_iter()
        .map(|held| {
            let (train_x, train_y) = subset(rows, labels, |i| i != held);
            let hp = hp.with_seed(derive_seed(hp.seed, LOO_STREAM, held as u64));
            let p = Ensemble::fit(&train_x, &train_y, &hp)?.vote(&rows[held]);
            Ok(LooPrediction {
                geohash: None,
                actual: labels[held],
                predicted: p.class,
                vote_fraction: p.vote_fraction,
            })
        })
        .collect::<Result<_>>()?;
    let mut confusion = ConfusionMatrix::default();
    for p in &predictions {
        confusion.record(p.actual, p.predicted);
    }
    Ok(LooReport { confusion, predictions })
}

pub fn loo_evaluate(ds: &Dataset, hp: &ForestHyperparams) -> Result<LooReport> {
    let mut report = loo_rows(&ds.features(), &ds.labels(), hp)?;
    for (p, point) in report.predictions.iter_mut().zip(&ds.points) {
        p.geohash = Some(point.geohash.clone());
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use Label::{High, Low};

    #[test]
    fn published_matrix_arithmetic() {
        let r = metrics(&ConfusionMatrix::new(21, 3, 5, 13)).unwrap();
        assert!((r.accuracy - 34.0 / 42.0).abs() < 1e-12);
        assert!((r.low.precision - 21.0 / 26.0).abs() < 1e-12);
        assert!((r.low.recall - 21.0 / 24.0).abs() < 1e-12);
        assert!((r.high.precision - 13.0 / 16.0).abs() < 1e-12);
        assert!((r.high.recall - 13.0 / 18.0).abs() < 1e-12);
        assert!((r.low.f1 - 0.84).abs() < 1e-12);
        assert!((r.high.f1 - 26.0 / 34.0).abs() < 1e-12);
    }

    #[test]
    fn perfect_and_empty() {
        let r = metrics(&ConfusionMatrix::new(5, 0, 0, 7)).unwrap();
        for v in [r.accuracy, r.low.precision, r.low.recall, r.low.f1, r.high.precision, r.high.recall, r.high.f1] {
            assert_eq!(v, 1.0);
        }
        assert!(matches!(metrics(&ConfusionMatrix::default()), Err(Error::NoData)));
    }

    #[test]
    fn zero_denominators_flagged() {
        let r = metrics(&ConfusionMatrix::new(4, 0, 3, 0)).unwrap();
        assert_eq!(r.high.precision, 0.0);
        assert!(r.high.degenerate);
        assert!(!r.low.degenerate);
    }

    #[test]
    fn folds_are_stratified() {
        let labels: Vec<Label> = (0..42).map(|i| if i < 24 { Low } else { High }).collect();
        let folds = stratified_folds(&labels, 10, 7).unwrap();
        for f in 0..10 {
            let members: Vec<usize> = (0..42).filter(|&i| folds[i] == f).collect();
            assert!((4..=5).contains(&members.len()));
            let highs = members.iter().filter(|&&i| labels[i] == High).count();
            assert!((1..=2).contains(&highs));
        }
        assert!(matches!(stratified_folds(&labels[..5], 10, 7), Err(Error::InvalidFolds { .. })));
    }

    fn rows_1d(n: usize) -> (Vec<Vec<f64>>, Vec<Label>) {
        let rows = (0..n).map(|i| vec![i as f64 / n as f64, ((i * 7) % n) as f64 / n as f64]).collect();
        let labels = (0..n).map(|i| if i < n / 2 { Low } else { High }).collect();
        (rows, labels)
    }

    #[test]
    fn single_config_grid() {
        let (x, y) = rows_1d(20);
        let hp = ForestHyperparams { n_trees: 5, ..Default::default() };
        let r = cross_validate_rows(&x, &y, std::slice::from_ref(&hp), 10, 1).unwrap();
        assert_eq!(r.best, hp);
        assert_eq!(r.scores.len(), 1);
    }

    #[test]
    fn duplicates_keep_first_and_ties_prefer_simple() {
        let (x, y) = rows_1d(20);
        let a = ForestHyperparams { n_trees: 5, max_depth: Some(2), ..Default::default() };
        let b = ForestHyperparams { n_trees: 3, max_depth: Some(3), ..Default::default() };
        let r = cross_validate_rows(&x, &y, &[a.clone(), a.clone(), b.clone()], 10, 1).unwrap();
        // the data are separable on feature 0, so every config scores identically
        assert!(r.scores.iter().all(|s| (s.mean_accuracy - r.scores[0].mean_accuracy).abs() < 1e-12));
        assert_eq!(r.best, b);
        let scores = vec![
            CvScore { hyperparams: a.clone(), mean_accuracy: 0.9, fold_accuracies: vec![] },
            CvScore { hyperparams: a.clone(), mean_accuracy: 0.9, fold_accuracies: vec![] },
        ];
        assert!(std::ptr::eq(select(&scores).unwrap(), &scores[0]));
        let e = ForestHyperparams { criterion: "entropy".into(), ..a.clone() };
        let scores = vec![
            CvScore { hyperparams: e, mean_accuracy: 0.9, fold_accuracies: vec![] },
            CvScore { hyperparams: a.clone(), mean_accuracy: 0.9, fold_accuracies: vec![] },
        ];
        assert_eq!(select(&scores).unwrap().hyperparams, a);
    }

    #[test]
    fn selected_config_is_argmax() {
        let (x, mut y) = rows_1d(30);
        y.swap(3, 20);
        y.swap(8, 27);
        let grid: Vec<_> = [1, 3, 9]
            .iter()
            .flat_map(|&n| {
                [Some(1), Some(3)].map(|d| ForestHyperparams { n_trees: n, max_depth: d, ..Default::default() })
            })
            .collect();
        let r = cross_validate_rows(&x, &y, &grid, 10, 3).unwrap();
        assert!(r.scores.iter().all(|s| s.mean_accuracy <= r.best_accuracy + 1e-12));
    }

    #[test]
    fn loo_two_points_degenerate_folds() {
        let x = vec![vec![0.0], vec![1.0]];
        let y = vec![Low, High];
        let hp = ForestHyperparams { n_trees: 3, features_per_split: 1, ..Default::default() };
        let r = loo_rows(&x, &y, &hp).unwrap();
        // each fold trains on the other class only
        assert_eq!(r.confusion, ConfusionMatrix::new(0, 1, 1, 0));
        assert!(loo_rows(&x, &[Low, Low], &hp).is_err());
    }

    #[test]
    fn loo_is_deterministic() {
        let (x, y) = rows_1d(16);
        let hp = ForestHyperparams { n_trees: 7, ..Default::default() };
        let a = loo_rows(&x, &y, &hp).unwrap();
        assert_eq!(a, loo_rows(&x, &y, &hp).unwrap());
        assert_eq!(a.confusion.total(), 16);
    }

    fn twinned(locations: usize) -> (Vec<Vec<f64>>, Vec<Label>) {
        let mut x = Vec::new();
        let mut y = Vec::new();
        for i in 0..20 {
            let row = vec![(i % locations) as f64 / 20.0, 0.0];
            x.push(row.clone());
            y.push(Low);
            x.push(row);
            y.push(High);
        }
        (x, y)
    }

    fn loo_accuracy(x: &[Vec<f64>], y: &[Label], n_trees: usize) -> f64 {
        let hp = ForestHyperparams { n_trees, ..Default::default() };
        metrics(&loo_rows(x, y, &hp).unwrap().confusion).unwrap().accuracy
    }

    #[test]
    fn twinned_points_score_no_better_than_chance() {
        // A single tree on indistinguishable points is a bootstrap coin flip.
        let (x, y) = twinned(1);
        let acc = loo_accuracy(&x, &y, 1);
        assert!((0.3..=0.7).contains(&acc), "accuracy {acc}");
        // Holding out one twin leaves its opposite-label partner in training,
        // so larger forests are pulled below chance rather than above it.
        for locations in [1, 5, 20] {
            let (x, y) = twinned(locations);
            for n in [10, 100] {
                let acc = loo_accuracy(&x, &y, n);
                assert!(acc <= 0.5, "{locations} locations, {n} trees: accuracy {acc}");
            }
        }
    }

    proptest! {
        #[test]
        fn metric_identities(tll in 0u32..50, tlh in 0u32..50, thl in 0u32..50, thh in 0u32..50) {
            let cm = ConfusionMatrix::new(tll, tlh, thl, thh);
            prop_assume!(cm.total() > 0);
            let r = metrics(&cm).unwrap();
            let total = f64::from(cm.total());
            let weighted = f64::from(tll + tlh) / total * r.low.recall + f64::from(thl + thh) / total * r.high.recall;
            prop_assert!((r.accuracy - weighted).abs() < 1e-12);
            for v in [r.accuracy, r.low.precision, r.low.recall, r.low.f1, r.high.precision, r.high.recall, r.high.f1] {
                prop_assert!((0.0..=1.0).contains(&v));
            }
        }
    }
}

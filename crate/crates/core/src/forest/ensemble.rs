use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::criterion::{criterion, CRITERIA};
use super::tree::{fit_tree, TreeNode, TreeParams, DEPTH_CAP};
use crate::cohort::{normalize, Dataset, Label, NormBounds};
use crate::environment::EnvAttributes;
use crate::error::{Error, Result};
use crate::rng::derive_seed;

pub const MODEL_FORMAT: &str = "geobehave-forest";
pub const MODEL_VERSION: u32 = 1;

const TREE_STREAM: u64 = 0x7472_6565;

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ForestHyperparams {
    pub n_trees: usize,
    /// `None` grows until purity, capped at [`DEPTH_CAP`] levels.
    pub max_depth: Option<u32>,
    pub criterion: String,
    pub bootstrap: bool,
    pub features_per_split: usize,
    pub seed: u64,
}

impl Default for ForestHyperparams {
    fn default() -> Self {
        ForestHyperparams {
            n_trees: 100,
            max_depth: None,
            criterion: "gini".into(),
            bootstrap: true,
            features_per_split: 2,
            seed: 7,
        }
    }
}

impl ForestHyperparams {
    pub fn validate(&self, n_features: usize) -> Result<()> {
        if self.n_trees == 0 {
            return Err(Error::InvalidInput("n_trees must be at least 1".into()));
        }
        if !(1..=n_features).contains(&self.features_per_split) {
            return Err(Error::InvalidInput(format!(
                "features_per_split {} outside 1..={n_features}",
                self.features_per_split
            )));
        }
        if let Some(d) = self.max_depth {
            if !(1..=DEPTH_CAP).contains(&d) {
                return Err(Error::InvalidInput(format!("max_depth {d} outside 1..={DEPTH_CAP}")));
            }
        }
        criterion(&self.criterion)?;
        Ok(())
    }

    pub fn effective_depth(&self) -> u32 {
        self.max_depth.unwrap_or(DEPTH_CAP).min(DEPTH_CAP)
    }

    pub fn with_seed(&self, seed: u64) -> Self {
        ForestHyperparams { seed, ..self.clone() }
    }

    /// Ordering used to break accuracy ties: fewer trees, then shallower,
    /// then criterion registration order.
    pub(crate) fn simplicity_key(&self) -> (usize, u32, usize) {
        (self.n_trees, self.max_depth.unwrap_or(u32::MAX), CRITERIA.rank(&self.criterion).unwrap_or(usize::MAX))
    }
}

/// The hyperparameter grid searched by default.
pub fn default_grid(seed: u64) -> Vec<ForestHyperparams> {
    let mut grid = Vec::new();
    for n_trees in [10, 50, 100, 200] {
        for max_depth in [Some(2), Some(3), Some(4), None] {
            for criterion in ["gini", "entropy"] {
                grid.push(ForestHyperparams {
                    n_trees,
                    max_depth,
                    criterion: criterion.into(),
                    bootstrap: true,
                    features_per_split: 2,
                    seed,
                });
            }
        }
    }
    grid
}

/// Result of a forest vote.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub class: Label,
    /// Share of trees voting for `class`.
    pub vote_fraction: f64,
    pub votes: usize,
}

/// Majority vote; an even split goes to Low.
pub fn tally(trees: &[TreeNode], x: &[f64]) -> Prediction {
    let high = trees.iter().filter(|t| t.predict(x) == Label::High).count();
    let low = trees.len() - high;
    let (class, votes) = if high > low { (Label::High, high) } else { (Label::Low, low) };
    Prediction { class, vote_fraction: votes as f64 / trees.len() as f64, votes }
}

/// Trained trees without normalization context.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Ensemble {
    pub trees: Vec<TreeNode>,
}

impl Ensemble {
    /// Grow `hp.n_trees` trees; tree `k` draws from its own stream seeded
    /// by `(hp.seed, k)`. Single-class inputs yield single-leaf trees.
    pub fn fit(rows: &[Vec<f64>], labels: &[Label], hp: &ForestHyperparams) -> Result<Ensemble> {
        if rows.is_empty() || rows.len() != labels.len() {
            return Err(Error::NoData);
        }
        let d = rows[0].len();
        if rows.iter().any(|r| r.len() != d) {
            return Err(Error::InvalidInput("rows have differing dimensions".into()));
        }
        hp.validate(d)?;
        let params = TreeParams {
            max_depth: hp.effective_depth(),
            features_per_split: hp.features_per_split,
            criterion: criterion(&hp.criterion)?,
        };
        let n = rows.len();
        let trees = (0..hp.n_trees as u64)
            .into_par_iter()
            .map(|k| {
                let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(hp.seed, TREE_STREAM, k));
                let idx: Vec<usize> =
                    if hp.bootstrap { (0..n).map(|_| rng.random_range(0..n)).collect() } else { (0..n).collect() };
                fit_tree(rows, labels, &idx, &params, &mut rng)
            })
            .collect();
        Ok(Ensemble { trees })
    }

    pub fn vote(&self, x: &[f64]) -> Prediction {
        tally(&self.trees, x)
    }
}

/// A trained forest with everything needed to score raw POI counts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ForestModel {
    pub format: String,
    pub version: u32,
    pub hyperparams: ForestHyperparams,
    pub norm_bounds: NormBounds,
    pub threshold: f64,
    pub training_points: usize,
    pub trees: Vec<TreeNode>,
    pub fingerprint: String,
}

#[derive(Serialize)]
struct FingerprintView<'a> {
    format: &'a str,
    version: u32,
    hyperparams: &'a ForestHyperparams,
    norm_bounds: &'a NormBounds,
    threshold: f64,
    training_points: usize,
    trees: &'a [TreeNode],
}

impl ForestModel {
    fn compute_fingerprint(&self) -> Result<String> {
        let view = FingerprintView {
            format: &self.format,
            version: self.version,
            hyperparams: &self.hyperparams,
            norm_bounds: &self.norm_bounds,
            threshold: self.threshold,
            training_points: self.training_points,
            trees: &self.trees,
        };
        let bytes = serde_json::to_vec(&view)?;
        Ok(hex::encode(Sha256::digest(&bytes)))
    }

    pub fn ensemble(&self) -> Ensemble {
        Ensemble { trees: self.trees.clone() }
    }

    pub fn predict(&self, env: &EnvAttributes) -> Prediction {
        self.predict_features(&normalize(env, &self.norm_bounds))
    }

    pub fn predict_features(&self, x: &[f64]) -> Prediction {
        tally(&self.trees, x)
    }

    pub fn to_json(&self) -> Result<String> {
        let mut s = serde_json::to_string_pretty(self)?;
        s.push('\n');
        Ok(s)
    }

    /// Parse and verify format, version and fingerprint.
    pub fn from_json(text: &str) -> Result<ForestModel> {
        let model: ForestModel = serde_json::from_str(text)?;
        if model.format != MODEL_FORMAT || model.version != MODEL_VERSION {
            return Err(Error::InvalidInput(format!(
                "unsupported model format {:?} version {}",
                model.format, model.version
            )));
        }
        if model.trees.len() != model.hyperparams.n_trees {
            return Err(Error::InvalidInput("tree count does not match hyperparameters".into()));
        }
        let expected = model.compute_fingerprint()?;
        if expected != model.fingerprint {
            return Err(Error::InvalidInput("model fingerprint mismatch".into()));
        }
        Ok(model)
    }
}

/// Train the final model on the whole dataset.
pub fn fit_forest(ds: &Dataset, hp: &ForestHyperparams) -> Result<ForestModel> {
    let [low, high] = ds.class_counts();
    if low == 0 || high == 0 {
        return Err(Error::DegenerateLabels("training data holds a single class".into()));
    }
    let ensemble = Ensemble::fit(&ds.features(), &ds.labels(), hp)?;
    let mut model = ForestModel {
        format: MODEL_FORMAT.into(),
        version: MODEL_VERSION,
        hyperparams: hp.clone(),
        norm_bounds: ds.norm_bounds,
        threshold: ds.threshold,
        training_points: ds.len(),
        trees: ensemble.trees,
        fingerprint: String::new(),
    };
    model.fingerprint = model.compute_fingerprint()?;
    Ok(model)
}

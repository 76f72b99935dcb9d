use crate::error::Result;
use crate::registry::{Named, Registry};

/// Node impurity from binary class counts `[low, high]`.
pub trait SplitCriterion: Named + Send + Sync {
    fn impurity(&self, counts: [usize; 2]) -> f64;
}

pub struct Gini;
pub struct Entropy;

impl Named for Gini {
    fn name(&self) -> &'static str {
        "gini"
    }
}

impl SplitCriterion for Gini {
    fn impurity(&self, counts: [usize; 2]) -> f64 {
        let n = (counts[0] + counts[1]) as f64;
        if n == 0.0 {
            return 0.0;
        }
        let p = counts[0] as f64 / n;
        let q = counts[1] as f64 / n;
        1.0 - p * p - q * q
    }
}

impl Named for Entropy {
    fn name(&self) -> &'static str {
        "entropy"
    }
}

impl SplitCriterion for Entropy {
    fn impurity(&self, counts: [usize; 2]) -> f64 {
        let n = (counts[0] + counts[1]) as f64;
        if n == 0.0 {
            return 0.0;
        }
        counts
            .iter()
            .filter(|&&c| c > 0)
            .map(|&c| {
                let p = c as f64 / n;
                -p * p.log2()
            })
            .sum()
    }
}

/// Registration order doubles as the tie-break order in model selection.
pub static CRITERIA: Registry<dyn SplitCriterion> = Registry::new("split criterion", &[&Gini, &Entropy]);

pub fn criterion(name: &str) -> Result<&'static dyn SplitCriterion> {
    CRITERIA.get(name)
}

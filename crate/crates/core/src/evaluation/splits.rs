use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::data::{Label, PromptCollection};
use crate::error::{Error, Result};
use crate::seed::Seed;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitPlan {
    pub n_splits: usize,
    pub test_fraction: f64,
    pub seed: Seed,
}

impl Default for SplitPlan {
    fn default() -> Self {
        SplitPlan { n_splits: 20, test_fraction: 1.0 / 3.0, seed: Seed(0) }
    }
}

/// Train/test record indices, each sorted ascending.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Split {
    pub train: Vec<usize>,
    pub test: Vec<usize>,
}

fn class_name(label: Label) -> &'static str {
    match label {
        Label::Genuine => "genuine",
        Label::Hallucinated => "hallucinated",
        Label::Unknown => "unknown",
    }
}

/// Per-class test count: `round(count · test_fraction)`, half away from zero.
pub fn test_count(count: usize, test_fraction: f64) -> usize {
    (count as f64 * test_fraction).round() as usize
}

/// `n_splits` seeded stratified shuffles. Split `s` shuffles the genuine then
/// the hallucinated indices with `plan.seed.derive("split", [s])`.
pub fn stratified_splits(collection: &PromptCollection, plan: &SplitPlan) -> Result<Vec<Split>> {
    if plan.n_splits == 0 {
        return Err(Error::InvalidParameter("n_splits must be at least 1".into()));
    }
    if !(plan.test_fraction > 0.0 && plan.test_fraction < 1.0) {
        return Err(Error::InvalidParameter(format!("test_fraction must lie in (0, 1), got {}", plan.test_fraction)));
    }
    let classes = [Label::Genuine, Label::Hallucinated].map(|l| (l, collection.class_indices(l)));
    for (label, idx) in &classes {
        let n_test = test_count(idx.len(), plan.test_fraction);
        if n_test < 1 || idx.len() - n_test.min(idx.len()) < 2 {
            return Err(Error::InfeasibleSplit {
                class: class_name(*label),
                message: format!(
                    "{} members with test fraction {:.4} leave {} for test (need >= 1) and {} for training (need >= 2)",
                    idx.len(),
                    plan.test_fraction,
                    n_test,
                    idx.len().saturating_sub(n_test)
                ),
            });
        }
    }

    Ok((0..plan.n_splits)
        .map(|s| {
            let mut rng = plan.seed.derive("split", &[s as u64]).rng();
            let mut train = Vec::new();
            let mut test = Vec::new();
            for (_, idx) in &classes {
                let mut shuffled = idx.clone();
                shuffled.shuffle(&mut rng);
                let n_test = test_count(idx.len(), plan.test_fraction);
                test.extend_from_slice(&shuffled[..n_test]);
                train.extend_from_slice(&shuffled[n_test..]);
            }
            train.sort_unstable();
            test.sort_unstable();
            Split { train, test }
        })
        .collect())
}

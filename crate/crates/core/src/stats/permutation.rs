use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::wasserstein::{wasserstein_sorted, WassersteinOrder};
use crate::data::{Label, PromptCollection};
use crate::distances::euclidean;
use crate::error::{Error, Result};
use crate::seed::Seed;

/// Space in which intra-class distances are measured.
#[derive(Debug, Clone, PartialEq)]
pub enum Space {
    Original,
    /// Scalar projection `z = v·x` onto a direction.
    Projected(Vec<f64>),
}

/// Observed `W(D_GG, D_HH)` against its label-permutation null.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NullCalibration {
    pub observed: f64,
    pub null_samples: Vec<f64>,
    pub permutations: usize,
    /// Fraction of null samples strictly below the observed value.
    pub exceed_fraction: f64,
    /// `(1 + #{null >= observed}) / (1 + permutations)`.
    pub p_value: f64,
}

impl NullCalibration {
    pub fn null_mean(&self) -> f64 {
        self.null_samples.iter().sum::<f64>() / self.null_samples.len() as f64
    }

    pub fn null_std(&self) -> f64 {
        let n = self.null_samples.len();
        if n < 2 {
            return 0.0;
        }
        let m = self.null_mean();
        (self.null_samples.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt()
    }

    pub fn null_max(&self) -> f64 {
        self.null_samples.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }
}

/// Condensed upper-triangular distance matrix.
struct Condensed {
    n: usize,
    values: Vec<f64>,
}

impl Condensed {
    fn build(n: usize, dist: impl Fn(usize, usize) -> f64) -> Self {
        let mut values = Vec::with_capacity(n * (n.saturating_sub(1)) / 2);
        for i in 0..n {
            for j in (i + 1)..n {
                values.push(dist(i, j));
            }
        }
        Condensed { n, values }
    }

    fn get(&self, i: usize, j: usize) -> f64 {
        let (i, j) = if i < j { (i, j) } else { (j, i) };
        self.values[i * (2 * self.n - i - 1) / 2 + (j - i - 1)]
    }

    fn intra_sorted(&self, members: &[usize]) -> Vec<f64> {
        let mut out = Vec::with_capacity(members.len() * members.len().saturating_sub(1) / 2);
        for (a, &i) in members.iter().enumerate() {
            for &j in &members[a + 1..] {
                out.push(self.get(i, j));
            }
        }
        out.sort_by(f64::total_cmp);
        out
    }
}

fn separation(matrix: &Condensed, labels: &[Label], order: WassersteinOrder) -> Result<f64> {
    let (g, h): (Vec<usize>, Vec<usize>) = (0..labels.len()).partition(|&i| labels[i] == Label::Genuine);
    wasserstein_sorted(&matrix.intra_sorted(&g), &matrix.intra_sorted(&h), order)
}

/// Calibrate `W(D_GG, D_HH)` against uniform label shuffles that preserve
/// class counts. Permutation `k` draws from `seed.derive("permutation", [k])`,
/// so the result does not depend on scheduling.
pub fn permutation_null(
    collection: &PromptCollection,
    space: &Space,
    permutations: usize,
    order: WassersteinOrder,
    seed: Seed,
) -> Result<NullCalibration> {
    if permutations == 0 {
        return Err(Error::InvalidParameter("permutations must be at least 1".into()));
    }
    for count in [collection.genuine_count, collection.hallucinated_count] {
        if count < 2 {
            return Err(Error::InsufficientPoints(count));
        }
    }
    let points = collection.points();
    let matrix = match space {
        Space::Original => Condensed::build(points.len(), |i, j| euclidean(points[i], points[j])),
        Space::Projected(direction) => {
            if direction.len() != collection.dimension {
                return Err(Error::Dimension { expected: collection.dimension, found: direction.len() });
            }
            let z: Vec<f64> = points
                .iter()
                .map(|p| p.iter().zip(direction).map(|(x, v)| x * v).sum())
                .collect();
            Condensed::build(z.len(), |i, j| (z[i] - z[j]).abs())
        }
    };

    let labels = collection.labels();
    let observed = separation(&matrix, &labels, order)?;
    let null_samples = (0..permutations)
        .into_par_iter()
        .map(|k| {
            let mut shuffled = labels.clone();
            shuffled.shuffle(&mut seed.derive("permutation", &[k as u64]).rng());
            separation(&matrix, &shuffled, order)
        })
        .collect::<Result<Vec<f64>>>()?;

    let exceeded = null_samples.iter().filter(|&&w| observed > w).count();
    let at_least = null_samples.iter().filter(|&&w| w >= observed).count();
    Ok(NullCalibration {
        observed,
        exceed_fraction: exceeded as f64 / permutations as f64,
        p_value: (1 + at_least) as f64 / (1 + permutations) as f64,
        null_samples,
        permutations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::ResponseRecord;

    fn line_collection() -> PromptCollection {
        let mut recs = Vec::new();
        for i in 0..6 {
            recs.push(ResponseRecord::new("m", "p", format!("g{i}"), Label::Genuine, vec![i as f64 * 0.1, 0.0]));
            recs.push(ResponseRecord::new("m", "p", format!("h{i}"), Label::Hallucinated, vec![i as f64 * 2.0, 1.0]));
        }
        PromptCollection::new("m", "p", recs).unwrap()
    }

    #[test]
    fn condensed_indexing() {
        let m = Condensed::build(5, |i, j| (i * 10 + j) as f64);
        for i in 0..5 {
            for j in (i + 1)..5 {
                assert_eq!(m.get(i, j), (i * 10 + j) as f64);
                assert_eq!(m.get(j, i), (i * 10 + j) as f64);
            }
        }
    }

    #[test]
    fn single_permutation_p_value() {
        let c = line_collection();
        let cal = permutation_null(&c, &Space::Original, 1, WassersteinOrder::W1, Seed(3)).unwrap();
        assert_eq!(cal.null_samples.len(), 1);
        assert!(cal.p_value == 0.5 || cal.p_value == 1.0);
    }

    #[test]
    fn fixed_seed_is_reproducible() {
        let c = line_collection();
        let a = permutation_null(&c, &Space::Original, 50, WassersteinOrder::W1, Seed(9)).unwrap();
        let b = permutation_null(&c, &Space::Original, 50, WassersteinOrder::W1, Seed(9)).unwrap();
        assert_eq!(a, b);
        let bits = |x: &NullCalibration| x.null_samples.iter().map(|v| v.to_bits()).collect::<Vec<_>>();
        assert_eq!(bits(&a), bits(&b));
    }

    #[test]
    fn invariants_hold() {
        let c = line_collection();
        let cal = permutation_null(&c, &Space::Original, 40, WassersteinOrder::W1, Seed(1)).unwrap();
        assert_eq!(cal.exceed_fraction == 1.0, cal.observed > cal.null_max());
        assert!(cal.p_value > 0.0 && cal.p_value <= 1.0);
        // the scale gap between classes is large: observed dominates
        assert!(cal.observed > cal.null_mean());
    }

    #[test]
    fn projected_space_checks_dimension() {
        let c = line_collection();
        assert!(permutation_null(&c, &Space::Projected(vec![1.0]), 5, WassersteinOrder::W1, Seed(0)).is_err());
        let cal = permutation_null(&c, &Space::Projected(vec![1.0, 0.0]), 5, WassersteinOrder::W1, Seed(0)).unwrap();
        assert_eq!(cal.permutations, 5);
    }
}

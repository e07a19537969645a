use nalgebra::{DMatrix, SVD};
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::{dot, FisherModel};
use crate::data::{Label, PromptCollection};
use crate::error::{Error, Result};
use crate::seed::Seed;

/// Singular values below this fraction of the largest are treated as zero
/// and clamped to it before whitening.
const SINGULAR_FLOOR: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "snake_case")]
pub enum ProjectorKind {
    Fisher,
    WhitenedPca { k: usize },
    RandomProjection { k: usize, seed: u64 },
}

impl ProjectorKind {
    pub fn name(&self) -> &'static str {
        match self {
            ProjectorKind::Fisher => "fisher",
            ProjectorKind::WhitenedPca { .. } => "wpca",
            ProjectorKind::RandomProjection { .. } => "ep",
        }
    }

    pub fn k(&self) -> usize {
        match self {
            ProjectorKind::Fisher => 1,
            ProjectorKind::WhitenedPca { k } | ProjectorKind::RandomProjection { k, .. } => *k,
        }
    }
}

/// A `k×d` linear map; row `i` gives output coordinate `i`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Projector {
    pub kind: ProjectorKind,
    pub rows: Vec<Vec<f64>>,
}

impl Projector {
    pub fn fisher(model: &FisherModel) -> Self {
        Projector { kind: ProjectorKind::Fisher, rows: vec![model.direction.clone()] }
    }

    pub fn input_dimension(&self) -> usize {
        self.rows.first().map_or(0, Vec::len)
    }

    pub fn output_dimension(&self) -> usize {
        self.rows.len()
    }

    pub fn project_point(&self, x: &[f64]) -> Result<Vec<f64>> {
        let d = self.input_dimension();
        if x.len() != d {
            return Err(Error::Dimension { expected: d, found: x.len() });
        }
        Ok(self.rows.iter().map(|r| dot(r, x)).collect())
    }

    pub fn project_points<P: AsRef<[f64]>>(&self, points: &[P]) -> Result<Vec<Vec<f64>>> {
        points.iter().map(|p| self.project_point(p.as_ref())).collect()
    }

    pub fn project(&self, collection: &PromptCollection) -> Result<ProjectedCollection> {
        let coordinates = self.project_points(&collection.points())?;
        Ok(ProjectedCollection {
            model_id: collection.model_id.clone(),
            prompt_id: collection.prompt_id.clone(),
            coordinates,
            labels: collection.labels(),
        })
    }
}

/// Projected coordinates, one `k`-vector per record, with labels carried over.
#[derive(Debug, Clone, PartialEq)]
pub struct ProjectedCollection {
    pub model_id: String,
    pub prompt_id: String,
    pub coordinates: Vec<Vec<f64>>,
    pub labels: Vec<Label>,
}

impl ProjectedCollection {
    pub fn class_coordinates(&self, label: Label) -> Vec<&[f64]> {
        self.coordinates
            .iter()
            .zip(&self.labels)
            .filter(|(_, &l)| l == label)
            .map(|(c, _)| c.as_slice())
            .collect()
    }

    /// First coordinate of each point of `label` (the scalar `z` for `k = 1`).
    pub fn class_scalars(&self, label: Label) -> Vec<f64> {
        self.class_coordinates(label).iter().map(|c| c[0]).collect()
    }
}

/// Label-blind whitened PCA with `k` components.
///
/// Rows are the top-`k` principal directions scaled by `sqrt(n-1)/σ_i`, so the
/// projected data has identity sample covariance. Each row's sign is fixed so
/// its largest-magnitude entry is positive.
pub fn fit_wpca(collection: &PromptCollection, k: usize) -> Result<Projector> {
    fit_wpca_points(&collection.points(), k)
}

pub fn fit_wpca_points(points: &[&[f64]], k: usize) -> Result<Projector> {
    let n = points.len();
    if n < 2 {
        return Err(Error::InsufficientPoints(n));
    }
    if k == 0 {
        return Err(Error::InvalidParameter("k must be at least 1".into()));
    }
    let d = points[0].len();
    let mut centered = DMatrix::zeros(n, d);
    for j in 0..d {
        let mean = points.iter().map(|p| p[j]).sum::<f64>() / n as f64;
        for (i, p) in points.iter().enumerate() {
            if p.len() != d {
                return Err(Error::Dimension { expected: d, found: p.len() });
            }
            centered[(i, j)] = p[j] - mean;
        }
    }

    let svd = SVD::new(centered, false, true);
    let v_t = svd.v_t.as_ref().expect("right singular vectors requested");
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&a, &b| svd.singular_values[b].total_cmp(&svd.singular_values[a]));

    let sigma_max = order.first().map_or(0.0, |&i| svd.singular_values[i]);
    if sigma_max <= 0.0 {
        return Err(Error::ZeroVariance);
    }
    let floor = SINGULAR_FLOOR * sigma_max;
    let rank = order.iter().filter(|&&i| svd.singular_values[i] > floor).count();
    if k > rank || k > d.min(n - 1) {
        return Err(Error::RankDeficient { requested: k, rank: rank.min(n - 1) });
    }

    let scale_base = ((n - 1) as f64).sqrt();
    let rows = order[..k]
        .iter()
        .map(|&i| {
            let sigma = svd.singular_values[i].max(floor);
            let mut row: Vec<f64> = v_t.row(i).iter().map(|x| x * scale_base / sigma).collect();
            let pivot = row.iter().copied().fold(0.0f64, |acc, x| if x.abs() > acc.abs() { x } else { acc });
            if pivot < 0.0 {
                row.iter_mut().for_each(|x| *x = -*x);
            }
            row
        })
        .collect();
    Ok(Projector { kind: ProjectorKind::WhitenedPca { k }, rows })
}

/// `k` independent standard-normal directions in `R^d`, each scaled to unit length.
pub fn fit_random_projection(d: usize, k: usize, seed: Seed) -> Result<Projector> {
    if d == 0 || k == 0 {
        return Err(Error::InvalidParameter("random projection needs d >= 1 and k >= 1".into()));
    }
    let mut rng = seed.rng();
    let rows = (0..k)
        .map(|_| {
            let row: Vec<f64> = (0..d).map(|_| StandardNormal.sample(&mut rng)).collect();
            let norm = row.iter().map(|x| x * x).sum::<f64>().sqrt();
            row.into_iter().map(|x| x / norm).collect()
        })
        .collect();
    Ok(Projector { kind: ProjectorKind::RandomProjection { k, seed: seed.0 }, rows })
}

/// Fraction of positions where two prediction lists agree.
pub fn agreement(labels_a: &[Label], labels_b: &[Label]) -> Result<f64> {
    if labels_a.len() != labels_b.len() {
        return Err(Error::LengthMismatch { left: labels_a.len(), right: labels_b.len() });
    }
    if labels_a.is_empty() {
        return Err(Error::Empty("agreement input"));
    }
    let same = labels_a.iter().zip(labels_b).filter(|(a, b)| a == b).count();
    Ok(same as f64 / labels_a.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn line_data_gives_parallel_row() {
        let pts: Vec<Vec<f64>> = (0..6).map(|i| vec![i as f64, 2.0 * i as f64]).collect();
        let refs: Vec<&[f64]> = pts.iter().map(Vec::as_slice).collect();
        let p = fit_wpca_points(&refs, 1).unwrap();
        let row = &p.rows[0];
        let norm = (row[0] * row[0] + row[1] * row[1]).sqrt();
        assert!((row[0] / norm - 1.0 / 5f64.sqrt()).abs() < 1e-12);
        assert!((row[1] / norm - 2.0 / 5f64.sqrt()).abs() < 1e-12);
        assert!(matches!(fit_wpca_points(&refs, 2), Err(Error::RankDeficient { .. })));
    }

    #[test]
    fn whitened_covariance_is_identity() {
        let mut rng = Seed(11).rng();
        let pts: Vec<Vec<f64>> = (0..40)
            .map(|_| {
                let a: f64 = StandardNormal.sample(&mut rng);
                let b: f64 = StandardNormal.sample(&mut rng);
                let c: f64 = StandardNormal.sample(&mut rng);
                vec![3.0 * a + b, b - 0.5 * c, 0.2 * c + a, 7.0]
            })
            .collect();
        let refs: Vec<&[f64]> = pts.iter().map(Vec::as_slice).collect();
        let p = fit_wpca_points(&refs, 3).unwrap();
        let proj = p.project_points(&refs).unwrap();
        let n = proj.len() as f64;
        let mean: Vec<f64> = (0..3).map(|i| proj.iter().map(|x| x[i]).sum::<f64>() / n).collect();
        for i in 0..3 {
            for j in 0..3 {
                let cov = proj.iter().map(|x| (x[i] - mean[i]) * (x[j] - mean[j])).sum::<f64>() / (n - 1.0);
                let expected = if i == j { 1.0 } else { 0.0 };
                assert!((cov - expected).abs() < 1e-8, "cov[{i}][{j}] = {cov}");
            }
        }
        // the constant fourth coordinate leaves rank 3
        assert!(matches!(fit_wpca_points(&refs, 4), Err(Error::RankDeficient { .. })));
    }

    #[test]
    fn constant_data_has_zero_variance() {
        let pts = [[1.0, 2.0], [1.0, 2.0], [1.0, 2.0]];
        let refs: Vec<&[f64]> = pts.iter().map(|p| p.as_slice()).collect();
        assert!(matches!(fit_wpca_points(&refs, 1), Err(Error::ZeroVariance)));
    }

    #[test]
    fn random_rows_are_unit_and_seeded() {
        let a = fit_random_projection(50, 4, Seed(5)).unwrap();
        let b = fit_random_projection(50, 4, Seed(5)).unwrap();
        assert_eq!(a, b);
        for row in &a.rows {
            let norm = row.iter().map(|x| x * x).sum::<f64>().sqrt();
            assert!((norm - 1.0).abs() < 1e-12);
        }
        assert_ne!(a, fit_random_projection(50, 4, Seed(6)).unwrap());
    }

    #[test]
    fn random_rows_nearly_orthogonal_in_high_dimension() {
        let seeds = 200;
        let mut passing = 0;
        for s in 0..seeds {
            let p = fit_random_projection(1000, 15, Seed(s)).unwrap();
            let ok = (0..15).all(|i| ((i + 1)..15).all(|j| dot(&p.rows[i], &p.rows[j]).abs() < 0.2));
            passing += ok as usize;
        }
        assert!(passing as f64 / seeds as f64 >= 0.99);
    }

    #[test]
    fn zero_point_projects_to_zero() {
        let p = fit_random_projection(3, 2, Seed(1)).unwrap();
        assert_eq!(p.project_point(&[0.0; 3]).unwrap(), vec![0.0, 0.0]);
        assert!(p.project_point(&[0.0; 2]).is_err());
    }

    #[test]
    fn agreement_extremes() {
        use Label::*;
        assert_eq!(agreement(&[Genuine, Hallucinated], &[Genuine, Hallucinated]).unwrap(), 1.0);
        assert_eq!(agreement(&[Genuine, Hallucinated], &[Hallucinated, Genuine]).unwrap(), 0.0);
        assert!(agreement(&[Genuine], &[]).is_err());
    }
}

//! Regularized Fisher discriminant and alternative linear projectors.
//!
//! The within-class scatter is the unnormalized sum
//!
//! ```text
//! S_W = Σ_{x∈G} (x-μ_G)(x-μ_G)ᵀ + Σ_{x∈H} (x-μ_H)(x-μ_H)ᵀ
//! ```
//!
//! and the discriminant direction solves `(S_W + λI) u = μ_G - μ_H`, normalized
//! to unit length with `direction·(μ_G - μ_H) >= 0`.

mod projector;

pub use projector::{agreement, fit_random_projection, fit_wpca, ProjectedCollection, Projector, ProjectorKind};

use nalgebra::{Cholesky, DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::data::{Label, PromptCollection};
use crate::error::{Error, Result};

pub const DEFAULT_LAMBDA: f64 = 1.2;

/// Factor applied to λ when the first factorization fails.
const ESCALATION: f64 = 10.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FisherModel {
    pub mu_g: Vec<f64>,
    pub mu_h: Vec<f64>,
    /// Requested regularization strength.
    pub lambda: f64,
    /// λ actually used in the solve; differs from `lambda` only after escalation.
    pub effective_lambda: f64,
    pub escalated: bool,
    pub direction: Vec<f64>,
}

impl FisherModel {
    pub fn dimension(&self) -> usize {
        self.direction.len()
    }

    /// `z = v·x`.
    pub fn project(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.direction.len() {
            return Err(Error::Dimension { expected: self.direction.len(), found: x.len() });
        }
        Ok(dot(&self.direction, x))
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn class_mean(points: &[&[f64]], d: usize) -> DVector<f64> {
    let mut mean = DVector::zeros(d);
    for p in points {
        for (m, x) in mean.iter_mut().zip(p.iter()) {
            *m += x;
        }
    }
    mean / points.len() as f64
}

/// Unnormalized within-class scatter of two point sets.
pub fn within_scatter(genuine: &[&[f64]], hallucinated: &[&[f64]]) -> Result<DMatrix<f64>> {
    let d = genuine.first().or(hallucinated.first()).ok_or(Error::Empty("scatter input"))?.len();
    let mut centered = DMatrix::zeros(genuine.len() + hallucinated.len(), d);
    let mut row = 0;
    for class in [genuine, hallucinated] {
        if class.is_empty() {
            continue;
        }
        let mu = class_mean(class, d);
        for p in class {
            if p.len() != d {
                return Err(Error::Dimension { expected: d, found: p.len() });
            }
            for k in 0..d {
                centered[(row, k)] = p[k] - mu[k];
            }
            row += 1;
        }
    }
    Ok(centered.transpose() * &centered)
}

pub fn fit_fisher(collection: &PromptCollection, lambda: f64) -> Result<FisherModel> {
    let g = collection.class_points(Label::Genuine);
    let h = collection.class_points(Label::Hallucinated);
    fit_fisher_points(&g, &h, lambda)
}

/// Fit on explicit genuine / hallucinated point sets.
pub fn fit_fisher_points(genuine: &[&[f64]], hallucinated: &[&[f64]], lambda: f64) -> Result<FisherModel> {
    if !(lambda.is_finite() && lambda > 0.0) {
        return Err(Error::InvalidParameter(format!("lambda must be positive, got {lambda}")));
    }
    if genuine.is_empty() || hallucinated.is_empty() {
        return Err(Error::Empty("Fisher class"));
    }
    if genuine.iter().chain(hallucinated).any(|p| p.iter().any(|x| !x.is_finite())) {
        return Err(Error::NonFinite("Fisher input"));
    }
    let d = genuine[0].len();
    let mu_g = class_mean(genuine, d);
    let mu_h = class_mean(hallucinated, d);
    let diff = &mu_g - &mu_h;
    if diff.iter().all(|&x| x == 0.0) {
        return Err(Error::DegenerateMeans);
    }
    let scatter = within_scatter(genuine, hallucinated)?;

    let mut effective = lambda;
    let mut escalated = false;
    let chol = loop {
        let mut regularized = scatter.clone();
        for k in 0..d {
            regularized[(k, k)] += effective;
        }
        match Cholesky::new(regularized) {
            Some(c) => break c,
            None if !escalated => {
                escalated = true;
                effective *= ESCALATION;
            }
            None => return Err(Error::NotPositiveDefinite { lambda: effective }),
        }
    };
    let u = chol.solve(&diff);
    let norm = u.norm();
    if !(norm.is_finite() && norm > 0.0) {
        return Err(Error::NonFinite("Fisher direction"));
    }
    let mut direction: Vec<f64> = u.iter().map(|x| x / norm).collect();
    if dot(&direction, diff.as_slice()) < 0.0 {
        direction.iter_mut().for_each(|x| *x = -*x);
    }

    Ok(FisherModel {
        mu_g: mu_g.iter().copied().collect(),
        mu_h: mu_h.iter().copied().collect(),
        lambda,
        effective_lambda: effective,
        escalated,
        direction,
    })
}

/// `J(w) = (wᵀ(μ_G-μ_H))² / (wᵀ S w)`.
pub fn rayleigh_quotient(w: &[f64], mean_diff: &[f64], scatter: &DMatrix<f64>) -> f64 {
    let wv = DVector::from_column_slice(w);
    let num = dot(w, mean_diff).powi(2);
    let den = (wv.transpose() * scatter * &wv)[(0, 0)];
    num / den
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hand_solved_two_by_two() {
        let g: Vec<&[f64]> = vec![&[0.0, 0.0], &[0.0, 2.0]];
        let h: Vec<&[f64]> = vec![&[4.0, 0.0], &[4.0, 2.0]];
        let sw = within_scatter(&g, &h).unwrap();
        assert_eq!(sw, DMatrix::from_row_slice(2, 2, &[0.0, 0.0, 0.0, 4.0]));
        let model = fit_fisher_points(&g, &h, 1.0).unwrap();
        // (S_W + I) u = (-4, 0)  =>  u = (-4, 0)
        assert!((model.direction[0] + 1.0).abs() < 1e-15);
        assert!(model.direction[1].abs() < 1e-15);
        assert!(!model.escalated);
    }

    #[test]
    fn isotropic_scatter_follows_mean_difference() {
        // each class is a symmetric cross, so S_W = c·I
        let g: Vec<&[f64]> = vec![&[1.0, 0.0], &[-1.0, 0.0], &[0.0, 1.0], &[0.0, -1.0]];
        let h: Vec<&[f64]> = vec![&[4.0, 4.0], &[2.0, 4.0], &[3.0, 5.0], &[3.0, 3.0]];
        let model = fit_fisher_points(&g, &h, 0.5).unwrap();
        let expected = [-0.6, -0.8];
        for (a, b) in model.direction.iter().zip(expected) {
            assert!((a - b).abs() < 1e-14);
        }
    }

    #[test]
    fn degenerate_and_invalid_inputs() {
        let g: Vec<&[f64]> = vec![&[0.0, 1.0], &[0.0, -1.0]];
        let h: Vec<&[f64]> = vec![&[1.0, 0.0], &[-1.0, 0.0]];
        assert!(matches!(fit_fisher_points(&g, &h, 1.0), Err(Error::DegenerateMeans)));
        assert!(fit_fisher_points(&g, &h, 0.0).is_err());
        let bad: Vec<&[f64]> = vec![&[f64::NAN, 1.0]];
        assert!(matches!(fit_fisher_points(&bad, &h, 1.0), Err(Error::NonFinite(_))));
    }

    #[test]
    fn projection_matches_dot_product() {
        let g: Vec<&[f64]> = vec![&[0.0, 0.0], &[0.0, 2.0]];
        let h: Vec<&[f64]> = vec![&[4.0, 0.0], &[4.0, 2.0]];
        let model = fit_fisher_points(&g, &h, 1.0).unwrap();
        assert_eq!(model.project(&[3.0, 7.0]).unwrap(), -3.0);
        assert!(model.project(&[1.0]).is_err());
    }
}

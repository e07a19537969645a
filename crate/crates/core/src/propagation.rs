//! Wasserstein-consistency label propagation.
//!
//! A point with projection `z` induces the point-to-class distance sets
//! `Δ_G(z) = {|z - z_i| : z_i ∈ Z_G}` and `Δ_H(z)`. It is labeled
//! Hallucinated when `W(Δ_GG, Δ_G(z)) > W(Δ_HH, Δ_H(z))`, i.e. when it fits the
//! internal spread of the hallucinated class better than that of the genuine
//! class. The signed margin `W(Δ_HH, Δ_H) - W(Δ_GG, Δ_G)` is negative exactly
//! for Hallucinated predictions; a zero margin resolves to Genuine.

use serde::{Deserialize, Serialize};

use crate::data::{Label, PromptCollection};
use crate::distances::{self, DistanceDistribution, DistanceKind};
use crate::error::{Error, Result};
use crate::fisher::{fit_fisher, FisherModel, Projector};
use crate::stats::{wasserstein_1d, WassersteinOrder};
use crate::summary::Summary;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub label: Label,
    pub signed_margin: f64,
    pub absolute_margin: f64,
}

impl Prediction {
    /// Builds the prediction from the two discrepancies `W(Δ_GG, Δ_G)` and
    /// `W(Δ_HH, Δ_H)`.
    pub fn from_discrepancies(to_genuine: f64, to_hallucinated: f64) -> Prediction {
        let margin = to_hallucinated - to_genuine;
        let label = if margin < 0.0 { Label::Hallucinated } else { Label::Genuine };
        Prediction { label, signed_margin: margin, absolute_margin: margin.abs() }
    }
}

/// Fisher-space propagator fitted on a labeled collection.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PropagatorModel {
    pub fisher: FisherModel,
    pub z_g: Vec<f64>,
    pub z_h: Vec<f64>,
    pub delta_gg: DistanceDistribution,
    pub delta_hh: DistanceDistribution,
    pub order: WassersteinOrder,
}

impl PropagatorModel {
    /// Assemble a model from already projected class coordinates.
    pub fn from_projections(fisher: FisherModel, mut z_g: Vec<f64>, mut z_h: Vec<f64>, order: WassersteinOrder) -> Result<Self> {
        z_g.sort_by(f64::total_cmp);
        z_h.sort_by(f64::total_cmp);
        let delta_gg = distances::intra_1d(&z_g, DistanceKind::IntraGenuine)?;
        let delta_hh = distances::intra_1d(&z_h, DistanceKind::IntraHallucinated)?;
        Ok(PropagatorModel { fisher, z_g, z_h, delta_gg, delta_hh, order })
    }

    pub fn dimension(&self) -> usize {
        self.fisher.dimension()
    }

    pub fn classify(&self, x: &[f64]) -> Result<Prediction> {
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("query point"));
        }
        self.classify_projected(self.fisher.project(x)?)
    }

    /// Classify an already projected coordinate.
    pub fn classify_projected(&self, z: f64) -> Result<Prediction> {
        let (w_g, w_h) = self.discrepancies(z)?;
        Ok(Prediction::from_discrepancies(w_g, w_h))
    }

    /// `(W(Δ_GG, Δ_G(z)), W(Δ_HH, Δ_H(z)))`.
    pub fn discrepancies(&self, z: f64) -> Result<(f64, f64)> {
        let to_g = distances::point_to_set_1d(z, &self.z_g, DistanceKind::PointToGenuine)?;
        let to_h = distances::point_to_set_1d(z, &self.z_h, DistanceKind::PointToHallucinated)?;
        Ok((
            wasserstein_1d(&self.delta_gg, &to_g, self.order)?,
            wasserstein_1d(&self.delta_hh, &to_h, self.order)?,
        ))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("models always serialize")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let model: PropagatorModel = serde_json::from_str(text).map_err(|e| Error::Serde(e.to_string()))?;
        if model.z_g.len() < 2 || model.z_h.len() < 2 {
            return Err(Error::Serde("model classes need at least two coordinates".into()));
        }
        Ok(model)
    }
}

pub fn fit_propagator(train: &PromptCollection, lambda: f64, order: WassersteinOrder) -> Result<PropagatorModel> {
    for count in [train.genuine_count, train.hallucinated_count] {
        if count < 2 {
            return Err(Error::InsufficientPoints(count));
        }
    }
    let fisher = fit_fisher(train, lambda)?;
    let projector = Projector::fisher(&fisher);
    let projected = projector.project(train)?;
    let z_g = projected.class_scalars(Label::Genuine);
    let z_h = projected.class_scalars(Label::Hallucinated);
    PropagatorModel::from_projections(fisher, z_g, z_h, order)
}

/// The same decision rule in a `k`-dimensional projected space, where
/// point-to-set distances are Euclidean. For `k = 1` this coincides with
/// [`PropagatorModel`].
#[derive(Debug, Clone, PartialEq)]
pub struct ProjectedPropagator {
    pub projector: Projector,
    pub class_g: Vec<Vec<f64>>,
    pub class_h: Vec<Vec<f64>>,
    pub delta_gg: DistanceDistribution,
    pub delta_hh: DistanceDistribution,
    pub order: WassersteinOrder,
}

impl ProjectedPropagator {
    pub fn fit(projector: Projector, train: &PromptCollection, order: WassersteinOrder) -> Result<Self> {
        let projected = projector.project(train)?;
        let class_g: Vec<Vec<f64>> = projected.class_coordinates(Label::Genuine).into_iter().map(<[f64]>::to_vec).collect();
        let class_h: Vec<Vec<f64>> = projected.class_coordinates(Label::Hallucinated).into_iter().map(<[f64]>::to_vec).collect();
        let delta_gg = distances::pairwise_intra(&class_g, DistanceKind::IntraGenuine)?;
        let delta_hh = distances::pairwise_intra(&class_h, DistanceKind::IntraHallucinated)?;
        Ok(ProjectedPropagator { projector, class_g, class_h, delta_gg, delta_hh, order })
    }

    pub fn classify(&self, x: &[f64]) -> Result<Prediction> {
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("query point"));
        }
        let y = self.projector.project_point(x)?;
        let to_g = distances::point_to_set(&y, &self.class_g, DistanceKind::PointToGenuine)?;
        let to_h = distances::point_to_set(&y, &self.class_h, DistanceKind::PointToHallucinated)?;
        Ok(Prediction::from_discrepancies(
            wasserstein_1d(&self.delta_gg, &to_g, self.order)?,
            wasserstein_1d(&self.delta_hh, &to_h, self.order)?,
        ))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MarginGrouping {
    TrueLabel,
    PredictedLabel,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassMargins {
    pub signed: Summary,
    pub absolute: Summary,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MarginSummary {
    pub grouping: MarginGrouping,
    pub genuine: ClassMargins,
    pub hallucinated: ClassMargins,
}

impl MarginSummary {
    pub fn from_predictions(predictions: &[Prediction], truths: Option<&[Label]>) -> MarginSummary {
        let (grouping, groups): (MarginGrouping, Vec<Label>) = match truths {
            Some(t) => (MarginGrouping::TrueLabel, t.to_vec()),
            None => (MarginGrouping::PredictedLabel, predictions.iter().map(|p| p.label).collect()),
        };
        let margins = |label: Label| {
            let picked: Vec<&Prediction> = predictions.iter().zip(&groups).filter(|(_, &g)| g == label).map(|(p, _)| p).collect();
            ClassMargins {
                signed: Summary::from_values(&picked.iter().map(|p| p.signed_margin).collect::<Vec<_>>()),
                absolute: Summary::from_values(&picked.iter().map(|p| p.absolute_margin).collect::<Vec<_>>()),
            }
        };
        MarginSummary { grouping, genuine: margins(Label::Genuine), hallucinated: margins(Label::Hallucinated) }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BatchResult {
    pub predictions: Vec<Prediction>,
    pub margins: MarginSummary,
}

/// Classify a batch; margins are summarized per true label when `truths` is
/// given and per predicted label otherwise.
pub fn classify_batch<P: AsRef<[f64]>>(model: &PropagatorModel, points: &[P], truths: Option<&[Label]>) -> Result<BatchResult> {
    if points.is_empty() {
        return Err(Error::Empty("test batch"));
    }
    if let Some(t) = truths {
        if t.len() != points.len() {
            return Err(Error::LengthMismatch { left: points.len(), right: t.len() });
        }
    }
    let predictions = points.iter().map(|p| model.classify(p.as_ref())).collect::<Result<Vec<_>>>()?;
    let margins = MarginSummary::from_predictions(&predictions, truths);
    Ok(BatchResult { predictions, margins })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::ResponseRecord;
    use proptest::prelude::*;

    /// Identity-direction Fisher model in one dimension.
    fn axis_model(z_g: Vec<f64>, z_h: Vec<f64>) -> PropagatorModel {
        let fisher = FisherModel {
            mu_g: vec![0.0],
            mu_h: vec![1.0],
            lambda: 1.0,
            effective_lambda: 1.0,
            escalated: false,
            direction: vec![1.0],
        };
        PropagatorModel::from_projections(fisher, z_g, z_h, WassersteinOrder::W1).unwrap()
    }

    #[test]
    fn delta_distributions_from_coordinates() {
        let m = axis_model(vec![0.0, 0.1], vec![5.0, 5.1]);
        assert!((m.delta_gg.values()[0] - 0.1).abs() < 1e-15);
        assert!((m.delta_hh.values()[0] - 0.1).abs() < 1e-12);
    }

    #[test]
    fn worked_margin_example() {
        let m = axis_model(vec![0.0, 0.1], vec![5.0, 5.1]);
        let (w_g, w_h) = m.discrepancies(0.05).unwrap();
        assert!((w_g - 0.05).abs() < 1e-12);
        assert!((w_h - 4.9).abs() < 1e-12);
        let p = m.classify(&[0.05]).unwrap();
        assert_eq!(p.label, Label::Genuine);
        assert!((p.signed_margin - 4.85).abs() < 1e-12);
    }

    #[test]
    fn symmetric_model_ties_to_genuine() {
        let m = axis_model(vec![-3.0, -2.0, -1.0], vec![1.0, 2.0, 3.0]);
        let p = m.classify(&[0.0]).unwrap();
        assert_eq!(p.signed_margin, 0.0);
        assert_eq!(p.label, Label::Genuine);
    }

    #[test]
    fn hallucinated_training_coordinate() {
        let m = axis_model(vec![0.0, 0.2, 0.4], vec![8.0, 9.0, 10.0]);
        let (w_g, w_h) = m.discrepancies(9.0).unwrap();
        // Δ_GG = {0.2,0.2,0.4}, Δ_G(9) = {8.6,8.8,9.0}; Δ_HH = {1,1,2}, Δ_H(9) = {0,1,1}
        assert!((w_g - (8.4 + 8.6 + 8.6) / 3.0).abs() < 1e-12);
        assert!((w_h - (1.0 + 0.0 + 1.0) / 3.0).abs() < 1e-12);
        let p = m.classify(&[9.0]).unwrap();
        assert_eq!(p.label, Label::Hallucinated);
        assert!(p.signed_margin < 0.0);
    }

    #[test]
    fn fit_requires_two_per_class() {
        let recs = vec![
            ResponseRecord::new("m", "p", "a", Label::Genuine, vec![0.0]),
            ResponseRecord::new("m", "p", "b", Label::Hallucinated, vec![1.0]),
            ResponseRecord::new("m", "p", "c", Label::Hallucinated, vec![2.0]),
        ];
        let c = PromptCollection::new("m", "p", recs).unwrap();
        assert!(matches!(fit_propagator(&c, 1.2, WassersteinOrder::W1), Err(Error::InsufficientPoints(1))));
    }

    #[test]
    fn serialization_round_trip_is_exact() {
        let m = axis_model(vec![0.1, 0.7, 1.0 / 3.0], vec![5.0, std::f64::consts::PI, 5.1]);
        let back = PropagatorModel::from_json(&m.to_json()).unwrap();
        assert_eq!(back, m);
        assert!(PropagatorModel::from_json("{\"fisher\": 1").is_err());
    }

    #[test]
    fn batch_margins_group_by_truth() {
        let m = axis_model(vec![0.0, 0.5, 1.0], vec![10.0, 10.5, 11.0]);
        let pts = [[0.2], [0.8], [10.2], [10.9]];
        let truths = [Label::Genuine, Label::Genuine, Label::Hallucinated, Label::Hallucinated];
        let out = classify_batch(&m, &pts, Some(&truths)).unwrap();
        assert_eq!(out.margins.grouping, MarginGrouping::TrueLabel);
        assert!(out.margins.genuine.signed.mean > 0.0);
        assert!(out.margins.hallucinated.signed.mean < 0.0);
        assert_eq!(out.margins.genuine.signed.n, 2);
        let empty: [[f64; 1]; 0] = [];
        assert!(classify_batch(&m, &empty, None).is_err());
    }

    #[test]
    fn margin_tail_and_sign_transition() {
        let m = axis_model(vec![-1.2, -1.0, -0.8], vec![0.8, 1.0, 1.2]);
        let grid: Vec<f64> = (0..100).map(|i| -5.0 + 10.0 * i as f64 / 99.0).collect();
        let margins: Vec<f64> = grid.iter().map(|&z| m.classify(&[z]).unwrap().signed_margin).collect();
        assert!(margins[0] > 0.0);
        assert!(*margins.last().unwrap() < 0.0);
        // deep on the H side the W1 margin settles at
        // (mean Z_G - mean Z_H) + (mean Δ_GG - mean Δ_HH) = -2 here
        for z in [1e3, 1e6] {
            let far = m.classify(&[z]).unwrap().signed_margin;
            assert!((far + 2.0).abs() < 1e-6, "z = {z}: margin {far}");
        }
    }

    #[test]
    fn projected_propagator_matches_fisher_model_in_one_dimension() {
        let mut recs = Vec::new();
        for (i, z) in [0.0, 0.3, 0.5].iter().enumerate() {
            recs.push(ResponseRecord::new("m", "p", format!("g{i}"), Label::Genuine, vec![*z, 1.0]));
        }
        for (i, z) in [3.0, 4.0, 4.2].iter().enumerate() {
            recs.push(ResponseRecord::new("m", "p", format!("h{i}"), Label::Hallucinated, vec![*z, -1.0]));
        }
        let c = PromptCollection::new("m", "p", recs).unwrap();
        let model = fit_propagator(&c, 1.2, WassersteinOrder::W1).unwrap();
        let pp = ProjectedPropagator::fit(Projector::fisher(&model.fisher), &c, WassersteinOrder::W1).unwrap();
        for x in [[0.1, 0.0], [2.0, 0.5], [5.0, -2.0]] {
            let a = model.classify(&x).unwrap();
            let b = pp.classify(&x).unwrap();
            assert_eq!(a.label, b.label);
            assert!((a.signed_margin - b.signed_margin).abs() < 1e-12);
        }
    }

    proptest! {
        #[test]
        fn decision_rule_matches_two_term_inequality(
            z_g in prop::collection::vec(-10.0f64..10.0, 2..8),
            z_h in prop::collection::vec(-10.0f64..10.0, 2..8),
            z in -15.0f64..15.0,
        ) {
            let m = axis_model(z_g.clone(), z_h.clone());
            let p = m.classify_projected(z).unwrap();
            // independent recomputation through the generic distances path
            let pts_g: Vec<Vec<f64>> = z_g.iter().map(|v| vec![*v]).collect();
            let pts_h: Vec<Vec<f64>> = z_h.iter().map(|v| vec![*v]).collect();
            let dgg = distances::pairwise_intra(&pts_g, DistanceKind::IntraGenuine).unwrap();
            let dhh = distances::pairwise_intra(&pts_h, DistanceKind::IntraHallucinated).unwrap();
            let dg = distances::point_to_set(&[z], &pts_g, DistanceKind::PointToGenuine).unwrap();
            let dh = distances::point_to_set(&[z], &pts_h, DistanceKind::PointToHallucinated).unwrap();
            let wg = wasserstein_1d(&dgg, &dg, WassersteinOrder::W1).unwrap();
            let wh = wasserstein_1d(&dhh, &dh, WassersteinOrder::W1).unwrap();
            if (wg - wh).abs() > 1e-9 {
                prop_assert_eq!(p.label == Label::Hallucinated, wg > wh);
            }
            prop_assert!((p.signed_margin - (wh - wg)).abs() < 1e-9);
        }

        #[test]
        fn affine_axis_invariance(
            z_g in prop::collection::vec(-10.0f64..10.0, 2..6),
            z_h in prop::collection::vec(-10.0f64..10.0, 2..6),
            z in -15.0f64..15.0, shift in -50.0f64..50.0, scale in 0.1f64..10.0,
        ) {
            let base = axis_model(z_g.clone(), z_h.clone()).classify_projected(z).unwrap();
            let shifted = axis_model(z_g.iter().map(|v| v + shift).collect(), z_h.iter().map(|v| v + shift).collect())
                .classify_projected(z + shift).unwrap();
            let scaled = axis_model(z_g.iter().map(|v| v * scale).collect(), z_h.iter().map(|v| v * scale).collect())
                .classify_projected(z * scale).unwrap();
            if base.absolute_margin > 1e-6 {
                prop_assert_eq!(base.label, shifted.label);
                prop_assert_eq!(base.label, scaled.label);
                prop_assert!((scaled.signed_margin - scale * base.signed_margin).abs() < 1e-6 * scale.max(1.0));
            }
            prop_assert!((shifted.signed_margin - base.signed_margin).abs() < 1e-6);
        }
    }
}

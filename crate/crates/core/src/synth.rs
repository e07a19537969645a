//! Synthetic labeled collections with controllable cohesion, imbalance,
//! dimension and separation.
//!
//! Axis `j` of a `d`-dimensional spec has scale `(1 + anisotropy)^(1 - j/(d-1))`,
//! so axis 0 is the widest and the last axis has scale 1. Genuine points are
//! `N(0, σ_g²·diag(scale²))`; hallucinated points are `N(μ_H, σ_h²·diag(scale²))`
//! with `‖μ_H‖ = mu_gap` along the direction chosen by [`GapProfile`]. With
//! `hallucination_modes > 1` the hallucinated class is split round-robin over
//! several sub-clusters whose centers average to `μ_H`.
//!
//! Random draws come from `Seed(seed).derive("synth", [])` in this order: mode
//! offsets, genuine points, hallucinated points, each point drawn axis by axis
//! with the ziggurat standard-normal sampler.

use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::data::{Label, PromptCollection, ResponseRecord};
use crate::error::{Error, Result};
use crate::seed::Seed;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GapProfile {
    /// Along `(1, …, 1)/√d`.
    #[default]
    Uniform,
    /// Along the narrowest axis.
    LowVariance,
    /// Along the widest axis.
    HighVariance,
}

impl std::str::FromStr for GapProfile {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "uniform" => Ok(GapProfile::Uniform),
            "low-variance" | "low_variance" => Ok(GapProfile::LowVariance),
            "high-variance" | "high_variance" => Ok(GapProfile::HighVariance),
            other => Err(Error::InvalidParameter(format!("unknown gap profile {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthSpec {
    pub model_id: String,
    pub prompt_id: String,
    pub dimension: usize,
    pub n_genuine: usize,
    pub n_hallucinated: usize,
    pub mu_gap: f64,
    pub sigma_g: f64,
    pub sigma_h: f64,
    pub anisotropy: f64,
    pub gap_profile: GapProfile,
    pub hallucination_modes: usize,
    /// Distance of each sub-cluster center from `μ_H`, in units of `σ_h`.
    pub mode_radius: f64,
    pub seed: u64,
}

impl Default for SynthSpec {
    fn default() -> Self {
        SynthSpec {
            model_id: "synth".into(),
            prompt_id: "p0".into(),
            dimension: 16,
            n_genuine: 30,
            n_hallucinated: 30,
            mu_gap: 0.0,
            sigma_g: 1.0,
            sigma_h: 1.0,
            anisotropy: 0.0,
            gap_profile: GapProfile::Uniform,
            hallucination_modes: 1,
            mode_radius: 2.0,
            seed: 0,
        }
    }
}

impl SynthSpec {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidParameter(msg));
        if self.dimension == 0 {
            return bad("dimension must be at least 1".into());
        }
        if self.n_genuine < 2 || self.n_hallucinated < 2 {
            return bad(format!(
                "class sizes must be at least 2 (got {} genuine, {} hallucinated)",
                self.n_genuine, self.n_hallucinated
            ));
        }
        if !(self.sigma_g > 0.0 && self.sigma_h > 0.0) {
            return bad("spreads must be positive".into());
        }
        if !(self.mu_gap >= 0.0 && self.anisotropy >= 0.0 && self.mode_radius >= 0.0) {
            return bad("mu_gap, anisotropy and mode_radius must be nonnegative".into());
        }
        if self.hallucination_modes == 0 {
            return bad("hallucination_modes must be at least 1".into());
        }
        Ok(())
    }

    pub fn axis_scales(&self) -> Vec<f64> {
        let d = self.dimension;
        if d == 1 {
            return vec![1.0];
        }
        (0..d)
            .map(|j| (1.0 + self.anisotropy).powf(1.0 - j as f64 / (d - 1) as f64))
            .collect()
    }

    pub fn hallucinated_mean(&self) -> Vec<f64> {
        let d = self.dimension;
        let mut mu = vec![0.0; d];
        match self.gap_profile {
            GapProfile::Uniform => mu.iter_mut().for_each(|m| *m = self.mu_gap / (d as f64).sqrt()),
            GapProfile::LowVariance => mu[d - 1] = self.mu_gap,
            GapProfile::HighVariance => mu[0] = self.mu_gap,
        }
        mu
    }
}

pub fn generate(spec: &SynthSpec) -> Result<PromptCollection> {
    spec.validate()?;
    let d = spec.dimension;
    let scales = spec.axis_scales();
    let mu_h = spec.hallucinated_mean();
    let mut rng = Seed(spec.seed).derive("synth", &[]).rng();
    let mut normal = move || -> f64 { StandardNormal.sample(&mut rng) };

    let mut centers = vec![mu_h.clone(); spec.hallucination_modes];
    if spec.hallucination_modes > 1 {
        let mut offsets: Vec<Vec<f64>> = (0..spec.hallucination_modes)
            .map(|_| {
                let v: Vec<f64> = (0..d).map(|_| normal()).collect();
                let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt().max(f64::MIN_POSITIVE);
                v.into_iter().map(|x| x / norm * spec.mode_radius * spec.sigma_h).collect()
            })
            .collect();
        for j in 0..d {
            let mean = offsets.iter().map(|o| o[j]).sum::<f64>() / offsets.len() as f64;
            offsets.iter_mut().for_each(|o| o[j] -= mean);
        }
        for (c, o) in centers.iter_mut().zip(&offsets) {
            c.iter_mut().zip(o).for_each(|(x, y)| *x += y);
        }
    }

    let mut records = Vec::with_capacity(spec.n_genuine + spec.n_hallucinated);
    for i in 0..spec.n_genuine {
        let emb = (0..d).map(|j| spec.sigma_g * scales[j] * normal()).collect();
        records.push(ResponseRecord::new(&spec.model_id, &spec.prompt_id, format!("g{i:04}"), Label::Genuine, emb));
    }
    for i in 0..spec.n_hallucinated {
        let center = &centers[i % centers.len()];
        let emb = (0..d).map(|j| center[j] + spec.sigma_h * scales[j] * normal()).collect();
        records.push(ResponseRecord::new(&spec.model_id, &spec.prompt_id, format!("h{i:04}"), Label::Hallucinated, emb));
    }
    PromptCollection::new(spec.model_id.clone(), spec.prompt_id.clone(), records)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{build_collections, FilterPolicy};

    #[test]
    fn same_seed_same_collection() {
        let spec = SynthSpec { seed: 17, mu_gap: 2.0, ..Default::default() };
        assert_eq!(generate(&spec).unwrap(), generate(&spec).unwrap());
        let other = SynthSpec { seed: 18, ..spec.clone() };
        assert_ne!(generate(&spec).unwrap(), generate(&other).unwrap());
    }

    #[test]
    fn invalid_specs() {
        assert!(generate(&SynthSpec { n_genuine: 1, ..Default::default() }).is_err());
        assert!(generate(&SynthSpec { sigma_h: 0.0, ..Default::default() }).is_err());
        assert!(generate(&SynthSpec { dimension: 0, ..Default::default() }).is_err());
    }

    #[test]
    fn gap_has_requested_length() {
        for profile in [GapProfile::Uniform, GapProfile::LowVariance, GapProfile::HighVariance] {
            let spec = SynthSpec { mu_gap: 3.0, gap_profile: profile, dimension: 9, ..Default::default() };
            let norm = spec.hallucinated_mean().iter().map(|x| x * x).sum::<f64>().sqrt();
            assert!((norm - 3.0).abs() < 1e-12);
        }
    }

    #[test]
    fn class_means_converge() {
        // per-axis |empirical - specified| < 3σ/√n in at least 99% of (seed, class, axis) checks
        let (mut checks, mut passing) = (0, 0);
        for s in 0..100 {
            let spec = SynthSpec { dimension: 4, n_genuine: 200, n_hallucinated: 200, mu_gap: 5.0, sigma_h: 2.0, seed: s, ..Default::default() };
            let c = generate(&spec).unwrap();
            for (label, mu, sigma) in [(Label::Genuine, vec![0.0; 4], spec.sigma_g), (Label::Hallucinated, spec.hallucinated_mean(), spec.sigma_h)] {
                let pts = c.class_points(label);
                let n = pts.len() as f64;
                for j in 0..4 {
                    let m = pts.iter().map(|p| p[j]).sum::<f64>() / n;
                    checks += 1;
                    passing += ((m - mu[j]).abs() < 3.0 * sigma / n.sqrt()) as usize;
                }
            }
        }
        assert!(passing as f64 >= 0.99 * checks as f64, "{passing}/{checks}");
    }

    #[test]
    fn multi_mode_centers_average_to_class_mean() {
        let spec = SynthSpec { hallucination_modes: 3, n_hallucinated: 3000, mu_gap: 4.0, dimension: 3, sigma_h: 0.5, ..Default::default() };
        let c = generate(&spec).unwrap();
        let pts = c.class_points(Label::Hallucinated);
        let mu = spec.hallucinated_mean();
        for j in 0..3 {
            let m = pts.iter().map(|p| p[j]).sum::<f64>() / pts.len() as f64;
            assert!((m - mu[j]).abs() < 0.1);
        }
    }

    #[test]
    fn generated_collections_pass_filter() {
        let spec = SynthSpec { n_genuine: 6, n_hallucinated: 9, ..Default::default() };
        let c = generate(&spec).unwrap();
        let (cols, _) = build_collections(c.records, &FilterPolicy::new(6, true).unwrap());
        assert_eq!(cols.len(), 1);
    }
}

use serde::{Deserialize, Serialize};

use crate::data::{Label, PromptCollection};
use crate::distances::{ClassDistances, DistanceDistribution};
use crate::error::Result;
use crate::fisher::{fit_fisher, Projector};
use crate::seed::Seed;
use crate::stats::{permutation_null, wasserstein_1d, wilcoxon_rank_sum, NullCalibration, RankSumMethod, Space, WassersteinOrder};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StructuralConfig {
    pub lambda: f64,
    pub order: WassersteinOrder,
    pub permutations: usize,
    pub seed: Seed,
}

impl Default for StructuralConfig {
    fn default() -> Self {
        StructuralConfig { lambda: crate::fisher::DEFAULT_LAMBDA, order: WassersteinOrder::W1, permutations: 100, seed: Seed(0) }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DistributionSummary {
    pub n: usize,
    pub mean: f64,
    pub std: f64,
    pub q25: f64,
    pub median: f64,
    pub q75: f64,
}

impl From<&DistanceDistribution> for DistributionSummary {
    fn from(d: &DistanceDistribution) -> Self {
        DistributionSummary {
            n: d.len(),
            mean: d.mean(),
            std: d.std(),
            q25: d.quantile(0.25),
            median: d.median(),
            q75: d.quantile(0.75),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpaceDistances {
    pub gg: DistributionSummary,
    pub hh: DistributionSummary,
    pub gh: DistributionSummary,
    pub separability_ratio: f64,
}

impl SpaceDistances {
    fn from_distances(cd: &ClassDistances) -> Result<Self> {
        Ok(SpaceDistances {
            gg: (&cd.gg).into(),
            hh: (&cd.hh).into(),
            gh: (&cd.gh).into(),
            separability_ratio: cd.separability_ratio()?,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WilcoxonBlock {
    pub statistic: f64,
    pub p_value: f64,
    pub method: RankSumMethod,
    pub stars: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NullBlock {
    pub observed: f64,
    pub null_mean: f64,
    pub null_std: f64,
    pub null_max: f64,
    pub exceed_fraction: f64,
    pub p_value: f64,
    pub permutations: usize,
}

impl From<&NullCalibration> for NullBlock {
    fn from(c: &NullCalibration) -> Self {
        NullBlock {
            observed: c.observed,
            null_mean: c.null_mean(),
            null_std: c.null_std(),
            null_max: c.null_max(),
            exceed_fraction: c.exceed_fraction,
            p_value: c.p_value,
            permutations: c.permutations,
        }
    }
}

/// Structural analysis of one collection.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StructuralBlock {
    pub model: String,
    pub prompt: String,
    pub n_genuine: usize,
    pub n_hallucinated: usize,
    pub lambda: f64,
    pub effective_lambda: f64,
    pub wasserstein_order: f64,
    /// Summary statistic behind the separability ratio.
    pub ratio_statistic: String,
    /// How distances are measured in Fisher space.
    pub fisher_distance: String,
    pub original: SpaceDistances,
    pub fisher: SpaceDistances,
    pub wilcoxon: WilcoxonBlock,
    pub wasserstein: NullBlock,
}

/// Block plus the raw distributions behind it (for plot data).
#[derive(Debug, Clone)]
pub struct StructuralResult {
    pub block: StructuralBlock,
    pub original: ClassDistances,
    pub fisher: ClassDistances,
    pub null: NullCalibration,
}

pub fn run_structural(collection: &PromptCollection, config: &StructuralConfig) -> Result<StructuralResult> {
    let original = ClassDistances::compute(&collection.class_points(Label::Genuine), &collection.class_points(Label::Hallucinated))?;
    let rank_sum = wilcoxon_rank_sum(&original.gg, &original.hh)?;
    // W(D_GG, D_HH) is recomputed inside the null calibration from the same distances
    let null = permutation_null(
        collection,
        &Space::Original,
        config.permutations,
        config.order,
        config.seed.derive_key("structural", &collection.key()),
    )?;
    debug_assert!((null.observed - wasserstein_1d(&original.gg, &original.hh, config.order)?).abs() < 1e-9);

    let fisher_model = fit_fisher(collection, config.lambda)?;
    let projected = Projector::fisher(&fisher_model).project(collection)?;
    let fisher = ClassDistances::compute_1d(&projected.class_scalars(Label::Genuine), &projected.class_scalars(Label::Hallucinated))?;

    let block = StructuralBlock {
        model: collection.model_id.clone(),
        prompt: collection.prompt_id.clone(),
        n_genuine: collection.genuine_count,
        n_hallucinated: collection.hallucinated_count,
        lambda: config.lambda,
        effective_lambda: fisher_model.effective_lambda,
        wasserstein_order: config.order.p(),
        ratio_statistic: "mean".into(),
        fisher_distance: "abs_z".into(),
        original: SpaceDistances::from_distances(&original)?,
        fisher: SpaceDistances::from_distances(&fisher)?,
        wilcoxon: WilcoxonBlock {
            statistic: rank_sum.statistic,
            p_value: rank_sum.p_value,
            method: rank_sum.method,
            stars: rank_sum.stars().to_string(),
        },
        wasserstein: (&null).into(),
    };
    Ok(StructuralResult { block, original, fisher, null })
}

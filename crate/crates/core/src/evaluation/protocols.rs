//! Split-based propagation protocols: repeated stratified evaluation,
//! learning curves, λ sweeps and projector comparisons.

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::metrics::{accuracy_f1, Scores};
use super::splits::{stratified_splits, Split, SplitPlan};
use crate::data::{Label, PromptCollection};
use crate::error::{Error, Result};
use crate::fisher::{fit_fisher, fit_random_projection, fit_wpca, Projector};
use crate::propagation::{classify_batch, fit_propagator, ClassMargins, MarginGrouping, MarginSummary, Prediction, ProjectedPropagator};
use crate::stats::WassersteinOrder;
use crate::summary::Summary;

/// Outcome of fitting on one training subset and scoring one test set.
#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    pub predictions: Vec<Prediction>,
    pub truths: Vec<Label>,
    pub scores: Scores,
}

impl Evaluation {
    pub fn predicted_labels(&self) -> Vec<Label> {
        self.predictions.iter().map(|p| p.label).collect()
    }
}

/// Fit the Fisher propagator on `train` and score it on `test`.
pub fn evaluate_indices(collection: &PromptCollection, train: &[usize], test: &[usize], lambda: f64, order: WassersteinOrder) -> Result<Evaluation> {
    let train_set = collection.subset(train)?;
    let model = fit_propagator(&train_set, lambda, order)?;
    let points: Vec<&[f64]> = test.iter().map(|&i| collection.records[i].embedding.as_slice()).collect();
    let truths: Vec<Label> = test.iter().map(|&i| collection.records[i].label).collect();
    let batch = classify_batch(&model, &points, Some(&truths))?;
    let labels: Vec<Label> = batch.predictions.iter().map(|p| p.label).collect();
    let scores = accuracy_f1(&labels, &truths)?;
    Ok(Evaluation { predictions: batch.predictions, truths, scores })
}

/// Metric summaries pooled over a set of evaluations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricBlock {
    pub evaluations: usize,
    pub accuracy: Summary,
    pub f1: Summary,
    /// Evaluations whose F1 was undefined (no Hallucinated label anywhere) and excluded.
    pub f1_undefined: usize,
    /// Per-point margins grouped by true label, pooled across evaluations.
    pub margins: MarginSummary,
}

impl MetricBlock {
    pub fn from_evaluations(evals: &[Evaluation]) -> MetricBlock {
        let acc: Vec<f64> = evals.iter().map(|e| e.scores.accuracy).collect();
        let f1: Vec<f64> = evals.iter().filter_map(|e| e.scores.f1).collect();
        let predictions: Vec<Prediction> = evals.iter().flat_map(|e| e.predictions.iter().copied()).collect();
        let truths: Vec<Label> = evals.iter().flat_map(|e| e.truths.iter().copied()).collect();
        MetricBlock {
            evaluations: evals.len(),
            accuracy: Summary::from_values(&acc),
            f1: Summary::from_values(&f1),
            f1_undefined: evals.len() - f1.len(),
            margins: MarginSummary::from_predictions(&predictions, Some(&truths)),
        }
    }

    /// Pool blocks from several collections.
    pub fn combine(blocks: &[&MetricBlock]) -> MetricBlock {
        let pick = |f: &dyn Fn(&MetricBlock) -> Summary| Summary::combine(&blocks.iter().map(|b| f(b)).collect::<Vec<_>>());
        MetricBlock {
            evaluations: blocks.iter().map(|b| b.evaluations).sum(),
            accuracy: pick(&|b| b.accuracy),
            f1: pick(&|b| b.f1),
            f1_undefined: blocks.iter().map(|b| b.f1_undefined).sum(),
            margins: MarginSummary {
                grouping: MarginGrouping::TrueLabel,
                genuine: ClassMargins {
                    signed: pick(&|b| b.margins.genuine.signed),
                    absolute: pick(&|b| b.margins.genuine.absolute),
                },
                hallucinated: ClassMargins {
                    signed: pick(&|b| b.margins.hallucinated.signed),
                    absolute: pick(&|b| b.margins.hallucinated.absolute),
                },
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Skipped {
    pub what: String,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PropagationBlock {
    pub model: String,
    pub prompt: String,
    pub lambda: f64,
    pub wasserstein_order: f64,
    pub splits_requested: usize,
    pub f1_positive_class: String,
    pub metrics: MetricBlock,
    pub skipped: Vec<Skipped>,
}

fn run_on_splits(collection: &PromptCollection, splits: &[Split], lambda: f64, order: WassersteinOrder) -> (Vec<Evaluation>, Vec<Skipped>) {
    let outcomes: Vec<Result<Evaluation>> = splits
        .par_iter()
        .map(|s| evaluate_indices(collection, &s.train, &s.test, lambda, order))
        .collect();
    let mut evals = Vec::new();
    let mut skipped = Vec::new();
    for (i, o) in outcomes.into_iter().enumerate() {
        match o {
            Ok(e) => evals.push(e),
            Err(e) => skipped.push(Skipped { what: format!("split {i}"), reason: e.to_string() }),
        }
    }
    (evals, skipped)
}

pub fn run_propagation_eval(collection: &PromptCollection, plan: &SplitPlan, lambda: f64, order: WassersteinOrder) -> Result<PropagationBlock> {
    let splits = stratified_splits(collection, plan)?;
    propagation_on_splits(collection, &splits, plan.n_splits, lambda, order)
}

fn propagation_on_splits(collection: &PromptCollection, splits: &[Split], requested: usize, lambda: f64, order: WassersteinOrder) -> Result<PropagationBlock> {
    let (evals, skipped) = run_on_splits(collection, splits, lambda, order);
    if evals.is_empty() {
        return Err(Error::NoFeasible(format!(
            "{}: every split failed ({})",
            collection.key(),
            skipped.first().map_or(String::new(), |s| s.reason.clone())
        )));
    }
    Ok(PropagationBlock {
        model: collection.model_id.clone(),
        prompt: collection.prompt_id.clone(),
        lambda,
        wasserstein_order: order.p(),
        splits_requested: requested,
        f1_positive_class: "H".into(),
        metrics: MetricBlock::from_evaluations(&evals),
        skipped,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LearningCurveSpec {
    pub train_sizes: Vec<usize>,
    pub subsamples_per_size: usize,
    pub base_splits: SplitPlan,
}

impl Default for LearningCurveSpec {
    fn default() -> Self {
        LearningCurveSpec { train_sizes: (1..=20).map(|i| 5 * i).collect(), subsamples_per_size: 10, base_splits: SplitPlan::default() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub train_size: usize,
    pub evaluations: usize,
    pub accuracy: Summary,
    pub f1: Summary,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LearningCurve {
    pub model: String,
    pub prompt: String,
    pub points: Vec<CurvePoint>,
    pub skipped: Vec<Skipped>,
}

/// Class counts for a stratified subsample of `size` from a pool with `g`
/// genuine and `h` hallucinated members, keeping at least two per class.
fn stratified_counts(size: usize, g: usize, h: usize) -> Option<(usize, usize)> {
    if size > g + h || size < 4 || g < 2 || h < 2 {
        return None;
    }
    let mut n_g = ((size * g) as f64 / (g + h) as f64).round() as usize;
    n_g = n_g.clamp(2, g);
    let mut n_h = size - n_g.min(size);
    if n_h < 2 {
        n_h = 2;
        n_g = size - 2;
    }
    if n_h > h {
        n_h = h;
        n_g = size - h;
    }
    (n_g >= 2 && n_g <= g && n_h >= 2 && n_h <= h).then_some((n_g, n_h))
}

/// Learning curve over training-set sizes. Subsample `r` of size `s` on split
/// `k` draws from `base_splits.seed.derive("learning_curve", [k, s, r])`; a
/// size equal to the whole training pool is evaluated once per split.
pub fn run_learning_curve(collection: &PromptCollection, spec: &LearningCurveSpec, lambda: f64, order: WassersteinOrder) -> Result<LearningCurve> {
    if spec.subsamples_per_size == 0 {
        return Err(Error::InvalidParameter("subsamples_per_size must be at least 1".into()));
    }
    let splits = stratified_splits(collection, &spec.base_splits)?;
    let mut points = Vec::new();
    let mut skipped = Vec::new();

    for &size in &spec.train_sizes {
        let jobs: Vec<(usize, usize)> = {
            let pool = &splits[0].train;
            let g = pool.iter().filter(|&&i| collection.records[i].label == Label::Genuine).count();
            match stratified_counts(size, g, pool.len() - g) {
                None => {
                    let reason = if size > pool.len() {
                        format!("exceeds training pool of {}", pool.len())
                    } else {
                        "cannot hold two members of each class".to_string()
                    };
                    skipped.push(Skipped { what: format!("train size {size}"), reason });
                    continue;
                }
                Some(_) => {
                    let reps = if size == pool.len() { 1 } else { spec.subsamples_per_size };
                    (0..splits.len()).flat_map(|k| (0..reps).map(move |r| (k, r))).collect()
                }
            }
        };

        let outcomes: Vec<Result<Evaluation>> = jobs
            .par_iter()
            .map(|&(k, r)| {
                let split = &splits[k];
                let mut g_pool: Vec<usize> = split.train.iter().copied().filter(|&i| collection.records[i].label == Label::Genuine).collect();
                let mut h_pool: Vec<usize> = split.train.iter().copied().filter(|&i| collection.records[i].label == Label::Hallucinated).collect();
                let (n_g, n_h) = stratified_counts(size, g_pool.len(), h_pool.len()).expect("checked above");
                let mut rng = spec.base_splits.seed.derive("learning_curve", &[k as u64, size as u64, r as u64]).rng();
                g_pool.shuffle(&mut rng);
                h_pool.shuffle(&mut rng);
                let mut train: Vec<usize> = g_pool[..n_g].iter().chain(&h_pool[..n_h]).copied().collect();
                train.sort_unstable();
                evaluate_indices(collection, &train, &split.test, lambda, order)
            })
            .collect();
        let mut evals = Vec::new();
        for (o, (k, r)) in outcomes.into_iter().zip(&jobs) {
            match o {
                Ok(e) => evals.push(e),
                Err(e) => skipped.push(Skipped { what: format!("train size {size}, split {k}, subsample {r}"), reason: e.to_string() }),
            }
        }
        if evals.is_empty() {
            continue;
        }
        let block = MetricBlock::from_evaluations(&evals);
        points.push(CurvePoint { train_size: size, evaluations: evals.len(), accuracy: block.accuracy, f1: block.f1 });
    }

    if points.is_empty() {
        return Err(Error::NoFeasible(format!("{}: no feasible training size", collection.key())));
    }
    Ok(LearningCurve { model: collection.model_id.clone(), prompt: collection.prompt_id.clone(), points, skipped })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LambdaPoint {
    pub lambda: f64,
    pub accuracy: Summary,
    pub f1: Summary,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LambdaSweep {
    pub model: String,
    pub prompt: String,
    pub points: Vec<LambdaPoint>,
    /// The splits shared by every λ.
    #[serde(skip)]
    pub splits: Vec<Split>,
}

pub fn run_lambda_sweep(collection: &PromptCollection, lambdas: &[f64], plan: &SplitPlan, order: WassersteinOrder) -> Result<LambdaSweep> {
    if lambdas.is_empty() {
        return Err(Error::Empty("lambda grid"));
    }
    let splits = stratified_splits(collection, plan)?;
    let points = lambdas
        .iter()
        .map(|&lambda| {
            let block = propagation_on_splits(collection, &splits, plan.n_splits, lambda, order)?;
            Ok(LambdaPoint { lambda, accuracy: block.metrics.accuracy, f1: block.metrics.f1 })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(LambdaSweep { model: collection.model_id.clone(), prompt: collection.prompt_id.clone(), points, splits })
}

/// `count` log-spaced values from `lo` to `hi` inclusive.
pub fn log_grid(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    if count == 1 {
        return vec![lo];
    }
    let (a, b) = (lo.log10(), hi.log10());
    (0..count).map(|i| 10f64.powf(a + (b - a) * i as f64 / (count - 1) as f64)).collect()
}

/// A projector to fit on each training split.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "snake_case")]
pub enum ProjectorSpec {
    Fisher,
    WhitenedPca { k: usize },
    RandomProjection { k: usize },
}

impl ProjectorSpec {
    pub fn name(&self) -> &'static str {
        match self {
            ProjectorSpec::Fisher => "fisher",
            ProjectorSpec::WhitenedPca { .. } => "wpca",
            ProjectorSpec::RandomProjection { .. } => "ep",
        }
    }

    pub fn k(&self) -> usize {
        match self {
            ProjectorSpec::Fisher => 1,
            ProjectorSpec::WhitenedPca { k } | ProjectorSpec::RandomProjection { k } => *k,
        }
    }

    /// Parse `fisher`, `wpca:K` or `ep:K`.
    pub fn parse(s: &str) -> Result<Self> {
        let bad = || Error::InvalidParameter(format!("projector {s:?}: expected fisher, wpca:K or ep:K"));
        let (name, k) = match s.split_once(':') {
            Some((n, k)) => (n, Some(k.parse::<usize>().map_err(|_| bad())?)),
            None => (s, None),
        };
        match (name, k) {
            ("fisher", None) => Ok(ProjectorSpec::Fisher),
            ("wpca", Some(k)) if k > 0 => Ok(ProjectorSpec::WhitenedPca { k }),
            ("ep", Some(k)) if k > 0 => Ok(ProjectorSpec::RandomProjection { k }),
            _ => Err(bad()),
        }
    }

    fn fit(&self, train: &PromptCollection, lambda: f64, plan: &SplitPlan, split: usize) -> Result<Projector> {
        match *self {
            ProjectorSpec::Fisher => Ok(Projector::fisher(&fit_fisher(train, lambda)?)),
            ProjectorSpec::WhitenedPca { k } => fit_wpca(train, k),
            ProjectorSpec::RandomProjection { k } => {
                fit_random_projection(train.dimension, k, plan.seed.derive("random_projection", &[split as u64, k as u64]))
            }
        }
    }
}

impl std::fmt::Display for ProjectorSpec {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ProjectorSpec::Fisher => write!(f, "fisher"),
            ProjectorSpec::WhitenedPca { k } => write!(f, "wpca:{k}"),
            ProjectorSpec::RandomProjection { k } => write!(f, "ep:{k}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProjectorRow {
    pub method: String,
    pub k: usize,
    pub metrics: MetricBlock,
    /// Per-split agreement of predictions with the Fisher projector.
    pub agreement: Summary,
    pub skipped: Vec<Skipped>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProjectorComparison {
    pub model: String,
    pub prompt: String,
    pub rows: Vec<ProjectorRow>,
}

fn evaluate_projector(
    collection: &PromptCollection,
    split: &Split,
    projector: Projector,
    order: WassersteinOrder,
) -> Result<Evaluation> {
    let train = collection.subset(&split.train)?;
    let model = ProjectedPropagator::fit(projector, &train, order)?;
    let truths: Vec<Label> = split.test.iter().map(|&i| collection.records[i].label).collect();
    let predictions = split
        .test
        .iter()
        .map(|&i| model.classify(&collection.records[i].embedding))
        .collect::<Result<Vec<_>>>()?;
    let labels: Vec<Label> = predictions.iter().map(|p| p.label).collect();
    let scores = accuracy_f1(&labels, &truths)?;
    Ok(Evaluation { predictions, truths, scores })
}

/// Every projector runs the same Wasserstein-consistency classifier on shared
/// splits; agreement is measured against the Fisher projector on each split.
pub fn run_projector_comparison(
    collection: &PromptCollection,
    projectors: &[ProjectorSpec],
    plan: &SplitPlan,
    lambda: f64,
    order: WassersteinOrder,
) -> Result<ProjectorComparison> {
    if projectors.is_empty() {
        return Err(Error::Empty("projector list"));
    }
    let splits = stratified_splits(collection, plan)?;
    let fisher_eval = |s: usize| -> Result<Evaluation> {
        let split = &splits[s];
        let train = collection.subset(&split.train)?;
        let projector = ProjectorSpec::Fisher.fit(&train, lambda, plan, s)?;
        evaluate_projector(collection, split, projector, order)
    };
    let baseline: Vec<Option<Evaluation>> = (0..splits.len()).into_par_iter().map(|s| fisher_eval(s).ok()).collect();

    let mut rows = Vec::with_capacity(projectors.len());
    for spec in projectors {
        let outcomes: Vec<Result<Evaluation>> = (0..splits.len())
            .into_par_iter()
            .map(|s| {
                let split = &splits[s];
                let train = collection.subset(&split.train)?;
                let projector = spec.fit(&train, lambda, plan, s)?;
                evaluate_projector(collection, split, projector, order)
            })
            .collect();
        let mut evals = Vec::new();
        let mut agreements = Vec::new();
        let mut skipped = Vec::new();
        for (s, o) in outcomes.into_iter().enumerate() {
            match o {
                Ok(e) => {
                    if let Some(base) = &baseline[s] {
                        agreements.push(crate::fisher::agreement(&e.predicted_labels(), &base.predicted_labels())?);
                    }
                    evals.push(e);
                }
                Err(e) => skipped.push(Skipped { what: format!("split {s}"), reason: e.to_string() }),
            }
        }
        rows.push(ProjectorRow {
            method: spec.name().to_string(),
            k: spec.k(),
            metrics: MetricBlock::from_evaluations(&evals),
            agreement: Summary::from_values(&agreements),
            skipped,
        });
    }
    Ok(ProjectorComparison { model: collection.model_id.clone(), prompt: collection.prompt_id.clone(), rows })
}

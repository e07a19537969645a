//! Report aggregation, text tables and CSV plot data.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::protocols::{LambdaSweep, LearningCurve, MetricBlock, PropagationBlock, ProjectorComparison};
use super::structural::{StructuralBlock, StructuralResult};
use crate::summary::Summary;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StructuralAggregate {
    /// `model:<id>` or `global`.
    pub scope: String,
    pub collections: usize,
    pub ratio_original: Summary,
    pub ratio_fisher: Summary,
    pub observed_w: Summary,
    pub null_mean_w: Summary,
    /// Percentage of collections whose observed W exceeds the null mean.
    pub percent_above_null_mean: f64,
    /// Percentage of collections whose observed W exceeds every null sample.
    pub percent_above_null_max: f64,
    /// Percentage of collections with Wilcoxon p < 0.05.
    pub percent_wilcoxon_significant: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PropagationAggregate {
    pub scope: String,
    pub collections: usize,
    pub metrics: MetricBlock,
}

/// Groups items by model and appends a global group; fixed order.
fn scopes<T>(items: &[T], model: impl Fn(&T) -> &str) -> Vec<(String, Vec<&T>)> {
    let mut by_model: BTreeMap<String, Vec<&T>> = BTreeMap::new();
    for it in items {
        by_model.entry(model(it).to_string()).or_default().push(it);
    }
    let mut out: Vec<(String, Vec<&T>)> = by_model.into_iter().map(|(m, v)| (format!("model:{m}"), v)).collect();
    out.push(("global".to_string(), items.iter().collect()));
    out
}

fn percent(count: usize, total: usize) -> f64 {
    if total == 0 {
        f64::NAN
    } else {
        100.0 * count as f64 / total as f64
    }
}

pub fn aggregate_structural(blocks: &[StructuralBlock]) -> Vec<StructuralAggregate> {
    if blocks.is_empty() {
        return Vec::new();
    }
    scopes(blocks, |b| &b.model)
        .into_iter()
        .map(|(scope, group)| {
            let vals = |f: &dyn Fn(&StructuralBlock) -> f64| Summary::from_values(&group.iter().map(|b| f(b)).collect::<Vec<_>>());
            let n = group.len();
            StructuralAggregate {
                scope,
                collections: n,
                ratio_original: vals(&|b| b.original.separability_ratio),
                ratio_fisher: vals(&|b| b.fisher.separability_ratio),
                observed_w: vals(&|b| b.wasserstein.observed),
                null_mean_w: vals(&|b| b.wasserstein.null_mean),
                percent_above_null_mean: percent(group.iter().filter(|b| b.wasserstein.observed > b.wasserstein.null_mean).count(), n),
                percent_above_null_max: percent(group.iter().filter(|b| b.wasserstein.exceed_fraction == 1.0).count(), n),
                percent_wilcoxon_significant: percent(group.iter().filter(|b| b.wilcoxon.p_value < 0.05).count(), n),
            }
        })
        .collect()
}

/// Per-model and global pooling of per-collection metrics. Pooled means are
/// the evaluation-count-weighted average of the per-collection means.
pub fn aggregate_propagation(blocks: &[PropagationBlock]) -> Vec<PropagationAggregate> {
    if blocks.is_empty() {
        return Vec::new();
    }
    scopes(blocks, |b| &b.model)
        .into_iter()
        .map(|(scope, group)| PropagationAggregate {
            scope,
            collections: group.len(),
            metrics: MetricBlock::combine(&group.iter().map(|b| &b.metrics).collect::<Vec<_>>()),
        })
        .collect()
}

/// Everything a run produced, in machine-readable form.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub structural: Vec<StructuralBlock>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub structural_aggregates: Vec<StructuralAggregate>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub propagation: Vec<PropagationBlock>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub propagation_aggregates: Vec<PropagationAggregate>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub learning_curves: Vec<LearningCurve>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub lambda_sweeps: Vec<LambdaSweepRecord>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub projector_comparisons: Vec<ProjectorComparison>,
}

/// Serializable view of a [`LambdaSweep`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LambdaSweepRecord {
    pub model: String,
    pub prompt: String,
    pub points: Vec<super::protocols::LambdaPoint>,
}

impl From<&LambdaSweep> for LambdaSweepRecord {
    fn from(s: &LambdaSweep) -> Self {
        LambdaSweepRecord { model: s.model.clone(), prompt: s.prompt.clone(), points: s.points.clone() }
    }
}

fn f(x: f64) -> String {
    if x.is_nan() {
        "n/a".into()
    } else {
        format!("{x:.4}")
    }
}

fn ms(s: &Summary) -> String {
    if s.n == 0 {
        "n/a".into()
    } else {
        format!("{} ({})", f(s.mean), f(s.std))
    }
}

impl EvaluationReport {
    pub fn with_structural(blocks: Vec<StructuralBlock>) -> Self {
        let structural_aggregates = aggregate_structural(&blocks);
        EvaluationReport { structural: blocks, structural_aggregates, ..Default::default() }
    }

    pub fn with_propagation(blocks: Vec<PropagationBlock>) -> Self {
        let propagation_aggregates = aggregate_propagation(&blocks);
        EvaluationReport { propagation: blocks, propagation_aggregates, ..Default::default() }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("reports always serialize") + "\n"
    }

    /// Human-readable tables.
    pub fn render_text(&self) -> String {
        let mut out = String::new();
        if !self.structural.is_empty() {
            let order = self.structural[0].wasserstein_order;
            let _ = writeln!(out, "Structural analysis (W_p with p = {order}; ratio = 2·mean(GH)/(mean(GG)+mean(HH)); Fisher distances |z_i - z_j|)");
            let _ = writeln!(
                out,
                "{:<16} {:<16} {:>4} {:>4} {:>10} {:>10} {:>10} {:>10} {:>10} {:>9} {:>5}",
                "model", "prompt", "G", "H", "ratio", "ratio_F", "W_obs", "W_null", "W_nullmax", "p_perm", "wilc"
            );
            for b in &self.structural {
                let _ = writeln!(
                    out,
                    "{:<16} {:<16} {:>4} {:>4} {:>10} {:>10} {:>10} {:>10} {:>10} {:>9} {:>5}",
                    b.model,
                    b.prompt,
                    b.n_genuine,
                    b.n_hallucinated,
                    f(b.original.separability_ratio),
                    f(b.fisher.separability_ratio),
                    f(b.wasserstein.observed),
                    f(b.wasserstein.null_mean),
                    f(b.wasserstein.null_max),
                    f(b.wasserstein.p_value),
                    b.wilcoxon.stars
                );
            }
            let _ = writeln!(out);
            let _ = writeln!(
                out,
                "{:<24} {:>5} {:>20} {:>20} {:>20} {:>20} {:>9} {:>9} {:>9}",
                "scope", "n", "ratio", "ratio_F", "E[W]", "E[W_null]", "%>mean", "%>max", "%wilc"
            );
            for a in &self.structural_aggregates {
                let _ = writeln!(
                    out,
                    "{:<24} {:>5} {:>20} {:>20} {:>20} {:>20} {:>9.1} {:>9.1} {:>9.1}",
                    a.scope,
                    a.collections,
                    ms(&a.ratio_original),
                    ms(&a.ratio_fisher),
                    ms(&a.observed_w),
                    ms(&a.null_mean_w),
                    a.percent_above_null_mean,
                    a.percent_above_null_max,
                    a.percent_wilcoxon_significant
                );
            }
            let _ = writeln!(out);
        }

        if !self.propagation.is_empty() {
            let _ = writeln!(out, "Label propagation (F1 positive class: H; margins grouped by true label)");
            let header = format!(
                "{:<24} {:>6} {:>18} {:>18} {:>18} {:>18} {:>18} {:>18}",
                "scope", "evals", "accuracy", "F1", "signed_G", "signed_H", "abs_G", "abs_H"
            );
            let row = |name: &str, m: &MetricBlock| {
                format!(
                    "{:<24} {:>6} {:>18} {:>18} {:>18} {:>18} {:>18} {:>18}",
                    name,
                    m.evaluations,
                    ms(&m.accuracy),
                    ms(&m.f1),
                    ms(&m.margins.genuine.signed),
                    ms(&m.margins.hallucinated.signed),
                    ms(&m.margins.genuine.absolute),
                    ms(&m.margins.hallucinated.absolute)
                )
            };
            let _ = writeln!(out, "{header}");
            for b in &self.propagation {
                let _ = writeln!(out, "{}", row(&format!("{}/{}", b.model, b.prompt), &b.metrics));
            }
            for a in &self.propagation_aggregates {
                let _ = writeln!(out, "{}", row(&a.scope, &a.metrics));
            }
            let _ = writeln!(out);
        }

        for c in &self.learning_curves {
            let _ = writeln!(out, "Learning curve {}/{}", c.model, c.prompt);
            let _ = writeln!(out, "{:>6} {:>6} {:>18} {:>18}", "size", "evals", "accuracy", "F1");
            for p in &c.points {
                let _ = writeln!(out, "{:>6} {:>6} {:>18} {:>18}", p.train_size, p.evaluations, ms(&p.accuracy), ms(&p.f1));
            }
            for s in &c.skipped {
                let _ = writeln!(out, "  skipped {}: {}", s.what, s.reason);
            }
            let _ = writeln!(out);
        }

        for s in &self.lambda_sweeps {
            let _ = writeln!(out, "Lambda sweep {}/{}", s.model, s.prompt);
            let _ = writeln!(out, "{:>12} {:>18} {:>18}", "lambda", "accuracy", "F1");
            for p in &s.points {
                let _ = writeln!(out, "{:>12.4e} {:>18} {:>18}", p.lambda, ms(&p.accuracy), ms(&p.f1));
            }
            let _ = writeln!(out);
        }

        for c in &self.projector_comparisons {
            let _ = writeln!(out, "Projector comparison {}/{}", c.model, c.prompt);
            let _ = writeln!(out, "{:<8} {:>4} {:>18} {:>18} {:>18} {:>18} {:>18}", "method", "k", "accuracy", "F1", "signed_G", "signed_H", "agree");
            for r in &c.rows {
                let _ = writeln!(
                    out,
                    "{:<8} {:>4} {:>18} {:>18} {:>18} {:>18} {:>18}",
                    r.method,
                    r.k,
                    ms(&r.metrics.accuracy),
                    ms(&r.metrics.f1),
                    ms(&r.metrics.margins.genuine.signed),
                    ms(&r.metrics.margins.hallucinated.signed),
                    ms(&r.agreement)
                );
            }
            let _ = writeln!(out);
        }
        out
    }
}

fn csv_bytes(header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> Vec<u8> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header).expect("in-memory csv");
    for r in rows {
        w.write_record(&r).expect("in-memory csv");
    }
    w.into_inner().expect("in-memory csv")
}

fn s(x: impl ToString) -> String {
    x.to_string()
}

/// Distance distributions per collection, space and kind.
pub fn distances_csv(results: &[StructuralResult]) -> Vec<u8> {
    let mut rows = Vec::new();
    for r in results {
        for (space, cd) in [("original", &r.original), ("fisher", &r.fisher)] {
            for (kind, d) in [("GG", &cd.gg), ("HH", &cd.hh), ("GH", &cd.gh)] {
                for v in d.values() {
                    rows.push(vec![s(&r.block.model), s(&r.block.prompt), s(space), s(kind), s(v)]);
                }
            }
        }
    }
    csv_bytes(&["model", "prompt", "space", "kind", "distance"], rows)
}

/// Observed W against every null sample.
pub fn null_csv(results: &[StructuralResult]) -> Vec<u8> {
    let mut rows = Vec::new();
    for r in results {
        for (i, w) in r.null.null_samples.iter().enumerate() {
            rows.push(vec![s(&r.block.model), s(&r.block.prompt), s(i), s(w), s(r.null.observed)]);
        }
    }
    csv_bytes(&["model", "prompt", "permutation", "null_w", "observed_w"], rows)
}

pub fn learning_curve_csv(curves: &[LearningCurve]) -> Vec<u8> {
    let mut rows = Vec::new();
    for c in curves {
        for p in &c.points {
            rows.push(vec![s(&c.model), s(&c.prompt), s(p.train_size), s(p.evaluations), s(p.accuracy.mean), s(p.accuracy.std), s(p.f1.mean), s(p.f1.std), s("")]);
        }
        for k in &c.skipped {
            rows.push(vec![s(&c.model), s(&c.prompt), s(""), s(0), s(""), s(""), s(""), s(""), format!("skipped {}: {}", k.what, k.reason)]);
        }
    }
    csv_bytes(&["model", "prompt", "train_size", "evaluations", "accuracy_mean", "accuracy_std", "f1_mean", "f1_std", "note"], rows)
}

pub fn lambda_sweep_csv(sweeps: &[LambdaSweepRecord]) -> Vec<u8> {
    let mut rows = Vec::new();
    for sw in sweeps {
        for p in &sw.points {
            rows.push(vec![s(&sw.model), s(&sw.prompt), s(p.lambda), s(p.accuracy.mean), s(p.accuracy.std), s(p.f1.mean), s(p.f1.std), s(p.f1.n)]);
        }
    }
    csv_bytes(&["model", "prompt", "lambda", "accuracy_mean", "accuracy_std", "f1_mean", "f1_std", "n"], rows)
}

pub fn projectors_csv(comparisons: &[ProjectorComparison]) -> Vec<u8> {
    let mut rows = Vec::new();
    for c in comparisons {
        for r in &c.rows {
            let m = &r.metrics;
            rows.push(vec![
                s(&c.model),
                s(&c.prompt),
                s(&r.method),
                s(r.k),
                s(m.accuracy.mean),
                s(m.accuracy.std),
                s(m.f1.mean),
                s(m.f1.std),
                s(m.margins.genuine.signed.mean),
                s(m.margins.hallucinated.signed.mean),
                s(m.margins.genuine.absolute.mean),
                s(m.margins.hallucinated.absolute.mean),
                s(r.agreement.mean),
                s(r.agreement.std),
            ]);
        }
    }
    csv_bytes(
        &[
            "model", "prompt", "method", "k", "accuracy_mean", "accuracy_std", "f1_mean", "f1_std", "signed_margin_g", "signed_margin_h",
            "absolute_margin_g", "absolute_margin_h", "agreement_mean", "agreement_std",
        ],
        rows,
    )
}

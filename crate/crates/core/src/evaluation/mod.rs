//! Evaluation protocols and reports.

mod metrics;
mod protocols;
mod report;
mod splits;
mod structural;

pub use metrics::{accuracy_f1, Scores};
pub use protocols::{
    evaluate_indices, log_grid, run_lambda_sweep, run_learning_curve, run_projector_comparison, run_propagation_eval, CurvePoint,
    Evaluation, LambdaPoint, LambdaSweep, LearningCurve, LearningCurveSpec, MetricBlock, ProjectorComparison, ProjectorRow,
    ProjectorSpec, PropagationBlock, Skipped,
};
pub use report::{
    aggregate_propagation, aggregate_structural, distances_csv, lambda_sweep_csv, learning_curve_csv, null_csv, projectors_csv,
    EvaluationReport, LambdaSweepRecord, PropagationAggregate, StructuralAggregate,
};
pub use splits::{stratified_splits, test_count, Split, SplitPlan};
pub use structural::{run_structural, DistributionSummary, NullBlock, SpaceDistances, StructuralBlock, StructuralConfig, StructuralResult, WilcoxonBlock};

//! Command-line surface: `analyze`, `propagate`, `sweep`, `synth`, `report`.

mod config;
mod output;

pub use config::{RunArgs, RunConfig};
pub use output::OutputSet;

use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use crate::data::{self, build_collections, FilterSummary, Label, PromptCollection, RecordValidator, ResponseRecord};
use crate::error::{Error, Result};
use crate::evaluation::{self, EvaluationReport, LambdaSweepRecord};
use crate::propagation::{fit_propagator, PropagatorModel};
use crate::synth::{self, GapProfile, SynthSpec};

#[derive(Debug, Parser)]
#[command(name = "halluscope", version, about = "Embedding geometry of genuine vs. hallucinated responses")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Distance distributions, Wasserstein vs. permutation null, Wilcoxon and separability ratios.
    Analyze(RunArgs),
    /// Evaluate the label propagator on stratified splits, or label new responses.
    Propagate(PropagateArgs),
    /// λ sensitivity, learning curve or projector comparison.
    Sweep(SweepArgs),
    /// Write a synthetic record file.
    Synth(SynthArgs),
    /// Re-render saved JSON reports as text tables.
    Report(ReportArgs),
}

#[derive(Debug, clap::Args)]
pub struct PropagateArgs {
    #[command(flatten)]
    pub run: RunArgs,
    /// Saved model bundle to label `--classify` with instead of fitting.
    #[arg(long)]
    pub model: Option<String>,
    /// Record file to label (labels in it are carried through, not used).
    #[arg(long)]
    pub classify: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SweepMode {
    Lambda,
    LearningCurve,
    Projectors,
}

#[derive(Debug, clap::Args)]
pub struct SweepArgs {
    #[command(flatten)]
    pub run: RunArgs,
    #[arg(long, value_enum)]
    pub mode: SweepMode,
}

#[derive(Debug, clap::Args)]
pub struct SynthArgs {
    #[arg(long, default_value_t = 16)]
    pub dim: usize,
    #[arg(long, default_value_t = 30)]
    pub n_genuine: usize,
    #[arg(long, default_value_t = 30)]
    pub n_hallucinated: usize,
    #[arg(long, default_value_t = 0.0)]
    pub mu_gap: f64,
    #[arg(long, default_value_t = 1.0)]
    pub sigma_g: f64,
    #[arg(long, default_value_t = 1.0)]
    pub sigma_h: f64,
    #[arg(long, default_value_t = 0.0)]
    pub anisotropy: f64,
    /// uniform, low-variance or high-variance.
    #[arg(long, default_value = "uniform")]
    pub gap_profile: String,
    #[arg(long, default_value_t = 1)]
    pub modes: usize,
    #[arg(long, default_value_t = 2.0)]
    pub mode_radius: f64,
    #[arg(long, default_value = "synth")]
    pub model: String,
    /// Number of prompts; prompt `i` is named `p<i>` and seeded from `seed` and `i`.
    #[arg(long, default_value_t = 1)]
    pub prompts: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Output file (`-` for standard output).
    #[arg(long, short, default_value = "-")]
    pub output: String,
}

#[derive(Debug, clap::Args)]
pub struct ReportArgs {
    /// JSON report files or output directories.
    #[arg(required = true)]
    pub paths: Vec<String>,
}

/// Models fitted per collection, as saved by `propagate`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelBundle {
    pub models: Vec<BundleEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BundleEntry {
    pub model: String,
    pub prompt: String,
    pub propagator: PropagatorModel,
}

impl ModelBundle {
    pub fn load(path: &str) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io { path: path.into(), source })?;
        let bundle: ModelBundle =
            serde_json::from_str(&text).map_err(|e| Error::Input { path: path.into(), source: Box::new(Error::Serde(e.to_string())) })?;
        for entry in &bundle.models {
            if entry.propagator.z_g.len() < 2 || entry.propagator.z_h.len() < 2 {
                return Err(Error::Input { path: path.into(), source: Box::new(Error::Serde("model with fewer than two coordinates per class".into())) });
            }
        }
        Ok(bundle)
    }

    fn find(&self, model: &str, prompt: &str) -> Option<&PropagatorModel> {
        self.models.iter().find(|e| e.model == model && e.prompt == prompt).map(|e| &e.propagator)
    }
}

/// One labeled output line: the input record plus prediction and signed margin.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionRecord {
    #[serde(flatten)]
    pub record: ResponseRecord,
    pub pred: Label,
    pub margin: f64,
}

fn open_input(path: &str) -> Result<Box<dyn BufRead>> {
    if path == "-" {
        Ok(Box::new(BufReader::new(std::io::stdin())))
    } else {
        let f = std::fs::File::open(path).map_err(|source| Error::Io { path: path.into(), source })?;
        Ok(Box::new(BufReader::new(f)))
    }
}

/// Read every input as one record set (shared dimension, unique ids).
pub fn load_records(paths: &[String], normalize: bool) -> Result<Vec<ResponseRecord>> {
    if paths.is_empty() {
        return Err(Error::InvalidParameter("no input files given".into()));
    }
    let mut validator = RecordValidator::new();
    let mut records = Vec::new();
    for path in paths {
        let reader = open_input(path)?;
        let mut part =
            data::parse_records_with(reader, &mut validator).map_err(|e| Error::Input { path: path.clone(), source: Box::new(e) })?;
        records.append(&mut part);
    }
    if normalize {
        data::normalize_l2(&mut records);
    }
    Ok(records)
}

fn load_collections(cfg: &RunConfig) -> Result<(Vec<PromptCollection>, FilterSummary)> {
    let records = load_records(&cfg.inputs, cfg.normalize)?;
    let (collections, summary) = build_collections(records, &cfg.filter_policy());
    if collections.is_empty() {
        return Err(Error::NoCollections(summary));
    }
    Ok((collections, summary))
}

fn json<T: Serialize>(value: &T) -> String {
    serde_json::to_string_pretty(value).expect("outputs always serialize") + "\n"
}

fn common_outputs(cfg: &RunConfig, summary: &FilterSummary) -> OutputSet {
    let mut out = OutputSet::new();
    out.add("config.toml", cfg.to_toml());
    out.add("filter_summary.json", json(summary));
    out
}

pub fn cmd_analyze(cfg: &RunConfig) -> Result<OutputSet> {
    let (collections, summary) = load_collections(cfg)?;
    let structural = cfg.structural();
    let results = collections
        .iter()
        .map(|c| evaluation::run_structural(c, &structural))
        .collect::<Result<Vec<_>>>()?;
    let report = EvaluationReport::with_structural(results.iter().map(|r| r.block.clone()).collect());

    let mut out = common_outputs(cfg, &summary);
    out.add("structural.json", report.to_json());
    out.add("structural.txt", report.render_text());
    out.add("distances.csv", evaluation::distances_csv(&results));
    out.add("null.csv", evaluation::null_csv(&results));
    Ok(out)
}

fn classify_records(bundle: &ModelBundle, records: &[ResponseRecord]) -> Result<Vec<u8>> {
    let mut buf = Vec::new();
    for r in records {
        let model = bundle.find(&r.model_id, &r.prompt_id).ok_or_else(|| {
            Error::InvalidParameter(format!("no fitted model for ({}, {})", r.model_id, r.prompt_id))
        })?;
        if model.dimension() != r.embedding.len() {
            return Err(Error::Dimension { expected: model.dimension(), found: r.embedding.len() });
        }
        let p = model.classify(&r.embedding)?;
        let line = PredictionRecord { record: r.clone(), pred: p.label, margin: p.signed_margin };
        serde_json::to_writer(&mut buf, &line).map_err(|e| Error::Serde(e.to_string()))?;
        buf.push(b'\n');
    }
    Ok(buf)
}

pub fn cmd_propagate(cfg: &RunConfig, model: Option<&str>, classify: Option<&str>) -> Result<OutputSet> {
    if let Some(model_path) = model {
        let classify = classify.ok_or_else(|| Error::InvalidParameter("--model requires --classify".into()))?;
        let bundle = ModelBundle::load(model_path)?;
        let records = load_records(&[classify.to_string()], cfg.normalize)?;
        let mut out = OutputSet::new();
        out.add("config.toml", cfg.to_toml());
        out.add("predictions.jsonl", classify_records(&bundle, &records)?);
        return Ok(out);
    }

    let (collections, summary) = load_collections(cfg)?;
    let master = cfg.master_seed();
    let blocks = collections
        .iter()
        .map(|c| evaluation::run_propagation_eval(c, &cfg.split_plan(master.derive_key("propagation", &c.key())), cfg.lambda, cfg.order()))
        .collect::<Result<Vec<_>>>()?;
    let bundle = ModelBundle {
        models: collections
            .iter()
            .map(|c| {
                Ok(BundleEntry { model: c.model_id.clone(), prompt: c.prompt_id.clone(), propagator: fit_propagator(c, cfg.lambda, cfg.order())? })
            })
            .collect::<Result<Vec<_>>>()?,
    };
    let report = EvaluationReport::with_propagation(blocks);

    let mut out = common_outputs(cfg, &summary);
    out.add("propagation.json", report.to_json());
    out.add("propagation.txt", report.render_text());
    out.add("models.json", json(&bundle));
    if let Some(path) = classify {
        let records = load_records(&[path.to_string()], cfg.normalize)?;
        out.add("predictions.jsonl", classify_records(&bundle, &records)?);
    }
    Ok(out)
}

pub fn cmd_sweep(cfg: &RunConfig, mode: SweepMode) -> Result<OutputSet> {
    let (collections, summary) = load_collections(cfg)?;
    let master = cfg.master_seed();
    let seed_for = |c: &PromptCollection| master.derive_key("sweep", &c.key());
    let mut report = EvaluationReport::default();
    let mut out = common_outputs(cfg, &summary);

    let stem = match mode {
        SweepMode::Lambda => {
            for c in &collections {
                let sweep = evaluation::run_lambda_sweep(c, &cfg.lambdas, &cfg.split_plan(seed_for(c)), cfg.order())?;
                report.lambda_sweeps.push(LambdaSweepRecord::from(&sweep));
            }
            out.add("sweep_lambda.csv", evaluation::lambda_sweep_csv(&report.lambda_sweeps));
            "sweep_lambda"
        }
        SweepMode::LearningCurve => {
            for c in &collections {
                report.learning_curves.push(evaluation::run_learning_curve(c, &cfg.learning_curve(seed_for(c)), cfg.lambda, cfg.order())?);
            }
            out.add("learning_curve.csv", evaluation::learning_curve_csv(&report.learning_curves));
            "learning_curve"
        }
        SweepMode::Projectors => {
            let specs = cfg.projector_specs()?;
            for c in &collections {
                report
                    .projector_comparisons
                    .push(evaluation::run_projector_comparison(c, &specs, &cfg.split_plan(seed_for(c)), cfg.lambda, cfg.order())?);
            }
            out.add("projectors.csv", evaluation::projectors_csv(&report.projector_comparisons));
            "projectors"
        }
    };
    out.add(format!("{stem}.json"), report.to_json());
    out.add(format!("{stem}.txt"), report.render_text());
    Ok(out)
}

pub fn synth_spec(args: &SynthArgs, prompt: usize) -> Result<SynthSpec> {
    let gap_profile: GapProfile = args.gap_profile.parse()?;
    let seed = if args.prompts == 1 { args.seed } else { crate::seed::Seed(args.seed).derive("synth_prompt", &[prompt as u64]).0 };
    let spec = SynthSpec {
        model_id: args.model.clone(),
        prompt_id: format!("p{prompt}"),
        dimension: args.dim,
        n_genuine: args.n_genuine,
        n_hallucinated: args.n_hallucinated,
        mu_gap: args.mu_gap,
        sigma_g: args.sigma_g,
        sigma_h: args.sigma_h,
        anisotropy: args.anisotropy,
        gap_profile,
        hallucination_modes: args.modes,
        mode_radius: args.mode_radius,
        seed,
    };
    spec.validate()?;
    Ok(spec)
}

pub fn cmd_synth(args: &SynthArgs) -> Result<Vec<u8>> {
    if args.prompts == 0 {
        return Err(Error::InvalidParameter("--prompts must be at least 1".into()));
    }
    let mut buf = Vec::new();
    for i in 0..args.prompts {
        let collection = synth::generate(&synth_spec(args, i)?)?;
        data::write_records(&mut buf, &collection.records).expect("in-memory write");
    }
    Ok(buf)
}

const REPORT_FILES: [&str; 5] = ["structural.json", "propagation.json", "sweep_lambda.json", "learning_curve.json", "projectors.json"];

pub fn cmd_report(paths: &[String]) -> Result<String> {
    let mut files: Vec<PathBuf> = Vec::new();
    for p in paths {
        let path = Path::new(p);
        if path.is_dir() {
            files.extend(REPORT_FILES.iter().map(|f| path.join(f)).filter(|f| f.exists()));
        } else {
            files.push(path.to_path_buf());
        }
    }
    if files.is_empty() {
        return Err(Error::InvalidParameter("no reports found".into()));
    }
    let mut text = String::new();
    for f in files {
        let display = f.display().to_string();
        let raw = std::fs::read_to_string(&f).map_err(|source| Error::Io { path: display.clone(), source })?;
        let report: EvaluationReport =
            serde_json::from_str(&raw).map_err(|e| Error::Input { path: display, source: Box::new(Error::Serde(e.to_string())) })?;
        text.push_str(&report.render_text());
    }
    Ok(text)
}

/// Machine-readable error document for failed runs.
pub fn error_document(err: &Error) -> String {
    let mut doc = serde_json::json!({ "error": { "kind": err.kind(), "message": err.to_string() } });
    if let Error::NoCollections(summary) = err {
        doc["error"]["filter_summary"] = serde_json::to_value(summary).expect("summary serializes");
    }
    serde_json::to_string(&doc).expect("error documents serialize")
}

/// Run a parsed command; output files are written only on success.
pub fn execute(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Analyze(args) => {
            let cfg = args.resolve()?;
            cmd_analyze(&cfg)?.commit(Path::new(&cfg.out))?;
        }
        Command::Propagate(args) => {
            let cfg = args.run.resolve()?;
            cmd_propagate(&cfg, args.model.as_deref(), args.classify.as_deref())?.commit(Path::new(&cfg.out))?;
        }
        Command::Sweep(args) => {
            let cfg = args.run.resolve()?;
            cmd_sweep(&cfg, args.mode)?.commit(Path::new(&cfg.out))?;
        }
        Command::Synth(args) => {
            let bytes = cmd_synth(&args)?;
            if args.output == "-" {
                std::io::stdout().write_all(&bytes).map_err(|source| Error::Io { path: "<stdout>".into(), source })?;
            } else {
                let path = Path::new(&args.output);
                let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
                let name = path.file_name().ok_or_else(|| Error::InvalidParameter("bad output path".into()))?;
                let mut out = OutputSet::new();
                out.add(name.to_string_lossy(), bytes);
                out.commit(dir)?;
            }
        }
        Command::Report(args) => {
            let text = cmd_report(&args.paths)?;
            std::io::stdout().write_all(text.as_bytes()).map_err(|source| Error::Io { path: "<stdout>".into(), source })?;
        }
    }
    Ok(())
}

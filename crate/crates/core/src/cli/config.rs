use clap::Args;
use serde::{Deserialize, Serialize};

use crate::data::FilterPolicy;
use crate::error::{Error, Result};
use crate::evaluation::{log_grid, LearningCurveSpec, ProjectorSpec, SplitPlan, StructuralConfig};
use crate::seed::Seed;
use crate::stats::WassersteinOrder;

/// Fully resolved run configuration. Loaded from a flat TOML file, then
/// overridden by command-line flags; echoed into every output directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub inputs: Vec<String>,
    pub lambda: f64,
    pub order: f64,
    pub permutations: usize,
    pub n_splits: usize,
    pub test_fraction: f64,
    pub train_sizes: Vec<usize>,
    pub subsamples: usize,
    pub min_class_size: usize,
    pub normalize: bool,
    pub seed: u64,
    pub out: String,
    pub lambdas: Vec<f64>,
    pub projectors: Vec<String>,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            inputs: Vec::new(),
            lambda: crate::fisher::DEFAULT_LAMBDA,
            order: 1.0,
            permutations: 100,
            n_splits: 20,
            test_fraction: 1.0 / 3.0,
            train_sizes: (1..=20).map(|i| 5 * i).collect(),
            subsamples: 10,
            min_class_size: 5,
            normalize: false,
            seed: 0,
            out: "out".into(),
            lambdas: log_grid(1e-3, 1e3, 13),
            projectors: ["fisher", "wpca:1", "wpca:2", "wpca:3", "ep:1", "ep:3", "ep:15"].map(String::from).to_vec(),
        }
    }
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Serde(format!("config: {e}")))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config always serializes")
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.lambda.is_finite() && self.lambda > 0.0) {
            return Err(Error::InvalidParameter(format!("lambda must be positive, got {}", self.lambda)));
        }
        WassersteinOrder::new(self.order)?;
        FilterPolicy::new(self.min_class_size, true)?;
        if self.permutations == 0 || self.n_splits == 0 || self.subsamples == 0 {
            return Err(Error::InvalidParameter("permutations, n_splits and subsamples must be positive".into()));
        }
        if !(self.test_fraction > 0.0 && self.test_fraction < 1.0) {
            return Err(Error::InvalidParameter(format!("test_fraction must lie in (0, 1), got {}", self.test_fraction)));
        }
        if self.lambdas.iter().any(|l| !(l.is_finite() && *l > 0.0)) {
            return Err(Error::InvalidParameter("every sweep lambda must be positive".into()));
        }
        self.projector_specs()?;
        Ok(())
    }

    pub fn order(&self) -> WassersteinOrder {
        WassersteinOrder::new(self.order).expect("validated")
    }

    pub fn filter_policy(&self) -> FilterPolicy {
        FilterPolicy { min_class_size: self.min_class_size, drop_unknown: true }
    }

    pub fn master_seed(&self) -> Seed {
        Seed(self.seed)
    }

    pub fn split_plan(&self, seed: Seed) -> SplitPlan {
        SplitPlan { n_splits: self.n_splits, test_fraction: self.test_fraction, seed }
    }

    pub fn structural(&self) -> StructuralConfig {
        StructuralConfig { lambda: self.lambda, order: self.order(), permutations: self.permutations, seed: self.master_seed() }
    }

    pub fn learning_curve(&self, seed: Seed) -> LearningCurveSpec {
        LearningCurveSpec { train_sizes: self.train_sizes.clone(), subsamples_per_size: self.subsamples, base_splits: self.split_plan(seed) }
    }

    pub fn projector_specs(&self) -> Result<Vec<ProjectorSpec>> {
        self.projectors.iter().map(|p| ProjectorSpec::parse(p)).collect()
    }
}

/// Flags shared by the analysis commands; each overrides the config file.
#[derive(Debug, Clone, Default, Args)]
pub struct RunArgs {
    /// Record files (`-` for standard input).
    pub inputs: Vec<String>,
    /// Flat TOML config file.
    #[arg(long)]
    pub config: Option<String>,
    /// Output directory.
    #[arg(long, short)]
    pub out: Option<String>,
    #[arg(long)]
    pub lambda: Option<f64>,
    /// Wasserstein order p.
    #[arg(long)]
    pub order: Option<f64>,
    #[arg(long)]
    pub permutations: Option<usize>,
    #[arg(long = "splits")]
    pub n_splits: Option<usize>,
    #[arg(long)]
    pub test_fraction: Option<f64>,
    #[arg(long)]
    pub min_class_size: Option<usize>,
    /// L2-normalize embeddings on ingest.
    #[arg(long)]
    pub normalize: bool,
    /// Master seed.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Comma-separated training sizes for learning curves.
    #[arg(long, value_delimiter = ',')]
    pub train_sizes: Option<Vec<usize>>,
    #[arg(long)]
    pub subsamples: Option<usize>,
    /// Comma-separated λ grid for sweeps.
    #[arg(long, value_delimiter = ',')]
    pub lambdas: Option<Vec<f64>>,
    /// Comma-separated projectors (`fisher`, `wpca:K`, `ep:K`).
    #[arg(long, value_delimiter = ',')]
    pub projectors: Option<Vec<String>>,
}

impl RunArgs {
    pub fn resolve(&self) -> Result<RunConfig> {
        let mut cfg = match &self.config {
            Some(path) => {
                let text = std::fs::read_to_string(path).map_err(|source| Error::Io { path: path.clone(), source })?;
                RunConfig::from_toml(&text)?
            }
            None => RunConfig::default(),
        };
        if !self.inputs.is_empty() {
            cfg.inputs = self.inputs.clone();
        }
        macro_rules! over {
            ($($field:ident),*) => { $( if let Some(v) = &self.$field { cfg.$field = v.clone(); } )* };
        }
        over!(out, lambda, order, permutations, n_splits, test_fraction, min_class_size, seed, train_sizes, subsamples, lambdas, projectors);
        if self.normalize {
            cfg.normalize = true;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

//! Experiment configuration and result records.
//!
//! Every run resolves its full configuration into an [`ExperimentConfig`]
//! and writes it next to the outputs; replaying that file reproduces the
//! run bit-identically.

use std::path::PathBuf;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use gwmds::gw::{GwConfig, InnerOt, MdsConfig, MdsInit};
use gwmds::ingest::{FillPolicy, Normalization};
use gwmds::multiview::{ScoreAggregation, SelectionRule, ViewMetric};

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum DatasetSpec {
    /// Synthetic manifold with the paper's two distorted views.
    Manifold {
        manifold: String,
        n: usize,
        noise: f64,
        seed: u64,
    },
    /// Precomputed relational matrices, one CSV per view.
    Views { paths: Vec<PathBuf> },
    /// Electricity Load Diagrams file sliced into daily views.
    Eld {
        path: PathBuf,
        dates: Vec<NaiveDate>,
        #[serde(default = "default_delimiter")]
        delimiter: char,
        #[serde(default = "default_decimal_mark")]
        decimal_mark: char,
        #[serde(default)]
        fill: FillPolicy,
        #[serde(default)]
        normalize: Normalization,
    },
}

fn default_delimiter() -> char {
    ';'
}

fn default_decimal_mark() -> char {
    ','
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MethodSpec {
    MeanGwmds,
    MultiGwmds,
    MultiIsomap,
    Mds,
}

impl MethodSpec {
    pub fn name(&self) -> &'static str {
        match self {
            MethodSpec::MeanGwmds => "mean-gwmds",
            MethodSpec::MultiGwmds => "multi-gwmds",
            MethodSpec::MultiIsomap => "multi-isomap",
            MethodSpec::Mds => "mds",
        }
    }
}

impl std::str::FromStr for MethodSpec {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "mean-gwmds" => Ok(MethodSpec::MeanGwmds),
            "multi-gwmds" => Ok(MethodSpec::MultiGwmds),
            "multi-isomap" => Ok(MethodSpec::MultiIsomap),
            "mds" => Ok(MethodSpec::Mds),
            other => Err(format!("unknown method {other:?}")),
        }
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub struct MetricSpec {
    pub metric: MetricKind,
    pub k: usize,
    pub bridge_components: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MetricKind {
    Euclidean,
    Geodesic,
}

impl MetricSpec {
    pub fn to_view_metric(self) -> ViewMetric {
        match self.metric {
            MetricKind::Euclidean => ViewMetric::Euclidean,
            MetricKind::Geodesic => ViewMetric::Geodesic {
                k: self.k,
                bridge: self.bridge_components,
            },
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SolverSpec {
    pub ot_solver: InnerOt,
    pub epsilon: Option<f64>,
    pub outer_max_iter: usize,
    pub outer_tol: f64,
    pub restarts: usize,
    pub learning_rate: Option<f64>,
    pub max_epochs: usize,
    pub epoch_tol: f64,
    pub grad_steps_per_epoch: usize,
    pub init: InitSpec,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InitSpec {
    Cmds,
    Gaussian,
}

impl Default for SolverSpec {
    fn default() -> Self {
        let gw = GwConfig::default();
        let mds = MdsConfig::new(2);
        Self {
            ot_solver: gw.inner_ot,
            epsilon: gw.epsilon,
            outer_max_iter: gw.outer_max_iter,
            outer_tol: gw.outer_tol,
            restarts: gw.n_restarts,
            learning_rate: mds.learning_rate,
            max_epochs: mds.max_epochs,
            epoch_tol: mds.epoch_tol,
            grad_steps_per_epoch: mds.grad_steps_per_epoch,
            init: InitSpec::Cmds,
        }
    }
}

impl SolverSpec {
    pub fn gw_config(&self, seed: u64) -> GwConfig {
        GwConfig {
            inner_ot: self.ot_solver,
            epsilon: self.epsilon,
            outer_max_iter: self.outer_max_iter,
            outer_tol: self.outer_tol,
            n_restarts: self.restarts,
            seed,
            ..GwConfig::default()
        }
    }

    pub fn mds_config(&self, dim: usize, seed: u64) -> MdsConfig {
        MdsConfig {
            embed_dim: dim,
            learning_rate: self.learning_rate,
            max_epochs: self.max_epochs,
            epoch_tol: self.epoch_tol,
            grad_steps_per_epoch: self.grad_steps_per_epoch,
            init: match self.init {
                InitSpec::Cmds => MdsInit::ClassicalMds,
                InitSpec::Gaussian => MdsInit::RandomGaussian,
            },
            seed,
        }
    }
}

/// Fully resolved embedding-run configuration.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub dataset: DatasetSpec,
    pub metric: MetricSpec,
    pub method: MethodSpec,
    pub dim: usize,
    pub seed: u64,
    pub solver: SolverSpec,
    /// View weights; `None` means uniform.
    pub lambda: Option<Vec<f64>>,
    pub selection: SelectionRule,
    pub aggregation: ScoreAggregation,
}

/// Per-run record mirroring one table row of the evaluation.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ResultRecord {
    pub method: String,
    pub per_view_correlations: Vec<f64>,
    pub mean_correlation: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub selected_view: Option<usize>,
    pub wall_time_s: f64,
    pub config: ExperimentConfig,
    /// Paths of the written artifacts, relative to the output directory.
    pub artifacts: Vec<String>,
}

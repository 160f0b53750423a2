//! Subcommand implementations.

pub mod embed;
pub mod eval;
pub mod generate;
pub mod reproduce;

use std::path::Path;

use gwmds::embedding::Embedding;
use gwmds::error::{Error, Result};
use gwmds::geometry::{classical_mds, generate_manifold, make_views, multi_isomap, ManifoldSample};
use gwmds::ingest::{daily_views, load_eld, DailyViewSpec};
use gwmds::multiview::{
    mean_gwmds, multi_gwmds, view_distance_matrices, SelectionOptions, ViewWeights,
};
use gwmds::ot::Coupling;
use gwmds::relational::{
    distance_correlation, mean_relational, MetricTag, MultiViewDataset, RelationalMatrix,
};

use crate::config::{DatasetSpec, ExperimentConfig, MethodSpec};

/// A loaded dataset plus whatever side information the source provides.
pub struct LoadedData {
    pub data: MultiViewDataset,
    /// Present for synthetic datasets; drives figure coloring.
    pub manifold: Option<ManifoldSample>,
}

pub fn load_dataset(spec: &DatasetSpec) -> Result<LoadedData> {
    match spec {
        DatasetSpec::Manifold {
            manifold,
            n,
            noise,
            seed,
        } => {
            let kind = manifold.parse()?;
            let sample = generate_manifold(kind, *n, *noise, *seed)?;
            let data = make_views(&sample);
            Ok(LoadedData {
                data,
                manifold: Some(sample),
            })
        }
        DatasetSpec::Views { paths } => {
            if paths.is_empty() {
                return Err(Error::InvalidConfig("no view files given".into()));
            }
            let mut views = Vec::with_capacity(paths.len());
            for p in paths {
                views.push(RelationalMatrix::from_csv_file(p, MetricTag::Precomputed)?);
            }
            Ok(LoadedData {
                data: MultiViewDataset::from_precomputed(views)?,
                manifold: None,
            })
        }
        DatasetSpec::Eld {
            path,
            dates,
            delimiter,
            decimal_mark,
            fill,
            normalize,
        } => {
            let series = load_eld(path, *delimiter as u8, *decimal_mark, *fill)?;
            let spec = DailyViewSpec::new(dates.clone())?;
            let (data, report) = daily_views(&series, &spec, *normalize)?;
            if !report.dropped_clients.is_empty() {
                eprintln!(
                    "note: dropped {} all-zero clients: {}",
                    report.dropped_clients.len(),
                    report.dropped_clients.join(", ")
                );
            }
            Ok(LoadedData {
                data,
                manifold: None,
            })
        }
    }
}

/// Everything a method run produces.
pub struct RunOutput {
    /// Final (selected) sample-aligned embedding.
    pub embedding: Embedding,
    /// Per-view distance matrices under the configured metric.
    pub matrices: Vec<RelationalMatrix>,
    pub per_view_correlations: Vec<f64>,
    pub mean_correlation: f64,
    /// Selection-strategy extras (empty for the other methods).
    pub aligned: Vec<Embedding>,
    pub couplings: Vec<Coupling>,
    pub scores: Vec<f64>,
    pub selected: Option<usize>,
    pub shared: Option<Embedding>,
}

pub fn run_method(cfg: &ExperimentConfig, data: &MultiViewDataset) -> Result<RunOutput> {
    let metric = cfg.metric.to_view_metric();
    let matrices = view_distance_matrices(data, metric)?;
    let mds = cfg.solver.mds_config(cfg.dim, cfg.seed);
    let gw = cfg.solver.gw_config(cfg.seed);
    let weights = match &cfg.lambda {
        Some(raw) => ViewWeights::normalized(raw.clone())?,
        None => ViewWeights::uniform(data.n_views()),
    };

    match cfg.method {
        MethodSpec::MeanGwmds => {
            let embedding = mean_gwmds(data, metric, &mds, &gw)?;
            let per_view = embedding
                .meta
                .view_correlations
                .clone()
                .expect("mean_gwmds records correlations");
            let mean = mean_of(&per_view);
            Ok(RunOutput {
                embedding,
                matrices,
                per_view_correlations: per_view,
                mean_correlation: mean,
                aligned: Vec::new(),
                couplings: Vec::new(),
                scores: Vec::new(),
                selected: None,
                shared: None,
            })
        }
        MethodSpec::MultiGwmds => {
            let opts = SelectionOptions {
                rule: cfg.selection,
                aggregation: cfg.aggregation,
            };
            let result = multi_gwmds(data, metric, &weights, &mds, &gw, opts)?;
            let embedding = result.aligned[result.selected].clone();
            let per_view = embedding
                .meta
                .view_correlations
                .clone()
                .expect("selected embedding is not degenerate");
            let mean = mean_of(&per_view);
            Ok(RunOutput {
                embedding,
                matrices,
                per_view_correlations: per_view,
                mean_correlation: mean,
                aligned: result.aligned,
                couplings: result.couplings,
                scores: result.scores,
                selected: Some(result.selected),
                shared: Some(result.shared),
            })
        }
        MethodSpec::MultiIsomap => {
            let embedding = multi_isomap(data, cfg.metric.k, cfg.dim)?;
            let per_view = correlations_against(&matrices, &embedding)?;
            let mean = mean_of(&per_view);
            Ok(RunOutput {
                embedding,
                matrices,
                per_view_correlations: per_view,
                mean_correlation: mean,
                aligned: Vec::new(),
                couplings: Vec::new(),
                scores: Vec::new(),
                selected: None,
                shared: None,
            })
        }
        MethodSpec::Mds => {
            let dbar = mean_relational(&matrices)?;
            let mut embedding = classical_mds(&dbar, cfg.dim)?;
            embedding.meta.method = "mds".into();
            let embedding = Embedding::new(
                embedding.coords().to_owned(),
                data.row_ids().to_vec(),
                embedding.meta,
            )?;
            let per_view = correlations_against(&matrices, &embedding)?;
            let mean = mean_of(&per_view);
            Ok(RunOutput {
                embedding,
                matrices,
                per_view_correlations: per_view,
                mean_correlation: mean,
                aligned: Vec::new(),
                couplings: Vec::new(),
                scores: Vec::new(),
                selected: None,
                shared: None,
            })
        }
    }
}

pub fn correlations_against(
    matrices: &[RelationalMatrix],
    embedding: &Embedding,
) -> Result<Vec<f64>> {
    let demb = embedding.distances();
    matrices
        .iter()
        .map(|d| distance_correlation(d, &demb))
        .collect()
}

pub fn mean_of(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

pub fn ensure_dir(path: &Path) -> Result<()> {
    std::fs::create_dir_all(path)?;
    Ok(())
}

/// Color scalars for figures: the first intrinsic coordinate when known,
/// otherwise the row index.
pub fn color_scalars(loaded: &LoadedData) -> Vec<f64> {
    match &loaded.manifold {
        Some(m) => (0..m.intrinsic.nrows())
            .map(|i| m.intrinsic[[i, 0]])
            .collect(),
        None => (0..loaded.data.n_samples()).map(|i| i as f64).collect(),
    }
}

//! Geometry-aware multi-view dimensionality reduction via Gromov-Wasserstein
//! optimal transport.
//!
//! The crate fits low-dimensional embeddings whose own distance matrix is
//! GW-consistent with one or more relational (pairwise-dissimilarity)
//! structures describing the same samples:
//!
//! - [`relational`] -- dissimilarity matrices, multi-view datasets, and the
//!   correlation score used for evaluation and selection.
//! - [`ot`] -- exact and entropic discrete optimal transport; the linear
//!   inner step of the GW solver.
//! - [`gw`] -- the squared-loss Gromov-Wasserstein discrepancy
//!   (conditional gradient) and GW-based multidimensional scaling.
//! - [`multiview`] -- the Mean-GWMDS (distance averaging) and Multi-GWMDS
//!   (selection-based) strategies.
//! - [`geometry`] -- synthetic manifolds, two-view construction, kNN
//!   geodesics, classical MDS, and the Multi-Isomap baseline.
//! - [`ingest`] -- the Electricity Load Diagrams daily-view pipeline.
//! - [`plot`] -- standalone SVG scatter rendering.
//!
//! Data-parallel loops run on rayon when the default `parallel` feature is
//! enabled and fall back to sequential execution without it; results are
//! bit-identical either way (see [`par`]).

pub mod embedding;
pub mod error;
pub mod geometry;
pub mod gw;
pub mod ingest;
pub mod multiview;
pub mod ot;
pub mod par;
pub mod plot;
pub mod relational;

pub use embedding::{Embedding, EmbeddingMeta};
pub use error::{Error, Result};
pub use geometry::{
    classical_mds, generate_manifold, geodesic_distances, knn_graph, make_views, multi_isomap,
    ManifoldKind, ManifoldSample, NeighborGraph,
};
pub use gw::{
    gw_distance, gw_objective, gwmds_embed, GwConfig, GwLoss, GwResult, InnerOt, MdsConfig,
    MdsInit,
};
pub use ingest::{daily_views, load_eld, DailyViewSpec, FillPolicy, LoadSeries, Normalization};
pub use multiview::{
    barycentric_align, mean_gwmds, multi_gwmds, multi_gwmds_optimize, select_representative,
    MultiGwResult, ScoreAggregation, SelectionOptions, SelectionRule, ViewMetric, ViewWeights,
};
pub use ot::{
    solve_entropic_ot, solve_exact_ot, uniform_weights, wasserstein_p, CostMatrix, Coupling,
};
pub use relational::{
    distance_correlation, mean_relational, pairwise_euclidean, weighted_mean_relational,
    MetricTag, MultiViewDataset, RelationalMatrix, SampleMatrix, View,
};

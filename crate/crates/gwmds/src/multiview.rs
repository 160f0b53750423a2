//! Multi-view embedding strategies.
//!
//! Mean-GWMDS averages the per-view relational matrices and runs a single
//! GW-MDS fit. Multi-GWMDS jointly fits one shared embedding with one
//! coupling per view, aligns the embedding to each view through the
//! barycentric map of its coupling, and selects the alignment whose distance
//! matrix agrees best with the views on average.

use serde::{Deserialize, Serialize};

use crate::embedding::{Embedding, EmbeddingMeta};
use crate::error::{Error, Result};
use crate::geometry::{geodesic_distances, knn_graph};
use crate::gw::{gwmds_embed, optimize_shared_embedding, GwConfig, MdsConfig};
use crate::ot::Coupling;
use crate::par;
use crate::relational::{
    distance_correlation, mean_relational, pairwise_euclidean, MultiViewDataset,
    RelationalMatrix, View,
};

/// How per-view relational structures are derived from raw samples.
/// Precomputed views pass through unchanged.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ViewMetric {
    Euclidean,
    Geodesic { k: usize, bridge: bool },
}

/// Nonnegative view weights on the simplex.
#[derive(Debug, Clone, PartialEq)]
pub struct ViewWeights(Vec<f64>);

impl ViewWeights {
    /// Validate simplex membership within 1e-9.
    pub fn new(weights: Vec<f64>) -> Result<Self> {
        if weights.is_empty() {
            return Err(Error::InvalidConfig("weights must be non-empty".into()));
        }
        if weights.iter().any(|&w| w < 0.0) {
            return Err(Error::InvalidConfig("weights must be nonnegative".into()));
        }
        let sum: f64 = weights.iter().sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidConfig(format!(
                "weights must sum to 1 (sum = {sum})"
            )));
        }
        Ok(Self(weights))
    }

    /// Rescale arbitrary nonnegative weights onto the simplex.
    pub fn normalized(raw: Vec<f64>) -> Result<Self> {
        if raw.is_empty() {
            return Err(Error::InvalidConfig("weights must be non-empty".into()));
        }
        if raw.iter().any(|&w| w < 0.0) {
            return Err(Error::InvalidConfig("weights must be nonnegative".into()));
        }
        let sum: f64 = raw.iter().sum();
        if sum <= 0.0 {
            return Err(Error::InvalidConfig("weights must have positive mass".into()));
        }
        Ok(Self(raw.into_iter().map(|w| w / sum).collect()))
    }

    pub fn uniform(v: usize) -> Self {
        Self(vec![1.0 / v as f64; v])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }
}

/// Direction of the consistency-score selection.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SelectionRule {
    /// Pick the alignment with the best (largest) aggregated correlation.
    #[default]
    MaxCorr,
    /// Literal reading of the selection formula: smallest aggregated score.
    MinRho,
}

/// How per-view correlations are aggregated into one score per alignment.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScoreAggregation {
    #[default]
    Mean,
    Median,
    /// Worst-case correlation: robust max-min selection.
    MaxMin,
}

/// Selection configuration for [`select_representative`].
#[derive(Debug, Clone, Copy, Default, Serialize, Deserialize)]
pub struct SelectionOptions {
    pub rule: SelectionRule,
    pub aggregation: ScoreAggregation,
}

/// Outcome of [`select_representative`].
#[derive(Debug, Clone)]
pub struct Selection {
    pub selected: usize,
    /// Aggregated score per candidate; degenerate candidates hold -inf.
    pub scores: Vec<f64>,
    pub degenerate: Vec<bool>,
    /// `per_view[v][u]` = correlation of candidate v's distances with view u.
    pub per_view: Vec<Vec<f64>>,
}

/// Full output of the selection-based strategy.
#[derive(Debug, Clone)]
pub struct MultiGwResult {
    /// Shared embedding before any per-view alignment.
    pub shared: Embedding,
    pub couplings: Vec<Coupling>,
    pub aligned: Vec<Embedding>,
    pub scores: Vec<f64>,
    pub degenerate: Vec<bool>,
    pub selected: usize,
    /// Weighted objective at initialization and after each accepted epoch.
    pub objective_trace: Vec<f64>,
}

impl MultiGwResult {
    pub fn selected_embedding(&self) -> &Embedding {
        &self.aligned[self.selected]
    }
}

/// Resolve each view to its relational matrix under the configured metric.
pub fn view_distance_matrices(
    data: &MultiViewDataset,
    metric: ViewMetric,
) -> Result<Vec<RelationalMatrix>> {
    let outputs: Vec<Result<RelationalMatrix>> =
        par::map_indices(data.n_views(), |v| match &data.views()[v] {
            View::Precomputed(d) => Ok(d.clone()),
            View::Samples(s) => match metric {
                ViewMetric::Euclidean => Ok(pairwise_euclidean(s)),
                ViewMetric::Geodesic { k, bridge } => {
                    let g = knn_graph(s, k)?;
                    if bridge {
                        let (g, _) = crate::geometry::bridge_components(&g, s);
                        geodesic_distances(&g)
                    } else {
                        geodesic_distances(&g)
                    }
                }
            },
        });
    let mut out = Vec::with_capacity(outputs.len());
    for (v, m) in outputs.into_iter().enumerate() {
        out.push(m.map_err(|e| e.in_view(v))?);
    }
    Ok(out)
}

/// Distance-averaging strategy: mean of the per-view matrices, one GW-MDS
/// fit. Per-view correlations of the result are recorded in the metadata.
pub fn mean_gwmds(
    data: &MultiViewDataset,
    metric: ViewMetric,
    mds: &MdsConfig,
    gw: &GwConfig,
) -> Result<Embedding> {
    let matrices = view_distance_matrices(data, metric)?;
    let dbar = mean_relational(&matrices)?;
    let emb = gwmds_embed(&dbar, mds, gw)?;

    let demb = emb.distances();
    let correlations = matrices
        .iter()
        .map(|d| distance_correlation(d, &demb))
        .collect::<Result<Vec<_>>>()?;
    let mut meta = emb.meta.clone();
    meta.method = "mean-gwmds".into();
    meta.view_correlations = Some(correlations);
    Embedding::new(emb.coords().to_owned(), data.row_ids().to_vec(), meta)
}

/// Joint minimization of the weighted multi-coupling objective: returns the
/// shared embedding (pre-alignment) and one coupling per view. The final
/// objective is stored in the embedding metadata, the accepted-epoch trace
/// is returned alongside.
pub fn multi_gwmds_optimize(
    data: &MultiViewDataset,
    metric: ViewMetric,
    weights: &ViewWeights,
    mds: &MdsConfig,
    gw: &GwConfig,
) -> Result<(Embedding, Vec<Coupling>, Vec<f64>)> {
    if weights.len() != data.n_views() {
        return Err(Error::ShapeMismatch {
            context: "view weights".into(),
            expected: format!("{}", data.n_views()),
            got: format!("{}", weights.len()),
        });
    }
    let matrices = view_distance_matrices(data, metric)?;
    let refs: Vec<&RelationalMatrix> = matrices.iter().collect();
    let optimum = optimize_shared_embedding(&refs, weights.as_slice(), mds, gw)?;
    let ids = (0..data.n_samples()).map(|i| i.to_string()).collect();
    let shared = Embedding::new(
        optimum.y,
        ids,
        EmbeddingMeta {
            method: "multi-gwmds-shared".into(),
            seed: mds.seed,
            gw_sq: Some(optimum.objective.max(0.0)),
            iterations: optimum.epochs,
            converged: optimum.converged,
            ..Default::default()
        },
    )?;
    Ok((shared, optimum.couplings, optimum.trace))
}

/// Barycentric alignment: row i of the output is the coupling-weighted
/// average of the embedding rows matched with sample i, converting the soft
/// correspondence into explicit per-sample coordinates.
pub fn barycentric_align(y: &Embedding, pi: &Coupling) -> Result<Embedding> {
    let coords = pi.barycentric_map(y.coords())?;
    let ids = (0..coords.nrows()).map(|i| i.to_string()).collect();
    let mut meta = y.meta.clone();
    meta.method = format!("{}-aligned", y.meta.method);
    Embedding::new(coords, ids, meta)
}

/// Score every candidate embedding by its aggregated distance correlation
/// with all views and pick the representative.
///
/// Candidates whose distance matrix is degenerate (zero variance) score
/// negative infinity and are excluded from selection.
pub fn select_representative(
    view_matrices: &[RelationalMatrix],
    aligned: &[Embedding],
    opts: SelectionOptions,
) -> Result<Selection> {
    if view_matrices.is_empty() || aligned.is_empty() {
        return Err(Error::InvalidConfig("selection needs candidates".into()));
    }
    let mut per_view = Vec::with_capacity(aligned.len());
    let mut scores = Vec::with_capacity(aligned.len());
    let mut degenerate = vec![false; aligned.len()];
    for (v, emb) in aligned.iter().enumerate() {
        let demb = emb.distances();
        let mut correlations = Vec::with_capacity(view_matrices.len());
        let mut is_degenerate = false;
        for d in view_matrices {
            match distance_correlation(d, &demb) {
                Ok(c) => correlations.push(c),
                Err(Error::Degenerate(_)) => {
                    is_degenerate = true;
                    break;
                }
                Err(e) => return Err(e),
            }
        }
        if is_degenerate {
            degenerate[v] = true;
            scores.push(f64::NEG_INFINITY);
            per_view.push(Vec::new());
        } else {
            scores.push(aggregate(&correlations, opts.aggregation));
            per_view.push(correlations);
        }
    }
    let selected = select_index(&scores, &degenerate, opts.rule)?;
    Ok(Selection {
        selected,
        scores,
        degenerate,
        per_view,
    })
}

fn aggregate(xs: &[f64], how: ScoreAggregation) -> f64 {
    match how {
        ScoreAggregation::Mean => xs.iter().sum::<f64>() / xs.len() as f64,
        ScoreAggregation::Median => {
            let mut v = xs.to_vec();
            v.sort_by(f64::total_cmp);
            let k = v.len();
            if k % 2 == 1 {
                v[k / 2]
            } else {
                0.5 * (v[k / 2 - 1] + v[k / 2])
            }
        }
        ScoreAggregation::MaxMin => xs.iter().copied().fold(f64::INFINITY, f64::min),
    }
}

/// Argmax (or argmin under [`SelectionRule::MinRho`]) over non-degenerate
/// candidates; ties break toward the lowest index.
pub(crate) fn select_index(
    scores: &[f64],
    degenerate: &[bool],
    rule: SelectionRule,
) -> Result<usize> {
    let mut best: Option<(usize, f64)> = None;
    for (v, &s) in scores.iter().enumerate() {
        if degenerate[v] {
            continue;
        }
        let better = match (&best, rule) {
            (None, _) => true,
            (Some((_, b)), SelectionRule::MaxCorr) => s > *b,
            (Some((_, b)), SelectionRule::MinRho) => s < *b,
        };
        if better {
            best = Some((v, s));
        }
    }
    best.map(|(v, _)| v).ok_or_else(|| {
        Error::Degenerate("every candidate embedding is degenerate".into())
    })
}

/// Selection-based strategy: joint optimization, per-view barycentric
/// alignment, consistency-based selection.
pub fn multi_gwmds(
    data: &MultiViewDataset,
    metric: ViewMetric,
    weights: &ViewWeights,
    mds: &MdsConfig,
    gw: &GwConfig,
    opts: SelectionOptions,
) -> Result<MultiGwResult> {
    let matrices = view_distance_matrices(data, metric)?;
    let (shared, couplings, trace) = multi_gwmds_optimize(data, metric, weights, mds, gw)?;

    let mut aligned = Vec::with_capacity(couplings.len());
    for (v, pi) in couplings.iter().enumerate() {
        let mut emb = barycentric_align(&shared, pi).map_err(|e| e.in_view(v))?;
        emb.meta.method = "multi-gwmds".into();
        emb.meta.view_of_origin = Some(v);
        let emb = Embedding::new(
            emb.coords().to_owned(),
            data.row_ids().to_vec(),
            emb.meta,
        )?;
        aligned.push(emb);
    }

    let selection = select_representative(&matrices, &aligned, opts)?;
    for (v, emb) in aligned.iter_mut().enumerate() {
        if !selection.degenerate[v] {
            emb.meta.view_correlations = Some(selection.per_view[v].clone());
        }
    }

    Ok(MultiGwResult {
        shared,
        couplings,
        aligned,
        scores: selection.scores,
        degenerate: selection.degenerate,
        selected: selection.selected,
        objective_trace: trace,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{generate_manifold, make_views, ManifoldKind};
    use crate::ot::uniform_weights;
    use crate::relational::{MetricTag, SampleMatrix};
    use approx::assert_abs_diff_eq;
    use ndarray::{Array1, Array2};
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    /// Two distorted views of a random 3-D point set (works below the
    /// manifold generator's n >= 10 floor).
    fn toy_dataset(n: usize, seed: u64) -> MultiViewDataset {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let pts = Array2::from_shape_fn((n, 3), |_| rng.random_range(-1.0..1.0));
        let view1 = pts.dot(&crate::geometry::view_rotation().t());
        let view2 = pts.dot(&crate::geometry::view_deformation().t());
        MultiViewDataset::from_samples(vec![
            SampleMatrix::with_default_ids(view1).unwrap(),
            SampleMatrix::with_default_ids(view2).unwrap(),
        ])
        .unwrap()
    }

    fn random_coupling(n: usize, rng: &mut ChaCha8Rng) -> Coupling {
        let a = uniform_weights(n);
        let mut plan = Array2::from_shape_fn((n, n), |_| rng.random_range(0.2..1.0));
        for _ in 0..400 {
            for i in 0..n {
                let s: f64 = plan.row(i).sum();
                for j in 0..n {
                    plan[[i, j]] *= a[i] / s;
                }
            }
            for j in 0..n {
                let s: f64 = plan.column(j).sum();
                for i in 0..n {
                    plan[[i, j]] *= a[j] / s;
                }
            }
        }
        Coupling::new(plan, a.clone(), a).unwrap()
    }

    #[test]
    fn weights_validate_simplex() {
        assert!(ViewWeights::new(vec![0.5, 0.5]).is_ok());
        assert!(ViewWeights::new(vec![0.5, 0.6]).is_err());
        assert!(ViewWeights::new(vec![-0.1, 1.1]).is_err());
        let w = ViewWeights::normalized(vec![2.0, 6.0]).unwrap();
        assert_abs_diff_eq!(w.as_slice()[0], 0.25, epsilon = 1e-15);
    }

    #[test]
    fn mean_gwmds_single_view_equals_gwmds() {
        let m = generate_manifold(ManifoldKind::SCurve, 20, 0.0, 1).unwrap();
        let data = MultiViewDataset::from_samples(vec![m.points.clone()]).unwrap();
        let mds = MdsConfig::new(2);
        let gw = GwConfig::default();
        let a = mean_gwmds(&data, ViewMetric::Euclidean, &mds, &gw).unwrap();
        let b = gwmds_embed(&pairwise_euclidean(&m.points), &mds, &gw).unwrap();
        assert_eq!(a.coords(), b.coords());
    }

    #[test]
    fn mean_gwmds_identical_views_idempotent() {
        let m = generate_manifold(ManifoldKind::Torus, 20, 0.0, 2).unwrap();
        let one = MultiViewDataset::from_samples(vec![m.points.clone()]).unwrap();
        let two =
            MultiViewDataset::from_samples(vec![m.points.clone(), m.points.clone()]).unwrap();
        let mds = MdsConfig::new(2);
        let gw = GwConfig::default();
        let a = mean_gwmds(&one, ViewMetric::Euclidean, &mds, &gw).unwrap();
        let b = mean_gwmds(&two, ViewMetric::Euclidean, &mds, &gw).unwrap();
        assert_eq!(a.coords(), b.coords());
    }

    #[test]
    fn multi_gwmds_single_view_matches_gwmds() {
        let m = generate_manifold(ManifoldKind::SCurve, 18, 0.0, 3).unwrap();
        let data = MultiViewDataset::from_samples(vec![m.points.clone()]).unwrap();
        let mds = MdsConfig::new(2);
        let gw = GwConfig::default();
        let result = multi_gwmds(
            &data,
            ViewMetric::Euclidean,
            &ViewWeights::uniform(1),
            &mds,
            &gw,
            SelectionOptions::default(),
        )
        .unwrap();
        assert_eq!(result.selected, 0);
        let single = gwmds_embed(&pairwise_euclidean(&m.points), &mds, &gw).unwrap();
        assert_eq!(result.aligned[0].coords(), single.coords());
        assert_abs_diff_eq!(
            result.shared.meta.gw_sq.unwrap(),
            single.meta.gw_sq.unwrap(),
            epsilon = 1e-15
        );
    }

    #[test]
    fn identical_views_give_equal_objective_trace() {
        let m = generate_manifold(ManifoldKind::SCurve, 16, 0.0, 4).unwrap();
        let one = MultiViewDataset::from_samples(vec![m.points.clone()]).unwrap();
        let two =
            MultiViewDataset::from_samples(vec![m.points.clone(), m.points.clone()]).unwrap();
        let mds = MdsConfig::new(2);
        let gw = GwConfig::default();
        let (_, _, trace1) = multi_gwmds_optimize(
            &one,
            ViewMetric::Euclidean,
            &ViewWeights::uniform(1),
            &mds,
            &gw,
        )
        .unwrap();
        let (_, _, trace2) = multi_gwmds_optimize(
            &two,
            ViewMetric::Euclidean,
            &ViewWeights::uniform(2),
            &mds,
            &gw,
        )
        .unwrap();
        assert_eq!(trace1.len(), trace2.len());
        for (a, b) in trace1.iter().zip(&trace2) {
            assert_abs_diff_eq!(a, b, epsilon = 1e-12);
        }
    }

    #[test]
    fn optimize_objective_matches_quadruple_loop_oracle() {
        let data = toy_dataset(8, 5);
        let mds = MdsConfig::new(2);
        let gw = GwConfig::default();
        let weights = ViewWeights::uniform(2);
        let (shared, couplings, _) =
            multi_gwmds_optimize(&data, ViewMetric::Euclidean, &weights, &mds, &gw).unwrap();
        let matrices = view_distance_matrices(&data, ViewMetric::Euclidean).unwrap();

        let y = shared.coords().to_owned();
        let dy = crate::gw::coords_distances(&y);
        let mut oracle = 0.0;
        for (v, dx) in matrices.iter().enumerate() {
            let pi = couplings[v].plan();
            let mut acc = 0.0;
            for i in 0..8 {
                for k in 0..8 {
                    for j in 0..8 {
                        for l in 0..8 {
                            let diff = dx.values()[[i, k]] - dy[[j, l]];
                            acc += diff * diff * pi[[i, j]] * pi[[k, l]];
                        }
                    }
                }
            }
            oracle += 0.5 * acc;
        }
        assert_abs_diff_eq!(shared.meta.gw_sq.unwrap(), oracle, epsilon = 1e-8);
    }

    #[test]
    fn objective_never_exceeds_initialization() {
        let data = toy_dataset(15, 6);
        let (_, _, trace) = multi_gwmds_optimize(
            &data,
            ViewMetric::Euclidean,
            &ViewWeights::uniform(2),
            &MdsConfig::new(2),
            &GwConfig::default(),
        )
        .unwrap();
        let last = *trace.last().unwrap();
        assert!(last <= trace[0] * (1.0 + 1e-12));
    }

    #[test]
    fn barycentric_identity_returns_input() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let y = Array2::from_shape_fn((6, 2), |_| rng.random_range(-1.0..1.0));
        let emb = Embedding::new(
            y.clone(),
            (0..6).map(|i| i.to_string()).collect(),
            EmbeddingMeta::default(),
        )
        .unwrap();
        let aligned = barycentric_align(&emb, &Coupling::identity(6)).unwrap();
        assert_eq!(aligned.coords(), emb.coords());
    }

    #[test]
    fn barycentric_permutation_permutes_rows() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let n = 5;
        let y = Array2::from_shape_fn((n, 2), |_| rng.random_range(-1.0..1.0));
        let emb = Embedding::new(
            y.clone(),
            (0..n).map(|i| i.to_string()).collect(),
            EmbeddingMeta::default(),
        )
        .unwrap();
        let perm = [2usize, 0, 4, 1, 3];
        let mut plan = Array2::zeros((n, n));
        for (i, &j) in perm.iter().enumerate() {
            plan[[i, j]] = 1.0 / n as f64;
        }
        let pi = Coupling::new(plan, uniform_weights(n), uniform_weights(n)).unwrap();
        let aligned = barycentric_align(&emb, &pi).unwrap();
        // Sample i is matched with embedding row perm[i] and receives it.
        for (i, &j) in perm.iter().enumerate() {
            for d in 0..2 {
                assert_abs_diff_eq!(aligned.coords()[[i, d]], y[[j, d]], epsilon = 1e-15);
            }
        }
    }

    #[test]
    fn barycentric_matches_loop_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let n = 5;
        let y = Array2::from_shape_fn((n, 2), |_| rng.random_range(-1.0..1.0));
        let pi = random_coupling(n, &mut rng);
        let emb = Embedding::new(
            y.clone(),
            (0..n).map(|i| i.to_string()).collect(),
            EmbeddingMeta::default(),
        )
        .unwrap();
        let aligned = barycentric_align(&emb, &pi).unwrap();
        for i in 0..n {
            let mass: f64 = (0..n).map(|j| pi.plan()[[i, j]]).sum();
            for d in 0..2 {
                let want: f64 = (0..n).map(|j| pi.plan()[[i, j]] / mass * y[[j, d]]).sum();
                assert_abs_diff_eq!(aligned.coords()[[i, d]], want, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn barycentric_rows_stay_in_convex_hull() {
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let n = 7;
        let y = Array2::from_shape_fn((n, 2), |_| rng.random_range(-2.0..2.0));
        let emb = Embedding::new(
            y.clone(),
            (0..n).map(|i| i.to_string()).collect(),
            EmbeddingMeta::default(),
        )
        .unwrap();
        let pi = random_coupling(n, &mut rng);
        let aligned = barycentric_align(&emb, &pi).unwrap();
        // Support-function check: along sampled directions no output row may
        // stick out beyond the input hull.
        for _ in 0..25 {
            let angle: f64 = rng.random_range(0.0..std::f64::consts::TAU);
            let (ux, uy) = (angle.cos(), angle.sin());
            let hull_max = (0..n)
                .map(|i| ux * y[[i, 0]] + uy * y[[i, 1]])
                .fold(f64::NEG_INFINITY, f64::max);
            for k in 0..n {
                let s = ux * aligned.coords()[[k, 0]] + uy * aligned.coords()[[k, 1]];
                assert!(s <= hull_max + 1e-9, "row {k} escapes the hull");
            }
        }
    }

    #[test]
    fn barycentric_massless_sample_is_an_error() {
        let mut plan = Array2::zeros((3, 3));
        plan[[0, 0]] = 0.5;
        plan[[0, 1]] = 0.1;
        plan[[2, 2]] = 0.4;
        let pi = Coupling::new_unchecked(
            plan,
            Array1::from_vec(vec![0.6, 0.0, 0.4]),
            uniform_weights(3),
        );
        let emb = Embedding::new(
            Array2::zeros((3, 2)),
            (0..3).map(|i| i.to_string()).collect(),
            EmbeddingMeta::default(),
        )
        .unwrap();
        match barycentric_align(&emb, &pi) {
            Err(Error::NoAlignmentMass { sample }) => assert_eq!(sample, 1),
            other => panic!("expected missing alignment mass, got {other:?}"),
        }
    }

    #[test]
    fn select_single_candidate_unconditionally() {
        let m = generate_manifold(ManifoldKind::SCurve, 12, 0.0, 11).unwrap();
        let d = pairwise_euclidean(&m.points);
        let emb = crate::geometry::classical_mds(&d, 2).unwrap();
        let sel =
            select_representative(&[d], &[emb], SelectionOptions::default()).unwrap();
        assert_eq!(sel.selected, 0);
        assert_eq!(sel.scores.len(), 1);
    }

    #[test]
    fn select_faithful_over_random() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let m = generate_manifold(ManifoldKind::SCurve, 15, 0.0, 13).unwrap();
        let d = pairwise_euclidean(&m.points);
        let faithful = crate::geometry::classical_mds(&d, 2).unwrap();
        let noise = Array2::from_shape_fn((15, 2), |_| rng.random_range(-1.0..1.0));
        let random = Embedding::new(
            noise,
            (0..15).map(|i| i.to_string()).collect(),
            EmbeddingMeta::default(),
        )
        .unwrap();
        let sel = select_representative(
            &[d.clone(), d],
            &[random, faithful],
            SelectionOptions::default(),
        )
        .unwrap();
        assert_eq!(sel.selected, 1);
    }

    #[test]
    fn degenerate_candidate_scores_neg_infinity() {
        let m = generate_manifold(ManifoldKind::SCurve, 12, 0.0, 14).unwrap();
        let d = pairwise_euclidean(&m.points);
        let good = crate::geometry::classical_mds(&d, 2).unwrap();
        let collapsed = Embedding::new(
            Array2::zeros((12, 2)),
            (0..12).map(|i| i.to_string()).collect(),
            EmbeddingMeta::default(),
        )
        .unwrap();
        let sel = select_representative(
            &[d],
            &[collapsed, good],
            SelectionOptions::default(),
        )
        .unwrap();
        assert_eq!(sel.selected, 1);
        assert!(sel.degenerate[0]);
        assert_eq!(sel.scores[0], f64::NEG_INFINITY);
    }

    #[test]
    fn argmax_invariant_under_increasing_transform() {
        let scores = vec![0.3, 0.9, 0.1, 0.7];
        let degenerate = vec![false; 4];
        let base = select_index(&scores, &degenerate, SelectionRule::MaxCorr).unwrap();
        let transformed: Vec<f64> = scores.iter().map(|s| (3.0 * s).exp()).collect();
        let got = select_index(&transformed, &degenerate, SelectionRule::MaxCorr).unwrap();
        assert_eq!(base, got);
    }

    #[test]
    fn min_rho_rule_flips_selection() {
        let scores = vec![0.3, 0.9, 0.1];
        let degenerate = vec![false; 3];
        assert_eq!(
            select_index(&scores, &degenerate, SelectionRule::MaxCorr).unwrap(),
            1
        );
        assert_eq!(
            select_index(&scores, &degenerate, SelectionRule::MinRho).unwrap(),
            2
        );
    }

    #[test]
    fn identical_views_align_identically() {
        let m = generate_manifold(ManifoldKind::Torus, 14, 0.0, 15).unwrap();
        let data =
            MultiViewDataset::from_samples(vec![m.points.clone(), m.points.clone()]).unwrap();
        let result = multi_gwmds(
            &data,
            ViewMetric::Euclidean,
            &ViewWeights::uniform(2),
            &MdsConfig::new(2),
            &GwConfig::default(),
            SelectionOptions::default(),
        )
        .unwrap();
        assert_eq!(result.selected, 0);
        for (a, b) in result.aligned[0]
            .coords()
            .iter()
            .zip(result.aligned[1].coords().iter())
        {
            assert_abs_diff_eq!(a, b, epsilon = 1e-6);
        }
        assert_abs_diff_eq!(result.scores[0], result.scores[1], epsilon = 1e-9);
    }

    #[test]
    fn weight_rescaling_by_powers_of_two_is_bit_identical() {
        let data = toy_dataset(12, 16);
        let mds = MdsConfig::new(2);
        let gw = GwConfig::default();
        let w1 = ViewWeights::normalized(vec![0.3, 0.7]).unwrap();
        let w2 = ViewWeights::normalized(vec![0.6, 1.4]).unwrap();
        assert_eq!(w1.as_slice(), w2.as_slice());
        let (a, _, ta) =
            multi_gwmds_optimize(&data, ViewMetric::Euclidean, &w1, &mds, &gw).unwrap();
        let (b, _, tb) =
            multi_gwmds_optimize(&data, ViewMetric::Euclidean, &w2, &mds, &gw).unwrap();
        assert_eq!(a.coords(), b.coords());
        assert_eq!(ta, tb);
    }

    #[test]
    fn make_views_dataset_runs_end_to_end() {
        let x = SampleMatrix::with_default_ids(Array2::from_shape_fn((12, 3), |(i, j)| {
            (i as f64 * 0.7 + j as f64 * 1.3).sin()
        }))
        .unwrap();
        let d = pairwise_euclidean(&x);
        let data = MultiViewDataset::from_precomputed(vec![d.clone(), d]).unwrap();
        let result = multi_gwmds(
            &data,
            ViewMetric::Euclidean,
            &ViewWeights::uniform(2),
            &MdsConfig::new(2),
            &GwConfig::default(),
            SelectionOptions::default(),
        )
        .unwrap();
        assert_eq!(result.aligned.len(), 2);
        assert_eq!(result.couplings.len(), 2);
        assert_eq!(result.scores.len(), 2);
    }
}

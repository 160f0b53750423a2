//! Synthetic manifolds, their distorted views, geodesic distance graphs and
//! the classical-MDS / Multi-Isomap baselines.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::str::FromStr;

use nalgebra::DMatrix;
use ndarray::{Array2, ArrayView2};
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::embedding::{Embedding, EmbeddingMeta};
use crate::error::{Error, Result};
use crate::par;
use crate::relational::{
    mean_relational, MetricTag, MultiViewDataset, RelationalMatrix, SampleMatrix, View,
};

/// Supported synthetic manifolds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ManifoldKind {
    SCurve,
    SwissRoll,
    Mobius,
    Torus,
}

impl ManifoldKind {
    pub const ALL: [ManifoldKind; 4] = [
        ManifoldKind::SCurve,
        ManifoldKind::SwissRoll,
        ManifoldKind::Mobius,
        ManifoldKind::Torus,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            ManifoldKind::SCurve => "s-curve",
            ManifoldKind::SwissRoll => "swiss-roll",
            ManifoldKind::Mobius => "mobius",
            ManifoldKind::Torus => "torus",
        }
    }
}

impl std::fmt::Display for ManifoldKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ManifoldKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "s-curve" | "scurve" | "s_curve" => Ok(ManifoldKind::SCurve),
            "swiss-roll" | "swissroll" | "swiss_roll" => Ok(ManifoldKind::SwissRoll),
            "mobius" => Ok(ManifoldKind::Mobius),
            "torus" => Ok(ManifoldKind::Torus),
            other => Err(Error::UnknownManifold(other.to_string())),
        }
    }
}

/// Sampled manifold: ambient 3-D points plus the generating parameters.
#[derive(Debug, Clone)]
pub struct ManifoldSample {
    pub points: SampleMatrix,
    /// Per-point generating parameters, aligned with `points` rows.
    pub intrinsic: Array2<f64>,
    pub kind: ManifoldKind,
}

/// Sample `n` points from a standard manifold parameterization.
///
/// Parameter ranges are frozen for reproducibility:
/// - s-curve: x = sin t, y = 2u, z = sign(t)(cos t - 1); t in [-3pi/2, 3pi/2], u in [0, 1]
/// - swiss roll: (t cos t, h, t sin t); t in [3pi/2, 9pi/2], h in [0, 21]
/// - mobius: half-twist strip of radius 1; theta in [0, 2pi), w in [-1, 1]
/// - torus: R = 2, r = 1; theta, phi in [0, 2pi)
///
/// `noise` adds isotropic Gaussian jitter to the ambient coordinates only.
pub fn generate_manifold(
    kind: ManifoldKind,
    n: usize,
    noise: f64,
    seed: u64,
) -> Result<ManifoldSample> {
    if n < 10 {
        return Err(Error::InvalidConfig(format!(
            "manifold sampling needs n >= 10, got {n}"
        )));
    }
    if noise < 0.0 {
        return Err(Error::InvalidConfig(format!(
            "noise must be nonnegative, got {noise}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut points = Array2::zeros((n, 3));
    let mut intrinsic = Array2::zeros((n, 2));
    for i in 0..n {
        let u1: f64 = rng.random();
        let u2: f64 = rng.random();
        let (p, q) = match kind {
            ManifoldKind::SCurve => {
                let t = 1.5 * std::f64::consts::PI * (2.0 * u1 - 1.0);
                let x = t.sin();
                let y = 2.0 * u2;
                let z = t.signum() * (t.cos() - 1.0);
                ([x, y, z], [t, u2])
            }
            ManifoldKind::SwissRoll => {
                let t = 1.5 * std::f64::consts::PI * (1.0 + 2.0 * u1);
                let h = 21.0 * u2;
                ([t * t.cos(), h, t * t.sin()], [t, h])
            }
            ManifoldKind::Mobius => {
                let theta = 2.0 * std::f64::consts::PI * u1;
                let w = 2.0 * u2 - 1.0;
                let rad = 1.0 + 0.5 * w * (0.5 * theta).cos();
                let x = rad * theta.cos();
                let y = rad * theta.sin();
                let z = 0.5 * w * (0.5 * theta).sin();
                ([x, y, z], [theta, w])
            }
            ManifoldKind::Torus => {
                let theta = 2.0 * std::f64::consts::PI * u1;
                let phi = 2.0 * std::f64::consts::PI * u2;
                let (big_r, small_r) = (2.0, 1.0);
                let x = (big_r + small_r * phi.cos()) * theta.cos();
                let y = (big_r + small_r * phi.cos()) * theta.sin();
                let z = small_r * phi.sin();
                ([x, y, z], [theta, phi])
            }
        };
        for k in 0..3 {
            points[[i, k]] = p[k];
        }
        intrinsic[[i, 0]] = q[0];
        intrinsic[[i, 1]] = q[1];
    }
    if noise > 0.0 {
        let normal = Normal::new(0.0, noise).expect("validated noise");
        for v in points.iter_mut() {
            *v += normal.sample(&mut rng);
        }
    }
    Ok(ManifoldSample {
        points: SampleMatrix::with_default_ids(points)?,
        intrinsic,
        kind,
    })
}

/// Rotation of 40 degrees around the z-axis (view 1 of the two-view setup).
pub fn view_rotation() -> Array2<f64> {
    let theta = 40.0_f64.to_radians();
    ndarray::array![
        [theta.cos(), -theta.sin(), 0.0],
        [theta.sin(), theta.cos(), 0.0],
        [0.0, 0.0, 1.0]
    ]
}

/// Scaling-and-shear deformation (view 2 of the two-view setup).
pub fn view_deformation() -> Array2<f64> {
    ndarray::array![[1.8, 0.3, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 0.6]]
}

/// Build the paper's two distorted views of a manifold: a rigid z-axis
/// rotation and a scaling + shear deformation, applied as X A^T to row
/// vectors. Row identity is shared across views.
pub fn make_views(m: &ManifoldSample) -> MultiViewDataset {
    let x = m.points.values();
    let ids = m.points.row_ids().to_vec();
    let view1 = x.dot(&view_rotation().t());
    let view2 = x.dot(&view_deformation().t());
    let v1 = SampleMatrix::new(view1, ids.clone()).expect("rotation preserves finiteness");
    let v2 = SampleMatrix::new(view2, ids).expect("deformation preserves finiteness");
    MultiViewDataset::from_samples(vec![v1, v2]).expect("views share row identity")
}

/// Undirected weighted neighbor graph over n samples.
#[derive(Debug, Clone)]
pub struct NeighborGraph {
    n: usize,
    k: usize,
    /// Symmetric adjacency: `adj[i]` holds `(j, weight)` sorted by `j`.
    adj: Vec<Vec<(usize, f64)>>,
}

impl NeighborGraph {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn neighbors(&self, i: usize) -> &[(usize, f64)] {
        &self.adj[i]
    }

    /// Undirected edge list with i < j.
    pub fn edges(&self) -> Vec<(usize, usize, f64)> {
        let mut out = Vec::new();
        for (i, nbrs) in self.adj.iter().enumerate() {
            for &(j, w) in nbrs {
                if i < j {
                    out.push((i, j, w));
                }
            }
        }
        out
    }

    /// Connected components as sorted lists of node indices.
    pub fn components(&self) -> Vec<Vec<usize>> {
        let mut seen = vec![false; self.n];
        let mut comps = Vec::new();
        for start in 0..self.n {
            if seen[start] {
                continue;
            }
            let mut stack = vec![start];
            let mut comp = Vec::new();
            seen[start] = true;
            while let Some(u) = stack.pop() {
                comp.push(u);
                for &(v, _) in &self.adj[u] {
                    if !seen[v] {
                        seen[v] = true;
                        stack.push(v);
                    }
                }
            }
            comp.sort_unstable();
            comps.push(comp);
        }
        comps
    }
}

/// Union-symmetrized k-nearest-neighbor graph weighted by Euclidean distance.
///
/// Distance ties are broken by the smaller sample index. Union (rather than
/// mutual) symmetrization keeps sparse manifolds connected at small k.
pub fn knn_graph(x: &SampleMatrix, k: usize) -> Result<NeighborGraph> {
    let n = x.n();
    if k == 0 || k >= n {
        return Err(Error::InvalidConfig(format!(
            "k must satisfy 1 <= k < n, got k = {k}, n = {n}"
        )));
    }
    let values = x.values();
    let nearest: Vec<Vec<(usize, f64)>> = par::map_indices(n, |i| {
        let mut ds: Vec<(usize, f64)> = (0..n)
            .filter(|&j| j != i)
            .map(|j| (j, row_distance(values, i, j)))
            .collect();
        ds.sort_by(|a, b| match a.1.partial_cmp(&b.1).expect("finite distances") {
            Ordering::Equal => a.0.cmp(&b.0),
            other => other,
        });
        ds.truncate(k);
        ds
    });

    let mut adj: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
    for (i, nbrs) in nearest.iter().enumerate() {
        for &(j, w) in nbrs {
            insert_edge(&mut adj, i, j, w);
        }
    }
    for list in adj.iter_mut() {
        list.sort_by_key(|&(j, _)| j);
    }
    Ok(NeighborGraph { n, k, adj })
}

fn row_distance(values: ArrayView2<'_, f64>, i: usize, j: usize) -> f64 {
    let mut acc = 0.0;
    for (a, b) in values.row(i).iter().zip(values.row(j).iter()) {
        let d = a - b;
        acc += d * d;
    }
    acc.sqrt()
}

fn insert_edge(adj: &mut [Vec<(usize, f64)>], i: usize, j: usize, w: f64) {
    if !adj[i].iter().any(|&(x, _)| x == j) {
        adj[i].push((j, w));
    }
    if !adj[j].iter().any(|&(x, _)| x == i) {
        adj[j].push((i, w));
    }
}

#[derive(Copy, Clone, PartialEq)]
struct HeapEntry {
    dist: f64,
    node: usize,
}

impl Eq for HeapEntry {}

impl Ord for HeapEntry {
    fn cmp(&self, other: &Self) -> Ordering {
        // Min-heap on distance via reversed comparison; ties on node index.
        other
            .dist
            .total_cmp(&self.dist)
            .then_with(|| other.node.cmp(&self.node))
    }
}

impl PartialOrd for HeapEntry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

fn dijkstra_row(g: &NeighborGraph, source: usize) -> Vec<f64> {
    let mut dist = vec![f64::INFINITY; g.n()];
    let mut heap = BinaryHeap::new();
    dist[source] = 0.0;
    heap.push(HeapEntry {
        dist: 0.0,
        node: source,
    });
    while let Some(HeapEntry { dist: d, node: u }) = heap.pop() {
        if d > dist[u] {
            continue;
        }
        for &(v, w) in g.neighbors(u) {
            let nd = d + w;
            if nd < dist[v] {
                dist[v] = nd;
                heap.push(HeapEntry { dist: nd, node: v });
            }
        }
    }
    dist
}

/// All-pairs shortest-path distances via per-source Dijkstra.
///
/// Errors on a disconnected graph, listing the component sizes; bridge the
/// graph first (see [`bridge_components`]) to embed such data anyway.
pub fn geodesic_distances(g: &NeighborGraph) -> Result<RelationalMatrix> {
    let comps = g.components();
    if comps.len() > 1 {
        let mut sizes: Vec<usize> = comps.iter().map(|c| c.len()).collect();
        sizes.sort_unstable_by(|a, b| b.cmp(a));
        return Err(Error::Disconnected { sizes });
    }
    let n = g.n();
    let rows = par::map_indices(n, |i| dijkstra_row(g, i));
    let mut out = Array2::zeros((n, n));
    for (i, row) in rows.into_iter().enumerate() {
        for (j, v) in row.into_iter().enumerate() {
            out[[i, j]] = v;
        }
    }
    // Shortest paths are symmetric; mirror the upper triangle to erase
    // floating-point summation-order noise.
    for i in 0..n {
        out[[i, i]] = 0.0;
        for j in (i + 1)..n {
            let v = out[[i, j]];
            out[[j, i]] = v;
        }
    }
    Ok(RelationalMatrix::new_unchecked(out, MetricTag::Geodesic))
}

/// Join disconnected components with their single shortest Euclidean edge.
///
/// Returns the bridged graph and the list of added edges `(i, j, weight)`.
pub fn bridge_components(
    g: &NeighborGraph,
    x: &SampleMatrix,
) -> (NeighborGraph, Vec<(usize, usize, f64)>) {
    let mut graph = g.clone();
    let mut added = Vec::new();
    loop {
        let comps = graph.components();
        if comps.len() <= 1 {
            break;
        }
        // Shortest inter-component link among all pairs.
        let mut label = vec![usize::MAX; graph.n()];
        for (c, comp) in comps.iter().enumerate() {
            for &i in comp {
                label[i] = c;
            }
        }
        let mut best = (usize::MAX, usize::MAX, f64::INFINITY);
        for i in 0..graph.n() {
            for j in (i + 1)..graph.n() {
                if label[i] != label[j] {
                    let d = row_distance(x.values(), i, j);
                    if d < best.2 {
                        best = (i, j, d);
                    }
                }
            }
        }
        let (i, j, w) = best;
        insert_edge(&mut graph.adj, i, j, w);
        graph.adj[i].sort_by_key(|&(v, _)| v);
        graph.adj[j].sort_by_key(|&(v, _)| v);
        added.push((i, j, w));
    }
    (graph, added)
}

/// Classical (Torgerson) MDS: double-centered Gram eigen-embedding.
///
/// Takes the top-q nonnegative eigenpairs; when fewer are available the
/// remaining axes are zero-padded and noted in the metadata. Axis signs
/// follow a fixed convention: the largest-magnitude coordinate of each axis
/// is made positive.
pub fn classical_mds(d: &RelationalMatrix, q: usize) -> Result<Embedding> {
    let n = d.n();
    if q >= n {
        return Err(Error::DimensionTooLarge { q, n });
    }
    let values = d.values();
    let mut sq = Array2::zeros((n, n));
    for i in 0..n {
        for j in 0..n {
            sq[[i, j]] = values[[i, j]] * values[[i, j]];
        }
    }
    let row_mean: Vec<f64> = (0..n).map(|i| sq.row(i).sum() / n as f64).collect();
    let col_mean: Vec<f64> = (0..n).map(|j| sq.column(j).sum() / n as f64).collect();
    let grand = row_mean.iter().sum::<f64>() / n as f64;
    let gram = DMatrix::from_fn(n, n, |i, j| {
        -0.5 * (sq[[i, j]] - row_mean[i] - col_mean[j] + grand)
    });

    let eig = nalgebra::SymmetricEigen::new(gram);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));

    let mut coords = Array2::zeros((n, q));
    let mut padded = 0usize;
    for (axis, &idx) in order.iter().take(q).enumerate() {
        let lambda = eig.eigenvalues[idx];
        if lambda <= 0.0 {
            padded += 1;
            continue;
        }
        let scale = lambda.sqrt();
        for i in 0..n {
            coords[[i, axis]] = eig.eigenvectors[(i, idx)] * scale;
        }
    }
    for axis in 0..q {
        let mut arg = 0usize;
        let mut best = 0.0f64;
        for i in 0..n {
            let mag = coords[[i, axis]].abs();
            if mag > best {
                best = mag;
                arg = i;
            }
        }
        if coords[[arg, axis]] < 0.0 {
            for i in 0..n {
                coords[[i, axis]] = -coords[[i, axis]];
            }
        }
    }

    let mut meta = EmbeddingMeta {
        method: "classical-mds".into(),
        converged: true,
        ..Default::default()
    };
    if padded > 0 {
        meta.notes.push(format!(
            "{padded} axes zero-padded: fewer than {q} nonnegative eigenvalues"
        ));
    }
    let ids = (0..n).map(|i| i.to_string()).collect();
    Embedding::new(coords, ids, meta)
}

/// Multi-Isomap baseline: per-view geodesic matrices, entry-wise mean,
/// classical MDS of the mean.
pub fn multi_isomap(data: &MultiViewDataset, k: usize, q: usize) -> Result<Embedding> {
    let matrices: Vec<Result<RelationalMatrix>> =
        par::map_indices(data.n_views(), |v| match &data.views()[v] {
            View::Samples(s) => {
                let g = knn_graph(s, k)?;
                geodesic_distances(&g)
            }
            View::Precomputed(d) => Ok(d.clone()),
        });
    let mut resolved = Vec::with_capacity(matrices.len());
    for (v, m) in matrices.into_iter().enumerate() {
        resolved.push(m.map_err(|e| e.in_view(v))?);
    }
    let mean = mean_relational(&resolved)?;
    let mut emb = classical_mds(&mean, q)?;
    emb.meta.method = "multi-isomap".into();
    let emb = Embedding::new(
        emb.coords().to_owned(),
        data.row_ids().to_vec(),
        emb.meta,
    )?;
    Ok(emb)
}

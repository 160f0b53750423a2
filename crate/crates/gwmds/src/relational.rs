//! Pairwise-dissimilarity matrices and the correlation score used for
//! evaluation and view selection.
//!
//! A [`RelationalMatrix`] is the universal currency between modules: a
//! symmetric nonnegative matrix with zero diagonal holding the pairwise
//! dissimilarities of one view (or of an embedding). All types here are
//! immutable after construction and safe to share across threads.

use std::fmt;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;
use std::str::FromStr;

use ndarray::{Array2, ArrayView2};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::par;

/// Symmetry slack accepted when validating a relational matrix.
pub const SYMMETRY_TOL: f64 = 1e-9;

/// Origin of the dissimilarities stored in a [`RelationalMatrix`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MetricTag {
    Euclidean,
    Geodesic,
    Precomputed,
}

impl fmt::Display for MetricTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            MetricTag::Euclidean => "euclidean",
            MetricTag::Geodesic => "geodesic",
            MetricTag::Precomputed => "precomputed",
        };
        f.write_str(s)
    }
}

impl FromStr for MetricTag {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "euclidean" => Ok(MetricTag::Euclidean),
            "geodesic" => Ok(MetricTag::Geodesic),
            "precomputed" => Ok(MetricTag::Precomputed),
            other => Err(Error::InvalidConfig(format!("unknown metric tag {other:?}"))),
        }
    }
}

/// Symmetric n x n nonnegative dissimilarity matrix with zero diagonal.
#[derive(Debug, Clone, PartialEq)]
pub struct RelationalMatrix {
    values: Array2<f64>,
    metric_tag: MetricTag,
}

impl RelationalMatrix {
    /// Validate and wrap a dissimilarity matrix.
    ///
    /// Rejects non-square shapes, asymmetry beyond [`SYMMETRY_TOL`], nonzero
    /// diagonals, negative entries, and non-finite values.
    pub fn new(values: Array2<f64>, metric_tag: MetricTag) -> Result<Self> {
        let (rows, cols) = values.dim();
        if rows != cols {
            return Err(Error::NotSquare { rows, cols });
        }
        for i in 0..rows {
            let d = values[[i, i]];
            if d != 0.0 {
                return Err(Error::InvalidMatrix(format!(
                    "diagonal entry ({i},{i}) = {d} is not zero"
                )));
            }
            for j in 0..cols {
                let v = values[[i, j]];
                if !v.is_finite() {
                    return Err(Error::InvalidMatrix(format!(
                        "entry ({i},{j}) is not finite"
                    )));
                }
                if v < 0.0 {
                    return Err(Error::InvalidMatrix(format!(
                        "entry ({i},{j}) = {v} is negative"
                    )));
                }
                if (v - values[[j, i]]).abs() > SYMMETRY_TOL {
                    return Err(Error::InvalidMatrix(format!(
                        "asymmetry at ({i},{j}): {v} vs {}",
                        values[[j, i]]
                    )));
                }
            }
        }
        Ok(Self { values, metric_tag })
    }

    /// Construct from values known to satisfy the invariants (checked in debug builds).
    pub(crate) fn new_unchecked(values: Array2<f64>, metric_tag: MetricTag) -> Self {
        debug_assert!(
            Self::new(values.clone(), metric_tag).is_ok(),
            "relational matrix invariant violated in unchecked constructor"
        );
        Self { values, metric_tag }
    }

    pub fn n(&self) -> usize {
        self.values.nrows()
    }

    pub fn values(&self) -> ArrayView2<'_, f64> {
        self.values.view()
    }

    pub fn metric_tag(&self) -> MetricTag {
        self.metric_tag
    }

    /// Arithmetic mean of all entries (including the zero diagonal).
    pub fn mean(&self) -> f64 {
        self.values.sum() / (self.n() * self.n()) as f64
    }

    /// Strict upper triangle flattened row by row: n(n-1)/2 entries.
    pub fn upper_triangle(&self) -> Vec<f64> {
        let n = self.n();
        let mut out = Vec::with_capacity(n * (n - 1) / 2);
        for i in 0..n {
            for j in (i + 1)..n {
                out.push(self.values[[i, j]]);
            }
        }
        out
    }

    /// Write as dense CSV: n rows of n comma-separated decimal columns, no header.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        let n = self.n();
        let mut line = String::new();
        for i in 0..n {
            line.clear();
            for j in 0..n {
                if j > 0 {
                    line.push(',');
                }
                line.push_str(&fmt_f64(self.values[[i, j]]));
            }
            line.push('\n');
            w.write_all(line.as_bytes())?;
        }
        Ok(())
    }

    pub fn to_csv_file<P: AsRef<Path>>(&self, path: P) -> Result<()> {
        let file = std::fs::File::create(path)?;
        self.write_csv(std::io::BufWriter::new(file))
    }

    /// Read a dense CSV produced by [`RelationalMatrix::write_csv`].
    pub fn read_csv<R: std::io::Read>(r: R, metric_tag: MetricTag) -> Result<Self> {
        let reader = BufReader::new(r);
        let mut rows: Vec<Vec<f64>> = Vec::new();
        for (lineno, line) in reader.lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let row: std::result::Result<Vec<f64>, _> =
                line.split(',').map(|t| t.trim().parse::<f64>()).collect();
            let row = row.map_err(|e| Error::Parse {
                line: lineno + 1,
                message: e.to_string(),
            })?;
            rows.push(row);
        }
        let n = rows.len();
        if n == 0 {
            return Err(Error::Parse {
                line: 0,
                message: "empty matrix file".into(),
            });
        }
        let mut values = Array2::zeros((n, n));
        for (i, row) in rows.iter().enumerate() {
            if row.len() != n {
                return Err(Error::Parse {
                    line: i + 1,
                    message: format!("expected {n} columns, found {}", row.len()),
                });
            }
            for (j, &v) in row.iter().enumerate() {
                values[[i, j]] = v;
            }
        }
        Self::new(values, metric_tag)
    }

    pub fn from_csv_file<P: AsRef<Path>>(path: P, metric_tag: MetricTag) -> Result<Self> {
        let file = std::fs::File::open(path)?;
        Self::read_csv(file, metric_tag)
    }

    /// JSON envelope `{n, metric_tag, values}` with row-major values.
    pub fn to_json(&self) -> RelationalMatrixJson {
        RelationalMatrixJson {
            n: self.n(),
            metric_tag: self.metric_tag,
            values: self.values.iter().copied().collect(),
        }
    }

    pub fn to_json_file<P: AsRef<Path>>(&self, path: P) -> Result<()> {
        let file = std::fs::File::create(path)?;
        serde_json::to_writer(std::io::BufWriter::new(file), &self.to_json())?;
        Ok(())
    }

    pub fn from_json(envelope: RelationalMatrixJson) -> Result<Self> {
        let n = envelope.n;
        if envelope.values.len() != n * n {
            return Err(Error::ShapeMismatch {
                context: "relational matrix JSON".into(),
                expected: format!("{} values", n * n),
                got: format!("{}", envelope.values.len()),
            });
        }
        let values = Array2::from_shape_vec((n, n), envelope.values).expect("shape checked");
        Self::new(values, envelope.metric_tag)
    }

    pub fn from_json_file<P: AsRef<Path>>(path: P) -> Result<Self> {
        let file = std::fs::File::open(path)?;
        let envelope: RelationalMatrixJson = serde_json::from_reader(BufReader::new(file))?;
        Self::from_json(envelope)
    }
}

/// Serialized form of a [`RelationalMatrix`].
#[derive(Debug, Serialize, Deserialize)]
pub struct RelationalMatrixJson {
    pub n: usize,
    pub metric_tag: MetricTag,
    pub values: Vec<f64>,
}

/// Format a float with 17 significant digits so it round-trips losslessly.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

/// n x p matrix of raw samples with stable row identifiers.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleMatrix {
    values: Array2<f64>,
    row_ids: Vec<String>,
}

impl SampleMatrix {
    /// Validate raw samples: at least two finite rows, one id per row.
    pub fn new(values: Array2<f64>, row_ids: Vec<String>) -> Result<Self> {
        let n = values.nrows();
        if n < 2 {
            return Err(Error::InvalidConfig(format!(
                "sample matrix needs at least 2 rows, got {n}"
            )));
        }
        if row_ids.len() != n {
            return Err(Error::ShapeMismatch {
                context: "sample row ids".into(),
                expected: format!("{n}"),
                got: format!("{}", row_ids.len()),
            });
        }
        for (i, row) in values.outer_iter().enumerate() {
            if row.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFinite { row: i });
            }
        }
        Ok(Self { values, row_ids })
    }

    /// Samples with row ids "0", "1", ... matching the row index.
    pub fn with_default_ids(values: Array2<f64>) -> Result<Self> {
        let ids = (0..values.nrows()).map(|i| i.to_string()).collect();
        Self::new(values, ids)
    }

    pub fn n(&self) -> usize {
        self.values.nrows()
    }

    pub fn dim(&self) -> usize {
        self.values.ncols()
    }

    pub fn values(&self) -> ArrayView2<'_, f64> {
        self.values.view()
    }

    pub fn row_ids(&self) -> &[String] {
        &self.row_ids
    }
}

/// One view of a multi-view dataset: raw samples or a precomputed matrix.
#[derive(Debug, Clone)]
pub enum View {
    Samples(SampleMatrix),
    Precomputed(RelationalMatrix),
}

impl View {
    pub fn n(&self) -> usize {
        match self {
            View::Samples(s) => s.n(),
            View::Precomputed(d) => d.n(),
        }
    }
}

/// Ordered collection of V views over the same samples.
#[derive(Debug, Clone)]
pub struct MultiViewDataset {
    views: Vec<View>,
    row_ids: Vec<String>,
}

impl MultiViewDataset {
    /// Validate that every view shares the sample count and row identity.
    pub fn new(views: Vec<View>) -> Result<Self> {
        if views.is_empty() {
            return Err(Error::InvalidConfig("dataset needs at least one view".into()));
        }
        let n = views[0].n();
        let mut row_ids: Option<Vec<String>> = None;
        for (v, view) in views.iter().enumerate() {
            if view.n() != n {
                return Err(Error::ShapeMismatch {
                    context: format!("view {v}"),
                    expected: format!("{n} samples"),
                    got: format!("{}", view.n()),
                }
                .in_view(v));
            }
            if let View::Samples(s) = view {
                match &row_ids {
                    None => row_ids = Some(s.row_ids().to_vec()),
                    Some(ids) => {
                        if ids != s.row_ids() {
                            return Err(Error::InvalidConfig(format!(
                                "view {v} row ids differ from earlier views"
                            ))
                            .in_view(v));
                        }
                    }
                }
            }
        }
        let row_ids = row_ids.unwrap_or_else(|| (0..n).map(|i| i.to_string()).collect());
        Ok(Self { views, row_ids })
    }

    pub fn from_samples(samples: Vec<SampleMatrix>) -> Result<Self> {
        Self::new(samples.into_iter().map(View::Samples).collect())
    }

    pub fn from_precomputed(matrices: Vec<RelationalMatrix>) -> Result<Self> {
        Self::new(matrices.into_iter().map(View::Precomputed).collect())
    }

    pub fn n_views(&self) -> usize {
        self.views.len()
    }

    pub fn n_samples(&self) -> usize {
        self.views[0].n()
    }

    pub fn views(&self) -> &[View] {
        &self.views
    }

    pub fn row_ids(&self) -> &[String] {
        &self.row_ids
    }
}

/// Pairwise L2 distances between the rows of `x`.
///
/// The output is symmetric with a zero diagonal by construction; finiteness
/// of the input is enforced by [`SampleMatrix::new`].
pub fn pairwise_euclidean(x: &SampleMatrix) -> RelationalMatrix {
    let n = x.n();
    let values = x.values();
    let rows = par::map_indices(n, |i| {
        let xi = values.row(i);
        let mut row = vec![0.0; n];
        for (j, slot) in row.iter_mut().enumerate() {
            if j == i {
                continue;
            }
            let xj = values.row(j);
            let mut acc = 0.0;
            for (a, b) in xi.iter().zip(xj.iter()) {
                let d = a - b;
                acc += d * d;
            }
            *slot = acc.sqrt();
        }
        row
    });
    let mut out = Array2::zeros((n, n));
    for (i, row) in rows.into_iter().enumerate() {
        for (j, v) in row.into_iter().enumerate() {
            out[[i, j]] = v;
        }
    }
    // Enforce exact symmetry: d(i,j) and d(j,i) are the same sum up to
    // floating-point commutativity, which iteration order already fixes,
    // but mirroring the upper triangle removes any doubt.
    for i in 0..n {
        for j in (i + 1)..n {
            let v = out[[i, j]];
            out[[j, i]] = v;
        }
    }
    RelationalMatrix::new_unchecked(out, MetricTag::Euclidean)
}

/// Entry-wise arithmetic mean of the given matrices.
pub fn mean_relational(ds: &[RelationalMatrix]) -> Result<RelationalMatrix> {
    let weights = vec![1.0 / ds.len().max(1) as f64; ds.len()];
    weighted_mean_relational(ds, &weights)
}

/// Entry-wise weighted mean; weights must be nonnegative and sum to 1.
pub fn weighted_mean_relational(
    ds: &[RelationalMatrix],
    weights: &[f64],
) -> Result<RelationalMatrix> {
    if ds.is_empty() {
        return Err(Error::InvalidConfig("mean of zero matrices".into()));
    }
    if weights.len() != ds.len() {
        return Err(Error::ShapeMismatch {
            context: "aggregation weights".into(),
            expected: format!("{}", ds.len()),
            got: format!("{}", weights.len()),
        });
    }
    let wsum: f64 = weights.iter().sum();
    if weights.iter().any(|&w| w < 0.0) || (wsum - 1.0).abs() > 1e-9 {
        return Err(Error::InvalidConfig(format!(
            "weights must be nonnegative and sum to 1 (sum = {wsum})"
        )));
    }
    let n = ds[0].n();
    for (v, d) in ds.iter().enumerate() {
        if d.n() != n {
            return Err(Error::ShapeMismatch {
                context: "mean_relational".into(),
                expected: format!("{n}x{n}"),
                got: format!("{0}x{0}", d.n()),
            }
            .in_view(v));
        }
    }
    let mut acc: Array2<f64> = Array2::zeros((n, n));
    for (d, &w) in ds.iter().zip(weights) {
        acc.scaled_add(w, &d.values());
    }
    RelationalMatrix::new(acc, MetricTag::Precomputed)
}

/// Pearson correlation between the strict upper triangles of two matrices.
///
/// This is the consistency score rho used throughout evaluation and view
/// selection: larger means the two relational structures agree more.
pub fn distance_correlation(da: &RelationalMatrix, db: &RelationalMatrix) -> Result<f64> {
    if da.n() != db.n() {
        return Err(Error::ShapeMismatch {
            context: "distance_correlation".into(),
            expected: format!("{0}x{0}", da.n()),
            got: format!("{0}x{0}", db.n()),
        });
    }
    if da.n() < 3 {
        return Err(Error::InvalidConfig(format!(
            "distance_correlation needs n >= 3, got {}",
            da.n()
        )));
    }
    let xs = da.upper_triangle();
    let ys = db.upper_triangle();
    pearson(&xs, &ys)
}

/// Plain Pearson correlation of two equal-length vectors.
pub(crate) fn pearson(xs: &[f64], ys: &[f64]) -> Result<f64> {
    let m = xs.len() as f64;
    let mean_x = xs.iter().sum::<f64>() / m;
    let mean_y = ys.iter().sum::<f64>() / m;
    let mut sxx = 0.0;
    let mut syy = 0.0;
    let mut sxy = 0.0;
    for (&x, &y) in xs.iter().zip(ys) {
        let dx = x - mean_x;
        let dy = y - mean_y;
        sxx += dx * dx;
        syy += dy * dy;
        sxy += dx * dy;
    }
    if sxx <= 0.0 || syy <= 0.0 {
        return Err(Error::Degenerate(
            "zero variance in distance triangle; correlation undefined".into(),
        ));
    }
    Ok(sxy / (sxx.sqrt() * syy.sqrt()))
}

//! Low-dimensional embeddings with provenance metadata.

use std::io::Write;
use std::path::Path;

use ndarray::{Array2, ArrayView2};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::relational::{fmt_f64, pairwise_euclidean, RelationalMatrix, SampleMatrix};

/// Provenance carried alongside embedding coordinates.
#[derive(Debug, Clone, Serialize, Deserialize, Default)]
pub struct EmbeddingMeta {
    /// Producing method, e.g. "gwmds", "mean-gwmds", "multi-gwmds", "classical-mds".
    pub method: String,
    pub seed: u64,
    /// For per-view aligned embeddings: which view induced this one.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub view_of_origin: Option<usize>,
    /// Final squared Gromov-Wasserstein value, when the method optimizes one.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gw_sq: Option<f64>,
    pub iterations: usize,
    pub converged: bool,
    /// Per-view distance correlations recorded by multi-view drivers.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub view_correlations: Option<Vec<f64>>,
    /// Free-form remarks, e.g. zero-padded axes in classical MDS.
    #[serde(skip_serializing_if = "Vec::is_empty", default)]
    pub notes: Vec<String>,
}

/// n x q coordinate matrix with row identity and provenance.
#[derive(Debug, Clone)]
pub struct Embedding {
    coords: Array2<f64>,
    row_ids: Vec<String>,
    pub meta: EmbeddingMeta,
}

impl Embedding {
    pub fn new(coords: Array2<f64>, row_ids: Vec<String>, meta: EmbeddingMeta) -> Result<Self> {
        if coords.nrows() != row_ids.len() {
            return Err(Error::ShapeMismatch {
                context: "embedding row ids".into(),
                expected: format!("{}", coords.nrows()),
                got: format!("{}", row_ids.len()),
            });
        }
        Ok(Self {
            coords,
            row_ids,
            meta,
        })
    }

    pub fn n(&self) -> usize {
        self.coords.nrows()
    }

    pub fn dim(&self) -> usize {
        self.coords.ncols()
    }

    pub fn coords(&self) -> ArrayView2<'_, f64> {
        self.coords.view()
    }

    pub fn into_coords(self) -> Array2<f64> {
        self.coords
    }

    pub fn row_ids(&self) -> &[String] {
        &self.row_ids
    }

    /// Euclidean distance matrix of the embedded points.
    pub fn distances(&self) -> RelationalMatrix {
        let s = SampleMatrix::new(self.coords.clone(), self.row_ids.clone())
            .expect("embedding coordinates are finite");
        pairwise_euclidean(&s)
    }

    /// Write `id,y1..yq` CSV.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        let q = self.dim();
        let mut header = String::from("id");
        for k in 1..=q {
            header.push_str(&format!(",y{k}"));
        }
        header.push('\n');
        w.write_all(header.as_bytes())?;
        for (i, id) in self.row_ids.iter().enumerate() {
            let mut line = id.clone();
            for k in 0..q {
                line.push(',');
                line.push_str(&fmt_f64(self.coords[[i, k]]));
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

    /// Read back an `id,y1..yq` CSV (metadata is not stored in the CSV).
    pub fn from_csv_file<P: AsRef<Path>>(path: P, meta: EmbeddingMeta) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let mut lines = text.lines().enumerate();
        let (_, header) = lines.next().ok_or(Error::Parse {
            line: 0,
            message: "empty embedding file".into(),
        })?;
        let q = header.split(',').count().saturating_sub(1);
        if q == 0 {
            return Err(Error::Parse {
                line: 1,
                message: "header must be id,y1..yq".into(),
            });
        }
        let mut ids = Vec::new();
        let mut rows: Vec<f64> = Vec::new();
        for (lineno, line) in lines {
            if line.trim().is_empty() {
                continue;
            }
            let mut parts = line.split(',');
            ids.push(parts.next().unwrap_or_default().to_string());
            let mut count = 0;
            for tok in parts {
                let v: f64 = tok.trim().parse().map_err(|e: std::num::ParseFloatError| {
                    Error::Parse {
                        line: lineno + 1,
                        message: e.to_string(),
                    }
                })?;
                rows.push(v);
                count += 1;
            }
            if count != q {
                return Err(Error::Parse {
                    line: lineno + 1,
                    message: format!("expected {q} coordinates, found {count}"),
                });
            }
        }
        let n = ids.len();
        let coords = Array2::from_shape_vec((n, q), rows).expect("shape checked");
        Self::new(coords, ids, meta)
    }

    /// JSON sidecar with method, seed, gw_sq, iterations and the resolved config.
    pub fn write_sidecar<P: AsRef<Path>>(&self, path: P, config: &serde_json::Value) -> Result<()> {
        let sidecar = serde_json::json!({
            "meta": self.meta,
            "config": config,
        });
        let file = std::fs::File::create(path)?;
        serde_json::to_writer_pretty(std::io::BufWriter::new(file), &sidecar)?;
        Ok(())
    }
}

//! `eval`: recompute per-view distance correlations of a stored embedding.

use std::path::{Path, PathBuf};

use gwmds::embedding::{Embedding, EmbeddingMeta};
use gwmds::error::Result;
use gwmds::relational::{distance_correlation, MetricTag, RelationalMatrix};

/// Correlations of one embedding file against view distance-matrix files,
/// printed as a table row in view order.
pub fn run(embedding_path: &Path, view_paths: &[PathBuf], label: &str) -> Result<Vec<f64>> {
    let embedding = Embedding::from_csv_file(
        embedding_path,
        EmbeddingMeta {
            method: label.to_string(),
            ..Default::default()
        },
    )?;
    let demb = embedding.distances();
    let mut correlations = Vec::with_capacity(view_paths.len());
    for p in view_paths {
        let d = RelationalMatrix::from_csv_file(p, MetricTag::Precomputed)?;
        correlations.push(distance_correlation(&d, &demb)?);
    }
    let mean = correlations.iter().sum::<f64>() / correlations.len() as f64;
    let views = correlations
        .iter()
        .enumerate()
        .map(|(v, c)| format!("view{}={c:.4}", v + 1))
        .collect::<Vec<_>>()
        .join(" ");
    println!("{label}: {views} mean={mean:.4}");
    Ok(correlations)
}

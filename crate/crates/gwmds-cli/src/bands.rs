//! Acceptance bands for the reproduction grids.
//!
//! Bands live in a versioned JSON file (`data/bands.json`, embedded at build
//! time) rather than in code, so tolerance changes stay auditable; an
//! alternative file can be supplied at run time.

use std::path::Path;

use serde::{Deserialize, Serialize};

const DEFAULT_BANDS: &str = include_str!("../data/bands.json");

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BandsFile {
    #[serde(default)]
    pub comment: String,
    pub table1: TableBands,
    pub table2: TableBands,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TableBands {
    pub cells: Vec<CellBand>,
    pub trend: Option<TrendBand>,
}

/// Band on one (manifold, method) cell's seed-mean correlation.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CellBand {
    pub manifold: String,
    pub method: String,
    pub min: Option<f64>,
    pub max: Option<f64>,
    /// Value reported by the source experiments, for context in reports.
    pub reference: f64,
}

impl CellBand {
    pub fn check(&self, value: f64) -> bool {
        self.min.is_none_or(|lo| value >= lo) && self.max.is_none_or(|hi| value <= hi)
    }
}

/// Ordering requirement checked per seed: every favored method must beat
/// the baseline on the named manifold in at least `min_seeds` seeds.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrendBand {
    pub manifold: String,
    pub favored: Vec<String>,
    pub baseline: String,
    pub min_seeds: usize,
}

pub fn load(path: Option<&Path>) -> Result<BandsFile, gwmds::Error> {
    let text = match path {
        Some(p) => std::fs::read_to_string(p)?,
        None => DEFAULT_BANDS.to_string(),
    };
    Ok(serde_json::from_str(&text)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_bands_parse() {
        let bands = load(None).unwrap();
        assert!(!bands.table2.cells.is_empty());
        assert!(bands.table2.trend.is_some());
    }

    #[test]
    fn two_sided_band_checks_both_ends() {
        let band = CellBand {
            manifold: "s-curve".into(),
            method: "multi-isomap".into(),
            min: Some(0.71),
            max: Some(0.91),
            reference: 0.81,
        };
        assert!(band.check(0.8));
        assert!(!band.check(0.95));
        assert!(!band.check(0.5));
    }
}

//! Electricity Load Diagrams ingestion: parse the UCI distribution format
//! and slice the series into a daily multi-view structure.
//!
//! The distribution file is semicolon-delimited with a comma decimal mark
//! (both configurable), a header row naming the clients, and one row per
//! 15-minute period labeled by its end timestamp.

use std::io::Write;
use std::path::Path;

use chrono::{Duration, NaiveDate, NaiveDateTime};
use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::relational::{MultiViewDataset, SampleMatrix};

/// Slots per day at 15-minute resolution: 24h / 15min.
pub const SLOTS_PER_DAY: usize = 96;

const TIMESTAMP_FORMAT: &str = "%Y-%m-%d %H:%M:%S";

/// Client x time load matrix with uniformly spaced timestamps.
#[derive(Debug, Clone)]
pub struct LoadSeries {
    clients: Vec<String>,
    timestamps: Vec<NaiveDateTime>,
    /// clients x timesteps, kW units.
    values: Array2<f64>,
}

impl LoadSeries {
    pub fn new(
        clients: Vec<String>,
        timestamps: Vec<NaiveDateTime>,
        values: Array2<f64>,
    ) -> Result<Self> {
        if values.nrows() != clients.len() || values.ncols() != timestamps.len() {
            return Err(Error::ShapeMismatch {
                context: "load series".into(),
                expected: format!("{} x {}", clients.len(), timestamps.len()),
                got: format!("{} x {}", values.nrows(), values.ncols()),
            });
        }
        validate_spacing(&timestamps)?;
        Ok(Self {
            clients,
            timestamps,
            values,
        })
    }

    pub fn n_clients(&self) -> usize {
        self.clients.len()
    }

    pub fn n_timesteps(&self) -> usize {
        self.timestamps.len()
    }

    pub fn clients(&self) -> &[String] {
        &self.clients
    }

    pub fn timestamps(&self) -> &[NaiveDateTime] {
        &self.timestamps
    }

    pub fn value(&self, client: usize, slot: usize) -> f64 {
        self.values[[client, slot]]
    }
}

fn validate_spacing(timestamps: &[NaiveDateTime]) -> Result<()> {
    let step = Duration::minutes(15);
    for (i, pair) in timestamps.windows(2).enumerate() {
        if pair[1] - pair[0] != step {
            return Err(Error::Parse {
                line: i + 3,
                message: format!(
                    "irregular timestamp spacing: {} -> {}",
                    pair[0], pair[1]
                ),
            });
        }
    }
    Ok(())
}

/// Policy for missing (empty) value cells.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FillPolicy {
    /// Missing values are a parse error (the default).
    #[default]
    Error,
    Zero,
    Previous,
}

/// Per-client normalization applied when building daily views.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Normalization {
    #[default]
    None,
    ZScore,
    Max,
}

impl std::str::FromStr for Normalization {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "none" => Ok(Normalization::None),
            "zscore" => Ok(Normalization::ZScore),
            "max" => Ok(Normalization::Max),
            other => Err(Error::InvalidConfig(format!(
                "unknown normalization {other:?}"
            ))),
        }
    }
}

/// Parse a load-diagram file.
///
/// `delimiter` and `decimal_mark` default to the UCI distribution's
/// semicolon and comma in the CLI. Rows failing to parse report their
/// 1-based line number.
pub fn load_eld<P: AsRef<Path>>(
    path: P,
    delimiter: u8,
    decimal_mark: char,
    fill: FillPolicy,
) -> Result<LoadSeries> {
    let file = std::fs::File::open(path)?;
    let mut reader = csv::ReaderBuilder::new()
        .delimiter(delimiter)
        .has_headers(false)
        .flexible(true)
        .from_reader(std::io::BufReader::new(file));

    let mut records = reader.records();
    let header = match records.next() {
        Some(rec) => rec?,
        None => {
            return Err(Error::Parse {
                line: 1,
                message: "empty file: expected a header row naming clients".into(),
            })
        }
    };
    if header.len() < 2 {
        return Err(Error::Parse {
            line: 1,
            message: "header must contain a timestamp column and at least one client".into(),
        });
    }
    let clients: Vec<String> = header.iter().skip(1).map(|s| s.trim().to_string()).collect();
    let n_clients = clients.len();

    let mut timestamps: Vec<NaiveDateTime> = Vec::new();
    // time-major rows collected first, transposed to clients x time below
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (idx, record) in records.enumerate() {
        let line = idx + 2;
        let record = record?;
        if record.len() == 1 && record[0].trim().is_empty() {
            continue;
        }
        if record.len() != n_clients + 1 {
            return Err(Error::Parse {
                line,
                message: format!(
                    "expected {} fields, found {}",
                    n_clients + 1,
                    record.len()
                ),
            });
        }
        let stamp = NaiveDateTime::parse_from_str(record[0].trim(), TIMESTAMP_FORMAT)
            .map_err(|e| Error::Parse {
                line,
                message: format!("bad timestamp {:?}: {e}", &record[0]),
            })?;
        timestamps.push(stamp);
        let mut row = Vec::with_capacity(n_clients);
        for (c, field) in record.iter().skip(1).enumerate() {
            let token = field.trim();
            if token.is_empty() {
                let v = match fill {
                    FillPolicy::Error => {
                        return Err(Error::Parse {
                            line,
                            message: format!(
                                "missing value for client {} (use a fill policy)",
                                clients[c]
                            ),
                        })
                    }
                    FillPolicy::Zero => 0.0,
                    FillPolicy::Previous => {
                        rows.last().map(|prev: &Vec<f64>| prev[c]).unwrap_or(0.0)
                    }
                };
                row.push(v);
                continue;
            }
            let normalized: String = if decimal_mark != '.' {
                token.replace(decimal_mark, ".")
            } else {
                token.to_string()
            };
            let v: f64 = normalized.parse().map_err(|e: std::num::ParseFloatError| {
                Error::Parse {
                    line,
                    message: format!("bad value {token:?} for client {}: {e}", clients[c]),
                }
            })?;
            row.push(v);
        }
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(Error::Parse {
            line: 2,
            message: "no data rows".into(),
        });
    }

    let n_steps = rows.len();
    let mut values = Array2::zeros((n_clients, n_steps));
    for (t, row) in rows.iter().enumerate() {
        for (c, &v) in row.iter().enumerate() {
            values[[c, t]] = v;
        }
    }
    LoadSeries::new(clients, timestamps, values)
}

/// Write a series back in the distribution format. Values use the shortest
/// f64 representation, so a round trip through [`load_eld`] is lossless.
pub fn write_eld<P: AsRef<Path>>(
    series: &LoadSeries,
    path: P,
    delimiter: u8,
    decimal_mark: char,
) -> Result<()> {
    let file = std::fs::File::create(path)?;
    let mut w = std::io::BufWriter::new(file);
    let d = delimiter as char;
    let mut line = String::from("\"\"");
    for c in series.clients() {
        line.push(d);
        line.push('"');
        line.push_str(c);
        line.push('"');
    }
    line.push('\n');
    w.write_all(line.as_bytes())?;
    for (t, stamp) in series.timestamps().iter().enumerate() {
        line.clear();
        line.push('"');
        line.push_str(&stamp.format(TIMESTAMP_FORMAT).to_string());
        line.push('"');
        for c in 0..series.n_clients() {
            line.push(d);
            let mut token = format!("{}", series.value(c, t));
            if decimal_mark != '.' {
                token = token.replace('.', &decimal_mark.to_string());
            }
            line.push_str(&token);
        }
        line.push('\n');
        w.write_all(line.as_bytes())?;
    }
    Ok(())
}

/// The calendar days forming the views.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DailyViewSpec {
    pub dates: Vec<NaiveDate>,
}

impl DailyViewSpec {
    pub fn new(dates: Vec<NaiveDate>) -> Result<Self> {
        if dates.is_empty() {
            return Err(Error::InvalidConfig("need at least one date".into()));
        }
        Ok(Self { dates })
    }

    /// Default day selection: the first day of each quarter of 2014,
    /// spanning seasonal variation.
    pub fn quarterly_2014() -> Self {
        Self {
            dates: [1, 4, 7, 10]
                .iter()
                .map(|&m| NaiveDate::from_ymd_opt(2014, m, 1).expect("valid date"))
                .collect(),
        }
    }
}

/// Bookkeeping emitted alongside the daily views.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DailyViewReport {
    pub dates: Vec<NaiveDate>,
    pub n_clients: usize,
    pub dropped_clients: Vec<String>,
    pub normalization: Normalization,
}

/// Slice the series into one view per requested date.
///
/// Each view is clients x 96; a day covers the periods ending at
/// `date 00:15` through `date+1 00:00`. Clients that are all-zero on every
/// selected day are dropped (they collapse geodesic graphs) and recorded.
pub fn daily_views(
    series: &LoadSeries,
    spec: &DailyViewSpec,
    normalization: Normalization,
) -> Result<(MultiViewDataset, DailyViewReport)> {
    let mut slot_indices: Vec<Vec<usize>> = Vec::with_capacity(spec.dates.len());
    for date in &spec.dates {
        let start = date
            .and_hms_opt(0, 15, 0)
            .expect("00:15 is a valid time");
        let mut slots = Vec::with_capacity(SLOTS_PER_DAY);
        let mut missing = Vec::new();
        for s in 0..SLOTS_PER_DAY {
            let stamp = start + Duration::minutes(15 * s as i64);
            match series.timestamps.binary_search(&stamp) {
                Ok(idx) => slots.push(idx),
                Err(_) => missing.push(stamp),
            }
        }
        if !missing.is_empty() {
            let head: Vec<String> = missing.iter().take(4).map(|t| t.to_string()).collect();
            return Err(Error::InvalidConfig(format!(
                "date {date} is not fully covered: {} of {SLOTS_PER_DAY} slots missing (first: {})",
                missing.len(),
                head.join(", ")
            )));
        }
        slot_indices.push(slots);
    }

    // Drop clients that are zero across every selected day.
    let mut kept = Vec::new();
    let mut dropped = Vec::new();
    for c in 0..series.n_clients() {
        let all_zero = slot_indices
            .iter()
            .all(|slots| slots.iter().all(|&t| series.values[[c, t]] == 0.0));
        if all_zero {
            dropped.push(series.clients[c].clone());
        } else {
            kept.push(c);
        }
    }
    if kept.len() < 2 {
        return Err(Error::Degenerate(
            "fewer than 2 clients with nonzero load on the selected days".into(),
        ));
    }

    // Per-client normalization statistics over all selected days together,
    // so differences between days survive normalization.
    let mut views = Vec::with_capacity(spec.dates.len());
    let row_ids: Vec<String> = kept.iter().map(|&c| series.clients[c].clone()).collect();
    for slots in &slot_indices {
        let mut m = Array2::zeros((kept.len(), SLOTS_PER_DAY));
        for (row, &c) in kept.iter().enumerate() {
            for (col, &t) in slots.iter().enumerate() {
                m[[row, col]] = series.values[[c, t]];
            }
        }
        views.push(m);
    }
    match normalization {
        Normalization::None => {}
        Normalization::ZScore => {
            for (row, _) in kept.iter().enumerate() {
                let all: Vec<f64> = views
                    .iter()
                    .flat_map(|v| v.row(row).to_vec())
                    .collect();
                let mean = all.iter().sum::<f64>() / all.len() as f64;
                let var =
                    all.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / all.len() as f64;
                let std = var.sqrt();
                for v in views.iter_mut() {
                    for x in v.row_mut(row) {
                        *x = if std > 1e-12 { (*x - mean) / std } else { 0.0 };
                    }
                }
            }
        }
        Normalization::Max => {
            for (row, _) in kept.iter().enumerate() {
                let max = views
                    .iter()
                    .flat_map(|v| v.row(row).to_vec())
                    .fold(0.0f64, |acc, x| acc.max(x.abs()));
                if max > 0.0 {
                    for v in views.iter_mut() {
                        for x in v.row_mut(row) {
                            *x /= max;
                        }
                    }
                }
            }
        }
    }

    let samples = views
        .into_iter()
        .map(|m| SampleMatrix::new(m, row_ids.clone()))
        .collect::<Result<Vec<_>>>()?;
    let dataset = MultiViewDataset::from_samples(samples)?;
    let report = DailyViewReport {
        dates: spec.dates.clone(),
        n_clients: dataset.n_samples(),
        dropped_clients: dropped,
        normalization,
    };
    Ok((dataset, report))
}

//! `generate`: write a manifold sample, its two views, and their distance
//! matrices to the output directory.

use std::io::Write;
use std::path::Path;

use gwmds::error::Result;
use gwmds::multiview::view_distance_matrices;
use gwmds::plot::scatter_svg;
use gwmds::relational::{fmt_f64, SampleMatrix, View};

use crate::config::{DatasetSpec, ExperimentConfig};

use super::{color_scalars, ensure_dir, load_dataset};

pub fn run(cfg: &ExperimentConfig, out: &Path) -> Result<()> {
    ensure_dir(out)?;
    let loaded = load_dataset(&cfg.dataset)?;
    let manifold = loaded
        .manifold
        .as_ref()
        .expect("generate requires a manifold dataset");

    write_points_csv(
        &manifold.points,
        &["x", "y", "z"],
        &out.join("points.csv"),
    )?;
    write_intrinsic_csv(manifold, &out.join("intrinsic.csv"))?;
    for (v, view) in loaded.data.views().iter().enumerate() {
        if let View::Samples(s) = view {
            write_points_csv(s, &["x", "y", "z"], &out.join(format!("view{}.csv", v + 1)))?;
        }
    }

    let matrices = view_distance_matrices(&loaded.data, cfg.metric.to_view_metric())?;
    for (v, d) in matrices.iter().enumerate() {
        d.to_csv_file(out.join(format!("view{}_dist.csv", v + 1)))?;
    }

    let colors = color_scalars(&loaded);
    let svg = scatter_svg(
        manifold.points.values(),
        &colors,
        &format!("{} (n = {})", manifold.kind, manifold.points.n()),
    );
    std::fs::write(out.join("points.svg"), svg)?;

    let config_json = serde_json::to_string_pretty(cfg)?;
    std::fs::write(out.join("resolved_config.json"), config_json)?;

    if let DatasetSpec::Manifold { manifold, n, .. } = &cfg.dataset {
        println!(
            "generated {manifold} n={n} with {} views into {}",
            loaded.data.n_views(),
            out.display()
        );
    }
    Ok(())
}

fn write_points_csv(s: &SampleMatrix, axes: &[&str], path: &Path) -> Result<()> {
    let file = std::fs::File::create(path)?;
    let mut w = std::io::BufWriter::new(file);
    let mut header = String::from("id");
    for a in axes.iter().take(s.dim()) {
        header.push(',');
        header.push_str(a);
    }
    header.push('\n');
    w.write_all(header.as_bytes())?;
    for (i, id) in s.row_ids().iter().enumerate() {
        let mut line = id.clone();
        for k in 0..s.dim() {
            line.push(',');
            line.push_str(&fmt_f64(s.values()[[i, k]]));
        }
        line.push('\n');
        w.write_all(line.as_bytes())?;
    }
    Ok(())
}

fn write_intrinsic_csv(m: &gwmds::geometry::ManifoldSample, path: &Path) -> Result<()> {
    let file = std::fs::File::create(path)?;
    let mut w = std::io::BufWriter::new(file);
    w.write_all(b"id,t1,t2\n")?;
    for (i, id) in m.points.row_ids().iter().enumerate() {
        let line = format!(
            "{id},{},{}\n",
            fmt_f64(m.intrinsic[[i, 0]]),
            fmt_f64(m.intrinsic[[i, 1]])
        );
        w.write_all(line.as_bytes())?;
    }
    Ok(())
}

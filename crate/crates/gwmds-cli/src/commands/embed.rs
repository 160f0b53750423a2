//! `embed`: run one embedding method and write the full result record.

use std::path::Path;
use std::time::Instant;

use gwmds::error::Result;
use gwmds::plot::scatter_svg;

use crate::config::{ExperimentConfig, ResultRecord};

use super::{color_scalars, ensure_dir, load_dataset, run_method};

pub fn run(cfg: &ExperimentConfig, out: &Path, raw_shared: bool) -> Result<ResultRecord> {
    ensure_dir(out)?;
    let started = Instant::now();
    let loaded = load_dataset(&cfg.dataset)?;
    let output = run_method(cfg, &loaded.data)?;
    let wall_time_s = started.elapsed().as_secs_f64();

    let mut artifacts: Vec<String> = Vec::new();
    let mut record_artifact = |name: &str| artifacts.push(name.to_string());

    output.embedding.to_csv_file(out.join("embedding.csv"))?;
    record_artifact("embedding.csv");

    let config_json = serde_json::to_value(cfg)?;
    output
        .embedding
        .write_sidecar(out.join("embedding_meta.json"), &config_json)?;
    record_artifact("embedding_meta.json");

    let colors = color_scalars(&loaded);
    let svg = scatter_svg(
        output.embedding.coords(),
        &colors,
        &format!("{} embedding", cfg.method.name()),
    );
    std::fs::write(out.join("embedding.svg"), svg)?;
    record_artifact("embedding.svg");

    for (v, d) in output.matrices.iter().enumerate() {
        let name = format!("view{}_dist.csv", v + 1);
        d.to_csv_file(out.join(&name))?;
        record_artifact(&name);
    }

    if !output.aligned.is_empty() {
        for (v, emb) in output.aligned.iter().enumerate() {
            let name = format!("aligned_view{}.csv", v + 1);
            emb.to_csv_file(out.join(&name))?;
            record_artifact(&name);
        }
        for (v, pi) in output.couplings.iter().enumerate() {
            let name = format!("coupling_view{}.json", v + 1);
            let file = std::fs::File::create(out.join(&name))?;
            serde_json::to_writer(std::io::BufWriter::new(file), &pi.to_json())?;
            record_artifact(&name);
        }
        let scores = serde_json::json!({
            "scores": output.scores,
            "selected": output.selected,
            "criterion": {
                "rule": cfg.selection,
                "aggregation": cfg.aggregation,
            },
        });
        std::fs::write(
            out.join("scores.json"),
            serde_json::to_string_pretty(&scores)?,
        )?;
        record_artifact("scores.json");
    }

    if raw_shared {
        if let Some(shared) = &output.shared {
            shared.to_csv_file(out.join("shared_raw.csv"))?;
            record_artifact("shared_raw.csv");
        }
    }

    std::fs::write(
        out.join("resolved_config.json"),
        serde_json::to_string_pretty(cfg)?,
    )?;
    record_artifact("resolved_config.json");

    let record = ResultRecord {
        method: cfg.method.name().to_string(),
        per_view_correlations: output.per_view_correlations.clone(),
        mean_correlation: output.mean_correlation,
        selected_view: output.selected,
        wall_time_s,
        config: cfg.clone(),
        artifacts,
    };
    std::fs::write(out.join("result.json"), serde_json::to_string_pretty(&record)?)?;

    print_row(&record);
    Ok(record)
}

pub fn print_row(record: &ResultRecord) {
    let views = record
        .per_view_correlations
        .iter()
        .enumerate()
        .map(|(v, c)| format!("view{}={c:.4}", v + 1))
        .collect::<Vec<_>>()
        .join(" ");
    let selected = record
        .selected_view
        .map(|v| format!(" selected=view{}", v + 1))
        .unwrap_or_default();
    println!(
        "{}: {views} mean={:.4}{selected}",
        record.method, record.mean_correlation
    );
}

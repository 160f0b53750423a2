use std::time::Instant;

use gwmds::geometry::{generate_manifold, make_views, multi_isomap, ManifoldKind};
use gwmds::gw::{GwConfig, MdsConfig};
use gwmds::multiview::{
    mean_gwmds, multi_gwmds, view_distance_matrices, SelectionOptions, ViewMetric, ViewWeights,
};
use gwmds::relational::distance_correlation;

fn main() {
    let args: Vec<String> = std::env::args().collect();
    let kind: ManifoldKind = args
        .get(1)
        .map(|s| s.parse().unwrap())
        .unwrap_or(ManifoldKind::SCurve);
    let n: usize = args.get(2).map(|s| s.parse().unwrap()).unwrap_or(500);
    let seed: u64 = args.get(3).map(|s| s.parse().unwrap()).unwrap_or(7);
    let noise: f64 = args.get(4).map(|s| s.parse().unwrap()).unwrap_or(0.0);

    let metric = ViewMetric::Geodesic { k: 10, bridge: true };
    let m = generate_manifold(kind, n, noise, seed).unwrap();
    let data = make_views(&m);
    let matrices = view_distance_matrices(&data, metric).unwrap();

    let mds = MdsConfig {
        seed,
        ..MdsConfig::new(2)
    };
    let gw = GwConfig {
        seed,
        ..GwConfig::default()
    };

    let t = Instant::now();
    let mean_emb = mean_gwmds(&data, metric, &mds, &gw).unwrap();
    let t_mean = t.elapsed().as_secs_f64();
    let corr_mean = mean_emb.meta.view_correlations.clone().unwrap();
    println!(
        "{kind} n={n} seed={seed} mean-gwmds: corrs={corr_mean:?} mean={:.4} gw={:.4e} epochs={} conv={} [{t_mean:.1}s]",
        corr_mean.iter().sum::<f64>() / corr_mean.len() as f64,
        mean_emb.meta.gw_sq.unwrap(),
        mean_emb.meta.iterations,
        mean_emb.meta.converged,
    );

    let t = Instant::now();
    let result = multi_gwmds(
        &data,
        metric,
        &ViewWeights::uniform(2),
        &mds,
        &gw,
        SelectionOptions::default(),
    )
    .unwrap();
    let t_multi = t.elapsed().as_secs_f64();
    println!(
        "{kind} n={n} seed={seed} multi-gwmds: scores={:?} selected={} per_view={:?} epochs={} conv={} [{t_multi:.1}s]",
        result.scores,
        result.selected,
        result.per_view_of(result.selected),
        result.shared.meta.iterations,
        result.shared.meta.converged,
    );

    let t = Instant::now();
    let iso = multi_isomap(&data, 10, 2).unwrap();
    let t_iso = t.elapsed().as_secs_f64();
    let iso_d = iso.distances();
    let corrs: Vec<f64> = matrices
        .iter()
        .map(|d| distance_correlation(d, &iso_d).unwrap())
        .collect();
    println!(
        "{kind} n={n} seed={seed} multi-isomap: corrs={corrs:?} mean={:.4} [{t_iso:.1}s]",
        corrs.iter().sum::<f64>() / corrs.len() as f64
    );
}

trait PerView {
    fn per_view_of(&self, v: usize) -> Vec<f64>;
}

impl PerView for gwmds::multiview::MultiGwResult {
    fn per_view_of(&self, v: usize) -> Vec<f64> {
        self.aligned[v]
            .meta
            .view_correlations
            .clone()
            .unwrap_or_default()
    }
}

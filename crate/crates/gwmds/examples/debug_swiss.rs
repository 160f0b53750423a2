use gwmds::geometry::{generate_manifold, geodesic_distances, knn_graph, ManifoldKind};
use gwmds::relational::pairwise_euclidean;

fn main() {
    for seed in 0..30u64 {
        let m = generate_manifold(ManifoldKind::SwissRoll, 300, 0.0, seed).unwrap();
        let g = knn_graph(&m.points, 10).unwrap();
        let d_geo = match geodesic_distances(&g) {
            Ok(d) => d,
            Err(e) => {
                println!("seed {seed}: {e}");
                continue;
            }
        };
        let d_euc = pairwise_euclidean(&m.points);
        let mut lo = 0;
        let mut hi = 0;
        for i in 0..300 {
            if m.intrinsic[[i, 0]] < m.intrinsic[[lo, 0]] {
                lo = i;
            }
            if m.intrinsic[[i, 0]] > m.intrinsic[[hi, 0]] {
                hi = i;
            }
        }
        let end_ratio = d_geo.values()[[lo, hi]] / d_euc.values()[[lo, hi]];
        // Also the max ratio over all pairs, as a shortcut diagnostic.
        let mut max_ratio: f64 = 0.0;
        for i in 0..300 {
            for j in (i + 1)..300 {
                let r = d_geo.values()[[i, j]] / d_euc.values()[[i, j]].max(1e-12);
                max_ratio = max_ratio.max(r);
            }
        }
        println!("seed {seed}: end-pair ratio {end_ratio:.3}, max-pair ratio {max_ratio:.3}");
    }
}

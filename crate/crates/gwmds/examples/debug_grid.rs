use gwmds::gw::{gwmds_embed, GwConfig, MdsConfig};
use gwmds::relational::{distance_correlation, pairwise_euclidean, SampleMatrix};
use ndarray::Array2;

fn main() {
    let mut pts = Array2::zeros((50, 2));
    for i in 0..50 {
        pts[[i, 0]] = (i % 10) as f64;
        pts[[i, 1]] = (i / 10) as f64;
    }
    let x = SampleMatrix::with_default_ids(pts).unwrap();
    let dx = pairwise_euclidean(&x);
    println!("mean dx = {}", dx.mean());

    for restarts in [1usize, 3] {
        let gw = GwConfig {
            n_restarts: restarts,
            ..GwConfig::default()
        };
        let emb = gwmds_embed(&dx, &MdsConfig::new(2), &gw).unwrap();
        println!(
            "restarts={restarts} gw_sq={:?} iters={} converged={}",
            emb.meta.gw_sq, emb.meta.iterations, emb.meta.converged
        );
        let c = emb.coords();
        println!(
            "  coords row0: {:?} row1: {:?}",
            c.row(0).to_vec(),
            c.row(1).to_vec()
        );
        let demb = emb.distances();
        println!(
            "  emb dist range: {:?} {:?}",
            demb.values().iter().cloned().fold(f64::INFINITY, f64::min),
            demb.values().iter().cloned().fold(f64::NEG_INFINITY, f64::max)
        );
        match distance_correlation(&dx, &demb) {
            Ok(c) => println!("  corr = {c}"),
            Err(e) => println!("  corr error: {e}"),
        }
    }
}

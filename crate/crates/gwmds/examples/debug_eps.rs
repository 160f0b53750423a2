use std::time::Instant;

use gwmds::geometry::{classical_mds, generate_manifold, make_views, ManifoldKind};
use gwmds::multiview::{view_distance_matrices, ViewMetric};
use gwmds::ot::{solve_entropic_ot, uniform_weights, CostMatrix};
use gwmds::relational::mean_relational;
use ndarray::Array2;

fn main() {
    let n = 500;
    let m = generate_manifold(ManifoldKind::SCurve, n, 0.0, 7).unwrap();
    let data = make_views(&m);
    let mats =
        view_distance_matrices(&data, ViewMetric::Geodesic { k: 10, bridge: true }).unwrap();
    let dbar = mean_relational(&mats).unwrap();
    let y = classical_mds(&dbar, 2).unwrap();
    let dy = {
        let c = y.coords();
        Array2::from_shape_fn((n, n), |(i, j)| {
            let dx = c[[i, 0]] - c[[j, 0]];
            let dyv = c[[i, 1]] - c[[j, 1]];
            (dx * dx + dyv * dyv).sqrt()
        })
    };
    let dx = mats[0].values().to_owned();
    let a = uniform_weights(n);

    // Linearized cost at the identity coupling.
    let f1: Vec<f64> = (0..n)
        .map(|i| dx.row(i).iter().map(|v| v * v / n as f64).sum())
        .collect();
    let f2: Vec<f64> = (0..n)
        .map(|j| dy.row(j).iter().map(|v| v * v / n as f64).sum())
        .collect();
    let ident = Array2::from_shape_fn((n, n), |(i, j)| if i == j { 1.0 / n as f64 } else { 0.0 });
    let dxpidy = dx.dot(&ident).dot(&dy);
    let t_cost = Array2::from_shape_fn((n, n), |(i, j)| f1[i] + f2[j] - 2.0 * dxpidy[[i, j]]);

    let min = t_cost.iter().cloned().fold(f64::INFINITY, f64::min);
    let max = t_cost.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut shifted: Vec<f64> = t_cost.iter().map(|v| v - min).collect();
    shifted.sort_by(f64::total_cmp);
    let median = shifted[shifted.len() / 2];
    println!("T: min={min:.3} max={max:.3} range={:.3} median(shifted)={median:.3}", max - min);

    let cost = CostMatrix::new(t_cost).unwrap();
    for factor in [5e-3, 2e-2, 5e-2, 2e-1] {
        let eps = factor * median;
        let t = Instant::now();
        let sol = solve_entropic_ot(&cost, &a, &a, eps, 10_000, 1e-8).unwrap();
        let dt = t.elapsed().as_secs_f64();
        let diag: f64 = (0..n).map(|i| sol.coupling.plan()[[i, i]]).sum();
        println!(
            "eps={eps:.4} ({factor}x): iters={} converged={} log_domain={} diag_mass={diag:.3} obj={:.4} [{dt:.2}s]",
            sol.iterations, sol.converged, sol.used_log_domain, sol.objective
        );
    }
}

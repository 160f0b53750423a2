//! Discrete optimal transport: the exact Kantorovich problem on the
//! transport polytope, an entropic-regularized solver, and the Wasserstein
//! distance between point sets.
//!
//! The exact solver runs successive shortest augmenting paths with node
//! potentials on the dense bipartite residual graph. Costs may be negative;
//! they are shifted internally. The entropic solver is alternating marginal
//! scaling with an automatic log-domain fallback on underflow.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::relational::SampleMatrix;

/// Marginal slack accepted by [`Coupling::new`].
pub const MARGINAL_TOL: f64 = 1e-7;
/// Mass below this is treated as exhausted during augmentation.
const MASS_TOL: f64 = 1e-14;

/// Cost of moving unit mass between supports; entries must be finite.
#[derive(Debug, Clone)]
pub struct CostMatrix(Array2<f64>);

impl CostMatrix {
    pub fn new(values: Array2<f64>) -> Result<Self> {
        if let Some(((i, j), v)) = values.indexed_iter().find(|(_, v)| !v.is_finite()) {
            return Err(Error::InvalidMatrix(format!(
                "cost entry ({i},{j}) = {v} is not finite"
            )));
        }
        Ok(Self(values))
    }

    pub fn nrows(&self) -> usize {
        self.0.nrows()
    }

    pub fn ncols(&self) -> usize {
        self.0.ncols()
    }

    pub fn values(&self) -> ArrayView2<'_, f64> {
        self.0.view()
    }

    /// Median entry; used to pick a scale-invariant default regularization.
    pub fn median(&self) -> f64 {
        let mut v: Vec<f64> = self.0.iter().copied().collect();
        v.sort_by(|a, b| a.partial_cmp(b).expect("finite costs"));
        let k = v.len();
        if k == 0 {
            0.0
        } else if k % 2 == 1 {
            v[k / 2]
        } else {
            0.5 * (v[k / 2 - 1] + v[k / 2])
        }
    }
}

/// Transport plan with prescribed marginals.
#[derive(Debug, Clone)]
pub struct Coupling {
    plan: Array2<f64>,
    row_marginal: Array1<f64>,
    col_marginal: Array1<f64>,
}

impl Coupling {
    /// Validate a plan against its marginals: row/column sums within
    /// [`MARGINAL_TOL`], nonnegative entries, total mass 1 within 1e-9.
    pub fn new(plan: Array2<f64>, a: Array1<f64>, b: Array1<f64>) -> Result<Self> {
        let (n, m) = plan.dim();
        if a.len() != n || b.len() != m {
            return Err(Error::ShapeMismatch {
                context: "coupling marginals".into(),
                expected: format!("{n} + {m}"),
                got: format!("{} + {}", a.len(), b.len()),
            });
        }
        let mut plan = plan;
        for v in plan.iter_mut() {
            if *v < 0.0 {
                if *v < -1e-12 {
                    return Err(Error::InvalidMatrix(format!(
                        "coupling entry {v} is negative"
                    )));
                }
                *v = 0.0;
            }
        }
        for (i, row) in plan.outer_iter().enumerate() {
            let s: f64 = row.sum();
            if (s - a[i]).abs() > MARGINAL_TOL {
                return Err(Error::InvalidMatrix(format!(
                    "row {i} sums to {s}, expected {}",
                    a[i]
                )));
            }
        }
        for j in 0..m {
            let s: f64 = plan.column(j).sum();
            if (s - b[j]).abs() > MARGINAL_TOL {
                return Err(Error::InvalidMatrix(format!(
                    "column {j} sums to {s}, expected {}",
                    b[j]
                )));
            }
        }
        let mass: f64 = plan.sum();
        if (mass - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidMatrix(format!(
                "total mass {mass} is not 1"
            )));
        }
        Ok(Self {
            plan,
            row_marginal: a,
            col_marginal: b,
        })
    }

    /// Wrap a plan that may not satisfy the invariants (non-converged iterates).
    pub(crate) fn new_unchecked(plan: Array2<f64>, a: Array1<f64>, b: Array1<f64>) -> Self {
        Self {
            plan,
            row_marginal: a,
            col_marginal: b,
        }
    }

    /// Identity matching: mass 1/n on the diagonal. Requires square support.
    pub fn identity(n: usize) -> Self {
        let mut plan = Array2::zeros((n, n));
        for i in 0..n {
            plan[[i, i]] = 1.0 / n as f64;
        }
        Self {
            plan,
            row_marginal: uniform_weights(n),
            col_marginal: uniform_weights(n),
        }
    }

    /// Independent coupling a * b^T (the maximum-entropy feasible plan).
    pub fn product(a: &Array1<f64>, b: &Array1<f64>) -> Self {
        let n = a.len();
        let m = b.len();
        let mut plan = Array2::zeros((n, m));
        for i in 0..n {
            for j in 0..m {
                plan[[i, j]] = a[i] * b[j];
            }
        }
        Self {
            plan,
            row_marginal: a.clone(),
            col_marginal: b.clone(),
        }
    }

    pub fn n(&self) -> usize {
        self.plan.nrows()
    }

    pub fn m(&self) -> usize {
        self.plan.ncols()
    }

    pub fn plan(&self) -> ArrayView2<'_, f64> {
        self.plan.view()
    }

    pub fn row_marginal(&self) -> ArrayView1<'_, f64> {
        self.row_marginal.view()
    }

    pub fn col_marginal(&self) -> ArrayView1<'_, f64> {
        self.col_marginal.view()
    }

    /// Map embedding rows through the coupling onto the samples: row i of
    /// the output is the normalized convex combination
    /// sum_j (pi_ij / sum_k pi_ik) y_j.
    ///
    /// Rows of the coupling index samples and columns index embedding rows,
    /// so the output is sample-indexed: an identity coupling returns `y`
    /// unchanged, and a permutation coupling re-labels the rows so that each
    /// sample receives the embedding row it is matched with. Errors when a
    /// sample receives no mass.
    pub fn barycentric_map(&self, y: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
        let (n, m) = self.plan.dim();
        if y.nrows() != m {
            return Err(Error::ShapeMismatch {
                context: "barycentric map".into(),
                expected: format!("{m} rows"),
                got: format!("{}", y.nrows()),
            });
        }
        let q = y.ncols();
        let mut out = Array2::zeros((n, q));
        for i in 0..n {
            let mass: f64 = self.plan.row(i).sum();
            if mass <= 1e-14 {
                return Err(Error::NoAlignmentMass { sample: i });
            }
            for j in 0..m {
                let w = self.plan[[i, j]] / mass;
                if w == 0.0 {
                    continue;
                }
                for d in 0..q {
                    out[[i, d]] += w * y[[j, d]];
                }
            }
        }
        Ok(out)
    }

    /// JSON export `{n, m, a, b, plan}` with row-major plan.
    pub fn to_json(&self) -> CouplingJson {
        CouplingJson {
            n: self.n(),
            m: self.m(),
            a: self.row_marginal.to_vec(),
            b: self.col_marginal.to_vec(),
            plan: self.plan.iter().copied().collect(),
        }
    }

    pub fn from_json(j: CouplingJson) -> Result<Self> {
        if j.plan.len() != j.n * j.m {
            return Err(Error::ShapeMismatch {
                context: "coupling JSON".into(),
                expected: format!("{} entries", j.n * j.m),
                got: format!("{}", j.plan.len()),
            });
        }
        let plan = Array2::from_shape_vec((j.n, j.m), j.plan).expect("shape checked");
        Self::new(plan, Array1::from_vec(j.a), Array1::from_vec(j.b))
    }
}

/// Serialized form of a [`Coupling`].
#[derive(Debug, Serialize, Deserialize)]
pub struct CouplingJson {
    pub n: usize,
    pub m: usize,
    pub a: Vec<f64>,
    pub b: Vec<f64>,
    pub plan: Vec<f64>,
}

/// Uniform probability vector 1/n.
pub fn uniform_weights(n: usize) -> Array1<f64> {
    Array1::from_elem(n, 1.0 / n as f64)
}

fn validate_marginals(c: &CostMatrix, a: &Array1<f64>, b: &Array1<f64>) -> Result<()> {
    if a.len() != c.nrows() || b.len() != c.ncols() {
        return Err(Error::ShapeMismatch {
            context: "transport marginals".into(),
            expected: format!("{} + {}", c.nrows(), c.ncols()),
            got: format!("{} + {}", a.len(), b.len()),
        });
    }
    if a.iter().any(|&x| x < 0.0) || b.iter().any(|&x| x < 0.0) {
        return Err(Error::InvalidConfig("marginals must be nonnegative".into()));
    }
    let sa: f64 = a.sum();
    let sb: f64 = b.sum();
    let gap = (sa - 1.0).abs().max((sb - 1.0).abs());
    if gap > 1e-6 {
        return Err(Error::InfeasibleMarginals { gap });
    }
    Ok(())
}

/// Solve the exact Kantorovich problem min <pi, C> over Pi(a, b).
///
/// Returns the optimal plan and its objective. The plan is produced by
/// successive shortest augmenting paths, so its support is sparse (at most
/// n + m - 1 entries in the nondegenerate case).
pub fn solve_exact_ot(
    c: &CostMatrix,
    a: &Array1<f64>,
    b: &Array1<f64>,
) -> Result<(Coupling, f64)> {
    validate_marginals(c, a, b)?;
    let plan = transport_ssp(c.values(), a, b)?;
    let objective = plan
        .iter()
        .zip(c.values().iter())
        .map(|(p, cost)| p * cost)
        .sum();
    Ok((Coupling::new(plan, a.clone(), b.clone())?, objective))
}

/// Exact solve on a raw cost view, skipping [`CostMatrix`] validation.
/// The conditional-gradient inner loop builds its linearized costs itself.
pub(crate) fn solve_exact_raw(
    cost: ArrayView2<'_, f64>,
    a: &Array1<f64>,
    b: &Array1<f64>,
) -> Result<Array2<f64>> {
    transport_ssp(cost, a, b)
}

/// Successive shortest paths with node potentials on the dense bipartite
/// residual graph. Nodes 0..n are sources, n..n+m are sinks.
fn transport_ssp(cost: ArrayView2<'_, f64>, a: &Array1<f64>, b: &Array1<f64>) -> Result<Array2<f64>> {
    let n = a.len();
    let m = b.len();
    let total = n + m;
    // Shift costs so every arc is nonnegative; the shift cancels in the
    // objective because total mass is fixed.
    let min_c = cost.iter().copied().fold(f64::INFINITY, f64::min);
    let shift = if min_c < 0.0 { -min_c } else { 0.0 };

    let mut flow = Array2::<f64>::zeros((n, m));
    let mut supply = a.to_vec();
    let mut demand = b.to_vec();
    let mut potential = vec![0.0f64; total];

    let mut dist = vec![f64::INFINITY; total];
    let mut prev = vec![usize::MAX; total];
    let mut done = vec![false; total];

    let max_rounds = 40 * total + 1000;
    for _round in 0..max_rounds {
        let any_supply = supply.iter().any(|&s| s > MASS_TOL);
        let any_demand = demand.iter().any(|&d| d > MASS_TOL);
        if !any_supply || !any_demand {
            return Ok(flow);
        }

        // Multi-source Dijkstra on reduced costs.
        dist.fill(f64::INFINITY);
        prev.fill(usize::MAX);
        done.fill(false);
        for (i, &s) in supply.iter().enumerate() {
            if s > MASS_TOL {
                dist[i] = 0.0;
            }
        }
        let mut target: Option<usize> = None;
        loop {
            let mut u = usize::MAX;
            let mut du = f64::INFINITY;
            for (x, &dx) in dist.iter().enumerate() {
                if !done[x] && dx < du {
                    du = dx;
                    u = x;
                }
            }
            if u == usize::MAX {
                break;
            }
            done[u] = true;
            if u >= n && demand[u - n] > MASS_TOL {
                target = Some(u);
                break;
            }
            if u < n {
                let i = u;
                for j in 0..m {
                    let v = n + j;
                    if done[v] {
                        continue;
                    }
                    let rc = (cost[[i, j]] + shift + potential[u] - potential[v]).max(0.0);
                    let nd = du + rc;
                    if nd < dist[v] {
                        dist[v] = nd;
                        prev[v] = u;
                    }
                }
            } else {
                let j = u - n;
                for i in 0..n {
                    if done[i] || flow[[i, j]] <= MASS_TOL {
                        continue;
                    }
                    let rc = (-(cost[[i, j]] + shift) + potential[u] - potential[i]).max(0.0);
                    let nd = du + rc;
                    if nd < dist[i] {
                        dist[i] = nd;
                        prev[i] = u;
                    }
                }
            }
        }

        let Some(t) = target else {
            // Remaining mass cannot reach any deficit sink; with a complete
            // bipartite forward arc set this cannot happen for valid inputs.
            return Err(Error::NotConverged {
                context: "exact transport augmentation".into(),
                iterations: _round,
            });
        };
        let dt = dist[t];
        for (x, p) in potential.iter_mut().enumerate() {
            *p += dist[x].min(dt);
        }

        // Walk the path backwards, collecting arcs and the bottleneck.
        let mut bottleneck = demand[t - n];
        let mut cur = t;
        while prev[cur] != usize::MAX {
            let p = prev[cur];
            if p < n {
                // forward arc p -> cur with unlimited residual capacity
            } else {
                // backward arc over (cur, p - n): limited by current flow
                bottleneck = bottleneck.min(flow[[cur, p - n]]);
            }
            cur = p;
        }
        let start = cur;
        bottleneck = bottleneck.min(supply[start]);

        let mut cur = t;
        while prev[cur] != usize::MAX {
            let p = prev[cur];
            if p < n {
                flow[[p, cur - n]] += bottleneck;
            } else {
                let f = &mut flow[[cur, p - n]];
                *f -= bottleneck;
                if *f < 0.0 {
                    *f = 0.0;
                }
            }
            cur = p;
        }
        supply[start] -= bottleneck;
        demand[t - n] -= bottleneck;
    }
    Err(Error::NotConverged {
        context: "exact transport".into(),
        iterations: max_rounds,
    })
}

/// Outcome of an entropic-regularized solve.
#[derive(Debug, Clone)]
pub struct EntropicSolution {
    pub coupling: Coupling,
    /// Transport cost <pi, C> (the entropy term excluded).
    pub objective: f64,
    pub iterations: usize,
    pub converged: bool,
    pub used_log_domain: bool,
}

/// Default regularization: 5e-3 times the median cost entry.
pub fn default_epsilon(c: &CostMatrix) -> f64 {
    let med = c.median().abs();
    if med > 0.0 {
        5e-3 * med
    } else {
        5e-3
    }
}

/// Entropic-regularized transport by alternating marginal scaling.
///
/// Falls back to log-domain updates automatically when the scaling kernel
/// underflows. Non-convergence returns the best iterate flagged
/// `converged: false` rather than an error.
pub fn solve_entropic_ot(
    c: &CostMatrix,
    a: &Array1<f64>,
    b: &Array1<f64>,
    epsilon: f64,
    max_iter: usize,
    tol: f64,
) -> Result<EntropicSolution> {
    validate_marginals(c, a, b)?;
    if epsilon <= 0.0 || !epsilon.is_finite() {
        return Err(Error::InvalidConfig(format!(
            "epsilon must be positive, got {epsilon}"
        )));
    }
    let zero_f = Array1::zeros(a.len());
    let zero_g = Array1::zeros(b.len());
    let state = sinkhorn(c.values(), a, b, epsilon, max_iter, tol, &zero_f, &zero_g);
    let plan = state.plan;
    let objective = plan
        .iter()
        .zip(c.values().iter())
        .map(|(p, cost)| p * cost)
        .sum();
    let coupling = if state.converged {
        Coupling::new(plan, a.clone(), b.clone())?
    } else {
        Coupling::new_unchecked(plan, a.clone(), b.clone())
    };
    Ok(EntropicSolution {
        coupling,
        objective,
        iterations: state.iterations,
        converged: state.converged,
        used_log_domain: state.used_log_domain,
    })
}

pub(crate) struct SinkhornState {
    pub plan: Array2<f64>,
    /// Dual potentials, reusable as a warm start for a nearby cost matrix.
    pub f: Array1<f64>,
    pub g: Array1<f64>,
    pub iterations: usize,
    pub converged: bool,
    pub used_log_domain: bool,
}

/// Sinkhorn scaling with warm-start potentials.
///
/// Tries the fast scaling form on the potential-reduced kernel and rescues
/// itself in the log domain if the kernel degenerates.
pub(crate) fn sinkhorn(
    cost: ArrayView2<'_, f64>,
    a: &Array1<f64>,
    b: &Array1<f64>,
    epsilon: f64,
    max_iter: usize,
    tol: f64,
    f0: &Array1<f64>,
    g0: &Array1<f64>,
) -> SinkhornState {
    let n = a.len();
    let m = b.len();

    // Cold starts get row/column reduction potentials: the reduced cost is
    // then nonnegative with a zero in every row and column, which keeps the
    // scaling kernel away from underflow and near the optimal duals.
    let cold = f0.iter().all(|&x| x == 0.0) && g0.iter().all(|&x| x == 0.0);
    if cold {
        // Sharp regularization regimes converge too slowly for plain
        // scaling; the log-domain path anneals epsilon downward instead.
        let min_c = cost.iter().copied().fold(f64::INFINITY, f64::min);
        let max_c = cost.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if (max_c - min_c) / epsilon > 500.0 {
            return sinkhorn_log(cost, a, b, epsilon, max_iter, tol, f0, g0);
        }
    }
    let (f0, g0) = if cold {
        let f = Array1::from_shape_fn(n, |i| {
            cost.row(i).iter().copied().fold(f64::INFINITY, f64::min)
        });
        let g = Array1::from_shape_fn(m, |j| {
            (0..n)
                .map(|i| cost[[i, j]] - f[i])
                .fold(f64::INFINITY, f64::min)
        });
        (f, g)
    } else {
        (f0.clone(), g0.clone())
    };
    let (f0, g0) = (&f0, &g0);

    // Reduced kernel K_ij = exp((f_i + g_j - C_ij) / eps), normalized per
    // row so every row keeps at least one entry equal to 1. The row offsets
    // are a diagonal rescaling absorbed by the scaling vector u, so the
    // fixed-point plan is unchanged while the iteration stays away from
    // all-zero rows.
    let build_kernel = |f: &Array1<f64>, g: &Array1<f64>| {
        let mut kernel = Array2::zeros((n, m));
        let mut row_offset = vec![0.0f64; n];
        for i in 0..n {
            let mut row_max = f64::NEG_INFINITY;
            for j in 0..m {
                let e = (f[i] + g[j] - cost[[i, j]]) / epsilon;
                kernel[[i, j]] = e;
                row_max = row_max.max(e);
            }
            let off = if row_max.is_finite() { row_max } else { 0.0 };
            row_offset[i] = off;
            for j in 0..m {
                kernel[[i, j]] = (kernel[[i, j]] - off).exp();
            }
        }
        (kernel, row_offset)
    };

    let mut f = f0.clone();
    let mut g = g0.clone();
    let (mut kernel, mut row_offset) = build_kernel(&f, &g);
    let mut u = Array1::<f64>::ones(n);
    let mut v = Array1::<f64>::ones(m);
    let mut healthy = true;
    let mut iterations = 0;
    let mut converged = false;

    // When the scaling vectors leave this range they are absorbed into the
    // potentials and the kernel is rebuilt, keeping the fast path stable for
    // small epsilon (Chizat-Schmitzer stabilization).
    const ABSORB_LIMIT: f64 = 1e100;

    'scaling: for it in 0..max_iter {
        iterations = it + 1;
        let kv = kernel.dot(&v);
        for i in 0..n {
            if kv[i] <= 0.0 || !kv[i].is_finite() {
                healthy = false;
                break 'scaling;
            }
            u[i] = a[i] / kv[i];
        }
        let ktu = kernel.t().dot(&u);
        for j in 0..m {
            if ktu[j] <= 0.0 || !ktu[j].is_finite() {
                healthy = false;
                break 'scaling;
            }
            v[j] = b[j] / ktu[j];
        }
        if !u.iter().all(|x| x.is_finite()) || !v.iter().all(|x| x.is_finite()) {
            healthy = false;
            break 'scaling;
        }

        let u_extreme = u.iter().any(|&x| !(1.0 / ABSORB_LIMIT..=ABSORB_LIMIT).contains(&x));
        let v_extreme = v.iter().any(|&x| !(1.0 / ABSORB_LIMIT..=ABSORB_LIMIT).contains(&x));
        if u_extreme || v_extreme {
            for i in 0..n {
                f[i] += epsilon * (u[i].ln() + row_offset[i]);
                u[i] = 1.0;
            }
            for j in 0..m {
                g[j] += epsilon * v[j].ln();
                v[j] = 1.0;
            }
            (kernel, row_offset) = build_kernel(&f, &g);
            continue;
        }

        if (it + 1) % 5 == 0 || it + 1 == max_iter {
            // Columns are exact right after the v-update; check rows.
            let kv2 = kernel.dot(&v);
            let mut err = 0.0f64;
            for i in 0..n {
                err = err.max((u[i] * kv2[i] - a[i]).abs());
            }
            if err < tol {
                converged = true;
                break;
            }
        }
    }

    if healthy {
        let mut plan = Array2::zeros((n, m));
        for i in 0..n {
            for j in 0..m {
                plan[[i, j]] = u[i] * kernel[[i, j]] * v[j];
            }
        }
        let f_out = Array1::from_shape_fn(n, |i| f[i] + epsilon * (u[i].ln() + row_offset[i]));
        let g_out = Array1::from_shape_fn(m, |j| g[j] + epsilon * v[j].ln());
        return SinkhornState {
            plan,
            f: f_out,
            g: g_out,
            iterations,
            converged,
            used_log_domain: false,
        };
    }

    sinkhorn_log(cost, a, b, epsilon, max_iter, tol, f0, g0)
}

/// Log-domain Sinkhorn: unconditionally stable logsumexp updates.
///
/// Cold starts at a small target epsilon converge slowly, so they are
/// annealed: the regularization is halved from a large starting value down
/// to the target, warm-starting the potentials level by level.
fn sinkhorn_log(
    cost: ArrayView2<'_, f64>,
    a: &Array1<f64>,
    b: &Array1<f64>,
    epsilon: f64,
    max_iter: usize,
    tol: f64,
    f0: &Array1<f64>,
    g0: &Array1<f64>,
) -> SinkhornState {
    let n = a.len();
    let m = b.len();
    let log_a: Vec<f64> = a.iter().map(|&x| x.ln()).collect();
    let log_b: Vec<f64> = b.iter().map(|&x| x.ln()).collect();
    let mut f = f0.clone();
    let mut g = g0.clone();
    let mut iterations = 0usize;
    let mut converged = false;
    let mut scratch = vec![0.0f64; n.max(m)];

    let mut half_sweep = |eps: f64, f: &mut Array1<f64>, g: &mut Array1<f64>| {
        for i in 0..n {
            for (j, s) in scratch.iter_mut().take(m).enumerate() {
                *s = (g[j] - cost[[i, j]]) / eps;
            }
            f[i] = eps * (log_a[i] - logsumexp(&scratch[..m]));
        }
        for j in 0..m {
            for (i, s) in scratch.iter_mut().take(n).enumerate() {
                *s = (f[i] - cost[[i, j]]) / eps;
            }
            g[j] = eps * (log_b[j] - logsumexp(&scratch[..n]));
        }
    };

    let cold_start = f0.iter().all(|&x| x == 0.0) && g0.iter().all(|&x| x == 0.0);
    if cold_start {
        let min_c = cost.iter().copied().fold(f64::INFINITY, f64::min);
        let max_c = cost.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let range = (max_c - min_c).max(1e-12);
        let mut eps = range / 10.0;
        while eps > epsilon && iterations + 20 < max_iter {
            for _ in 0..20 {
                half_sweep(eps, &mut f, &mut g);
            }
            iterations += 20;
            eps *= 0.5;
        }
    }

    while iterations < max_iter {
        half_sweep(epsilon, &mut f, &mut g);
        iterations += 1;
        if iterations % 5 == 0 || iterations == max_iter {
            // Columns are exact after the g-update; check row violation.
            let mut err = 0.0f64;
            for i in 0..n {
                let mut row = 0.0;
                for j in 0..m {
                    row += ((f[i] + g[j] - cost[[i, j]]) / epsilon).exp();
                }
                err = err.max((row - a[i]).abs());
            }
            if err < tol {
                converged = true;
                break;
            }
        }
    }

    let mut plan = Array2::zeros((n, m));
    for i in 0..n {
        for j in 0..m {
            plan[[i, j]] = ((f[i] + g[j] - cost[[i, j]]) / epsilon).exp();
        }
    }
    SinkhornState {
        plan,
        f,
        g,
        iterations,
        converged,
        used_log_domain: true,
    }
}

fn logsumexp(xs: &[f64]) -> f64 {
    let mx = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !mx.is_finite() {
        return mx;
    }
    let s: f64 = xs.iter().map(|&x| (x - mx).exp()).sum();
    mx + s.ln()
}

/// Round a nonnegative plan onto the transport polytope Pi(a, b): scale
/// rows and columns down where they overshoot, then repair the remaining
/// deficit with a rank-one correction. The result satisfies both marginals
/// exactly (up to roundoff) and stays close to the input.
pub(crate) fn round_to_marginals(
    mut plan: Array2<f64>,
    a: &Array1<f64>,
    b: &Array1<f64>,
) -> Array2<f64> {
    let (n, m) = plan.dim();
    for i in 0..n {
        let s: f64 = plan.row(i).sum();
        if s > a[i] && s > 0.0 {
            let scale = a[i] / s;
            for j in 0..m {
                plan[[i, j]] *= scale;
            }
        }
    }
    for j in 0..m {
        let s: f64 = plan.column(j).sum();
        if s > b[j] && s > 0.0 {
            let scale = b[j] / s;
            for i in 0..n {
                plan[[i, j]] *= scale;
            }
        }
    }
    let row_deficit: Vec<f64> = (0..n).map(|i| (a[i] - plan.row(i).sum()).max(0.0)).collect();
    let col_deficit: Vec<f64> = (0..m)
        .map(|j| (b[j] - plan.column(j).sum()).max(0.0))
        .collect();
    let total: f64 = row_deficit.iter().sum();
    if total > 1e-300 {
        for i in 0..n {
            if row_deficit[i] == 0.0 {
                continue;
            }
            for j in 0..m {
                plan[[i, j]] += row_deficit[i] * col_deficit[j] / total;
            }
        }
    }
    plan
}

/// Discrete Wasserstein distance of order p between two point sets with
/// uniform weights: (min <pi, C>)^(1/p) with C_ij = ||x_i - y_j||^p.
pub fn wasserstein_p(x: &SampleMatrix, y: &SampleMatrix, p: f64) -> Result<f64> {
    if x.dim() != y.dim() {
        return Err(Error::ShapeMismatch {
            context: "wasserstein ambient dimension".into(),
            expected: format!("{}", x.dim()),
            got: format!("{}", y.dim()),
        });
    }
    if p < 1.0 {
        return Err(Error::InvalidConfig(format!("order p must be >= 1, got {p}")));
    }
    let n = x.n();
    let m = y.n();
    let mut cost = Array2::zeros((n, m));
    for i in 0..n {
        for j in 0..m {
            let mut acc = 0.0;
            for k in 0..x.dim() {
                let d = x.values()[[i, k]] - y.values()[[j, k]];
                acc += d * d;
            }
            cost[[i, j]] = acc.sqrt().powf(p);
        }
    }
    let (_, objective) = solve_exact_ot(
        &CostMatrix::new(cost)?,
        &uniform_weights(n),
        &uniform_weights(m),
    )?;
    Ok(objective.max(0.0).powf(1.0 / p))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use ndarray::array;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    fn random_cost(n: usize, m: usize, rng: &mut ChaCha8Rng) -> CostMatrix {
        CostMatrix::new(Array2::from_shape_fn((n, m), |_| rng.random_range(0.0..10.0))).unwrap()
    }

    /// Minimum matching objective by enumerating all n! permutations.
    fn permutation_minimum(c: &CostMatrix) -> f64 {
        let n = c.nrows();
        let mut perm: Vec<usize> = (0..n).collect();
        let mut best = f64::INFINITY;
        permute(&mut perm, 0, &mut |p| {
            let cost: f64 = p
                .iter()
                .enumerate()
                .map(|(i, &j)| c.values()[[i, j]] / n as f64)
                .sum();
            best = best.min(cost);
        });
        best
    }

    fn permute(xs: &mut Vec<usize>, k: usize, visit: &mut impl FnMut(&[usize])) {
        if k == xs.len() {
            visit(xs);
            return;
        }
        for i in k..xs.len() {
            xs.swap(k, i);
            permute(xs, k + 1, visit);
            xs.swap(k, i);
        }
    }

    #[test]
    fn zero_cost_gives_zero_objective_and_feasible_plan() {
        let c = CostMatrix::new(Array2::zeros((3, 3))).unwrap();
        let a = uniform_weights(3);
        let b = uniform_weights(3);
        let (pi, obj) = solve_exact_ot(&c, &a, &b).unwrap();
        assert_abs_diff_eq!(obj, 0.0, epsilon = 1e-12);
        // feasibility is asserted by Coupling::new; spot-check mass anyway
        assert_abs_diff_eq!(pi.plan().sum(), 1.0, epsilon = 1e-9);
    }

    #[test]
    fn two_by_two_identity_matching() {
        let c = CostMatrix::new(array![[0.0, 1.0], [1.0, 0.0]]).unwrap();
        let a = uniform_weights(2);
        let b = uniform_weights(2);
        let (pi, obj) = solve_exact_ot(&c, &a, &b).unwrap();
        assert_abs_diff_eq!(obj, 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(pi.plan()[[0, 0]], 0.5, epsilon = 1e-12);
        assert_abs_diff_eq!(pi.plan()[[1, 1]], 0.5, epsilon = 1e-12);
    }

    #[test]
    fn exact_matches_permutation_enumeration() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        for _ in 0..20 {
            let c = random_cost(4, 4, &mut rng);
            let (_, obj) = solve_exact_ot(&c, &uniform_weights(4), &uniform_weights(4)).unwrap();
            assert_abs_diff_eq!(obj, permutation_minimum(&c), epsilon = 1e-9);
        }
    }

    #[test]
    fn exact_handles_negative_costs() {
        let mut rng = ChaCha8Rng::seed_from_u64(43);
        for _ in 0..10 {
            let c = CostMatrix::new(Array2::from_shape_fn((4, 4), |_| {
                rng.random_range(-5.0..5.0)
            }))
            .unwrap();
            let (_, obj) = solve_exact_ot(&c, &uniform_weights(4), &uniform_weights(4)).unwrap();
            assert_abs_diff_eq!(obj, permutation_minimum(&c), epsilon = 1e-9);
        }
    }

    #[test]
    fn exact_rejects_mass_mismatch() {
        let c = CostMatrix::new(Array2::zeros((2, 2))).unwrap();
        let a = array![0.4, 0.4];
        let b = uniform_weights(2);
        assert!(matches!(
            solve_exact_ot(&c, &a, &b),
            Err(Error::InfeasibleMarginals { .. })
        ));
    }

    #[test]
    fn exact_objective_lower_bounds_random_feasible_plans() {
        let mut rng = ChaCha8Rng::seed_from_u64(44);
        let c = random_cost(5, 5, &mut rng);
        let a = uniform_weights(5);
        let b = uniform_weights(5);
        let (_, opt) = solve_exact_ot(&c, &a, &b).unwrap();
        for _ in 0..100 {
            // Random feasible plan via iterative proportional fitting.
            let mut plan = Array2::from_shape_fn((5, 5), |_| rng.random_range(0.1..1.0));
            for _ in 0..300 {
                for i in 0..5 {
                    let s: f64 = plan.row(i).sum();
                    for j in 0..5 {
                        plan[[i, j]] *= a[i] / s;
                    }
                }
                for j in 0..5 {
                    let s: f64 = plan.column(j).sum();
                    for i in 0..5 {
                        plan[[i, j]] *= b[j] / s;
                    }
                }
            }
            let value: f64 = plan
                .iter()
                .zip(c.values().iter())
                .map(|(p, cost)| p * cost)
                .sum();
            assert!(opt <= value + 1e-9, "optimal {opt} exceeds feasible {value}");
        }
    }

    #[test]
    fn entropic_close_to_exact_at_small_epsilon() {
        let mut rng = ChaCha8Rng::seed_from_u64(45);
        let c = random_cost(4, 4, &mut rng);
        let a = uniform_weights(4);
        let b = uniform_weights(4);
        let (_, exact) = solve_exact_ot(&c, &a, &b).unwrap();
        let mean_c = c.values().sum() / 16.0;
        let sol = solve_entropic_ot(&c, &a, &b, 1e-3 * mean_c, 20_000, 1e-10).unwrap();
        assert!(
            (sol.objective - exact).abs() <= 0.01 * exact.abs().max(1e-9),
            "entropic {} vs exact {exact}",
            sol.objective
        );
    }

    #[test]
    fn entropic_zero_cost_gives_product_plan() {
        let c = CostMatrix::new(Array2::zeros((3, 4))).unwrap();
        let a = array![0.5, 0.3, 0.2];
        let b = array![0.25, 0.25, 0.25, 0.25];
        let sol = solve_entropic_ot(&c, &a, &b, 0.1, 5000, 1e-12).unwrap();
        for i in 0..3 {
            for j in 0..4 {
                assert_abs_diff_eq!(sol.coupling.plan()[[i, j]], a[i] * b[j], epsilon = 1e-8);
            }
        }
    }

    #[test]
    fn entropic_dominant_diagonal_concentrates_mass() {
        let n = 4;
        let mut cost = Array2::from_elem((n, n), 1.0);
        for i in 0..n {
            cost[[i, i]] = 0.0;
        }
        let c = CostMatrix::new(cost).unwrap();
        let a = uniform_weights(n);
        let sol = solve_entropic_ot(&c, &a, &a, 1e-2, 10_000, 1e-10).unwrap();
        for i in 0..n {
            for j in 0..n {
                if i != j {
                    assert!(
                        sol.coupling.plan()[[i, j]] < 0.05,
                        "off-diagonal mass too large at ({i},{j})"
                    );
                }
            }
        }
    }

    #[test]
    fn entropic_objective_decreases_with_epsilon() {
        let mut rng = ChaCha8Rng::seed_from_u64(46);
        let c = random_cost(5, 5, &mut rng);
        let a = uniform_weights(5);
        let scale = c.values().sum() / 25.0;
        let mut prev = f64::INFINITY;
        for eps_factor in [0.5, 0.05, 0.005] {
            let sol = solve_entropic_ot(&c, &a, &a, eps_factor * scale, 50_000, 1e-11).unwrap();
            assert!(
                sol.objective <= prev + 1e-7,
                "objective should fall as epsilon shrinks: {} vs {prev}",
                sol.objective
            );
            prev = sol.objective;
        }
        let (_, exact) = solve_exact_ot(&c, &a, &a).unwrap();
        assert!(prev >= exact - 1e-7);
    }

    #[test]
    fn entropic_tiny_epsilon_still_converges() {
        let mut rng = ChaCha8Rng::seed_from_u64(47);
        let c = random_cost(6, 6, &mut rng);
        let a = uniform_weights(6);
        let sol = solve_entropic_ot(&c, &a, &a, 1e-4, 50_000, 1e-9).unwrap();
        assert!(sol.converged);
        // At eps -> 0 the entropic objective approaches the exact optimum.
        let (_, exact) = solve_exact_ot(&c, &a, &a).unwrap();
        assert!((sol.objective - exact).abs() <= 1e-3 * exact.abs().max(1e-9));
    }

    #[test]
    fn sharp_regularization_uses_log_domain() {
        // Costs four orders of magnitude above epsilon would underflow the
        // scaling kernel; the solve must route to the log domain and still
        // satisfy the marginals.
        let mut rng = ChaCha8Rng::seed_from_u64(52);
        let c = random_cost(6, 6, &mut rng);
        let a = uniform_weights(6);
        let sol = solve_entropic_ot(&c, &a, &a, 1e-3, 100_000, 1e-9).unwrap();
        assert!(sol.used_log_domain, "expected the log-domain path");
        assert!(sol.converged);
        for i in 0..6 {
            let row: f64 = sol.coupling.plan().row(i).sum();
            assert_abs_diff_eq!(row, a[i], epsilon = 1e-7);
        }
    }

    #[test]
    fn coupling_invariants_hold_on_random_instances() {
        let mut rng = ChaCha8Rng::seed_from_u64(48);
        for _ in 0..30 {
            let n = rng.random_range(2..7);
            let m = rng.random_range(2..7);
            let c = random_cost(n, m, &mut rng);
            let mut a: Vec<f64> = (0..n).map(|_| rng.random_range(0.1..1.0)).collect();
            let mut b: Vec<f64> = (0..m).map(|_| rng.random_range(0.1..1.0)).collect();
            let sa: f64 = a.iter().sum();
            let sb: f64 = b.iter().sum();
            a.iter_mut().for_each(|x| *x /= sa);
            b.iter_mut().for_each(|x| *x /= sb);
            let a = Array1::from_vec(a);
            let b = Array1::from_vec(b);
            // Coupling::new re-validates marginals; both solvers must pass.
            let (pi, _) = solve_exact_ot(&c, &a, &b).unwrap();
            assert_eq!(pi.n(), n);
            let sol = solve_entropic_ot(&c, &a, &b, 0.05, 20_000, 1e-9).unwrap();
            assert!(sol.converged);
        }
    }

    #[test]
    fn wasserstein_identity_is_zero() {
        let x = SampleMatrix::with_default_ids(array![[0.0, 0.0], [1.0, 1.0], [2.0, 0.5]])
            .unwrap();
        assert_abs_diff_eq!(wasserstein_p(&x, &x, 2.0).unwrap(), 0.0, epsilon = 1e-9);
    }

    #[test]
    fn wasserstein_unit_shift() {
        let x = SampleMatrix::with_default_ids(array![[0.0], [1.0]]).unwrap();
        let y = SampleMatrix::with_default_ids(array![[1.0], [2.0]]).unwrap();
        assert_abs_diff_eq!(wasserstein_p(&x, &y, 1.0).unwrap(), 1.0, epsilon = 1e-9);
    }

    #[test]
    fn wasserstein_1d_matches_sorted_coupling_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(49);
        for _ in 0..10 {
            let xs: Vec<f64> = (0..5).map(|_| rng.random_range(-3.0..3.0)).collect();
            let ys: Vec<f64> = (0..5).map(|_| rng.random_range(-3.0..3.0)).collect();
            let x = SampleMatrix::with_default_ids(
                Array2::from_shape_vec((5, 1), xs.clone()).unwrap(),
            )
            .unwrap();
            let y = SampleMatrix::with_default_ids(
                Array2::from_shape_vec((5, 1), ys.clone()).unwrap(),
            )
            .unwrap();
            let got = wasserstein_p(&x, &y, 1.0).unwrap();

            let mut xs = xs;
            let mut ys = ys;
            xs.sort_by(|p, q| p.partial_cmp(q).unwrap());
            ys.sort_by(|p, q| p.partial_cmp(q).unwrap());
            let want: f64 = xs
                .iter()
                .zip(&ys)
                .map(|(p, q)| (p - q).abs() / 5.0)
                .sum();
            assert_abs_diff_eq!(got, want, epsilon = 1e-9);
        }
    }

    #[test]
    fn wasserstein_symmetry() {
        let mut rng = ChaCha8Rng::seed_from_u64(50);
        let x = SampleMatrix::with_default_ids(Array2::from_shape_fn((6, 2), |_| {
            rng.random_range(-1.0..1.0)
        }))
        .unwrap();
        let y = SampleMatrix::with_default_ids(Array2::from_shape_fn((6, 2), |_| {
            rng.random_range(-1.0..1.0)
        }))
        .unwrap();
        let xy = wasserstein_p(&x, &y, 2.0).unwrap();
        let yx = wasserstein_p(&y, &x, 2.0).unwrap();
        assert_abs_diff_eq!(xy, yx, epsilon = 1e-9);
    }

    #[test]
    fn wasserstein_rejects_dimension_mismatch() {
        let x = SampleMatrix::with_default_ids(array![[0.0, 1.0], [1.0, 0.0]]).unwrap();
        let y = SampleMatrix::with_default_ids(array![[0.0], [1.0]]).unwrap();
        assert!(matches!(
            wasserstein_p(&x, &y, 2.0),
            Err(Error::ShapeMismatch { .. })
        ));
    }
}
